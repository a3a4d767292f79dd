#ifndef LABEL_REMEDY_PREP_HPP
#define LABEL_REMEDY_PREP_HPP

#include "datasets_io.hpp"
#include "mat_v5.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

/**
 * @file prep.hpp
 *
 * @brief Conversion of downloaded benchmark files into the raw_f64 + label
 * file + manifest layout that `run` and `suite` consume.
 */

namespace label_remedy::prep {

struct PrepOutput {
    DatasetManifest manifest;
    std::filesystem::path manifest_path;
};

/// Writes <out_dir>/<name>.lrmx, <name>.labels and <name>.manifest (with checksum).
inline PrepOutput write_dataset(const std::filesystem::path& out_dir, const std::string& name,
                                const FeatureMatrix& features, const RawLabels& labels) {
    if (labels.size() != features.samples()) {
        throw Error(ErrorCode::LengthMismatch, "label count differs from sample count");
    }
    std::filesystem::create_directories(out_dir);
    DatasetManifest m;
    m.name = name;
    m.feature_path = out_dir / (name + ".lrmx");
    m.label_path = out_dir / (name + ".labels");
    m.feature_format = MatrixFormat::RawF64;
    m.feature_dim = features.dim();
    m.expected_samples = features.samples();
    save_matrix(m.feature_path, features, MatrixFormat::RawF64);
    save_labels(m.label_path, labels);
    m.checksum = sha256_file(m.feature_path);
    const std::filesystem::path manifest_path = out_dir / (name + ".manifest");
    write_manifest(manifest_path, m);
    return PrepOutput{m, manifest_path};
}

/// Keeps `count` seeded columns (all when count is 0 or covers everything).
inline std::pair<FeatureMatrix, RawLabels> subsample(const FeatureMatrix& features, const RawLabels& labels,
                                                     std::size_t count, std::uint64_t seed) {
    if (count == 0 || count >= features.samples()) {
        return {features, labels};
    }
    const IndexSet keep = seeded_subsample(features.samples(), count, seed);
    RawLabels kept(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        kept[i] = labels[keep[i]];
    }
    return {features.select_columns(keep), std::move(kept)};
}

/**
 * Bilinear resampling of a row-major `in_h x in_w` image to `out_h x out_w`
 * with pixel centres aligned (the half-pixel convention).
 */
inline std::vector<double> resize_bilinear(const std::vector<double>& img, std::size_t in_h, std::size_t in_w,
                                           std::size_t out_h, std::size_t out_w) {
    std::vector<double> out(out_h * out_w);
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = (1 - wx) * img[y0 * in_w + x0] + wx * img[y0 * in_w + x1];
            const double bottom = (1 - wx) * img[y1 * in_w + x0] + wx * img[y1 * in_w + x1];
            out[y * out_w + x] = (1 - wy) * top + wy * bottom;
        }
    }
    return out;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& where) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw Error(ErrorCode::ParseError, where + ": truncated IDX header");
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

} // namespace detail

/**
 * MNIST-style IDX image and label files. Images are scaled to [0, 1] and
 * resized to `side x side`, one flattened (row-major) image per column.
 */
inline std::pair<FeatureMatrix, RawLabels> read_idx(const std::filesystem::path& images_path,
                                                    const std::filesystem::path& labels_path, std::size_t side) {
    std::ifstream images(images_path, std::ios::binary);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!images || !labels) {
        throw Error(ErrorCode::IoError, "cannot open IDX files");
    }
    const std::string wi = images_path.string();
    const std::string wl = labels_path.string();
    if (detail::read_be32(images, wi) != 0x00000803 || detail::read_be32(labels, wl) != 0x00000801) {
        throw Error(ErrorCode::ParseError, "IDX magic numbers do not match ubyte images/labels");
    }
    const std::uint32_t n = detail::read_be32(images, wi);
    const std::uint32_t rows = detail::read_be32(images, wi);
    const std::uint32_t cols = detail::read_be32(images, wi);
    if (detail::read_be32(labels, wl) != n) {
        throw Error(ErrorCode::ShapeMismatch, "IDX image and label counts differ");
    }
    if (n == 0 || rows == 0 || cols == 0 || side == 0) {
        throw Error(ErrorCode::ParseError, "empty IDX data");
    }
    Eigen::MatrixXd data(static_cast<Eigen::Index>(side * side), n);
    RawLabels out_labels(n);
    std::vector<unsigned char> raw(static_cast<std::size_t>(rows) * cols);
    std::vector<double> pixels(raw.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!images.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
            throw Error(ErrorCode::ParseError, wi + ": truncated image payload");
        }
        std::transform(raw.begin(), raw.end(), pixels.begin(), [](unsigned char p) { return p / 255.0; });
        const std::vector<double> resized = resize_bilinear(pixels, rows, cols, side, side);
        for (std::size_t p = 0; p < resized.size(); ++p) {
            data(static_cast<Eigen::Index>(p), i) = resized[p];
        }
        char y = 0;
        if (!labels.read(&y, 1)) {
            throw Error(ErrorCode::ParseError, wl + ": truncated label payload");
        }
        out_labels[i] = static_cast<unsigned char>(y);
    }
    return {FeatureMatrix(std::move(data)), std::move(out_labels)};
}

/**
 * Features and labels from two variables of a level-5 MAT file. The feature
 * array is oriented so that samples become columns: when `samples_as_rows`
 * is unset, the side whose length matches the label count is taken as the
 * sample axis (columns win a tie).
 */
inline std::pair<FeatureMatrix, RawLabels> read_mat(const std::filesystem::path& path, const std::string& features_var,
                                                    const std::string& labels_var,
                                                    std::optional<bool> samples_as_rows = std::nullopt) {
    auto vars = mat::read_file(path);
    const auto f = vars.find(features_var);
    const auto l = vars.find(labels_var);
    if (f == vars.end() || l == vars.end()) {
        std::string names;
        for (const auto& [k, v] : vars) names += (names.empty() ? "" : ", ") + k;
        throw Error(ErrorCode::ParseError, path.string() + ": variables '" + features_var + "'/'" + labels_var +
                                               "' not found (have: " + names + ")");
    }
    const Eigen::MatrixXd& y = l->second;
    if (y.rows() != 1 && y.cols() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "label variable must be a vector");
    }
    const auto n = static_cast<Eigen::Index>(y.size());
    Eigen::MatrixXd x = f->second;
    bool rows_are_samples = false;
    if (samples_as_rows) {
        rows_are_samples = *samples_as_rows;
    } else if (x.cols() != n && x.rows() == n) {
        rows_are_samples = true;
    }
    if (rows_are_samples) {
        x.transposeInPlace();
    }
    if (x.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, "feature array does not have one sample per label");
    }
    RawLabels labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = y.data()[i];
        if (v != std::round(v)) {
            throw Error(ErrorCode::ParseError, "non-integer label value in MAT file");
        }
        labels[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(v);
    }
    return {FeatureMatrix(std::move(x)), std::move(labels)};
}

} // namespace label_remedy::prep

#endif
