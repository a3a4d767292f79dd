#ifndef LABEL_REMEDY_DATASETS_IO_HPP
#define LABEL_REMEDY_DATASETS_IO_HPP

#include "core_types.hpp"
#include "normalize.hpp"
#include "random.hpp"

#include <Eigen/Dense>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file datasets_io.hpp
 *
 * @brief Feature-file formats, dataset manifests, seeded subsampling and
 * the synthetic domain-shift generator.
 *
 * Two matrix formats are supported:
 *
 * - csv: a header line `dim=<m>,n=<n>` (optionally `,labels=1`), then one
 *   line per sample holding m comma-separated values, followed by an integer
 *   label when the header says so.
 * - raw_f64: magic `LRMX`, little-endian u32 dim, u32 n, then the m*n values
 *   as little-endian f64 in column-major order.
 *
 * Label files are plain text with one integer per line. A manifest is a
 * `key = value` text file naming the feature and label files.
 */

namespace label_remedy {

enum class MatrixFormat { Csv, RawF64 };

inline MatrixFormat parse_format(std::string_view name) {
    if (name == "csv") return MatrixFormat::Csv;
    if (name == "raw_f64" || name == "lrmx") return MatrixFormat::RawF64;
    throw Error(ErrorCode::InvalidArgument, "unknown matrix format '" + std::string(name) + "'");
}

inline std::string_view to_string(MatrixFormat f) { return f == MatrixFormat::Csv ? "csv" : "raw_f64"; }

using RawLabels = std::vector<std::int64_t>;

struct LoadedMatrix {
    FeatureMatrix features;
    std::optional<RawLabels> labels;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(std::string_view token, const std::string& where) {
    const std::string t = trim(token);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw Error(ErrorCode::ParseError, where + ": cannot parse number '" + t + "'");
    }
    return value;
}

inline std::int64_t parse_int(std::string_view token, const std::string& where) {
    const std::string t = trim(token);
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw Error(ErrorCode::ParseError, where + ": cannot parse integer '" + t + "'");
    }
    return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::string& where) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), sizeof(T))) {
        throw Error(ErrorCode::ParseError, where + ": unexpected end of file");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
    }
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline LoadedMatrix load_csv(const std::filesystem::path& path) {
    std::ifstream in = open_in(path, false);
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorCode::ParseError, where + ": missing header");
    }
    std::map<std::string, std::int64_t> header;
    for (const std::string& field : split(line, ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ParseError, where + ": malformed header field '" + trim(field) + "'");
        }
        header[trim(std::string_view(field).substr(0, eq))] = parse_int(std::string_view(field).substr(eq + 1), where);
    }
    if (!header.contains("dim") || !header.contains("n")) {
        throw Error(ErrorCode::ParseError, where + ": header must define dim and n");
    }
    const std::int64_t dim = header["dim"];
    const std::int64_t n = header["n"];
    const bool with_labels = header.contains("labels") && header["labels"] != 0;
    if (dim < 1 || n < 1) {
        throw Error(ErrorCode::ParseError, where + ": dim and n must be positive");
    }

    Eigen::MatrixXd data(dim, n);
    RawLabels labels;
    std::int64_t col = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        if (col >= n) {
            throw Error(ErrorCode::ShapeMismatch, where + ": more than n=" + std::to_string(n) + " rows");
        }
        const std::vector<std::string> fields = split(line, ',');
        const auto expected = static_cast<std::size_t>(dim) + (with_labels ? 1 : 0);
        const std::string at = where + ":" + std::to_string(line_no);
        if (fields.size() != expected) {
            throw Error(ErrorCode::ShapeMismatch,
                        at + ": expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
        }
        for (std::int64_t r = 0; r < dim; ++r) {
            data(r, col) = parse_double(fields[static_cast<std::size_t>(r)], at);
        }
        if (with_labels) {
            labels.push_back(parse_int(fields.back(), at));
        }
        ++col;
    }
    if (col != n) {
        throw Error(ErrorCode::ShapeMismatch, where + ": header says n=" + std::to_string(n) + " but found " +
                                                  std::to_string(col) + " rows");
    }
    LoadedMatrix out{FeatureMatrix(std::move(data)), std::nullopt};
    if (with_labels) {
        out.labels = std::move(labels);
    }
    return out;
}

inline constexpr std::array<char, 4> kRawMagic{'L', 'R', 'M', 'X'};

inline LoadedMatrix load_raw(const std::filesystem::path& path) {
    std::ifstream in = open_in(path, true);
    const std::string where = path.string();
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != kRawMagic) {
        throw Error(ErrorCode::ParseError, where + ": bad magic, expected LRMX");
    }
    const auto dim = read_le<std::uint32_t>(in, where);
    const auto n = read_le<std::uint32_t>(in, where);
    if (dim == 0 || n == 0) {
        throw Error(ErrorCode::ParseError, where + ": empty matrix");
    }
    Eigen::MatrixXd data(dim, n);
    double* p = data.data();
    const std::size_t count = static_cast<std::size_t>(dim) * n;
    if constexpr (std::endian::native == std::endian::little) {
        if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(double)))) {
            throw Error(ErrorCode::ParseError, where + ": truncated payload");
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            p[i] = read_le<double>(in, where);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error(ErrorCode::ShapeMismatch, where + ": trailing bytes after payload");
    }
    return LoadedMatrix{FeatureMatrix(std::move(data)), std::nullopt};
}

} // namespace detail

inline LoadedMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
    return format == MatrixFormat::Csv ? detail::load_csv(path) : detail::load_raw(path);
}

inline void save_matrix(const std::filesystem::path& path, const FeatureMatrix& m, MatrixFormat format,
                        const RawLabels* labels = nullptr) {
    const Eigen::MatrixXd& d = m.data();
    if (labels != nullptr && labels->size() != m.samples()) {
        throw Error(ErrorCode::LengthMismatch, "label count differs from sample count");
    }
    if (format == MatrixFormat::RawF64) {
        if (labels != nullptr) {
            throw Error(ErrorCode::InvalidArgument, "raw_f64 carries no labels; write a label file instead");
        }
        std::ofstream out = detail::open_out(path, true);
        out.write(detail::kRawMagic.data(), 4);
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.rows()));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d.cols()));
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            detail::write_le<double>(out, d.data()[i]);
        }
        if (!out) {
            throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
        }
        return;
    }
    std::ofstream out = detail::open_out(path, false);
    out << "dim=" << d.rows() << ",n=" << d.cols() << (labels ? ",labels=1" : "") << '\n';
    out << std::setprecision(17);
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
        for (Eigen::Index r = 0; r < d.rows(); ++r) {
            out << (r ? "," : "") << d(r, c);
        }
        if (labels) {
            out << ',' << (*labels)[static_cast<std::size_t>(c)];
        }
        out << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
    }
}

inline RawLabels load_labels(const std::filesystem::path& path) {
    std::ifstream in = detail::open_in(path, false);
    RawLabels out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        out.push_back(detail::parse_int(line, path.string() + ":" + std::to_string(line_no)));
    }
    return out;
}

template <typename Int>
void save_labels(const std::filesystem::path& path, const std::vector<Int>& labels) {
    std::ofstream out = detail::open_out(path, false);
    for (Int y : labels) {
        out << y << '\n';
    }
    if (!out) {
        throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
    }
}

/**
 * @brief Maps an arbitrary integer label alphabet onto [0, C).
 *
 * Built from the source labels (sorted ascending); target labels are mapped
 * through the same table so both domains agree.
 */
class LabelMap {
public:
    explicit LabelMap(const RawLabels& source_labels) : raw_(source_labels) {
        std::sort(raw_.begin(), raw_.end());
        raw_.erase(std::unique(raw_.begin(), raw_.end()), raw_.end());
        if (raw_.empty()) {
            throw Error(ErrorCode::EmptyClass, "no labels to build a class map from");
        }
    }

    std::size_t num_classes() const noexcept { return raw_.size(); }
    const RawLabels& raw_values() const noexcept { return raw_; }

    Label to_dense(std::int64_t raw) const {
        const auto it = std::lower_bound(raw_.begin(), raw_.end(), raw);
        if (it == raw_.end() || *it != raw) {
            throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(raw) + " does not occur in the source");
        }
        return static_cast<Label>(it - raw_.begin());
    }

    LabelVector to_dense(const RawLabels& raw) const {
        LabelVector out(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            out[i] = to_dense(raw[i]);
        }
        return out;
    }

    std::int64_t to_raw(Label dense) const { return raw_.at(static_cast<std::size_t>(dense)); }

private:
    RawLabels raw_;
};

/// Lower-case hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in = detail::open_in(path, true);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::IoError, "cannot initialise SHA-256");
    }
    std::vector<char> buffer(1 << 16);
    while (in) {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        if (in.gcount() > 0) {
            EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
        }
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

/// Reference shapes of the public benchmark feature sets.
struct KnownDataset {
    std::string_view name;
    std::size_t samples;
    std::size_t classes;
    std::array<std::size_t, 2> dims; ///< accepted feature dimensions (second is 0 when only one)
};

inline constexpr std::array<KnownDataset, 9> kKnownDatasets{{
    {"mnist", 2000, 10, {256, 0}},
    {"usps", 1800, 10, {256, 0}},
    {"coil20", 1440, 20, {1024, 0}},
    {"coil1", 720, 20, {1024, 0}},
    {"coil2", 720, 20, {1024, 0}},
    {"amazon", 958, 10, {800, 4096}},
    {"caltech", 1123, 10, {800, 4096}},
    {"dslr", 157, 10, {800, 4096}},
    {"webcam", 295, 10, {800, 4096}},
}};

inline const KnownDataset* find_known_dataset(std::string_view name) {
    for (const KnownDataset& k : kKnownDatasets) {
        if (k.name == name) {
            return &k;
        }
    }
    return nullptr;
}

struct DatasetManifest {
    std::string name;
    std::filesystem::path feature_path;
    MatrixFormat feature_format = MatrixFormat::RawF64;
    std::filesystem::path label_path; ///< may be empty when the csv carries labels
    std::size_t feature_dim = 0;
    std::size_t expected_samples = 0;
    std::string checksum; ///< SHA-256 of the feature file; empty skips the check

    /// Shape must agree with the reference table when the name is a known benchmark.
    void check_known_shape() const {
        const KnownDataset* known = find_known_dataset(name);
        if (known == nullptr) {
            return;
        }
        const bool dim_ok = feature_dim == known->dims[0] || (known->dims[1] != 0 && feature_dim == known->dims[1]);
        if (!dim_ok || expected_samples != known->samples) {
            throw Error(ErrorCode::ShapeMismatch, "manifest for '" + name + "' declares " +
                                                      std::to_string(feature_dim) + "x" +
                                                      std::to_string(expected_samples) + ", expected " +
                                                      std::to_string(known->dims[0]) + "x" +
                                                      std::to_string(known->samples));
        }
    }
};

/// Relative paths inside a manifest resolve against the manifest's directory.
inline DatasetManifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in = detail::open_in(path, false);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        }
        kv[detail::trim(std::string_view(t).substr(0, eq))] = detail::trim(std::string_view(t).substr(eq + 1));
    }
    auto require = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw Error(ErrorCode::ParseError, path.string() + ": missing key '" + key + "'");
        }
        return it->second;
    };
    const std::filesystem::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p; };

    DatasetManifest m;
    m.name = require("name");
    m.feature_path = resolve(require("feature_path"));
    m.feature_format = kv.contains("feature_format") ? parse_format(kv["feature_format"]) : MatrixFormat::RawF64;
    if (kv.contains("label_path") && !kv["label_path"].empty()) {
        m.label_path = resolve(kv["label_path"]);
    }
    m.feature_dim = static_cast<std::size_t>(detail::parse_int(require("feature_dim"), path.string()));
    m.expected_samples = static_cast<std::size_t>(detail::parse_int(require("expected_samples"), path.string()));
    m.checksum = kv.contains("checksum") ? kv["checksum"] : std::string();
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    std::ofstream out = detail::open_out(path, false);
    const std::filesystem::path base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        return p.empty() ? std::string() : std::filesystem::proximate(p, base.empty() ? "." : base).string();
    };
    out << "name = " << m.name << '\n'
        << "feature_path = " << rel(m.feature_path) << '\n'
        << "feature_format = " << to_string(m.feature_format) << '\n'
        << "label_path = " << rel(m.label_path) << '\n'
        << "feature_dim = " << m.feature_dim << '\n'
        << "expected_samples = " << m.expected_samples << '\n'
        << "checksum = " << m.checksum << '\n';
}

struct LoadedDataset {
    DatasetManifest manifest;
    FeatureMatrix features;
    RawLabels labels;
};

/// Loads features and labels named by a manifest, verifying checksum and shape.
inline LoadedDataset load_dataset(const DatasetManifest& m) {
    m.check_known_shape();
    if (!m.checksum.empty()) {
        const std::string actual = sha256_file(m.feature_path);
        if (actual != m.checksum) {
            throw Error(ErrorCode::ChecksumMismatch,
                        m.feature_path.string() + ": expected sha256 " + m.checksum + ", got " + actual);
        }
    }
    LoadedMatrix loaded = load_matrix(m.feature_path, m.feature_format);
    if (loaded.features.dim() != m.feature_dim || loaded.features.samples() != m.expected_samples) {
        throw Error(ErrorCode::ShapeMismatch, m.feature_path.string() + ": file holds " +
                                                  std::to_string(loaded.features.dim()) + "x" +
                                                  std::to_string(loaded.features.samples()) + ", manifest says " +
                                                  std::to_string(m.feature_dim) + "x" +
                                                  std::to_string(m.expected_samples));
    }
    RawLabels labels;
    if (!m.label_path.empty()) {
        labels = load_labels(m.label_path);
    } else if (loaded.labels) {
        labels = std::move(*loaded.labels);
    } else {
        throw Error(ErrorCode::ParseError, "dataset '" + m.name + "' has no labels");
    }
    if (labels.size() != m.expected_samples) {
        throw Error(ErrorCode::ShapeMismatch, "dataset '" + m.name + "' has " + std::to_string(labels.size()) +
                                                  " labels for " + std::to_string(m.expected_samples) + " samples");
    }
    return LoadedDataset{m, std::move(loaded.features), std::move(labels)};
}

/// Root directory for named datasets: $LABEL_REMEDY_DATA_DIR, else ./data.
inline std::filesystem::path data_dir() {
    if (const char* env = std::getenv("LABEL_REMEDY_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data";
}

/// A dataset reference is either a manifest path or a name looked up as <data_dir>/<name>.manifest.
inline std::filesystem::path resolve_manifest(const std::string& ref) {
    const std::filesystem::path direct(ref);
    if (direct.extension() == ".manifest" || std::filesystem::is_regular_file(direct)) {
        return direct;
    }
    return data_dir() / (ref + ".manifest");
}

/// Seeded choice of `count` columns (ascending order) from a dataset.
inline IndexSet seeded_subsample(std::size_t total, std::size_t count, std::uint64_t seed) {
    if (count > total) {
        throw Error(ErrorCode::InvalidArgument, "cannot draw " + std::to_string(count) + " of " +
                                                    std::to_string(total) + " samples");
    }
    Rng rng(seed);
    return rng.sample_indices(total, count);
}

struct SyntheticShift {
    LabeledDomain source;
    UnlabeledDomain target;
    LabelVector target_truth;
};

/**
 * Gaussian class clusters for a source domain and a shifted copy for the target.
 *
 * Class centres are drawn from N(0, 3^2 I) and samples scatter around them
 * with unit variance. The target reuses the centres, translated by `shift`
 * along one random unit direction shared by all classes, and gains extra
 * isotropic noise of standard deviation 3 * noise_rate.
 */
inline SyntheticShift make_synthetic_shift(std::size_t classes, std::size_t per_class, std::size_t dim, double shift,
                                           double noise_rate, std::uint64_t seed) {
    if (classes == 0 || per_class == 0 || dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "synthetic data needs positive class count, size and dimension");
    }
    if (!(noise_rate >= 0.0 && noise_rate < 1.0) || !(shift >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "noise_rate must lie in [0, 1) and shift must be nonnegative");
    }
    constexpr double kCenterScale = 3.0;
    Rng rng(seed);
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd centers(d, static_cast<Eigen::Index>(classes));
    for (Eigen::Index i = 0; i < centers.size(); ++i) {
        centers.data()[i] = kCenterScale * rng.normal();
    }
    Eigen::VectorXd direction(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        direction[i] = rng.normal();
    }
    direction.normalize();

    const auto n = static_cast<Eigen::Index>(classes * per_class);
    Eigen::MatrixXd xs(d, n);
    Eigen::MatrixXd xt(d, n);
    LabelVector ys(static_cast<std::size_t>(n));
    LabelVector yt(static_cast<std::size_t>(n));
    Eigen::Index col = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++col) {
            for (Eigen::Index r = 0; r < d; ++r) {
                xs(r, col) = centers(r, static_cast<Eigen::Index>(c)) + rng.normal();
            }
            for (Eigen::Index r = 0; r < d; ++r) {
                xt(r, col) = centers(r, static_cast<Eigen::Index>(c)) + shift * direction[r] + rng.normal() +
                             kCenterScale * noise_rate * rng.normal();
            }
            ys[static_cast<std::size_t>(col)] = static_cast<Label>(c);
            yt[static_cast<std::size_t>(col)] = static_cast<Label>(c);
        }
    }
    return SyntheticShift{LabeledDomain(FeatureMatrix(std::move(xs)), std::move(ys), classes),
                          UnlabeledDomain(FeatureMatrix(std::move(xt))), std::move(yt)};
}

} // namespace label_remedy

#endif
