#ifndef LABEL_REMEDY_MAT_V5_HPP
#define LABEL_REMEDY_MAT_V5_HPP

#include "error.hpp"

#include <Eigen/Dense>
#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

/**
 * @file mat_v5.hpp
 *
 * @brief Reader for numeric 2-D arrays in little-endian MATLAB level-5 files.
 *
 * The public benchmark feature sets are distributed this way. Compressed
 * elements are inflated with zlib. Cell, struct, char, sparse and complex
 * arrays are skipped; the v7.3 (HDF5) container is not supported.
 */

namespace label_remedy::mat {

namespace detail {

enum : std::uint32_t {
    miINT8 = 1, miUINT8 = 2, miINT16 = 3, miUINT16 = 4, miINT32 = 5, miUINT32 = 6,
    miSINGLE = 7, miDOUBLE = 9, miINT64 = 12, miUINT64 = 13, miMATRIX = 14, miCOMPRESSED = 15,
};

struct Element {
    std::uint32_t type = 0;
    const std::uint8_t* data = nullptr;
    std::uint32_t size = 0;
    std::size_t next = 0; ///< offset of the following element
};

inline std::uint32_t u32(const std::uint8_t* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

inline Element read_element(const std::vector<std::uint8_t>& buf, std::size_t offset) {
    if (offset + 8 > buf.size()) {
        throw Error(ErrorCode::ParseError, "MAT element tag runs past end of data");
    }
    Element e;
    const std::uint32_t first = u32(&buf[offset]);
    if ((first >> 16) != 0) {
        // small data element: 2-byte size, 2-byte type, payload in the remaining 4 bytes
        e.type = first & 0xffff;
        e.size = first >> 16;
        e.data = &buf[offset + 4];
        e.next = offset + 8;
        return e;
    }
    e.type = first;
    e.size = u32(&buf[offset + 4]);
    if (offset + 8 + e.size > buf.size()) {
        throw Error(ErrorCode::ParseError, "MAT element payload runs past end of data");
    }
    e.data = &buf[offset + 8];
    const std::size_t padded = e.type == miCOMPRESSED ? e.size : (e.size + 7) / 8 * 8;
    e.next = offset + 8 + padded;
    return e;
}

inline std::vector<std::uint8_t> inflate_all(const std::uint8_t* data, std::uint32_t size) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) {
        throw Error(ErrorCode::ParseError, "zlib initialisation failed");
    }
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = size;
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> chunk(1 << 16);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error(ErrorCode::ParseError, "corrupt compressed MAT element");
        }
        out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw Error(ErrorCode::ParseError, "truncated compressed MAT element");
        }
    }
    inflateEnd(&zs);
    return out;
}

template <typename T>
void copy_numeric(const std::uint8_t* src, std::size_t count, double* dst) {
    for (std::size_t i = 0; i < count; ++i) {
        T v;
        std::memcpy(&v, src + i * sizeof(T), sizeof(T));
        dst[i] = static_cast<double>(v);
    }
}

inline std::size_t type_width(std::uint32_t type) {
    switch (type) {
    case miINT8: case miUINT8: return 1;
    case miINT16: case miUINT16: return 2;
    case miINT32: case miUINT32: case miSINGLE: return 4;
    case miDOUBLE: case miINT64: case miUINT64: return 8;
    default: return 0;
    }
}

inline void decode_numeric(const Element& e, std::size_t count, double* dst) {
    const std::size_t width = type_width(e.type);
    if (width == 0 || e.size != count * width) {
        throw Error(ErrorCode::ParseError, "MAT numeric payload has unexpected type or length");
    }
    switch (e.type) {
    case miINT8: copy_numeric<std::int8_t>(e.data, count, dst); break;
    case miUINT8: copy_numeric<std::uint8_t>(e.data, count, dst); break;
    case miINT16: copy_numeric<std::int16_t>(e.data, count, dst); break;
    case miUINT16: copy_numeric<std::uint16_t>(e.data, count, dst); break;
    case miINT32: copy_numeric<std::int32_t>(e.data, count, dst); break;
    case miUINT32: copy_numeric<std::uint32_t>(e.data, count, dst); break;
    case miSINGLE: copy_numeric<float>(e.data, count, dst); break;
    case miDOUBLE: copy_numeric<double>(e.data, count, dst); break;
    case miINT64: copy_numeric<std::int64_t>(e.data, count, dst); break;
    case miUINT64: copy_numeric<std::uint64_t>(e.data, count, dst); break;
    default: break;
    }
}

/// Parses one miMATRIX payload; numeric real 2-D arrays land in `out`.
inline void parse_matrix(const std::vector<std::uint8_t>& buf, std::size_t begin, std::size_t end,
                         std::map<std::string, Eigen::MatrixXd>& out) {
    const Element flags = read_element(buf, begin);
    if (flags.type != miUINT32 || flags.size < 8) {
        throw Error(ErrorCode::ParseError, "MAT array flags missing");
    }
    const std::uint32_t flag_word = u32(flags.data);
    const std::uint32_t array_class = flag_word & 0xff;
    const bool complex = (flag_word & 0x0800) != 0;
    const bool numeric = array_class >= 6 && array_class <= 15;

    const Element dims = read_element(buf, flags.next);
    if (dims.type != miINT32 || dims.size % 4 != 0) {
        throw Error(ErrorCode::ParseError, "MAT dimensions missing");
    }
    std::vector<std::int32_t> shape(dims.size / 4);
    std::memcpy(shape.data(), dims.data, dims.size);

    const Element name = read_element(buf, dims.next);
    const std::string var(reinterpret_cast<const char*>(name.data), name.size);
    if (!numeric || complex || shape.size() != 2 || name.next > end) {
        return;
    }
    const Element real = read_element(buf, name.next);
    Eigen::MatrixXd m(shape[0], shape[1]);
    decode_numeric(real, static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]), m.data());
    out[var] = std::move(m);
}

inline void parse_elements(const std::vector<std::uint8_t>& buf, std::size_t offset,
                           std::map<std::string, Eigen::MatrixXd>& out) {
    while (offset + 8 <= buf.size()) {
        const Element e = read_element(buf, offset);
        if (e.type == miCOMPRESSED) {
            const std::vector<std::uint8_t> inner = inflate_all(e.data, e.size);
            parse_elements(inner, 0, out);
        } else if (e.type == miMATRIX) {
            const std::size_t begin = static_cast<std::size_t>(e.data - buf.data());
            parse_matrix(buf, begin, begin + e.size, out);
        }
        offset = e.next;
    }
}

} // namespace detail

/// All real numeric 2-D variables in the file, keyed by name (column-major, as stored).
inline std::map<std::string, Eigen::MatrixXd> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    }
    const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 128) {
        throw Error(ErrorCode::ParseError, path.string() + ": too short for a MAT-file header");
    }
    if (std::memcmp(buf.data(), "HDF", 3) == 0 || (buf.size() >= 516 && std::memcmp(buf.data() + 512, "\x89HDF", 4) == 0)) {
        throw Error(ErrorCode::ParseError, path.string() + ": MAT v7.3 (HDF5) files are not supported");
    }
    if (buf[126] != 'I' || buf[127] != 'M') {
        throw Error(ErrorCode::ParseError, path.string() + ": not a little-endian level-5 MAT file");
    }
    std::map<std::string, Eigen::MatrixXd> out;
    detail::parse_elements(buf, 128, out);
    return out;
}

} // namespace label_remedy::mat

#endif
