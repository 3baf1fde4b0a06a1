#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ibnc/error.hpp"
#include "ibnc/repr.hpp"

namespace ibnc {

static_assert(std::endian::native == std::endian::little,
              "binary readers/writers assume a little-endian host");

enum class file_format { csv, ibnc_bin, npy_pair };

inline file_format parse_format(const std::string& s) {
    if (s == "csv") return file_format::csv;
    if (s == "ibnc-bin") return file_format::ibnc_bin;
    if (s == "npy-pair") return file_format::npy_pair;
    throw validation_error("unknown format '" + s + "' (expected csv, ibnc-bin, or npy-pair)");
}

inline const char* format_name(file_format f) {
    switch (f) {
        case file_format::csv: return "csv";
        case file_format::ibnc_bin: return "ibnc-bin";
        default: return "npy-pair";
    }
}

/** Guess a format from the file extension; defaults to ibnc-bin. */
inline file_format detect_format(const std::string& path) {
    const std::filesystem::path p(path);
    const std::string ext = p.extension().string();
    if (ext == ".csv") return file_format::csv;
    if (ext == ".npy") return file_format::npy_pair;
    return file_format::ibnc_bin;
}

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw io_error("read failure on '" + path + "'");
    return std::move(buf).str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw io_error("write failure on '" + path + "'");
}

inline std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& tok, Eigen::Index row, std::size_t col) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw format_error("row " + std::to_string(row) + ", column " + std::to_string(col) +
                           ": '" + tok + "' is not a number");
    return v;
}

inline std::int64_t parse_label(const std::string& tok, Eigen::Index row) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw format_error("row " + std::to_string(row) + ": label '" + tok +
                           "' is not an integer");
    return static_cast<std::int64_t>(v);
}

// ---- csv ----

inline RepresentationSet load_csv(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw format_error("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line, ',');
    std::optional<std::size_t> label_col;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "label") {
            if (label_col) throw format_error("'" + path + "': multiple 'label' columns");
            label_col = j;
        }
    }
    if (!label_col)
        throw format_error("'" + path + "': header has no 'label' column");
    if (header.size() < 2)
        throw format_error("'" + path + "': no feature columns");
    const std::size_t width = header.size();
    const std::size_t d = width - 1;

    std::vector<double> values;
    std::vector<std::int64_t> labels;
    Eigen::Index row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto toks = split_line(line, ',');
        if (toks.size() != width)
            throw format_error("'" + path + "': row " + std::to_string(row) + " has " +
                               std::to_string(toks.size()) + " fields, expected " +
                               std::to_string(width));
        for (std::size_t j = 0; j < width; ++j) {
            if (j == *label_col)
                labels.push_back(parse_label(toks[j], row));
            else
                values.push_back(parse_double(toks[j], row, j));
        }
        ++row;
    }
    Eigen::MatrixXd features(row, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < row; ++i)
        for (std::size_t j = 0; j < d; ++j)
            features(i, static_cast<Eigen::Index>(j)) = values[static_cast<std::size_t>(i) * d + j];
    return make_representation(std::move(features), std::move(labels), path);
}

inline void save_csv(const RepresentationSet& set, const std::string& path) {
    std::string out;
    out.reserve(static_cast<std::size_t>(set.n()) * static_cast<std::size_t>(set.dim()) * 20);
    for (Eigen::Index j = 0; j < set.dim(); ++j) out += "f" + std::to_string(j) + ",";
    out += "label\n";
    char buf[40];
    for (Eigen::Index i = 0; i < set.n(); ++i) {
        for (Eigen::Index j = 0; j < set.dim(); ++j) {
            // 17 significant digits round-trip any finite double exactly.
            std::snprintf(buf, sizeof buf, "%.17g", set.features(i, j));
            out += buf;
            out += ',';
        }
        out += std::to_string(set.labels[static_cast<std::size_t>(i)]);
        out += '\n';
    }
    write_file(path, out);
}

// ---- ibnc-bin ----
// Layout: "IBNC" | u32 version=1 | u64 rows | u64 cols | u8 dtype (0 = f64)
//         | rows*cols f64 row-major | rows i64 labels. All little-endian.

template <typename T>
void append_raw(std::string& out, T v) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T read_raw(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw format_error("ibnc-bin: truncated file");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

inline RepresentationSet load_ibnc_bin(const std::string& path) {
    const std::string in = read_file(path);
    std::size_t off = 0;
    if (in.size() < 4 || in.compare(0, 4, "IBNC") != 0)
        throw format_error("'" + path + "': bad magic (not an ibnc-bin file)");
    off = 4;
    const auto version = read_raw<std::uint32_t>(in, off);
    if (version != 1)
        throw format_error("'" + path + "': unsupported version " + std::to_string(version));
    const auto rows = read_raw<std::uint64_t>(in, off);
    const auto cols = read_raw<std::uint64_t>(in, off);
    const auto dtype = read_raw<std::uint8_t>(in, off);
    if (dtype != 0)
        throw format_error("'" + path + "': unsupported dtype " + std::to_string(dtype));
    const std::size_t need = off + rows * cols * 8 + rows * 8;
    if (in.size() != need)
        throw format_error("'" + path + "': size mismatch (expected " + std::to_string(need) +
                           " bytes, have " + std::to_string(in.size()) + ")");
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j)
            features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                read_raw<double>(in, off);
    std::vector<std::int64_t> labels;
    labels.reserve(rows);
    for (std::uint64_t i = 0; i < rows; ++i) labels.push_back(read_raw<std::int64_t>(in, off));
    return make_representation(std::move(features), std::move(labels), path);
}

inline void save_ibnc_bin(const RepresentationSet& set, const std::string& path) {
    std::string out;
    out.reserve(17 + static_cast<std::size_t>(set.n()) *
                         (static_cast<std::size_t>(set.dim()) + 1) * 8);
    out += "IBNC";
    append_raw<std::uint32_t>(out, 1);
    append_raw<std::uint64_t>(out, static_cast<std::uint64_t>(set.n()));
    append_raw<std::uint64_t>(out, static_cast<std::uint64_t>(set.dim()));
    append_raw<std::uint8_t>(out, 0);
    for (Eigen::Index i = 0; i < set.n(); ++i)
        for (Eigen::Index j = 0; j < set.dim(); ++j) append_raw<double>(out, set.features(i, j));
    for (auto l : set.labels) append_raw<std::int64_t>(out, l);
    write_file(path, out);
}

// ---- npy-pair ----
// Two .npy files (format version 1.0, C order): <base>.features.npy holding
// an N x d '<f8' (or '<f4') array and <base>.labels.npy holding N '<i8' labels.

struct NpyHeader {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::uint64_t> shape;
    std::size_t data_offset = 0;
};

inline NpyHeader parse_npy_header(const std::string& in, const std::string& path) {
    static const char magic[] = "\x93NUMPY";
    if (in.size() < 10 || in.compare(0, 6, magic, 6) != 0)
        throw format_error("'" + path + "': bad magic (not an npy file)");
    const auto major = static_cast<unsigned char>(in[6]);
    const auto minor = static_cast<unsigned char>(in[7]);
    if (major != 1 || minor != 0)
        throw format_error("'" + path + "': unsupported npy version " + std::to_string(major) +
                           "." + std::to_string(minor));
    std::uint16_t header_len;
    std::memcpy(&header_len, in.data() + 8, 2);
    const std::size_t data_offset = 10 + header_len;
    if (in.size() < data_offset) throw format_error("'" + path + "': truncated npy header");
    const std::string dict = in.substr(10, header_len);

    NpyHeader h;
    h.data_offset = data_offset;

    auto find_value = [&](const std::string& key) -> std::string {
        const auto kpos = dict.find("'" + key + "'");
        if (kpos == std::string::npos)
            throw format_error("'" + path + "': npy header missing key '" + key + "'");
        auto pos = dict.find(':', kpos);
        if (pos == std::string::npos) throw format_error("'" + path + "': malformed npy header");
        ++pos;
        while (pos < dict.size() && dict[pos] == ' ') ++pos;
        return dict.substr(pos);
    };

    std::string descr = find_value("descr");
    if (descr.empty() || descr[0] != '\'')
        throw format_error("'" + path + "': malformed descr in npy header");
    h.descr = descr.substr(1, descr.find('\'', 1) - 1);

    const std::string order = find_value("fortran_order");
    if (order.rfind("True", 0) == 0)
        h.fortran_order = true;
    else if (order.rfind("False", 0) == 0)
        h.fortran_order = false;
    else
        throw format_error("'" + path + "': malformed fortran_order in npy header");

    std::string shape = find_value("shape");
    if (shape.empty() || shape[0] != '(')
        throw format_error("'" + path + "': malformed shape in npy header");
    shape = shape.substr(1, shape.find(')') - 1);
    std::istringstream ss(shape);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::string digits;
        for (char c : tok)
            if (c != ' ') digits.push_back(c);
        if (digits.empty()) continue;
        h.shape.push_back(static_cast<std::uint64_t>(std::stoull(digits)));
    }
    return h;
}

inline std::string npy_header_bytes(const std::string& descr,
                                    const std::vector<std::uint64_t>& shape) {
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) dict += std::to_string(shape[i]) + ", ";
    if (shape.size() > 1) dict.erase(dict.size() - 2);  // trailing ", " only for 1-tuples
    dict += "), }";
    // Pad so that magic + length field + dict is a multiple of 64 bytes.
    std::size_t total = 10 + dict.size() + 1;
    const std::size_t padded = (total + 63) / 64 * 64;
    dict.append(padded - total, ' ');
    dict.push_back('\n');
    std::string out("\x93NUMPY", 6);
    out.push_back('\x01');
    out.push_back('\x00');
    append_raw<std::uint16_t>(out, static_cast<std::uint16_t>(dict.size()));
    out += dict;
    return out;
}

/** Strip .npy / .features.npy / .labels.npy so either file or the bare base resolves. */
inline std::string npy_base(const std::string& path) {
    std::string base = path;
    auto strip = [&](const std::string& suffix) {
        if (base.size() >= suffix.size() &&
            base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0)
            base.erase(base.size() - suffix.size());
    };
    strip(".features.npy");
    strip(".labels.npy");
    strip(".npy");
    return base;
}

inline RepresentationSet load_npy_pair(const std::string& path) {
    const std::string base = npy_base(path);
    const std::string fpath = base + ".features.npy";
    const std::string lpath = base + ".labels.npy";

    const std::string fin = read_file(fpath);
    const NpyHeader fh = parse_npy_header(fin, fpath);
    if (fh.fortran_order) throw format_error("'" + fpath + "': fortran_order arrays unsupported");
    if (fh.shape.size() != 2) throw format_error("'" + fpath + "': features must be 2-D");
    const auto rows = static_cast<Eigen::Index>(fh.shape[0]);
    const auto cols = static_cast<Eigen::Index>(fh.shape[1]);
    Eigen::MatrixXd features(rows, cols);
    if (fh.descr == "<f8") {
        std::size_t off = fh.data_offset;
        if (fin.size() - off != fh.shape[0] * fh.shape[1] * 8)
            throw format_error("'" + fpath + "': data size mismatch");
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) features(i, j) = read_raw<double>(fin, off);
    } else if (fh.descr == "<f4") {
        std::size_t off = fh.data_offset;
        if (fin.size() - off != fh.shape[0] * fh.shape[1] * 4)
            throw format_error("'" + fpath + "': data size mismatch");
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                features(i, j) = static_cast<double>(read_raw<float>(fin, off));
    } else {
        throw format_error("'" + fpath + "': unsupported dtype '" + fh.descr +
                           "' (expected <f8 or <f4)");
    }

    const std::string lin = read_file(lpath);
    const NpyHeader lh = parse_npy_header(lin, lpath);
    if (lh.fortran_order) throw format_error("'" + lpath + "': fortran_order arrays unsupported");
    if (lh.shape.size() != 1) throw format_error("'" + lpath + "': labels must be 1-D");
    if (lh.descr != "<i8")
        throw format_error("'" + lpath + "': unsupported label dtype '" + lh.descr +
                           "' (expected <i8)");
    if (static_cast<Eigen::Index>(lh.shape[0]) != rows)
        throw format_error("npy-pair: label count does not match feature rows");
    if (lin.size() - lh.data_offset != lh.shape[0] * 8)
        throw format_error("'" + lpath + "': data size mismatch");
    std::vector<std::int64_t> labels;
    labels.reserve(lh.shape[0]);
    std::size_t off = lh.data_offset;
    for (std::uint64_t i = 0; i < lh.shape[0]; ++i)
        labels.push_back(read_raw<std::int64_t>(lin, off));

    return make_representation(std::move(features), std::move(labels), base);
}

inline void save_npy_pair(const RepresentationSet& set, const std::string& path) {
    const std::string base = npy_base(path);
    std::string fout = npy_header_bytes(
        "<f8", {static_cast<std::uint64_t>(set.n()), static_cast<std::uint64_t>(set.dim())});
    for (Eigen::Index i = 0; i < set.n(); ++i)
        for (Eigen::Index j = 0; j < set.dim(); ++j) append_raw<double>(fout, set.features(i, j));
    write_file(base + ".features.npy", fout);

    std::string lout = npy_header_bytes("<i8", {static_cast<std::uint64_t>(set.n())});
    for (auto l : set.labels) append_raw<std::int64_t>(lout, l);
    write_file(base + ".labels.npy", lout);
}

}  // namespace detail

/** Load and validate a representation from disk; labels come back dense. */
inline RepresentationSet load_representation(const std::string& path, file_format format) {
    switch (format) {
        case file_format::csv: return detail::load_csv(path);
        case file_format::ibnc_bin: return detail::load_ibnc_bin(path);
        default: return detail::load_npy_pair(path);
    }
}

/** Persist a representation. Binary formats round-trip bit-exactly; CSV uses
 *  17 significant digits, which also round-trips doubles exactly. */
inline void save_representation(const RepresentationSet& set, const std::string& path,
                                file_format format) {
    validate(set);
    switch (format) {
        case file_format::csv: detail::save_csv(set, path); break;
        case file_format::ibnc_bin: detail::save_ibnc_bin(set, path); break;
        default: detail::save_npy_pair(set, path); break;
    }
}

}  // namespace ibnc
