#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>

#include "magcl/binary_io.hpp"
#include "magcl/error.hpp"
#include "magcl/matrix.hpp"

namespace magcl {

// Embedding files: "MAEB", u32 rows, u32 cols, then f32 LE row-major.

template <class Derived>
void save_embeddings(const Eigen::MatrixBase<Derived>& z, const std::string& path) {
    if (z.rows() > std::numeric_limits<std::uint32_t>::max() || z.cols() > std::numeric_limits<std::uint32_t>::max())
        throw ShapeError("save_embeddings: matrix too large for the MAEB header");
    auto os = io::open_out(path);
    os.write("MAEB", 4);
    io::write_le(os, static_cast<std::uint32_t>(z.rows()));
    io::write_le(os, static_cast<std::uint32_t>(z.cols()));
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) io::write_le(os, static_cast<float>(z(i, j)));
    if (!os) throw Error("write failed: " + path);
}

inline MatrixD load_embeddings(const std::string& path) {
    auto is = io::open_in(path);
    io::Reader rd(is, path);
    rd.expect_magic("MAEB");
    const auto rows = rd.read_le<std::uint32_t>();
    const auto cols = rd.read_le<std::uint32_t>();
    MatrixD z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rd.read_le<float>();
    rd.expect_eof();
    return z;
}

/// Comma-separated rows, shortest round-trip text of each float value.
template <class Derived>
void save_embeddings_csv(const Eigen::MatrixBase<Derived>& z, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot open " + path + " for writing");
    char buf[32];
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            if (j) os << ',';
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, static_cast<float>(z(i, j)));
            os.write(buf, ptr - buf);
        }
        os << '\n';
    }
    if (!os) throw Error("write failed: " + path);
}

} // namespace magcl
