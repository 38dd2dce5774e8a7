#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>
#include <type_traits>

#include "magcl/error.hpp"

namespace magcl::io {

// Little-endian scalar writer/reader over std::fstream. All on-disk formats in
// this library are little-endian regardless of host order.

template <class T>
    requires std::is_arithmetic_v<T>
void write_le(std::ostream& os, T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    std::array<char, sizeof(T)> buf{};
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf.data(), buf.size());
}

class Reader {
public:
    Reader(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T read_le() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                  std::conditional_t<sizeof(T) == 4, std::uint32_t,
                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        std::array<unsigned char, sizeof(T)> buf{};
        is_.read(reinterpret_cast<char*>(buf.data()), buf.size());
        if (is_.gcount() != static_cast<std::streamsize>(buf.size()))
            throw DataError(name_ + ": truncated file (corrupt or incomplete)");
        U bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
        T value;
        std::memcpy(&value, &bits, sizeof(T));
        return value;
    }

    void expect_magic(std::string_view magic) {
        std::string got(magic.size(), '\0');
        is_.read(got.data(), static_cast<std::streamsize>(got.size()));
        if (is_.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic)
            throw DataError(name_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }

    void expect_eof() {
        if (is_.peek() != std::char_traits<char>::eof())
            throw DataError(name_ + ": trailing bytes after payload");
    }

    const std::string& name() const { return name_; }

private:
    std::istream& is_;
    std::string name_;
};

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + path + " for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path);
    return is;
}

} // namespace magcl::io
