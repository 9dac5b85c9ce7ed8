#pragma once

// Little-endian binary encoding used by all checkpoint formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "longdoc/errors.hpp"

namespace longdoc::io {

namespace detail {

template <class U>
U byteswap_if_big(U v) {
    if constexpr (std::endian::native == std::endian::big) {
        U out = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            out = static_cast<U>((out << 8) | (v & 0xff));
            v = static_cast<U>(v >> 8);
        }
        return out;
    } else {
        return v;
    }
}

template <std::size_t N>
struct uint_of;
template <>
struct uint_of<1> { using type = std::uint8_t; };
template <>
struct uint_of<4> { using type = std::uint32_t; };
template <>
struct uint_of<8> { using type = std::uint64_t; };

}  // namespace detail

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw ConfigError("cannot open for writing: " + path);
    }

    template <class V>
        requires std::is_arithmetic_v<V>
    void put(V value) {
        using U = typename detail::uint_of<sizeof(V)>::type;
        U bits = detail::byteswap_if_big(std::bit_cast<U>(value));
        out_.write(reinterpret_cast<const char*>(&bits), sizeof(U));
    }

    void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

    void str(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    /// Writes each value converted to Stored.
    template <class Stored, class V>
    void array(std::span<const V> values) {
        for (V v : values) put(static_cast<Stored>(v));
    }

    void finish() {
        out_.flush();
        if (!out_) throw ConfigError("write failed: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw ConfigError("cannot open checkpoint: " + path);
    }

    template <class V>
        requires std::is_arithmetic_v<V>
    V get() {
        using U = typename detail::uint_of<sizeof(V)>::type;
        U bits{};
        in_.read(reinterpret_cast<char*>(&bits), sizeof(U));
        check();
        return std::bit_cast<V>(detail::byteswap_if_big(bits));
    }

    void expect_magic(std::string_view m) {
        std::string got(m.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(got.size()));
        check();
        if (got != m) throw DataError(path_ + ": bad magic, expected " + std::string(m));
    }

    std::string str() {
        auto n = get<std::uint32_t>();
        std::string s(n, '\0');
        in_.read(s.data(), n);
        check();
        return s;
    }

    template <class Stored, class V>
    void array(std::span<V> out) {
        for (V& v : out) v = static_cast<V>(get<Stored>());
    }

    /// Fails unless every byte of the file has been consumed.
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw DataError(path_ + ": trailing bytes");
    }

    const std::string& path() const { return path_; }

private:
    void check() {
        if (!in_) throw DataError(path_ + ": truncated checkpoint");
    }

    std::string path_;
    std::ifstream in_;
};

}  // namespace longdoc::io
