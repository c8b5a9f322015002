#pragma once

// Little-endian readers and writers shared by the SGFM, SGAD and SGCK formats.

#include "synergraph/common.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

namespace synergraph::detail {

class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open for writing: " + path.string());
    }

    void bytes(std::string_view b) { out_.write(b.data(), static_cast<std::streamsize>(b.size())); }

    template <typename T>
    void le(T value) {
        static_assert(std::is_integral_v<T>);
        std::array<char, sizeof(T)> buf{};
        auto u = static_cast<std::make_unsigned_t<T>>(value);
        for (std::size_t k = 0; k < sizeof(T); ++k) {
            buf[k] = static_cast<char>((u >> (8 * k)) & 0xFFu);
        }
        out_.write(buf.data(), buf.size());
    }

    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        le(bits);
    }

    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        le(bits);
    }

    void finish() {
        out_.flush();
        if (!out_) throw Error("write failed");
    }

private:
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw LoadError("cannot open: " + path.string());
    }

    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        check();
        return s;
    }

    template <typename T>
    T le() {
        std::array<unsigned char, sizeof(T)> buf{};
        in_.read(reinterpret_cast<char*>(buf.data()), buf.size());
        check();
        std::make_unsigned_t<T> u = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) {
            u |= static_cast<std::make_unsigned_t<T>>(buf[k]) << (8 * k);
        }
        return static_cast<T>(u);
    }

    float f32() {
        const auto bits = le<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    double f64() {
        const auto bits = le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    void expect_magic(std::string_view magic) {
        if (bytes(magic.size()) != magic) {
            throw LoadError(path_.string() + ": bad magic, expected " + std::string(magic));
        }
    }

    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

    const std::filesystem::path& path() const { return path_; }

private:
    void check() {
        if (!in_) throw LoadError(path_.string() + ": unexpected end of file");
    }

    std::ifstream in_;
    std::filesystem::path path_;
};

}  // namespace synergraph::detail
