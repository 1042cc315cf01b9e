#include "isp/binary_io.hpp"

namespace isp::binary {

Writer::Writer(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) {
        throw IoError("cannot open for writing: " + path.string());
    }
}

void Writer::magic(std::string_view tag) {
    out_.write(tag.data(), static_cast<std::streamsize>(tag.size()));
}

void Writer::u32(std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff),
                                static_cast<char>((v >> 24) & 0xff)};
    out_.write(b.data(), 4);
}

void Writer::u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::close() {
    out_.flush();
    if (!out_) {
        throw IoError("write failed: " + path_.string());
    }
    out_.close();
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) {
        throw IoError("cannot open for reading: " + path.string());
    }
}

void Reader::read_exact(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
        throw ValidationError("truncated file: " + path_.string());
    }
}

void Reader::expect_magic(std::string_view tag) {
    std::array<char, 4> b{};
    in_.read(b.data(), 4);
    if (in_.gcount() != 4 || std::string_view(b.data(), 4) != tag) {
        throw FormatError("bad magic in " + path_.string() + " (expected " + std::string(tag) +
                          ")");
    }
}

std::uint32_t Reader::u32() {
    std::array<unsigned char, 4> b{};
    read_exact(reinterpret_cast<char*>(b.data()), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint8_t Reader::u8() {
    char c = 0;
    read_exact(&c, 1);
    return static_cast<std::uint8_t>(c);
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

std::uint64_t Reader::remaining() {
    const auto here = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    return static_cast<std::uint64_t>(end - here);
}

bool Reader::at_end() { return remaining() == 0; }

}  // namespace isp::binary
