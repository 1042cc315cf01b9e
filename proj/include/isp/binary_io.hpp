#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "isp/common.hpp"

namespace isp::binary {

// Little-endian record writer/reader shared by every on-disk format
// (ISPF, ISPL, ISPW, ISPD, ISPR). All formats start with a 4-byte magic
// followed by a u32 version.

class Writer {
public:
    explicit Writer(const std::filesystem::path& path);

    void magic(std::string_view tag);
    void u32(std::uint32_t v);
    void u8(std::uint8_t v);
    void f32(float v);
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path);

    // Throws FormatError if the magic differs.
    void expect_magic(std::string_view tag);
    std::uint32_t u32();
    std::uint8_t u8();
    float f32();
    // Bytes left in the file; used to reject truncated payloads up front.
    std::uint64_t remaining();
    bool at_end();

    const std::filesystem::path& path() const { return path_; }

private:
    void read_exact(char* dst, std::size_t n);

    std::filesystem::path path_;
    std::ifstream in_;
};

}  // namespace isp::binary
