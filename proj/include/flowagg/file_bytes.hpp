#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "flowagg/errors.hpp"

namespace flowagg {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("io_formats", "cannot open " + path);
    }
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    if (in.bad()) {
        throw FormatError("io_formats", "read failed on " + path);
    }
    return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("io_formats", "cannot open " + path + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FormatError("io_formats", "write failed on " + path);
    }
}

inline void write_file_text(const std::string& path, const std::string& text) {
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    write_file_bytes(path, bytes);
}

}  // namespace flowagg
