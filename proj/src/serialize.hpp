#pragma once

#include <cstdint>
#include <string>

namespace pb::io {

// Little-endian byte packing, host-order independent.

inline void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& buf, float v);

// Cursor-based reads; throw FormatError on underrun.
struct Reader {
    const uint8_t* p = nullptr;
    const uint8_t* end = nullptr;
    std::string context;

    Reader(const std::string& bytes, std::string ctx);
    uint32_t u32();
    float f32();
    std::string bytes(size_t n);
    size_t remaining() const { return static_cast<size_t>(end - p); }
    void expect_done() const;
};

std::string read_file(const std::string& path);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write_file(const std::string& path, const std::string& bytes);

} // namespace pb::io
