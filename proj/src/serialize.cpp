#include "serialize.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "common.hpp"

namespace pb::io {

void put_f32(std::string& buf, float v) {
    put_u32(buf, std::bit_cast<uint32_t>(v));
}

Reader::Reader(const std::string& bytes, std::string ctx)
    : p(reinterpret_cast<const uint8_t*>(bytes.data())),
      end(reinterpret_cast<const uint8_t*>(bytes.data()) + bytes.size()),
      context(std::move(ctx)) {}

uint32_t Reader::u32() {
    if (remaining() < 4) throw FormatError(context + ": truncated file");
    const uint32_t v = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                       (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    p += 4;
    return v;
}

float Reader::f32() {
    return std::bit_cast<float>(u32());
}

std::string Reader::bytes(size_t n) {
    if (remaining() < n) throw FormatError(context + ": truncated file");
    std::string out(reinterpret_cast<const char*>(p), n);
    p += n;
    return out;
}

void Reader::expect_done() const {
    if (remaining() != 0) {
        throw FormatError(context + ": " + std::to_string(remaining()) +
                          " trailing bytes beyond the declared payload");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return bytes;
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path + "'");
}

} // namespace pb::io
