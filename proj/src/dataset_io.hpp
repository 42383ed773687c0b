#pragma once

#include <cstdint>
#include <string>

#include "image.hpp"

namespace pb::io {

// PBDS dataset container: magic "PBDS", version u32, count/height/width/
// channels/class_count u32, metadata block (u32 length + key=value lines),
// then per sample a u32 label followed by H*W*C little-endian f32 pixels.
// Parsing is strict: bad magic, out-of-range pixels or labels, or a byte
// length that disagrees with the header all reject the file.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Procedural 5-motif dataset: each class pairs a geometric motif (stripes,
// disk, checkerboard, gradient bar, rings) with its own color statistics.
// Balanced classes, deterministic for a fixed seed.
Dataset generate_synthetic(int32_t class_count, int32_t per_class, int32_t height, int32_t width,
                           int32_t channels, uint64_t seed);

// Importer for directories of binary portable pixmaps: `dir/class_<k>/*.ppm`.
Dataset import_ppm_tree(const std::string& dir);

std::string serialize_meta(const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> parse_meta(const std::string& block,
                                              const std::string& context);

} // namespace pb::io
