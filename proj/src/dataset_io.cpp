#include "dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "rng.hpp"
#include "serialize.hpp"

namespace pb::io {

namespace {

constexpr char kDatasetMagic[4] = {'P', 'B', 'D', 'S'};
constexpr uint32_t kDatasetVersion = 1;
constexpr double kPi = 3.14159265358979323846;

float clamp_pixel(double v) {
    return static_cast<float>(std::clamp(v, -1.0, 1.0));
}

// Per-class color weights; classes beyond the palette reuse it with a shift.
void class_palette(int cls, double out[3]) {
    static const double palette[5][3] = {
        {1.00, 0.35, 0.35},
        {0.35, 1.00, 0.35},
        {0.40, 0.55, 1.00},
        {1.00, 0.90, 0.30},
        {0.95, 0.40, 1.00},
    };
    const double* base = palette[cls % 5];
    const int shift = (cls / 5) % 3;
    for (int c = 0; c < 3; ++c) out[c] = base[(c + shift) % 3];
}

// Motif field in [-1, 1] for pixel (y, x); the motif index cycles per class.
double motif_value(int motif, int y, int x, int h, int w, Rng& params_unused, double p0,
                   double p1, double p2, double p3) {
    switch (motif) {
        case 0: { // horizontal stripes
            const double period = 6.0 + 3.0 * p0;
            return 0.7 * std::sin(2.0 * kPi * (y + p1 * period) / period);
        }
        case 1: { // vertical stripes
            const double period = 6.0 + 3.0 * p0;
            return 0.7 * std::sin(2.0 * kPi * (x + p1 * period) / period);
        }
        case 2: { // disk in the upper half
            const double cy = (0.28 + 0.17 * p0) * h;
            const double cx = (0.30 + 0.40 * p1) * w;
            const double r = (0.18 + 0.10 * p2) * std::min(h, w);
            const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx));
            const double edge = std::clamp((r - d) / 1.5, -1.0, 1.0);
            return 0.8 * 0.5 * (edge + 1.0) - 0.25;
        }
        case 3: { // checkerboard
            const int cell = 4 + static_cast<int>(p0 * 2.0);
            const int oy = static_cast<int>(p1 * cell);
            const int ox = static_cast<int>(p2 * cell);
            const int par = ((y + oy) / cell + (x + ox) / cell) & 1;
            return par ? 0.6 : -0.6;
        }
        default: { // vertical gradient plus a bright bar near the top
            const double grad = 0.5 * (1.0 - 2.0 * y / (h - 1.0));
            const int bar_top = static_cast<int>((0.12 + 0.10 * p3) * h);
            const int bar_h = std::max(2, h / 10);
            const bool in_bar = y >= bar_top && y < bar_top + bar_h;
            return grad + (in_bar ? 0.7 : 0.0);
        }
    }
}

} // namespace

std::string serialize_meta(const std::map<std::string, std::string>& meta) {
    std::string block;
    for (const auto& [k, v] : meta) {
        block += k;
        block += '=';
        block += v;
        block += '\n';
    }
    return block;
}

std::map<std::string, std::string> parse_meta(const std::string& block,
                                              const std::string& context) {
    std::map<std::string, std::string> meta;
    std::istringstream ss(block);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(context + ": malformed metadata line '" + line + "'");
        }
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    validate_dataset(dataset, "save_dataset");
    std::string buf;
    const size_t sample_bytes =
        dataset.images.empty() ? 4 : 4 + dataset.images[0].value_count() * 4;
    buf.reserve(64 + dataset.size() * sample_bytes);
    buf.append(kDatasetMagic, 4);
    put_u32(buf, kDatasetVersion);
    put_u32(buf, static_cast<uint32_t>(dataset.size()));
    put_u32(buf, static_cast<uint32_t>(dataset.height));
    put_u32(buf, static_cast<uint32_t>(dataset.width));
    put_u32(buf, static_cast<uint32_t>(dataset.channels));
    put_u32(buf, static_cast<uint32_t>(dataset.class_count));
    const std::string meta = serialize_meta(dataset.meta);
    put_u32(buf, static_cast<uint32_t>(meta.size()));
    buf += meta;
    for (size_t i = 0; i < dataset.size(); ++i) {
        put_u32(buf, static_cast<uint32_t>(dataset.labels[i]));
        for (float v : dataset.images[i].data) put_f32(buf, v);
    }
    atomic_write_file(path, buf);
}

Dataset load_dataset(const std::string& path) {
    const std::string bytes = read_file(path);
    Reader r(bytes, "dataset '" + path + "'");
    if (r.bytes(4) != std::string(kDatasetMagic, 4)) {
        throw FormatError("dataset '" + path + "': bad magic");
    }
    const uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw FormatError("dataset '" + path + "': unsupported version " +
                          std::to_string(version));
    }
    Dataset ds;
    const uint32_t count = r.u32();
    ds.height = static_cast<int32_t>(r.u32());
    ds.width = static_cast<int32_t>(r.u32());
    ds.channels = static_cast<int32_t>(r.u32());
    ds.class_count = static_cast<int32_t>(r.u32());
    const uint32_t meta_len = r.u32();
    ds.meta = parse_meta(r.bytes(meta_len), "dataset '" + path + "'");

    const size_t values = static_cast<size_t>(ds.height) * ds.width * ds.channels;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        ds.labels.push_back(static_cast<int32_t>(r.u32()));
        Image img;
        img.height = ds.height;
        img.width = ds.width;
        img.channels = ds.channels;
        img.data.resize(values);
        for (size_t v = 0; v < values; ++v) img.data[v] = r.f32();
        ds.images.push_back(std::move(img));
    }
    r.expect_done();
    validate_dataset(ds, "dataset '" + path + "'");
    return ds;
}

Dataset generate_synthetic(int32_t class_count, int32_t per_class, int32_t height, int32_t width,
                           int32_t channels, uint64_t seed) {
    if (class_count < 2) throw ConfigError("generate_synthetic: need at least 2 classes");
    if (per_class < 1) throw ConfigError("generate_synthetic: per_class must be >= 1");
    if (height < 8 || width < 8 || (channels != 1 && channels != 3)) {
        throw ConfigError("generate_synthetic: unsupported image shape");
    }

    Dataset ds;
    ds.height = height;
    ds.width = width;
    ds.channels = channels;
    ds.class_count = class_count;

    for (int cls = 0; cls < class_count; ++cls) {
        double palette[3];
        class_palette(cls, palette);
        for (int s = 0; s < per_class; ++s) {
            Rng rng(derive_seed(seed, {static_cast<uint64_t>(cls), static_cast<uint64_t>(s)}));
            const double p0 = rng.uniform01();
            const double p1 = rng.uniform01();
            const double p2 = rng.uniform01();
            const double p3 = rng.uniform01();
            const double bg = -0.10 + 0.2 * rng.uniform01() + 0.06 * (cls % 3);
            const double color_jitter[3] = {rng.uniform(0.85, 1.1), rng.uniform(0.85, 1.1),
                                            rng.uniform(0.85, 1.1)};
            const double noise_sigma = 0.06;

            Image img = Image::zeros(height, width, channels);
            for (int y = 0; y < height; ++y) {
                for (int x = 0; x < width; ++x) {
                    const double m =
                        motif_value(cls % 5, y, x, height, width, rng, p0, p1, p2, p3);
                    for (int c = 0; c < channels; ++c) {
                        const double weight =
                            channels == 3 ? palette[c] * color_jitter[c] : 1.0;
                        const double v = bg + m * weight + noise_sigma * rng.normal();
                        img.at(y, x, c) = clamp_pixel(v);
                    }
                }
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(cls);
        }
    }
    ds.meta["generator"] = "synthetic";
    ds.meta["seed"] = std::to_string(seed);
    return ds;
}

Dataset import_ppm_tree(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("class_", 0) == 0) {
            class_dirs.push_back(entry.path());
        }
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.size() < 2) {
        throw FormatError("'" + dir + "': need at least two class_<k> subdirectories");
    }

    Dataset ds;
    ds.class_count = static_cast<int32_t>(class_dirs.size());
    for (size_t cls = 0; cls < class_dirs.size(); ++cls) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(class_dirs[cls])) {
            if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            std::ifstream in(file, std::ios::binary);
            if (!in) throw IoError("cannot open '" + file.string() + "'");
            std::string magic;
            int w = 0, h = 0, maxval = 0;
            in >> magic >> w >> h >> maxval;
            if (magic != "P6" || w < 1 || h < 1 || maxval < 1 || maxval > 255) {
                throw FormatError("'" + file.string() + "': not an 8-bit P6 pixmap");
            }
            in.get(); // single whitespace after the header
            std::vector<unsigned char> raw(static_cast<size_t>(w) * h * 3);
            in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
            if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
                throw FormatError("'" + file.string() + "': truncated pixel data");
            }
            if (ds.images.empty()) {
                ds.height = h;
                ds.width = w;
                ds.channels = 3;
            } else if (h != ds.height || w != ds.width) {
                throw FormatError("'" + file.string() + "': image size differs from the rest");
            }
            Image img = Image::zeros(h, w, 3);
            for (size_t i = 0; i < raw.size(); ++i) {
                img.data[i] =
                    clamp_pixel(2.0 * static_cast<double>(raw[i]) / maxval - 1.0);
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(static_cast<int32_t>(cls));
        }
    }
    if (ds.images.empty()) throw FormatError("'" + dir + "': no .ppm files found");
    ds.meta["generator"] = "ppm-import";
    return ds;
}

} // namespace pb::io
