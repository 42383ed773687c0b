#include "perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "common.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace pb::perturb {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct KindInfo {
    Kind kind;
    const char* name;
    double min_severity;
    double max_severity;
};

// Admissible severity domains per kind. Flip ignores its severity entirely.
const KindInfo kKindTable[] = {
    {Kind::GaussianNoise, "gaussian_noise", 0.0, 2.0},
    {Kind::SaltPepper, "salt_pepper", 0.0, 1.0},
    {Kind::Speckle, "speckle", 0.0, 2.0},
    {Kind::DefocusBlur, "defocus_blur", 0.0, 16.0},
    {Kind::MotionBlur, "motion_blur", 0.0, 32.0},
    {Kind::ZoomBlur, "zoom_blur", 0.0, 1.0},
    {Kind::GlassBlur, "glass_blur", 0.0, 8.0},
    {Kind::Rotation, "rotation", 0.0, 360.0},
    {Kind::Translation, "translation", 0.0, 1.0},
    {Kind::VerticalFlip, "vertical_flip", 0.0, 2.0},
    {Kind::Occlusion, "occlusion", 0.0, 1.0},
    {Kind::Brightness, "brightness", 0.0, 2.0},
    {Kind::Contrast, "contrast", 0.0, 1.0},
    {Kind::Colorimetry, "colorimetry", 0.0, 1.0},
    {Kind::Interference, "interference", 0.0, 2.0},
    {Kind::Quantization, "quantization", 0.0, 1.0},
};

const KindInfo& info(Kind kind) { return kKindTable[static_cast<int>(kind)]; }

float clamp_pixel(double v) {
    return static_cast<float>(std::clamp(v, -1.0, 1.0));
}

// Bilinear read with replicate padding.
double sample_replicate(const Image& img, double y, double x, int ch) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    auto pick = [&](int yy, int xx) {
        yy = std::clamp(yy, 0, img.height - 1);
        xx = std::clamp(xx, 0, img.width - 1);
        return static_cast<double>(img.at(yy, xx, ch));
    };
    return (1.0 - fy) * ((1.0 - fx) * pick(y0, x0) + fx * pick(y0, x0 + 1)) +
           fy * ((1.0 - fx) * pick(y0 + 1, x0) + fx * pick(y0 + 1, x0 + 1));
}

// Bilinear read treating out-of-frame pixels as the fill value.
double sample_fill(const Image& img, double y, double x, int ch, double fill) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    auto pick = [&](int yy, int xx) {
        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return fill;
        return static_cast<double>(img.at(yy, xx, ch));
    };
    return (1.0 - fy) * ((1.0 - fx) * pick(y0, x0) + fx * pick(y0, x0 + 1)) +
           fy * ((1.0 - fx) * pick(y0 + 1, x0) + fx * pick(y0 + 1, x0 + 1));
}

Image gaussian_noise(const Image& in, double sigma, Rng& rng) {
    Image out = in;
    for (float& v : out.data) v = clamp_pixel(static_cast<double>(v) + sigma * rng.normal());
    return out;
}

Image salt_pepper(const Image& in, double density, Rng& rng) {
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            const double u = rng.uniform01();
            if (u < density * 0.5) {
                for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = -1.0f;
            } else if (u < density) {
                for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = 1.0f;
            }
        }
    }
    return out;
}

Image speckle(const Image& in, double sigma, Rng& rng) {
    Image out = in;
    for (float& v : out.data) {
        const double n = rng.normal();
        v = clamp_pixel(static_cast<double>(v) * (1.0 + sigma * n));
    }
    return out;
}

Image defocus_blur(const Image& in, double radius) {
    // Normalized binary disk, replicate padding at the borders.
    const int r = static_cast<int>(std::ceil(radius));
    std::vector<std::pair<int, int>> taps;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (static_cast<double>(dy) * dy + static_cast<double>(dx) * dx <= radius * radius)
                taps.emplace_back(dy, dx);
    if (taps.size() <= 1) return in;

    Image out = in;
    const double inv = 1.0 / static_cast<double>(taps.size());
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            for (int c = 0; c < in.channels; ++c) {
                double acc = 0.0;
                for (const auto& [dy, dx] : taps) {
                    const int yy = std::clamp(y + dy, 0, in.height - 1);
                    const int xx = std::clamp(x + dx, 0, in.width - 1);
                    acc += in.at(yy, xx, c);
                }
                out.at(y, x, c) = clamp_pixel(acc * inv);
            }
        }
    }
    return out;
}

Image motion_blur(const Image& in, double length, Rng& rng) {
    const int taps = std::max(1, static_cast<int>(std::llround(length)));
    const double angle = rng.uniform(0.0, kPi);
    if (taps == 1) return in;

    const double dirx = std::cos(angle);
    const double diry = std::sin(angle);
    const double inv = 1.0 / taps;
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            for (int c = 0; c < in.channels; ++c) {
                double acc = 0.0;
                for (int t = 0; t < taps; ++t) {
                    const double off = t - (taps - 1) * 0.5;
                    acc += sample_replicate(in, y + off * diry, x + off * dirx, c);
                }
                out.at(y, x, c) = clamp_pixel(acc * inv);
            }
        }
    }
    return out;
}

Image zoom_blur(const Image& in, double severity) {
    constexpr int kSteps = 5;
    const double cy = (in.height - 1) * 0.5;
    const double cx = (in.width - 1) * 0.5;
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            for (int c = 0; c < in.channels; ++c) {
                double acc = 0.0;
                for (int k = 0; k < kSteps; ++k) {
                    const double scale = 1.0 + severity * k / (kSteps - 1);
                    acc += sample_replicate(in, cy + (y - cy) / scale, cx + (x - cx) / scale, c);
                }
                out.at(y, x, c) = clamp_pixel(acc / kSteps);
            }
        }
    }
    return out;
}

Image glass_blur(const Image& in, double severity, Rng& rng) {
    const int r = static_cast<int>(std::ceil(severity));
    Image out = in;
    for (int iter = 0; iter < 3; ++iter) {
        for (int y = 0; y < in.height; ++y) {
            for (int x = 0; x < in.width; ++x) {
                const int dy = static_cast<int>(rng.uniform_int(-r, r));
                const int dx = static_cast<int>(rng.uniform_int(-r, r));
                const int yy = std::clamp(y + dy, 0, in.height - 1);
                const int xx = std::clamp(x + dx, 0, in.width - 1);
                for (int c = 0; c < in.channels; ++c)
                    std::swap(out.at(y, x, c), out.at(yy, xx, c));
            }
        }
    }
    return out;
}

Image rotation(const Image& in, double degrees) {
    const double a = degrees * kPi / 180.0;
    const double cy = (in.height - 1) * 0.5;
    const double cx = (in.width - 1) * 0.5;
    const double ca = std::cos(a);
    const double sa = std::sin(a);
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            // Inverse map of a rotation by `degrees` about the center.
            const double sx = cx + ca * (x - cx) + sa * (y - cy);
            const double sy = cy - sa * (x - cx) + ca * (y - cy);
            for (int c = 0; c < in.channels; ++c)
                out.at(y, x, c) = clamp_pixel(sample_fill(in, sy, sx, c, 0.0));
        }
    }
    return out;
}

Image translation(const Image& in, double fraction, Rng& rng) {
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    const int dx = static_cast<int>(std::llround(fraction * in.width * std::cos(angle)));
    const int dy = static_cast<int>(std::llround(fraction * in.height * std::sin(angle)));
    if (dx == 0 && dy == 0) return in;
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            const int sy = y - dy;
            const int sx = x - dx;
            const bool inside = sy >= 0 && sy < in.height && sx >= 0 && sx < in.width;
            for (int c = 0; c < in.channels; ++c)
                out.at(y, x, c) = inside ? in.at(sy, sx, c) : 0.0f;
        }
    }
    return out;
}

Image vertical_flip(const Image& in) {
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        const int sy = in.height - 1 - y;
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = in.at(sy, x, c);
    }
    return out;
}

Image occlusion(const Image& in, double fraction, Rng& rng) {
    const int side = static_cast<int>(std::floor(fraction * std::min(in.height, in.width)));
    if (side <= 0) return in;
    const int y0 = static_cast<int>(rng.uniform_int(0, in.height - side));
    const int x0 = static_cast<int>(rng.uniform_int(0, in.width - side));
    Image out = in;
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x)
            for (int c = 0; c < in.channels; ++c) out.at(y, x, c) = -1.0f;
    return out;
}

Image brightness(const Image& in, double severity, Rng& rng) {
    const double offset = rng.uniform01() < 0.5 ? -severity : severity;
    Image out = in;
    for (float& v : out.data) v = clamp_pixel(static_cast<double>(v) + offset);
    return out;
}

Image contrast(const Image& in, double severity, Rng& rng) {
    const double gain = 1.0 + (rng.uniform01() < 0.5 ? -severity : severity);
    Image out = in;
    for (float& v : out.data) v = clamp_pixel(static_cast<double>(v) * gain);
    return out;
}

Image colorimetry(const Image& in, double severity, Rng& rng) {
    double gains[3];
    for (double& g : gains) g = rng.uniform(1.0 - severity, 1.0 + severity);
    Image out = in;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = clamp_pixel(static_cast<double>(in.at(y, x, c)) * gains[c]);
    return out;
}

Image interference(const Image& in, double amplitude, Rng& rng) {
    const double fx = rng.uniform(2.0, 8.0);
    const double fy = rng.uniform(2.0, 8.0);
    Image out = in;
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            const double wave =
                amplitude * std::sin(2.0 * kPi * (fx * x / in.width + fy * y / in.height));
            for (int c = 0; c < in.channels; ++c)
                out.at(y, x, c) = clamp_pixel(static_cast<double>(in.at(y, x, c)) + wave);
        }
    }
    return out;
}

Image quantization(const Image& in, double severity) {
    const int levels = std::max(2, static_cast<int>(std::llround(1.0 / severity)));
    Image out = in;
    for (float& v : out.data) {
        const double t = (static_cast<double>(v) + 1.0) * 0.5 * (levels - 1);
        v = clamp_pixel(-1.0 + 2.0 * std::round(t) / (levels - 1));
    }
    return out;
}

} // namespace

const char* kind_name(Kind kind) { return info(kind).name; }

Kind kind_from_name(const std::string& name) {
    for (const auto& entry : kKindTable)
        if (name == entry.name) return entry.kind;
    throw ConfigError("unknown perturbation kind '" + name + "'");
}

const std::vector<Kind>& all_kinds() {
    static const std::vector<Kind> kinds = [] {
        std::vector<Kind> v;
        for (const auto& entry : kKindTable) v.push_back(entry.kind);
        return v;
    }();
    return kinds;
}

const std::vector<Kind>& benchmark_kinds() {
    static const std::vector<Kind> kinds = {
        Kind::GaussianNoise, Kind::Interference, Kind::Occlusion,   Kind::DefocusBlur,
        Kind::Contrast,      Kind::Brightness,   Kind::Colorimetry, Kind::Translation,
        Kind::Rotation,      Kind::VerticalFlip,
    };
    return kinds;
}

Image apply(Kind kind, double severity, const Image& image, uint64_t seed) {
    validate_image(image, "perturb input");
    const KindInfo& ki = info(kind);
    if (!std::isfinite(severity) || severity < ki.min_severity || severity > ki.max_severity) {
        throw ConfigError(std::string(ki.name) + ": severity " + std::to_string(severity) +
                          " outside admissible domain [" + std::to_string(ki.min_severity) +
                          ", " + std::to_string(ki.max_severity) + "]");
    }
    if (kind == Kind::Colorimetry && image.channels != 3) {
        throw ConfigError("colorimetry requires a 3-channel image");
    }
    if (kind == Kind::VerticalFlip) return vertical_flip(image);
    if (severity == 0.0) return image;

    Rng rng(seed);
    switch (kind) {
        case Kind::GaussianNoise: return gaussian_noise(image, severity, rng);
        case Kind::SaltPepper: return salt_pepper(image, severity, rng);
        case Kind::Speckle: return speckle(image, severity, rng);
        case Kind::DefocusBlur: return defocus_blur(image, severity);
        case Kind::MotionBlur: return motion_blur(image, severity, rng);
        case Kind::ZoomBlur: return zoom_blur(image, severity);
        case Kind::GlassBlur: return glass_blur(image, severity, rng);
        case Kind::Rotation: return rotation(image, severity);
        case Kind::Translation: return translation(image, severity, rng);
        case Kind::Occlusion: return occlusion(image, severity, rng);
        case Kind::Brightness: return brightness(image, severity, rng);
        case Kind::Contrast: return contrast(image, severity, rng);
        case Kind::Colorimetry: return colorimetry(image, severity, rng);
        case Kind::Interference: return interference(image, severity, rng);
        case Kind::Quantization: return quantization(image, severity);
        case Kind::VerticalFlip: break;
    }
    throw ConfigError("unhandled perturbation kind");
}

double sample_severity(const SeverityRange& range, uint64_t seed) {
    if (!(range.lower <= range.upper)) {
        throw ConfigError("severity range lower > upper");
    }
    if (range.lower == range.upper) return range.lower;
    Rng rng(seed);
    return rng.uniform(range.lower, range.upper);
}

Dataset perturb_dataset(const Dataset& dataset, const Spec& spec, const SeverityPolicy& policy) {
    if (dataset.empty()) throw ConfigError("perturb_dataset: empty dataset");
    Dataset out = dataset;
    parallel_for(dataset.size(), [&](size_t i) {
        double severity = policy.fixed;
        if (policy.mode == SeverityPolicy::Mode::PerSampleUniform) {
            severity = sample_severity(spec.range, derive_seed(spec.seed, {1, i}));
        }
        out.images[i] = apply(spec.kind, severity, dataset.images[i], derive_seed(spec.seed, {2, i}));
    });
    std::ostringstream desc;
    desc << kind_name(spec.kind) << " seed=" << spec.seed;
    if (policy.mode == SeverityPolicy::Mode::Fixed)
        desc << " severity=" << policy.fixed;
    else
        desc << " severity=uniform[" << spec.range.lower << "," << spec.range.upper << "]";
    out.meta["perturbation"] = desc.str();
    return out;
}

std::map<Kind, SeverityRange> load_severity_ranges(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open severity-range config '" + path + "'");
    std::map<Kind, SeverityRange> ranges;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string name;
        double lo = 0.0, hi = 0.0;
        if (!(ss >> name >> lo >> hi)) {
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected 'kind lower upper'");
        }
        std::string extra;
        if (ss >> extra) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": trailing token '" +
                              extra + "'");
        }
        const Kind kind = kind_from_name(name);
        if (lo > hi) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": lower > upper");
        }
        if (ranges.count(kind)) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate kind '" +
                              name + "'");
        }
        ranges[kind] = {lo, hi};
    }
    return ranges;
}

void save_severity_ranges(const std::map<Kind, SeverityRange>& ranges, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write severity-range config '" + path + "'");
    for (const auto& [kind, range] : ranges) {
        out << kind_name(kind) << ' ' << range.lower << ' ' << range.upper << '\n';
    }
    if (!out) throw IoError("short write to '" + path + "'");
}

std::map<Kind, SeverityRange> default_severity_ranges() {
    // Placeholder spans for a 32x32 [-1,1] image; the occlusion span follows
    // the published 5-15 percent side-length convention.
    return {
        {Kind::GaussianNoise, {0.04, 0.30}},
        {Kind::SaltPepper, {0.02, 0.12}},
        {Kind::Speckle, {0.08, 0.50}},
        {Kind::DefocusBlur, {1.0, 2.5}},
        {Kind::MotionBlur, {2.0, 5.0}},
        {Kind::ZoomBlur, {0.08, 0.35}},
        {Kind::GlassBlur, {0.5, 1.5}},
        {Kind::Rotation, {5.0, 40.0}},
        {Kind::Translation, {0.05, 0.25}},
        {Kind::VerticalFlip, {1.0, 1.0}},
        {Kind::Occlusion, {0.05, 0.15}},
        {Kind::Brightness, {0.10, 0.50}},
        {Kind::Contrast, {0.20, 0.70}},
        {Kind::Colorimetry, {0.15, 0.60}},
        {Kind::Interference, {0.10, 0.45}},
        {Kind::Quantization, {0.10, 0.50}},
    };
}

} // namespace pb::perturb
