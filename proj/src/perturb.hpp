#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "image.hpp"

namespace pb::perturb {

enum class Kind : int {
    GaussianNoise = 0,
    SaltPepper,
    Speckle,
    DefocusBlur,
    MotionBlur,
    ZoomBlur,
    GlassBlur,
    Rotation,
    Translation,
    VerticalFlip,
    Occlusion,
    Brightness,
    Contrast,
    Colorimetry,
    Interference,
    Quantization,
};

const char* kind_name(Kind kind);
Kind kind_from_name(const std::string& name);

// Every implemented kind, in declaration order.
const std::vector<Kind>& all_kinds();

// The ten retained benchmark perturbations, in report column order:
// noise, interference, occlusion, blur, contrast, brightness, colorimetry,
// translation, rotation, flip.
const std::vector<Kind>& benchmark_kinds();

// Severity units are kind-specific: sigma for noises, kernel radius / length
// in pixels for blurs, degrees for rotation, fraction of the side length for
// translation and occlusion, gain offset for the photometric kinds, amplitude
// for interference, 1/levels for quantization. Flip is parameterless and uses
// the degenerate range [1, 1].
struct SeverityRange {
    double lower = 0.0;
    double upper = 0.0;
};

struct Spec {
    Kind kind = Kind::GaussianNoise;
    SeverityRange range;
    uint64_t seed = 0;
};

struct SeverityPolicy {
    enum class Mode { Fixed, PerSampleUniform };
    Mode mode = Mode::PerSampleUniform;
    double fixed = 0.0;

    static SeverityPolicy fixed_at(double s) { return {Mode::Fixed, s}; }
    static SeverityPolicy uniform() { return {Mode::PerSampleUniform, 0.0}; }
};

// Applies one perturbation. Pure function of (kind, severity, image, seed);
// output is clamped to [-1, 1] and has the input's shape. Severity 0 returns
// the input bitwise for every kind except vertical_flip, which ignores its
// severity and always flips.
Image apply(Kind kind, double severity, const Image& image, uint64_t seed);

// Uniform draw from [lower, upper]; [a, a] returns a exactly.
double sample_severity(const SeverityRange& range, uint64_t seed);

// Labels pass through untouched; the per-sample seed is derived from
// (spec.seed, sample index) and is independent of the severity, so raising
// the severity rescales the same draw rather than redrawing.
Dataset perturb_dataset(const Dataset& dataset, const Spec& spec, const SeverityPolicy& policy);

// Severity-range config file: one `kind lower upper` line per kind, strict.
std::map<Kind, SeverityRange> load_severity_ranges(const std::string& path);
void save_severity_ranges(const std::map<Kind, SeverityRange>& ranges, const std::string& path);

// Shipped defaults. Placeholders pending a calibrate run; regenerate with the
// calibrate subcommand against a trained model.
std::map<Kind, SeverityRange> default_severity_ranges();

} // namespace pb::perturb
