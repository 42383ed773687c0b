#pragma once

#include <cstdint>
#include <string>

#include "image.hpp"
#include "nn.hpp"

namespace pb::attack {

enum class AttackKind { Fgsm, Pgd };
enum class TargetMode { Untargeted, LeastLikely };
enum class Box { White, Black };

struct EpsilonPolicy {
    enum class Mode { Fixed, PerSampleUniform };
    Mode mode = Mode::Fixed;
    double value = 0.0; // Fixed
    double lo = 0.0;    // PerSampleUniform
    double hi = 0.0;

    static EpsilonPolicy fixed(double eps) {
        EpsilonPolicy p;
        p.value = eps;
        return p;
    }
    static EpsilonPolicy uniform(double lo, double hi) {
        EpsilonPolicy p;
        p.mode = Mode::PerSampleUniform;
        p.lo = lo;
        p.hi = hi;
        return p;
    }
};

struct Config {
    AttackKind kind = AttackKind::Fgsm;
    TargetMode target = TargetMode::Untargeted;
    EpsilonPolicy eps;
    int steps = 1; // PGD iteration count; FGSM requires 1
    Box box = Box::White;
};

// Which model supplies the gradients. Black box means the gradients come from
// a different model than the one being evaluated; that distinction is
// enforced where attacked datasets meet an evaluation model.
struct GradientSource {
    const nn::Model* model = nullptr;
    Box box = Box::White;
};

// Index of the minimum logit on the clean input; ties go to the lowest index.
int least_likely_label(const nn::Model& model, const Image& image);

// Single-step sign attack. Untargeted ascends the loss at the true label;
// least-likely descends the loss at the lowest-scoring label (computed from
// the clean input). Requires a fixed-epsilon config; the per-pixel deviation
// from the input never exceeds epsilon, exactly, and the output stays in
// [-1, 1]. sign(0) = 0, so zero-gradient pixels are left untouched.
Image fgsm(const GradientSource& source, const Image& image, int label, const Config& config);

// Iterative variant: `steps` rounds of magnitude epsilon/steps, gradient
// recomputed on the current iterate, per-round and total budgets both
// enforced. With steps = 1 this is bitwise identical to fgsm.
Image pgd(const GradientSource& source, const Image& image, int label, const Config& config);

// Attacks every sample; labels are retained for accuracy measurement.
// Per-sample epsilons (when the policy is uniform) derive from (seed, index).
Dataset attack_dataset(const GradientSource& source, const Dataset& dataset, const Config& config,
                       uint64_t seed);

// Serialized form used in experiment configs and manifests:
//   "<fgsm|pgd> <untargeted|least_likely> eps=<fixed V|range LO HI> steps=<N> box=<white|black>"
Config parse_attack_spec(const std::string& line);
std::string attack_spec_string(const Config& config);

// Row/column label: fgsm, fgsm_ll, pgd, or pgd_ll.
std::string attack_name(const Config& config);

} // namespace pb::attack
