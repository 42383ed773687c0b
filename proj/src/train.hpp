#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "attack.hpp"
#include "image.hpp"
#include "nn.hpp"
#include "perturb.hpp"

namespace pb::train {

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 0.0001;
    int32_t batch_size = 128;
    double plateau_division = 10.0;
    int32_t epochs = 0;
    uint64_t seed = 0;
};

// Plateau rule: a training-accuracy improvement below 0.5% absolute for three
// consecutive epochs divides the learning rate; at most two divisions.
inline constexpr double kPlateauMinImprove = 0.005;
inline constexpr int kPlateauPatience = 3;
inline constexpr int kPlateauMaxDrops = 2;

// How training batches are augmented. With probability `p_perturb` a sample
// is replaced by a perturbed (or adversarial) version, otherwise it stays
// clean. Adversarial examples are crafted against the model being trained,
// fresh every epoch.
struct AugmentationPolicy {
    enum class Mode { Identity, Common, LeaveOneOut, Adversarial };
    Mode mode = Mode::Identity;
    std::vector<perturb::Kind> kinds; // effective set; LeaveOneOut already excludes
    perturb::Kind excluded = perturb::Kind::GaussianNoise;
    bool has_excluded = false;
    double p_perturb = 0.5;
    attack::Config attack_config;
    std::map<perturb::Kind, perturb::SeverityRange> ranges;

    static AugmentationPolicy identity() { return {}; }
};

// Parses a manifest policy line:
//   identity
//   common p=0.5 kinds=<benchmark|all|k1,k2,...>
//   leave_one_out p=0.5 kinds=benchmark exclude=<kind>
//   adversarial p=0.5 <attack spec>
// `ranges` supplies the severity span per kind; every kind in the policy must
// be present.
AugmentationPolicy parse_policy(const std::string& line,
                                const std::map<perturb::Kind, perturb::SeverityRange>& ranges);

// `lr=0.01 wd=0.0001 batch=128 epochs=40 plateau_div=10 [seed=N]`, strict.
TrainConfig parse_train_config(const std::string& line);

struct EpochStats {
    int32_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0; // over the (augmented) training batches of the epoch
    double learning_rate = 0.0;
};

// Per-epoch instrumentation of what the policy actually did.
struct AugmentationLog {
    std::vector<std::map<perturb::Kind, int>> kind_counts;
    std::vector<int> attack_invocations;
    std::vector<int> clean_samples;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    AugmentationLog augmentation;
};

// In-place SGD training; single writer, fully deterministic for a fixed
// config seed. Throws NumericError naming the epoch if the loss goes
// non-finite.
TrainLog sgd_train(nn::Model& model, const Dataset& dataset, const TrainConfig& config,
                   const AugmentationPolicy& policy);

// Fraction of samples whose argmax logit (ties to the lowest index) matches
// the label. Parallel across samples.
double evaluate_accuracy(const nn::Model& model, const Dataset& dataset);

} // namespace pb::train
