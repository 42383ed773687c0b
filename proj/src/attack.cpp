#include "attack.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "common.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace pb::attack {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Moves `v` toward `anchor` until the float-rounded displacement is within
// `budget`. IEEE rounding of v = anchor + delta can overshoot by one ulp;
// this makes the contract |v - anchor| <= budget hold exactly.
float enforce_budget(float v, float anchor, double budget) {
    while (std::fabs(static_cast<double>(v) - static_cast<double>(anchor)) > budget) {
        v = std::nextafterf(v, anchor);
    }
    return v;
}

void validate_config(const Config& config) {
    if (config.kind == AttackKind::Fgsm && config.steps != 1) {
        throw ConfigError("fgsm requires steps=1");
    }
    if (config.steps < 1) throw ConfigError("attack steps must be >= 1");
    auto check_eps = [](double e) {
        if (!std::isfinite(e) || e < 0.0 || e > 2.0) {
            throw ConfigError("epsilon " + std::to_string(e) + " outside [0, 2]");
        }
    };
    if (config.eps.mode == EpsilonPolicy::Mode::Fixed) {
        check_eps(config.eps.value);
    } else {
        check_eps(config.eps.lo);
        check_eps(config.eps.hi);
        if (config.eps.lo > config.eps.hi) throw ConfigError("epsilon range lo > hi");
    }
}

Image craft(const nn::Model& model, const Image& image, int label, TargetMode target,
            double epsilon, int steps) {
    if (epsilon == 0.0) return image;
    // Least-likely target is fixed from the clean input and held across
    // iterations; the step direction flips to descend its loss.
    int used_label = label;
    double direction = 1.0;
    if (target == TargetMode::LeastLikely) {
        used_label = least_likely_label(model, image);
        direction = -1.0;
    }
    const double step = epsilon / steps;
    Image current = image;
    for (int k = 0; k < steps; ++k) {
        nn::InputGrad grad;
        nn::loss_and_input_grad(model, current, used_label, &grad);
        Image next = current;
        for (size_t i = 0; i < next.data.size(); ++i) {
            const double delta = direction * step * sign_of(grad.values[i]);
            const double moved =
                std::clamp(static_cast<double>(current.data[i]) + delta, -1.0, 1.0);
            float v = static_cast<float>(moved);
            v = std::clamp(v, -1.0f, 1.0f);
            next.data[i] = enforce_budget(v, current.data[i], step);
        }
        current = std::move(next);
    }
    // Total L-inf budget against the original sample.
    for (size_t i = 0; i < current.data.size(); ++i) {
        current.data[i] = enforce_budget(current.data[i], image.data[i], epsilon);
    }
    return current;
}

} // namespace

int least_likely_label(const nn::Model& model, const Image& image) {
    return nn::argmin_lowest(nn::forward(model, image));
}

Image fgsm(const GradientSource& source, const Image& image, int label, const Config& config) {
    validate_config(config);
    if (config.kind != AttackKind::Fgsm) throw ConfigError("fgsm called with a pgd config");
    if (config.eps.mode != EpsilonPolicy::Mode::Fixed) {
        throw ConfigError("single-image attacks need a fixed epsilon");
    }
    return craft(*source.model, image, label, config.target, config.eps.value, 1);
}

Image pgd(const GradientSource& source, const Image& image, int label, const Config& config) {
    validate_config(config);
    if (config.kind != AttackKind::Pgd) throw ConfigError("pgd called with a fgsm config");
    if (config.eps.mode != EpsilonPolicy::Mode::Fixed) {
        throw ConfigError("single-image attacks need a fixed epsilon");
    }
    return craft(*source.model, image, label, config.target, config.eps.value, config.steps);
}

Dataset attack_dataset(const GradientSource& source, const Dataset& dataset, const Config& config,
                       uint64_t seed) {
    validate_config(config);
    if (dataset.empty()) throw ConfigError("attack_dataset: empty dataset");
    Dataset out = dataset;
    parallel_for(dataset.size(), [&](size_t i) {
        double eps = config.eps.value;
        if (config.eps.mode == EpsilonPolicy::Mode::PerSampleUniform) {
            Rng rng(derive_seed(seed, {3, i}));
            eps = rng.uniform(config.eps.lo, config.eps.hi);
        }
        out.images[i] = craft(*source.model, dataset.images[i], dataset.labels[i], config.target,
                              eps, config.steps);
    });
    out.meta["attack"] = attack_spec_string(config) + " seed=" + std::to_string(seed);
    return out;
}

Config parse_attack_spec(const std::string& line) {
    std::istringstream ss(line);
    std::string kind, target;
    if (!(ss >> kind >> target)) {
        throw ConfigError("attack spec needs '<fgsm|pgd> <untargeted|least_likely> ...': '" +
                          line + "'");
    }
    Config config;
    if (kind == "fgsm") {
        config.kind = AttackKind::Fgsm;
    } else if (kind == "pgd") {
        config.kind = AttackKind::Pgd;
    } else {
        throw ConfigError("unknown attack kind '" + kind + "'");
    }
    if (target == "untargeted") {
        config.target = TargetMode::Untargeted;
    } else if (target == "least_likely") {
        config.target = TargetMode::LeastLikely;
    } else {
        throw ConfigError("unknown attack target '" + target + "'");
    }
    bool saw_eps = false;
    std::string token;
    while (ss >> token) {
        if (token == "eps=fixed") {
            if (!(ss >> config.eps.value)) throw ConfigError("eps=fixed needs a value");
            config.eps.mode = EpsilonPolicy::Mode::Fixed;
            saw_eps = true;
        } else if (token == "eps=range") {
            if (!(ss >> config.eps.lo >> config.eps.hi)) {
                throw ConfigError("eps=range needs two bounds");
            }
            config.eps.mode = EpsilonPolicy::Mode::PerSampleUniform;
            saw_eps = true;
        } else if (token.rfind("steps=", 0) == 0) {
            config.steps = std::stoi(token.substr(6));
        } else if (token == "box=white") {
            config.box = Box::White;
        } else if (token == "box=black") {
            config.box = Box::Black;
        } else {
            throw ConfigError("unknown attack spec token '" + token + "'");
        }
    }
    if (!saw_eps) throw ConfigError("attack spec is missing eps=");
    validate_config(config);
    return config;
}

std::string attack_spec_string(const Config& config) {
    std::ostringstream ss;
    ss << (config.kind == AttackKind::Fgsm ? "fgsm" : "pgd") << ' '
       << (config.target == TargetMode::Untargeted ? "untargeted" : "least_likely") << ' ';
    if (config.eps.mode == EpsilonPolicy::Mode::Fixed) {
        ss << "eps=fixed " << config.eps.value;
    } else {
        ss << "eps=range " << config.eps.lo << ' ' << config.eps.hi;
    }
    ss << " steps=" << config.steps << " box=" << (config.box == Box::White ? "white" : "black");
    return ss.str();
}

std::string attack_name(const Config& config) {
    std::string name = config.kind == AttackKind::Fgsm ? "fgsm" : "pgd";
    if (config.target == TargetMode::LeastLikely) name += "_ll";
    return name;
}

} // namespace pb::attack
