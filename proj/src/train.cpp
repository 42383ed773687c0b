#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "common.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace pb::train {

namespace {

// Seed stream tags.
constexpr uint64_t kShuffleStream = 0x51;
constexpr uint64_t kAugStream = 0x52;
constexpr uint64_t kAugPixelStream = 0x53;

std::vector<perturb::Kind> parse_kind_set(const std::string& value) {
    if (value == "benchmark") return perturb::benchmark_kinds();
    if (value == "all") return perturb::all_kinds();
    std::vector<perturb::Kind> kinds;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw ConfigError("empty kind in set '" + value + "'");
        kinds.push_back(perturb::kind_from_name(item));
    }
    if (kinds.empty()) throw ConfigError("empty perturbation set");
    return kinds;
}

void require_ranges(const AugmentationPolicy& policy) {
    for (perturb::Kind kind : policy.kinds) {
        if (!policy.ranges.count(kind)) {
            throw ConfigError(std::string("no severity range configured for '") +
                              perturb::kind_name(kind) + "'");
        }
    }
}

// Applies the policy to one sample; returns the (possibly new) image and
// records what happened into the per-epoch log slots.
Image augment_sample(const AugmentationPolicy& policy, const nn::Model& model, const Image& image,
                     int32_t label, uint64_t base_seed, int epoch, size_t sample_pos,
                     std::map<perturb::Kind, int>& kind_counts, int& attack_count,
                     int& clean_count) {
    if (policy.mode == AugmentationPolicy::Mode::Identity) {
        ++clean_count;
        return image;
    }
    Rng rng(derive_seed(base_seed, {kAugStream, static_cast<uint64_t>(epoch), sample_pos}));
    if (rng.uniform01() >= policy.p_perturb) {
        ++clean_count;
        return image;
    }
    if (policy.mode == AugmentationPolicy::Mode::Adversarial) {
        ++attack_count;
        attack::Config cfg = policy.attack_config;
        double eps = cfg.eps.value;
        if (cfg.eps.mode == attack::EpsilonPolicy::Mode::PerSampleUniform) {
            eps = rng.uniform(cfg.eps.lo, cfg.eps.hi);
        }
        cfg.eps = attack::EpsilonPolicy::fixed(eps);
        const attack::GradientSource source{&model, attack::Box::White};
        return cfg.kind == attack::AttackKind::Fgsm ? attack::fgsm(source, image, label, cfg)
                                                    : attack::pgd(source, image, label, cfg);
    }
    const perturb::Kind kind =
        policy.kinds[static_cast<size_t>(rng.uniform_int(0, policy.kinds.size() - 1))];
    const perturb::SeverityRange range = policy.ranges.at(kind);
    const double severity = rng.uniform(range.lower, range.upper);
    ++kind_counts[kind];
    return perturb::apply(
        kind, severity, image,
        derive_seed(base_seed, {kAugPixelStream, static_cast<uint64_t>(epoch), sample_pos}));
}

} // namespace

AugmentationPolicy parse_policy(
    const std::string& line, const std::map<perturb::Kind, perturb::SeverityRange>& ranges) {
    std::istringstream ss(line);
    std::string mode;
    if (!(ss >> mode)) throw ConfigError("empty policy line");

    AugmentationPolicy policy;
    policy.ranges = ranges;
    if (mode == "identity") {
        std::string extra;
        if (ss >> extra) throw ConfigError("identity policy takes no arguments");
        return policy;
    }

    if (mode == "adversarial") {
        policy.mode = AugmentationPolicy::Mode::Adversarial;
        std::string ptoken;
        if (!(ss >> ptoken) || ptoken.rfind("p=", 0) != 0) {
            throw ConfigError("adversarial policy needs 'p=<prob>' then an attack spec");
        }
        policy.p_perturb = std::stod(ptoken.substr(2));
        std::string rest;
        std::getline(ss, rest);
        policy.attack_config = attack::parse_attack_spec(rest);
        if (policy.p_perturb < 0.0 || policy.p_perturb > 1.0) {
            throw ConfigError("p_perturb must lie in [0, 1]");
        }
        return policy;
    }

    if (mode != "common" && mode != "leave_one_out") {
        throw ConfigError("unknown policy mode '" + mode + "'");
    }
    policy.mode = mode == "common" ? AugmentationPolicy::Mode::Common
                                   : AugmentationPolicy::Mode::LeaveOneOut;
    std::string token;
    bool saw_kinds = false;
    while (ss >> token) {
        if (token.rfind("p=", 0) == 0) {
            policy.p_perturb = std::stod(token.substr(2));
        } else if (token.rfind("kinds=", 0) == 0) {
            policy.kinds = parse_kind_set(token.substr(6));
            saw_kinds = true;
        } else if (token.rfind("exclude=", 0) == 0) {
            policy.excluded = perturb::kind_from_name(token.substr(8));
            policy.has_excluded = true;
        } else {
            throw ConfigError("unknown policy token '" + token + "'");
        }
    }
    if (!saw_kinds) throw ConfigError("policy needs kinds=");
    if (policy.p_perturb < 0.0 || policy.p_perturb > 1.0) {
        throw ConfigError("p_perturb must lie in [0, 1]");
    }
    if (policy.mode == AugmentationPolicy::Mode::LeaveOneOut) {
        if (!policy.has_excluded) throw ConfigError("leave_one_out needs exclude=");
        const auto it = std::find(policy.kinds.begin(), policy.kinds.end(), policy.excluded);
        if (it == policy.kinds.end()) {
            throw ConfigError("excluded kind is not part of the policy set");
        }
        policy.kinds.erase(it);
        if (policy.kinds.empty()) throw ConfigError("leave_one_out removed the whole set");
    }
    require_ranges(policy);
    return policy;
}

TrainConfig parse_train_config(const std::string& line) {
    TrainConfig config;
    std::istringstream ss(line);
    std::string token;
    bool saw_epochs = false;
    while (ss >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ConfigError("bad train-config token '" + token + "'");
        const std::string key = token.substr(0, eq);
        const std::string value = token.substr(eq + 1);
        if (key == "lr") {
            config.learning_rate = std::stod(value);
        } else if (key == "wd") {
            config.weight_decay = std::stod(value);
        } else if (key == "batch") {
            config.batch_size = std::stoi(value);
        } else if (key == "epochs") {
            config.epochs = std::stoi(value);
            saw_epochs = true;
        } else if (key == "plateau_div") {
            config.plateau_division = std::stod(value);
        } else if (key == "seed") {
            config.seed = std::stoull(value);
        } else {
            throw ConfigError("unknown train-config key '" + key + "'");
        }
    }
    if (!saw_epochs) throw ConfigError("train config needs epochs=");
    if (config.learning_rate <= 0.0) throw ConfigError("learning rate must be > 0");
    if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (config.epochs < 0) throw ConfigError("epoch budget must be >= 0");
    if (config.plateau_division <= 1.0) throw ConfigError("plateau divisor must be > 1");
    return config;
}

TrainLog sgd_train(nn::Model& model, const Dataset& dataset, const TrainConfig& config,
                   const AugmentationPolicy& policy) {
    if (dataset.empty()) throw ConfigError("sgd_train: empty dataset");
    if (config.learning_rate <= 0.0) throw ConfigError("sgd_train: learning rate must be > 0");
    if (config.batch_size < 1) throw ConfigError("sgd_train: batch size must be >= 1");

    TrainLog log;
    const size_t n = dataset.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double lr = config.learning_rate;
    double best_accuracy = -1.0;
    int stall = 0;
    int drops = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with the epoch's own stream.
        Rng shuffle_rng(derive_seed(config.seed, {kShuffleStream, static_cast<uint64_t>(epoch)}));
        for (size_t i = n - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i)));
            std::swap(order[i], order[j]);
        }

        std::map<perturb::Kind, int> kind_counts;
        int attack_count = 0;
        int clean_count = 0;
        double loss_sum = 0.0;
        size_t correct = 0;

        for (size_t start = 0; start < n; start += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(n, start + static_cast<size_t>(config.batch_size));
            const size_t bsize = end - start;

            nn::WeightGrads grads = nn::WeightGrads::zeros_like(model);
            double batch_loss = 0.0;
            std::vector<double> logits;
            for (size_t bi = start; bi < end; ++bi) {
                const size_t p = order[bi];
                const Image img =
                    augment_sample(policy, model, dataset.images[p], dataset.labels[p],
                                   config.seed, epoch, p, kind_counts, attack_count, clean_count);
                batch_loss +=
                    nn::sample_loss_and_grads(model, img, dataset.labels[p], grads, &logits);
                if (nn::argmax_lowest(logits) == dataset.labels[p]) ++correct;
            }
            batch_loss /= static_cast<double>(bsize);
            loss_sum += batch_loss * static_cast<double>(bsize);
            if (!std::isfinite(batch_loss)) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                                   ": non-finite loss");
            }

            const double scale = lr / static_cast<double>(bsize);
            for (size_t li = 0; li < model.layers.size(); ++li) {
                nn::Layer& layer = model.layers[li];
                if (!layer.has_params()) continue;
                for (size_t wi = 0; wi < layer.weights.size(); ++wi) {
                    const double w = static_cast<double>(layer.weights[wi]);
                    layer.weights[wi] = static_cast<float>(
                        w - scale * grads.weights[li][wi] - lr * config.weight_decay * w);
                }
                for (size_t bi2 = 0; bi2 < layer.bias.size(); ++bi2) {
                    const double b = static_cast<double>(layer.bias[bi2]);
                    layer.bias[bi2] = static_cast<float>(b - scale * grads.bias[li][bi2]);
                }
            }
        }

        const double epoch_loss = loss_sum / static_cast<double>(n);
        const double epoch_acc = static_cast<double>(correct) / static_cast<double>(n);
        log.epochs.push_back({epoch, epoch_loss, epoch_acc, lr});
        log.augmentation.kind_counts.push_back(std::move(kind_counts));
        log.augmentation.attack_invocations.push_back(attack_count);
        log.augmentation.clean_samples.push_back(clean_count);

        if (epoch_acc >= best_accuracy + kPlateauMinImprove) {
            best_accuracy = epoch_acc;
            stall = 0;
        } else if (++stall >= kPlateauPatience && drops < kPlateauMaxDrops) {
            lr /= config.plateau_division;
            ++drops;
            stall = 0;
        }
    }
    return log;
}

double evaluate_accuracy(const nn::Model& model, const Dataset& dataset) {
    if (dataset.empty()) throw ConfigError("evaluate_accuracy: empty dataset");
    std::vector<uint8_t> hit(dataset.size(), 0);
    parallel_for(dataset.size(), [&](size_t i) {
        const std::vector<double> logits = nn::forward(model, dataset.images[i]);
        hit[i] = nn::argmax_lowest(logits) == dataset.labels[i] ? 1 : 0;
    });
    size_t correct = 0;
    for (uint8_t h : hit) correct += h;
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

} // namespace pb::train
