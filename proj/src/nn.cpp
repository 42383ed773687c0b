#include "nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "common.hpp"
#include "rng.hpp"

namespace pb::nn {

namespace {

std::vector<std::string> split_trimmed(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        parts.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    return parts;
}

[[noreturn]] void bad_descriptor(const std::string& descriptor, const std::string& why) {
    throw ConfigError("bad model descriptor '" + descriptor + "': " + why);
}

Shape3 parse_input_shape(const std::string& token, const std::string& descriptor) {
    Shape3 s;
    char x1 = 0, x2 = 0;
    std::istringstream ss(token);
    if (!(ss >> s.height >> x1 >> s.width >> x2 >> s.channels) || x1 != 'x' || x2 != 'x') {
        bad_descriptor(descriptor, "input shape must be HxWxC, got '" + token + "'");
    }
    if (s.height < 1 || s.width < 1 || (s.channels != 1 && s.channels != 3)) {
        bad_descriptor(descriptor, "unsupported input shape '" + token + "'");
    }
    return s;
}

size_t conv_widx(const Layer& l, int o, int i, int ky, int kx) {
    return ((static_cast<size_t>(o) * l.in_shape.channels + i) * l.ksize + ky) * l.ksize + kx;
}

size_t plane_idx(const Shape3& s, int c, int y, int x) {
    return (static_cast<size_t>(c) * s.height + y) * s.width + x;
}

void conv_forward(const Layer& l, const std::vector<double>& in, std::vector<double>& out) {
    const Shape3& is = l.in_shape;
    const Shape3& os = l.out_shape;
    for (int o = 0; o < os.channels; ++o) {
        for (int y = 0; y < os.height; ++y) {
            for (int x = 0; x < os.width; ++x) {
                double acc = l.bias[o];
                for (int i = 0; i < is.channels; ++i) {
                    for (int ky = 0; ky < l.ksize; ++ky) {
                        const int yy = y + ky - l.pad;
                        if (yy < 0 || yy >= is.height) continue;
                        for (int kx = 0; kx < l.ksize; ++kx) {
                            const int xx = x + kx - l.pad;
                            if (xx < 0 || xx >= is.width) continue;
                            acc += static_cast<double>(l.weights[conv_widx(l, o, i, ky, kx)]) *
                                   in[plane_idx(is, i, yy, xx)];
                        }
                    }
                }
                out[plane_idx(os, o, y, x)] = acc;
            }
        }
    }
}

void conv_backward(const Layer& l, const std::vector<double>& in, const std::vector<double>& dout,
                   std::vector<double>& din, std::vector<double>* dweights,
                   std::vector<double>* dbias) {
    const Shape3& is = l.in_shape;
    const Shape3& os = l.out_shape;
    for (int o = 0; o < os.channels; ++o) {
        for (int y = 0; y < os.height; ++y) {
            for (int x = 0; x < os.width; ++x) {
                const double g = dout[plane_idx(os, o, y, x)];
                if (dbias) (*dbias)[o] += g;
                for (int i = 0; i < is.channels; ++i) {
                    for (int ky = 0; ky < l.ksize; ++ky) {
                        const int yy = y + ky - l.pad;
                        if (yy < 0 || yy >= is.height) continue;
                        for (int kx = 0; kx < l.ksize; ++kx) {
                            const int xx = x + kx - l.pad;
                            if (xx < 0 || xx >= is.width) continue;
                            const size_t pi = plane_idx(is, i, yy, xx);
                            if (dweights)
                                (*dweights)[conv_widx(l, o, i, ky, kx)] += g * in[pi];
                            din[pi] +=
                                g * static_cast<double>(l.weights[conv_widx(l, o, i, ky, kx)]);
                        }
                    }
                }
            }
        }
    }
}

void fc_forward(const Layer& l, const std::vector<double>& in, std::vector<double>& out) {
    const size_t n = in.size();
    for (int j = 0; j < l.out_features; ++j) {
        double acc = l.bias[j];
        const size_t base = static_cast<size_t>(j) * n;
        for (size_t i = 0; i < n; ++i) acc += static_cast<double>(l.weights[base + i]) * in[i];
        out[j] = acc;
    }
}

void fc_backward(const Layer& l, const std::vector<double>& in, const std::vector<double>& dout,
                 std::vector<double>& din, std::vector<double>* dweights,
                 std::vector<double>* dbias) {
    const size_t n = in.size();
    for (int j = 0; j < l.out_features; ++j) {
        const double g = dout[j];
        if (dbias) (*dbias)[j] += g;
        const size_t base = static_cast<size_t>(j) * n;
        for (size_t i = 0; i < n; ++i) {
            if (dweights) (*dweights)[base + i] += g * in[i];
            din[i] += g * static_cast<double>(l.weights[base + i]);
        }
    }
}

void maxpool_forward(const Layer& l, const std::vector<double>& in, std::vector<double>& out) {
    const Shape3& is = l.in_shape;
    const Shape3& os = l.out_shape;
    for (int c = 0; c < os.channels; ++c) {
        for (int oy = 0; oy < os.height; ++oy) {
            for (int ox = 0; ox < os.width; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                for (int dy = 0; dy < l.window; ++dy)
                    for (int dx = 0; dx < l.window; ++dx) {
                        const double v =
                            in[plane_idx(is, c, oy * l.window + dy, ox * l.window + dx)];
                        if (v > best) best = v;
                    }
                out[plane_idx(os, c, oy, ox)] = best;
            }
        }
    }
}

void maxpool_backward(const Layer& l, const std::vector<double>& in,
                      const std::vector<double>& dout, std::vector<double>& din) {
    const Shape3& is = l.in_shape;
    const Shape3& os = l.out_shape;
    for (int c = 0; c < os.channels; ++c) {
        for (int oy = 0; oy < os.height; ++oy) {
            for (int ox = 0; ox < os.width; ++ox) {
                // Gradient routes to the first maximum in scan order.
                double best = -std::numeric_limits<double>::infinity();
                size_t best_idx = 0;
                for (int dy = 0; dy < l.window; ++dy)
                    for (int dx = 0; dx < l.window; ++dx) {
                        const size_t pi =
                            plane_idx(is, c, oy * l.window + dy, ox * l.window + dx);
                        if (in[pi] > best) {
                            best = in[pi];
                            best_idx = pi;
                        }
                    }
                din[best_idx] += dout[plane_idx(os, c, oy, ox)];
            }
        }
    }
}

std::vector<double> image_to_planar(const Image& image) {
    std::vector<double> planar(image.value_count());
    const Shape3 s{image.height, image.width, image.channels};
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                planar[plane_idx(s, c, y, x)] = static_cast<double>(image.at(y, x, c));
    return planar;
}

void check_input_shape(const Model& model, const Image& image) {
    if (image.height != model.input.height || image.width != model.input.width ||
        image.channels != model.input.channels) {
        throw FormatError("input shape " + std::to_string(image.height) + "x" +
                          std::to_string(image.width) + "x" + std::to_string(image.channels) +
                          " does not match model input " + std::to_string(model.input.height) +
                          "x" + std::to_string(model.input.width) + "x" +
                          std::to_string(model.input.channels));
    }
}

// Backprop through the whole stack. Returns dL/d(planar input).
std::vector<double> backward(const Model& model, const Trace& trace, std::vector<double> grad,
                             WeightGrads* wgrads) {
    for (size_t li = model.layers.size(); li-- > 0;) {
        const Layer& l = model.layers[li];
        const std::vector<double>& in = trace.acts[li];
        const std::vector<double>& out = trace.acts[li + 1];
        std::vector<double> din(in.size(), 0.0);
        std::vector<double>* dw = nullptr;
        std::vector<double>* db = nullptr;
        if (wgrads && l.has_params()) {
            dw = &wgrads->weights[li];
            db = &wgrads->bias[li];
        }
        switch (l.kind) {
            case LayerKind::Conv:
                conv_backward(l, in, grad, din, dw, db);
                break;
            case LayerKind::Fc:
                fc_backward(l, in, grad, din, dw, db);
                break;
            case LayerKind::Relu:
                for (size_t i = 0; i < in.size(); ++i) din[i] = in[i] > 0.0 ? grad[i] : 0.0;
                break;
            case LayerKind::Tanh:
                for (size_t i = 0; i < in.size(); ++i) din[i] = (1.0 - out[i] * out[i]) * grad[i];
                break;
            case LayerKind::MaxPool:
                maxpool_backward(l, in, grad, din);
                break;
            case LayerKind::Flatten:
                din = grad;
                break;
        }
        grad = std::move(din);
    }
    return grad;
}

} // namespace

Model build_model(const std::string& descriptor, uint64_t init_seed) {
    Model model;
    model.descriptor = descriptor;
    const auto parts = split_trimmed(descriptor, ';');
    if (parts.empty()) bad_descriptor(descriptor, "empty");

    Shape3 shape;
    bool have_input = false;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        if (parts[pi].empty()) bad_descriptor(descriptor, "empty layer entry");
        std::istringstream ss(parts[pi]);
        std::string op;
        ss >> op;
        if (pi == 0) {
            std::string shape_token;
            if (op != "input" || !(ss >> shape_token)) {
                bad_descriptor(descriptor, "must start with 'input HxWxC'");
            }
            shape = parse_input_shape(shape_token, descriptor);
            model.input = shape;
            have_input = true;
            continue;
        }
        if (!have_input) bad_descriptor(descriptor, "layer before input");

        Layer layer;
        layer.in_shape = shape;
        if (op == "conv") {
            layer.kind = LayerKind::Conv;
            if (!(ss >> layer.out_channels >> layer.ksize >> layer.pad)) {
                bad_descriptor(descriptor, "conv needs 'conv OUT K PAD'");
            }
            if (layer.out_channels < 1 || layer.ksize < 1 || layer.pad < 0) {
                bad_descriptor(descriptor, "bad conv parameters");
            }
            layer.out_shape = {shape.height + 2 * layer.pad - layer.ksize + 1,
                               shape.width + 2 * layer.pad - layer.ksize + 1,
                               layer.out_channels};
            if (layer.out_shape.height < 1 || layer.out_shape.width < 1) {
                bad_descriptor(descriptor, "conv output collapses to zero size");
            }
            layer.weights.assign(static_cast<size_t>(layer.out_channels) * shape.channels *
                                     layer.ksize * layer.ksize,
                                 0.0f);
            layer.bias.assign(layer.out_channels, 0.0f);
        } else if (op == "relu") {
            layer.kind = LayerKind::Relu;
            layer.out_shape = shape;
        } else if (op == "tanh") {
            layer.kind = LayerKind::Tanh;
            layer.out_shape = shape;
        } else if (op == "maxpool") {
            layer.kind = LayerKind::MaxPool;
            if (!(ss >> layer.window) || layer.window < 1) {
                bad_descriptor(descriptor, "maxpool needs a window size");
            }
            layer.out_shape = {shape.height / layer.window, shape.width / layer.window,
                               shape.channels};
            if (layer.out_shape.height < 1 || layer.out_shape.width < 1) {
                bad_descriptor(descriptor, "maxpool output collapses to zero size");
            }
        } else if (op == "flatten") {
            layer.kind = LayerKind::Flatten;
            layer.out_shape = {1, 1, static_cast<int32_t>(shape.count())};
        } else if (op == "fc") {
            layer.kind = LayerKind::Fc;
            if (!(ss >> layer.out_features) || layer.out_features < 1) {
                bad_descriptor(descriptor, "fc needs an output size");
            }
            layer.out_shape = {1, 1, layer.out_features};
            layer.weights.assign(static_cast<size_t>(layer.out_features) * shape.count(), 0.0f);
            layer.bias.assign(layer.out_features, 0.0f);
        } else {
            bad_descriptor(descriptor, "unknown layer '" + op + "'");
        }
        std::string extra;
        if (ss >> extra) bad_descriptor(descriptor, "trailing token '" + extra + "'");
        shape = layer.out_shape;
        model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty() || model.layers.back().kind != LayerKind::Fc) {
        bad_descriptor(descriptor, "must end with an fc layer");
    }
    model.class_count = model.layers.back().out_features;
    if (model.class_count < 2) bad_descriptor(descriptor, "class count must be >= 2");

    // He-scaled normal init, one stream per parameterized layer.
    for (size_t li = 0; li < model.layers.size(); ++li) {
        Layer& l = model.layers[li];
        if (!l.has_params()) continue;
        const int64_t fan_in = l.kind == LayerKind::Conv
                                   ? static_cast<int64_t>(l.in_shape.channels) * l.ksize * l.ksize
                                   : l.in_shape.count();
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        Rng rng(derive_seed(init_seed, {0xA11, li}));
        for (float& w : l.weights) w = static_cast<float>(scale * rng.normal());
    }
    return model;
}

void zero_weights(Model& model) {
    for (Layer& l : model.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0f);
        std::fill(l.bias.begin(), l.bias.end(), 0.0f);
    }
}

std::vector<double> forward(const Model& model, const Image& image, Trace* trace) {
    check_input_shape(model, image);
    Trace local;
    Trace& tr = trace ? *trace : local;
    tr.acts.clear();
    tr.acts.reserve(model.layers.size() + 1);
    tr.acts.push_back(image_to_planar(image));

    for (const Layer& l : model.layers) {
        const std::vector<double>& in = tr.acts.back();
        std::vector<double> out(static_cast<size_t>(l.out_shape.count()), 0.0);
        switch (l.kind) {
            case LayerKind::Conv: conv_forward(l, in, out); break;
            case LayerKind::Fc: fc_forward(l, in, out); break;
            case LayerKind::Relu:
                for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
                break;
            case LayerKind::Tanh:
                for (size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
                break;
            case LayerKind::MaxPool: maxpool_forward(l, in, out); break;
            case LayerKind::Flatten: out = in; break;
        }
        tr.acts.push_back(std::move(out));
    }
    return tr.acts.back();
}

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

int argmin_lowest(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

double cross_entropy_from_logits(const std::vector<double>& logits, int label,
                                 std::vector<double>* dlogits) {
    if (label < 0 || label >= static_cast<int>(logits.size())) {
        throw ConfigError("label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    if (dlogits) {
        dlogits->resize(logits.size());
        for (size_t i = 0; i < logits.size(); ++i) {
            (*dlogits)[i] = std::exp(logits[i] - lse) - (static_cast<int>(i) == label ? 1.0 : 0.0);
        }
    }
    return lse - logits[label];
}

double loss_and_input_grad(const Model& model, const Image& image, int label, InputGrad* grad) {
    Trace trace;
    const std::vector<double> logits = forward(model, image, &trace);
    std::vector<double> dlogits;
    const double loss = cross_entropy_from_logits(logits, label, &dlogits);
    if (grad) {
        const std::vector<double> planar = backward(model, trace, std::move(dlogits), nullptr);
        grad->height = image.height;
        grad->width = image.width;
        grad->channels = image.channels;
        grad->values.assign(image.value_count(), 0.0);
        const Shape3 s{image.height, image.width, image.channels};
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x)
                for (int c = 0; c < image.channels; ++c)
                    grad->values[image.idx(y, x, c)] = planar[plane_idx(s, c, y, x)];
    }
    return loss;
}

WeightGrads WeightGrads::zeros_like(const Model& model) {
    WeightGrads g;
    g.weights.resize(model.layers.size());
    g.bias.resize(model.layers.size());
    for (size_t li = 0; li < model.layers.size(); ++li) {
        g.weights[li].assign(model.layers[li].weights.size(), 0.0);
        g.bias[li].assign(model.layers[li].bias.size(), 0.0);
    }
    return g;
}

double sample_loss_and_grads(const Model& model, const Image& image, int32_t label,
                             WeightGrads& acc, std::vector<double>* logits_out) {
    Trace trace;
    std::vector<double> logits = forward(model, image, &trace);
    std::vector<double> dlogits;
    const double loss = cross_entropy_from_logits(logits, label, &dlogits);
    backward(model, trace, std::move(dlogits), &acc);
    if (logits_out) *logits_out = std::move(logits);
    return loss;
}

double loss_and_weight_grads(const Model& model, const std::vector<const Image*>& images,
                             const std::vector<int32_t>& labels, WeightGrads* grads) {
    if (images.empty()) throw ConfigError("loss_and_weight_grads: empty batch");
    if (images.size() != labels.size()) {
        throw ConfigError("loss_and_weight_grads: image/label count mismatch");
    }
    WeightGrads acc = WeightGrads::zeros_like(model);
    double loss_sum = 0.0;
    for (size_t i = 0; i < images.size(); ++i) {
        loss_sum += sample_loss_and_grads(model, *images[i], labels[i], acc);
    }
    const double inv = 1.0 / static_cast<double>(images.size());
    if (grads) {
        for (auto& g : acc.weights)
            for (double& v : g) v *= inv;
        for (auto& g : acc.bias)
            for (double& v : g) v *= inv;
        *grads = std::move(acc);
    }
    return loss_sum * inv;
}

} // namespace pb::nn
