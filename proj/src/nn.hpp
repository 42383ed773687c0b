#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace pb::nn {

struct Shape3 {
    int32_t height = 0;
    int32_t width = 0;
    int32_t channels = 0;

    int64_t count() const {
        return static_cast<int64_t>(height) * width * channels;
    }
    bool operator==(const Shape3&) const = default;
};

enum class LayerKind { Conv, Relu, Tanh, MaxPool, Flatten, Fc };

// One layer of a sequential classifier. Weights are stored as f32, exactly the
// checkpoint representation; all arithmetic promotes to double.
struct Layer {
    LayerKind kind = LayerKind::Relu;
    int32_t out_channels = 0; // conv
    int32_t ksize = 0;        // conv
    int32_t pad = 0;          // conv
    int32_t window = 0;       // maxpool
    int32_t out_features = 0; // fc
    Shape3 in_shape, out_shape;
    std::vector<float> weights;
    std::vector<float> bias;

    bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Fc; }
};

// Sequential differentiable classifier described by a compact layer string,
// e.g. "input 32x32x3;conv 12 3 1;relu;maxpool 2;conv 24 3 1;relu;maxpool 2;
// flatten;fc 5". The descriptor round-trips through the checkpoint format.
struct Model {
    std::string descriptor;
    Shape3 input;
    int32_t class_count = 0;
    std::vector<Layer> layers;
};

// Parses the descriptor and He-initializes conv/fc weights from `init_seed`.
Model build_model(const std::string& descriptor, uint64_t init_seed);

void zero_weights(Model& model);

// Activations are planar (channel, row, column); `acts[0]` is the converted
// input, `acts[i + 1]` the output of layer i.
struct Trace {
    std::vector<std::vector<double>> acts;
};

// Returns the K logits. Pure function of (weights, image); callable
// concurrently on a frozen model.
std::vector<double> forward(const Model& model, const Image& image, Trace* trace = nullptr);

// Ties broken by lowest index.
int argmax_lowest(const std::vector<double>& v);
int argmin_lowest(const std::vector<double>& v);

// Numerically stable log-sum-exp cross-entropy; optionally emits dL/dlogits.
double cross_entropy_from_logits(const std::vector<double>& logits, int label,
                                 std::vector<double>* dlogits = nullptr);

struct InputGrad {
    int32_t height = 0;
    int32_t width = 0;
    int32_t channels = 0;
    std::vector<double> values; // row-major, interleaved channels, image layout

    double at(int32_t y, int32_t x, int32_t ch) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + ch];
    }
};

// Cross-entropy loss and its gradient with respect to the input pixels.
double loss_and_input_grad(const Model& model, const Image& image, int label, InputGrad* grad);

struct WeightGrads {
    std::vector<std::vector<double>> weights; // aligned with model.layers
    std::vector<std::vector<double>> bias;

    static WeightGrads zeros_like(const Model& model);
};

// Single-sample loss whose weight gradients accumulate (unscaled) into `acc`;
// the logits are optionally handed back so callers can track batch accuracy
// without a second forward pass.
double sample_loss_and_grads(const Model& model, const Image& image, int32_t label,
                             WeightGrads& acc, std::vector<double>* logits_out = nullptr);

// Mean cross-entropy over the batch plus mean weight gradients.
double loss_and_weight_grads(const Model& model, const std::vector<const Image*>& images,
                             const std::vector<int32_t>& labels, WeightGrads* grads);

} // namespace pb::nn
