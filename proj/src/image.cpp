#include "image.hpp"

#include <cmath>

#include "common.hpp"

namespace pb {

void validate_image(const Image& img, const std::string& context) {
    if (img.height <= 0 || img.width <= 0 || (img.channels != 1 && img.channels != 3)) {
        throw FormatError(context + ": bad image shape " + std::to_string(img.height) + "x" +
                          std::to_string(img.width) + "x" + std::to_string(img.channels));
    }
    if (img.data.size() != img.value_count()) {
        throw FormatError(context + ": data length " + std::to_string(img.data.size()) +
                          " does not match shape");
    }
    for (float v : img.data) {
        if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
            throw FormatError(context + ": pixel value " + std::to_string(v) +
                              " outside [-1, 1]");
        }
    }
}

void validate_dataset(const Dataset& ds, const std::string& context) {
    if (ds.images.size() != ds.labels.size()) {
        throw FormatError(context + ": image/label count mismatch");
    }
    if (ds.class_count < 1) throw FormatError(context + ": class_count must be >= 1");
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const Image& img = ds.images[i];
        if (img.height != ds.height || img.width != ds.width || img.channels != ds.channels) {
            throw FormatError(context + ": sample " + std::to_string(i) +
                              " shape differs from dataset header");
        }
        validate_image(img, context + " sample " + std::to_string(i));
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.class_count) {
            throw FormatError(context + ": label " + std::to_string(ds.labels[i]) +
                              " outside [0, " + std::to_string(ds.class_count) + ")");
        }
    }
}

} // namespace pb
