#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pb {

// H x W x C pixel grid, row-major with interleaved channels, values in [-1, 1].
// Pixels are stored as f32 to match the on-disk formats; numeric kernels
// promote to double internally.
struct Image {
    int32_t height = 0;
    int32_t width = 0;
    int32_t channels = 0;
    std::vector<float> data;

    static Image zeros(int32_t h, int32_t w, int32_t c) {
        Image img;
        img.height = h;
        img.width = w;
        img.channels = c;
        img.data.assign(static_cast<size_t>(h) * w * c, 0.0f);
        return img;
    }

    size_t idx(int32_t y, int32_t x, int32_t ch) const {
        return (static_cast<size_t>(y) * width + static_cast<size_t>(x)) * channels + ch;
    }
    float at(int32_t y, int32_t x, int32_t ch) const { return data[idx(y, x, ch)]; }
    float& at(int32_t y, int32_t x, int32_t ch) { return data[idx(y, x, ch)]; }

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    size_t value_count() const { return pixel_count() * channels; }

    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Throws FormatError if a pixel is non-finite or outside [-1, 1], or if the
// buffer length does not match the declared shape.
void validate_image(const Image& img, const std::string& context);

// Images plus integer class labels. All images share one shape; labels lie in
// [0, class_count). `meta` carries provenance key/value pairs that travel with
// the dataset file.
struct Dataset {
    int32_t height = 0;
    int32_t width = 0;
    int32_t channels = 0;
    int32_t class_count = 0;
    std::vector<Image> images;
    std::vector<int32_t> labels;
    std::map<std::string, std::string> meta;

    size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
};

void validate_dataset(const Dataset& ds, const std::string& context);

} // namespace pb
