#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pixelstorm/error.hpp"

namespace pixelstorm {

/// H×W×C 8-bit image, row-major and channel-last:
/// index = (y·width + x)·channels + c.
class ImageTensor {
public:
    ImageTensor() = default;

    ImageTensor(std::size_t width, std::size_t height, std::size_t channels,
                std::vector<std::uint8_t> data)
        : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
        if (width_ == 0 || height_ == 0)
            throw UsageError("image dimensions must be positive");
        if (channels_ != 1 && channels_ != 3)
            throw UsageError("image must have 1 or 3 channels, got " + std::to_string(channels_));
        if (data_.size() != width_ * height_ * channels_)
            throw UsageError("image data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(width_) + "x" +
                             std::to_string(height_) + "x" + std::to_string(channels_));
    }

    /// Uniformly filled image.
    static ImageTensor filled(std::size_t width, std::size_t height, std::size_t channels,
                              std::uint8_t value = 0) {
        return ImageTensor(width, height, channels,
                           std::vector<std::uint8_t>(width * height * channels, value));
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t pixel_count() const noexcept { return width_ * height_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const std::uint8_t> data() const noexcept { return data_; }

    std::size_t offset(std::size_t x, std::size_t y) const noexcept {
        return (y * width_ + x) * channels_;
    }

    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const noexcept {
        return data_[offset(x, y) + c];
    }

    std::span<const std::uint8_t> pixel(std::size_t x, std::size_t y) const noexcept {
        return std::span<const std::uint8_t>(data_).subspan(offset(x, y), channels_);
    }

    bool same_shape(const ImageTensor& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    /// Releases the buffer so callers can build a modified copy without a second allocation.
    std::vector<std::uint8_t> release() && { return std::move(data_); }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::size_t channels_ = 0;
    std::vector<std::uint8_t> data_;
};

struct LabeledImage {
    ImageTensor image;
    std::size_t true_class = 0;
    std::string id;
};

/// Number of pixel positions where any channel differs.
inline std::size_t pixel_l0_distance(const ImageTensor& a, const ImageTensor& b) {
    if (!a.same_shape(b))
        throw UsageError("pixel_l0_distance: shape mismatch");
    std::size_t count = 0;
    for (std::size_t y = 0; y < a.height(); ++y)
        for (std::size_t x = 0; x < a.width(); ++x) {
            auto pa = a.pixel(x, y);
            auto pb = b.pixel(x, y);
            for (std::size_t c = 0; c < a.channels(); ++c)
                if (pa[c] != pb[c]) {
                    ++count;
                    break;
                }
        }
    return count;
}

/// Nearest-neighbour resize. Output (x, y) copies source
/// (floor(x·W/out_w), floor(y·H/out_h)); no interpolation.
inline ImageTensor resize_nearest(const ImageTensor& image, std::size_t out_w, std::size_t out_h) {
    if (out_w == 0 || out_h == 0)
        throw UsageError("resize_nearest: output dimensions must be >= 1");
    const std::size_t c = image.channels();
    std::vector<std::uint8_t> out(out_w * out_h * c);
    for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t sy = y * image.height() / out_h;
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t sx = x * image.width() / out_w;
            auto src = image.pixel(sx, sy);
            std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>((y * out_w + x) * c));
        }
    }
    return ImageTensor(out_w, out_h, c, std::move(out));
}

} // namespace pixelstorm
