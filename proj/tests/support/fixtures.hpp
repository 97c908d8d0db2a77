#pragma once

// Test fixtures and reference computations. Everything here recomputes
// classifier outputs from raw weights with its own loops, so it stays
// independent of the library's forward passes and perturbation code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pixelstorm/builtin.hpp"
#include "pixelstorm/image.hpp"
#include "pixelstorm/rng.hpp"

namespace fixtures {

using namespace pixelstorm;

inline ImageTensor noise_image(std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> px(w * h * c);
    for (auto& p : px)
        p = static_cast<std::uint8_t>(rng.below(256));
    return ImageTensor(w, h, c, std::move(px));
}

inline std::vector<double> reference_softmax(const std::vector<double>& z) {
    double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0;
    for (std::size_t k = 0; k < z.size(); ++k)
        s += p[k] = std::exp(z[k] - m);
    for (auto& v : p)
        v /= s;
    return p;
}

/// Logits of softmax(W·(x/255) + b), indexing pixels through (x, y, c).
inline std::vector<double> reference_linear_logits(const Matrix& w, const std::vector<float>& b,
                                                   const ImageTensor& img) {
    std::vector<double> z(w.rows);
    for (std::size_t k = 0; k < w.rows; ++k) {
        double acc = b[k];
        for (std::size_t y = 0; y < img.height(); ++y)
            for (std::size_t x = 0; x < img.width(); ++x)
                for (std::size_t c = 0; c < img.channels(); ++c)
                    acc += w(k, (y * img.width() + x) * img.channels() + c) * (img.at(x, y, c) / 255.0);
        z[k] = acc;
    }
    return z;
}

inline std::vector<double> reference_linear(const Matrix& w, const std::vector<float>& b, const ImageTensor& img) {
    return reference_softmax(reference_linear_logits(w, b, img));
}

/// conv3x3 valid → relu → mean pool → dense → softmax, written out directly.
inline std::vector<double> reference_pocket_cnn(const Matrix& filters, const Matrix& dense, const ImageTensor& img) {
    const std::size_t C = img.channels();
    std::vector<double> feat(filters.rows, 0.0);
    for (std::size_t f = 0; f < filters.rows; ++f) {
        double total = 0;
        std::size_t windows = 0;
        for (std::size_t y = 1; y + 1 < img.height(); ++y)
            for (std::size_t x = 1; x + 1 < img.width(); ++x) {
                double a = filters(f, 9 * C);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        for (std::size_t c = 0; c < C; ++c) {
                            const std::size_t tap = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1)) * C + c;
                            a += static_cast<double>(filters(f, tap)) * img.at(x + dx, y + dy, c) / 255.0;
                        }
                total += a > 0 ? a : 0;
                ++windows;
            }
        feat[f] = total / static_cast<double>(windows);
    }
    std::vector<double> z(dense.rows);
    for (std::size_t k = 0; k < dense.rows; ++k) {
        z[k] = dense(k, filters.rows);
        for (std::size_t f = 0; f < filters.rows; ++f)
            z[k] += dense(k, f) * feat[f];
    }
    return reference_softmax(z);
}

// ---------------------------------------------------------------------------
// 8×8 grayscale linear-softmax fixture and exhaustive one-pixel search.

inline LinearSoftmaxOracle linear_8x8() {
    return LinearSoftmaxOracle::random(OracleInfo{8, 8, 1, 10, {}}, 20240611, 1.0);
}

struct OnePixelSearch {
    bool attackable = false;     ///< some write makes the objective class win (targeted) / lose (non-targeted)
    double best_probability = 0; ///< max target prob (targeted) or min true prob (non-targeted)
};

/// Enumerates all W·H·256 one-pixel writes of a grayscale image via logit
/// deltas z + w[:, i]·(u − v)/255. Ties resolve to the lowest class index.
inline OnePixelSearch exhaustive_one_pixel(const Matrix& w, const std::vector<float>& b, const ImageTensor& img,
                                           std::size_t cls, bool targeted) {
    const auto z0 = reference_linear_logits(w, b, img);
    OnePixelSearch out;
    out.best_probability = targeted ? 0.0 : 1.0;
    std::vector<double> z(z0.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = img.data()[i];
        for (int u = 0; u < 256; ++u) {
            for (std::size_t k = 0; k < z.size(); ++k)
                z[k] = z0[k] + w(k, i) * (u - v) / 255.0;
            const auto p = reference_softmax(z);
            const auto arg = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
            if (targeted) {
                out.attackable |= arg == cls;
                out.best_probability = std::max(out.best_probability, p[cls]);
            } else {
                out.attackable |= arg != cls;
                out.best_probability = std::min(out.best_probability, p[cls]);
            }
        }
    }
    return out;
}

inline std::size_t reference_argmax(const std::vector<double>& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// ---------------------------------------------------------------------------
// "Corner" pocket CNN: 8 classes, one per RGB-cube corner. For every class
// there is a 1×1 (centre-tap) smooth filter 2·(q − 0.5) and a trigger filter
// (q − (1 − eps))/eps, where q ∈ [0, 1] is the mean per-channel closeness of a
// pixel to that corner. One-pixel flips need a colour close to another
// corner; the smooth filter grades the way there.

inline constexpr std::size_t kCornerSide = 8;
inline constexpr std::size_t kCornerClasses = 8;

inline PocketCnnOracle corner_cnn(double alpha = 100.0, double beta = 300.0, double eps = 0.05) {
    const std::size_t K = kCornerClasses;
    Matrix filters(static_cast<std::uint32_t>(2 * K), 28);
    for (std::size_t k = 0; k < K; ++k) {
        double low_channels = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            const bool hi = (k >> c) & 1;
            const double s = hi ? 1.0 : -1.0;
            low_channels += hi ? 0 : 1;
            filters(2 * k, 4 * 3 + c) = static_cast<float>(s / 3.0 * 2.0);
            filters(2 * k + 1, 4 * 3 + c) = static_cast<float>(s / 3.0 / eps);
        }
        filters(2 * k, 27) = static_cast<float>((low_channels / 3.0 - 0.5) * 2.0);
        filters(2 * k + 1, 27) = static_cast<float>((low_channels / 3.0 - (1 - eps)) / eps);
    }
    Matrix dense(static_cast<std::uint32_t>(K), static_cast<std::uint32_t>(2 * K + 1));
    for (std::size_t k = 0; k < K; ++k) {
        dense(k, 2 * k) = static_cast<float>(alpha);
        dense(k, 2 * k + 1) = static_cast<float>(beta);
    }
    return PocketCnnOracle(OracleInfo{kCornerSide, kCornerSide, 3, K, {}}, std::move(filters), std::move(dense));
}

/// Grey noisy image with a blob of 1–5 interior pixels near the corner of
/// its class. Returns images the model classifies as their blob class.
inline std::vector<LabeledImage> corner_images(const Oracle& model, std::size_t count, std::uint64_t seed) {
    std::vector<LabeledImage> out;
    const std::size_t W = kCornerSide;
    for (std::uint64_t i = 0; out.size() < count; ++i) {
        Rng rng(derive_seed(seed, i));
        std::vector<std::uint8_t> px(W * W * 3);
        for (auto& p : px)
            p = static_cast<std::uint8_t>(118 + rng.below(21));
        const std::size_t t = rng.below(kCornerClasses);
        const std::size_t blob = 1 + rng.below(5);
        for (std::size_t n = 0; n < blob; ++n) {
            const std::size_t x = 1 + rng.below(W - 2), y = 1 + rng.below(W - 2);
            for (std::size_t c = 0; c < 3; ++c) {
                const int off = static_cast<int>(rng.below(40));
                px[(y * W + x) * 3 + c] = static_cast<std::uint8_t>(((t >> c) & 1) ? 255 - off : off);
            }
        }
        ImageTensor img(W, W, 3, std::move(px));
        if (model.predict(img).argmax() != t)
            continue;
        out.push_back({std::move(img), t, "corner-" + std::to_string(i)});
    }
    return out;
}

} // namespace fixtures
