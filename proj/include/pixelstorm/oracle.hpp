#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pixelstorm/error.hpp"
#include "pixelstorm/image.hpp"

namespace pixelstorm {

/// Per-class probabilities: each entry in [0, 1], sum within 1 ± 1e-3.
class ProbabilityVector {
public:
    static constexpr double kSumTolerance = 1e-3;

    ProbabilityVector() = default;

    explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty())
            throw ProtocolError("probability vector is empty");
        double sum = 0.0;
        for (std::size_t k = 0; k < probs_.size(); ++k) {
            const double p = probs_[k];
            if (!std::isfinite(p) || p < 0.0 || p > 1.0)
                throw ProtocolError("probability " + std::to_string(p) + " for class " +
                                    std::to_string(k) + " is outside [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw ProtocolError("probabilities sum to " + std::to_string(sum));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t k) const noexcept { return probs_[k]; }
    const std::vector<double>& values() const noexcept { return probs_; }

    /// Highest-probability class; ties go to the lowest index.
    std::size_t argmax() const noexcept {
        std::size_t best = 0;
        for (std::size_t k = 1; k < probs_.size(); ++k)
            if (probs_[k] > probs_[best])
                best = k;
        return best;
    }

    /// Largest probability among classes other than `excluded`.
    double max_excluding(std::size_t excluded) const noexcept {
        double best = 0.0;
        for (std::size_t k = 0; k < probs_.size(); ++k)
            if (k != excluded)
                best = std::max(best, probs_[k]);
        return best;
    }

    friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

private:
    std::vector<double> probs_;
};

struct OracleInfo {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::size_t num_classes = 0;
    std::vector<std::string> labels;

    void validate() const {
        if (width == 0 || height == 0 || (channels != 1 && channels != 3))
            throw UsageError("oracle dimensions must be positive with 1 or 3 channels");
        if (num_classes < 2)
            throw UsageError("oracle needs at least 2 classes");
        if (!labels.empty() && labels.size() != num_classes)
            throw UsageError("oracle has " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(num_classes) + " classes");
    }

    std::size_t input_size() const noexcept { return width * height * channels; }

    friend bool operator==(const OracleInfo&, const OracleInfo&) = default;
};

/// Probability-label classifier. The attack sees nothing else.
/// Implementations must tolerate concurrent calls.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual const OracleInfo& info() const = 0;

    ProbabilityVector predict(const ImageTensor& image) const {
        check_shape(image);
        return do_predict(image);
    }

    /// Element-wise equal to predict() on each image, in order.
    std::vector<ProbabilityVector> predict_batch(std::span<const ImageTensor> images) const {
        if (images.empty())
            return {};
        for (const auto& img : images)
            check_shape(img);
        auto out = do_predict_batch(images);
        if (out.size() != images.size())
            throw ProtocolError("oracle returned " + std::to_string(out.size()) +
                                " results for " + std::to_string(images.size()) + " images");
        return out;
    }

protected:
    virtual ProbabilityVector do_predict(const ImageTensor& image) const = 0;

    virtual std::vector<ProbabilityVector> do_predict_batch(std::span<const ImageTensor> images) const {
        std::vector<ProbabilityVector> out;
        out.reserve(images.size());
        for (const auto& img : images)
            out.push_back(do_predict(img));
        return out;
    }

private:
    void check_shape(const ImageTensor& image) const {
        const auto& i = info();
        if (image.width() != i.width || image.height() != i.height || image.channels() != i.channels)
            throw UsageError("image " + std::to_string(image.width()) + "x" +
                             std::to_string(image.height()) + "x" + std::to_string(image.channels()) +
                             " does not match oracle input " + std::to_string(i.width) + "x" +
                             std::to_string(i.height) + "x" + std::to_string(i.channels));
    }
};

/// Delegates to another oracle and counts evaluated images (a batch of n
/// counts n). The wrapped oracle must outlive the wrapper.
class CountingOracle final : public Oracle {
public:
    explicit CountingOracle(const Oracle& inner) : inner_(inner) {}

    const OracleInfo& info() const override { return inner_.info(); }

    std::size_t count() const noexcept { return count_.load(); }
    void reset() noexcept { count_ = 0; }

protected:
    ProbabilityVector do_predict(const ImageTensor& image) const override {
        auto p = inner_.predict(image);
        count_.fetch_add(1);
        return p;
    }

    std::vector<ProbabilityVector> do_predict_batch(std::span<const ImageTensor> images) const override {
        auto p = inner_.predict_batch(images);
        count_.fetch_add(images.size());
        return p;
    }

private:
    const Oracle& inner_;
    mutable std::atomic<std::size_t> count_{0};
};

/// Numerically stable softmax (max subtracted before exponentiation).
inline std::vector<double> softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double z : logits)
        m = std::max(m, z);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - m);
        sum += out[k];
    }
    for (double& p : out)
        p /= sum;
    return out;
}

} // namespace pixelstorm
