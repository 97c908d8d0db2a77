#pragma once

// Deterministic in-process classifiers and their weight-file format.
//
// A weight file is a sequence of matrix blocks. Each block is a 16-byte
// header, magic "PXSW", then version, rows, cols as little-endian uint32,
// followed by rows·cols little-endian float32 values in row-major order.
//
// Model files start with a 1×5 descriptor block
//   [kind, width, height, channels, num_classes]   (kind 0 = linear, 1 = pocket cnn)
// followed by
//   linear:     weights K×(W·H·C), bias 1×K
//   pocket cnn: filters F×(9·C + 1) (3×3×C channel-last taps, then bias),
//               dense K×(F + 1) (F weights, then bias)

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pixelstorm/error.hpp"
#include "pixelstorm/oracle.hpp"
#include "pixelstorm/rng.hpp"

namespace pixelstorm {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

struct Matrix {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<float> values;

    Matrix() = default;
    Matrix(std::uint32_t r, std::uint32_t c, std::vector<float> v) : rows(r), cols(c), values(std::move(v)) {
        if (values.size() != static_cast<std::size_t>(rows) * cols)
            throw UsageError("matrix value count does not match rows*cols");
    }
    Matrix(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0f) {}

    float& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

namespace weights {

inline constexpr std::array<char, 4> kMagic = {'P', 'X', 'S', 'W'};
inline constexpr std::uint32_t kVersion = 1;

inline void write_blocks(std::ostream& out, std::span<const Matrix> blocks) {
    for (const auto& m : blocks) {
        out.write(kMagic.data(), 4);
        const std::uint32_t header[3] = {kVersion, m.rows, m.cols};
        out.write(reinterpret_cast<const char*>(header), sizeof header);
        out.write(reinterpret_cast<const char*>(m.values.data()),
                  static_cast<std::streamsize>(m.values.size() * sizeof(float)));
    }
}

inline std::vector<Matrix> read_blocks(std::istream& in) {
    std::vector<Matrix> blocks;
    for (;;) {
        std::array<char, 4> magic{};
        in.read(magic.data(), 4);
        if (in.gcount() == 0)
            break;
        if (in.gcount() != 4 || magic != kMagic)
            throw FormatError("weight block " + std::to_string(blocks.size()) + ": bad magic");
        std::uint32_t header[3];
        in.read(reinterpret_cast<char*>(header), sizeof header);
        if (in.gcount() != sizeof header)
            throw FormatError("weight block " + std::to_string(blocks.size()) + ": truncated header");
        if (header[0] != kVersion)
            throw FormatError("weight block " + std::to_string(blocks.size()) +
                              ": unsupported version " + std::to_string(header[0]));
        Matrix m(header[1], header[2]);
        const auto bytes = static_cast<std::streamsize>(m.values.size() * sizeof(float));
        in.read(reinterpret_cast<char*>(m.values.data()), bytes);
        if (in.gcount() != bytes)
            throw FormatError("weight block " + std::to_string(blocks.size()) + ": truncated data");
        blocks.push_back(std::move(m));
    }
    return blocks;
}

inline void save(const std::filesystem::path& path, std::span<const Matrix> blocks) {
    std::ofstream out(path, std::ios::binary);
    write_blocks(out, blocks);
    if (!out)
        throw FormatError("cannot write " + path.string());
}

inline std::vector<Matrix> load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    return read_blocks(in);
}

} // namespace weights

enum class ModelKind : std::uint32_t { linear = 0, pocket_cnn = 1 };

/// softmax(W·(flatten(x)/255) + b).
class LinearSoftmaxOracle final : public Oracle {
public:
    LinearSoftmaxOracle(OracleInfo info, Matrix weights, std::vector<float> bias)
        : info_(std::move(info)), weights_(std::move(weights)), bias_(std::move(bias)) {
        info_.validate();
        if (weights_.rows != info_.num_classes || weights_.cols != info_.input_size())
            throw FormatError("linear weights must be " + std::to_string(info_.num_classes) + "x" +
                              std::to_string(info_.input_size()));
        if (bias_.size() != info_.num_classes)
            throw FormatError("linear bias must have num_classes entries");
    }

    /// Gaussian weights and biases from a seed.
    static LinearSoftmaxOracle random(OracleInfo info, std::uint64_t seed, double weight_sigma,
                                      double bias_sigma = 0.0) {
        info.validate();
        Rng rng(derive_seed(seed, 0x11));
        std::normal_distribution<double> w(0.0, weight_sigma);
        Matrix m(static_cast<std::uint32_t>(info.num_classes), static_cast<std::uint32_t>(info.input_size()));
        for (auto& v : m.values)
            v = static_cast<float>(w(rng));
        std::vector<float> b(info.num_classes, 0.0f);
        if (bias_sigma > 0.0) {
            std::normal_distribution<double> bd(0.0, bias_sigma);
            for (auto& v : b)
                v = static_cast<float>(bd(rng));
        }
        return LinearSoftmaxOracle(std::move(info), std::move(m), std::move(b));
    }

    const OracleInfo& info() const override { return info_; }
    const Matrix& weights() const noexcept { return weights_; }
    const std::vector<float>& bias() const noexcept { return bias_; }

    std::vector<double> logits(const ImageTensor& image) const {
        const auto x = image.data();
        std::vector<double> z(info_.num_classes);
        for (std::size_t k = 0; k < info_.num_classes; ++k) {
            const float* row = weights_.values.data() + k * weights_.cols;
            double acc = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                acc += static_cast<double>(row[i]) * x[i];
            z[k] = acc / 255.0 + bias_[k];
        }
        return z;
    }

    std::vector<Matrix> to_blocks() const {
        Matrix desc(1, 5, {static_cast<float>(ModelKind::linear), static_cast<float>(info_.width),
                           static_cast<float>(info_.height), static_cast<float>(info_.channels),
                           static_cast<float>(info_.num_classes)});
        return {desc, weights_, Matrix(1, static_cast<std::uint32_t>(bias_.size()), bias_)};
    }

protected:
    ProbabilityVector do_predict(const ImageTensor& image) const override {
        return ProbabilityVector(softmax(logits(image)));
    }

private:
    OracleInfo info_;
    Matrix weights_;
    std::vector<float> bias_;
};

/// conv 3×3 (stride 1, valid) → relu → global average pool → linear → softmax.
class PocketCnnOracle final : public Oracle {
public:
    PocketCnnOracle(OracleInfo info, Matrix filters, Matrix dense)
        : info_(std::move(info)), filters_(std::move(filters)), dense_(std::move(dense)) {
        info_.validate();
        if (info_.width < 3 || info_.height < 3)
            throw FormatError("pocket cnn needs inputs of at least 3x3");
        if (filters_.rows == 0 || filters_.cols != 9 * info_.channels + 1)
            throw FormatError("pocket cnn filters must be Fx" + std::to_string(9 * info_.channels + 1));
        if (dense_.rows != info_.num_classes || dense_.cols != filters_.rows + 1)
            throw FormatError("pocket cnn dense layer must be " + std::to_string(info_.num_classes) +
                              "x" + std::to_string(filters_.rows + 1));
    }

    static PocketCnnOracle random(OracleInfo info, std::uint64_t seed, std::size_t num_filters,
                                  double filter_sigma, double dense_sigma) {
        info.validate();
        Rng rng(derive_seed(seed, 0x22));
        std::normal_distribution<double> fw(0.0, filter_sigma);
        std::normal_distribution<double> dw(0.0, dense_sigma);
        Matrix filters(static_cast<std::uint32_t>(num_filters), static_cast<std::uint32_t>(9 * info.channels + 1));
        for (auto& v : filters.values)
            v = static_cast<float>(fw(rng));
        Matrix dense(static_cast<std::uint32_t>(info.num_classes), static_cast<std::uint32_t>(num_filters + 1));
        for (auto& v : dense.values)
            v = static_cast<float>(dw(rng));
        return PocketCnnOracle(std::move(info), std::move(filters), std::move(dense));
    }

    const OracleInfo& info() const override { return info_; }
    const Matrix& filters() const noexcept { return filters_; }
    const Matrix& dense() const noexcept { return dense_; }

    /// Pooled feature maps (one value per filter).
    std::vector<double> features(const ImageTensor& image) const {
        const std::size_t W = info_.width, H = info_.height, C = info_.channels;
        const std::size_t F = filters_.rows;
        const auto x = image.data();
        std::vector<double> pooled(F, 0.0);
        for (std::size_t f = 0; f < F; ++f) {
            const float* taps = filters_.values.data() + f * filters_.cols;
            const double bias = taps[9 * C];
            double sum = 0.0;
            for (std::size_t y = 0; y + 2 < H; ++y)
                for (std::size_t xx = 0; xx + 2 < W; ++xx) {
                    double acc = 0.0;
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        const std::uint8_t* row = x.data() + ((y + dy) * W + xx) * C;
                        const float* t = taps + dy * 3 * C;
                        for (std::size_t i = 0; i < 3 * C; ++i)
                            acc += static_cast<double>(t[i]) * row[i];
                    }
                    sum += std::max(0.0, acc / 255.0 + bias);
                }
            pooled[f] = sum / static_cast<double>((W - 2) * (H - 2));
        }
        return pooled;
    }

    std::vector<double> logits(const ImageTensor& image) const {
        const auto feat = features(image);
        std::vector<double> z(info_.num_classes);
        for (std::size_t k = 0; k < info_.num_classes; ++k) {
            double acc = dense_(k, feat.size());
            for (std::size_t f = 0; f < feat.size(); ++f)
                acc += static_cast<double>(dense_(k, f)) * feat[f];
            z[k] = acc;
        }
        return z;
    }

    std::vector<Matrix> to_blocks() const {
        Matrix desc(1, 5, {static_cast<float>(ModelKind::pocket_cnn), static_cast<float>(info_.width),
                           static_cast<float>(info_.height), static_cast<float>(info_.channels),
                           static_cast<float>(info_.num_classes)});
        return {desc, filters_, dense_};
    }

protected:
    ProbabilityVector do_predict(const ImageTensor& image) const override {
        return ProbabilityVector(softmax(logits(image)));
    }

private:
    OracleInfo info_;
    Matrix filters_;
    Matrix dense_;
};

/// Builds a built-in oracle from a model file (descriptor block first).
inline std::unique_ptr<Oracle> load_builtin_oracle(const std::filesystem::path& path) {
    auto blocks = weights::load(path);
    if (blocks.size() != 3 || blocks[0].rows != 1 || blocks[0].cols != 5)
        throw FormatError(path.string() + ": expected descriptor block plus two weight blocks");
    const auto& d = blocks[0].values;
    OracleInfo info;
    info.width = static_cast<std::size_t>(d[1]);
    info.height = static_cast<std::size_t>(d[2]);
    info.channels = static_cast<std::size_t>(d[3]);
    info.num_classes = static_cast<std::size_t>(d[4]);
    switch (static_cast<std::uint32_t>(d[0])) {
    case static_cast<std::uint32_t>(ModelKind::linear):
        if (blocks[2].rows != 1)
            throw FormatError(path.string() + ": linear bias block must be 1xK");
        return std::make_unique<LinearSoftmaxOracle>(std::move(info), std::move(blocks[1]),
                                                     std::move(blocks[2].values));
    case static_cast<std::uint32_t>(ModelKind::pocket_cnn):
        return std::make_unique<PocketCnnOracle>(std::move(info), std::move(blocks[1]), std::move(blocks[2]));
    default:
        throw FormatError(path.string() + ": unknown model kind " + std::to_string(d[0]));
    }
}

template <class BuiltinOracle>
void save_builtin_oracle(const std::filesystem::path& path, const BuiltinOracle& oracle) {
    weights::save(path, oracle.to_blocks());
}

} // namespace pixelstorm
