#pragma once

// Few-pixel attack: a genome is d tuples (x, y, c_0..c_{C-1}); decoding
// rounds half-up and clamps, and the decoded pixels overwrite the image.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pixelstorm/de.hpp"
#include "pixelstorm/error.hpp"
#include "pixelstorm/image.hpp"
#include "pixelstorm/oracle.hpp"

namespace pixelstorm {

struct PixelPerturbation {
    std::size_t x = 0;
    std::size_t y = 0;
    std::vector<std::uint8_t> color;

    friend bool operator==(const PixelPerturbation&, const PixelPerturbation&) = default;
};

inline std::size_t tuple_length(std::size_t channels) noexcept { return 2 + channels; }

namespace detail {

inline double round_half_up(double v) noexcept { return std::floor(v + 0.5); }

inline std::size_t decode_coordinate(double v, std::size_t extent) noexcept {
    const double r = std::clamp(round_half_up(v), 0.0, static_cast<double>(extent - 1));
    return static_cast<std::size_t>(r);
}

inline std::uint8_t decode_intensity(double v) noexcept {
    return static_cast<std::uint8_t>(std::clamp(round_half_up(v), 0.0, 255.0));
}

} // namespace detail

inline std::vector<PixelPerturbation> decode(std::span<const double> genome, std::size_t width,
                                             std::size_t height, std::size_t channels) {
    const std::size_t len = tuple_length(channels);
    if (genome.size() % len != 0)
        throw UsageError("genome length " + std::to_string(genome.size()) +
                         " is not a multiple of " + std::to_string(len));
    std::vector<PixelPerturbation> out;
    out.reserve(genome.size() / len);
    for (std::size_t t = 0; t < genome.size(); t += len) {
        PixelPerturbation p;
        p.x = detail::decode_coordinate(genome[t], width);
        p.y = detail::decode_coordinate(genome[t + 1], height);
        p.color.resize(channels);
        for (std::size_t c = 0; c < channels; ++c)
            p.color[c] = detail::decode_intensity(genome[t + 2 + c]);
        out.push_back(std::move(p));
    }
    return out;
}

/// Copy of `image` with each listed pixel overwritten; later entries win.
inline ImageTensor apply_perturbation(const ImageTensor& image,
                                      std::span<const PixelPerturbation> perturbations) {
    auto data = std::vector<std::uint8_t>(image.data().begin(), image.data().end());
    for (const auto& p : perturbations) {
        if (p.x >= image.width() || p.y >= image.height() || p.color.size() != image.channels())
            throw UsageError("perturbation does not fit the image");
        std::copy(p.color.begin(), p.color.end(),
                  data.begin() + static_cast<std::ptrdiff_t>(image.offset(p.x, p.y)));
    }
    return ImageTensor(image.width(), image.height(), image.channels(), std::move(data));
}

inline ImageTensor apply_genome(const ImageTensor& image, std::span<const double> genome) {
    return apply_perturbation(image, decode(genome, image.width(), image.height(), image.channels()));
}

/// Probability of target_class on the perturbed image (maximized).
inline double fitness_targeted(const Oracle& oracle, const ImageTensor& original,
                               std::span<const double> genome, std::size_t target_class) {
    if (target_class >= oracle.info().num_classes)
        throw UsageError("target class out of range");
    return oracle.predict(apply_genome(original, genome))[target_class];
}

/// Probability of true_class on the perturbed image (minimized).
inline double fitness_nontargeted(const Oracle& oracle, const ImageTensor& original,
                                  std::span<const double> genome, std::size_t true_class) {
    if (true_class >= oracle.info().num_classes)
        throw UsageError("true class out of range");
    return oracle.predict(apply_genome(original, genome))[true_class];
}

enum class AttackMode { targeted, nontargeted, random };

inline std::string_view to_string(AttackMode mode) noexcept {
    switch (mode) {
    case AttackMode::targeted: return "targeted";
    case AttackMode::nontargeted: return "nontargeted";
    case AttackMode::random: return "random";
    }
    return "?";
}

inline AttackMode parse_attack_mode(std::string_view s) {
    if (s == "targeted") return AttackMode::targeted;
    if (s == "nontargeted") return AttackMode::nontargeted;
    if (s == "random") return AttackMode::random;
    throw UsageError("unknown attack mode '" + std::string(s) + "'");
}

enum class Preset { kaggle_cifar10, original_cifar10, imagenet };

/// kaggle: 400/100, original: 300/50, imagenet: 400/100 (non-targeted only).
inline de::Config preset_config(Preset preset) {
    de::Config c;
    c.scale_f = 0.5;
    switch (preset) {
    case Preset::kaggle_cifar10: c.population_size = 400; c.max_generations = 100; break;
    case Preset::original_cifar10: c.population_size = 300; c.max_generations = 50; break;
    case Preset::imagenet: c.population_size = 400; c.max_generations = 100; break;
    }
    return c;
}

struct AttackSpec {
    std::size_t pixels = 1;
    double targeted_stop_threshold = 0.5;
    double nontargeted_stop_threshold = 0.05;
    /// Off only for experiments that need the optimizer's full-budget optimum.
    bool early_stop = true;
    Preset preset = Preset::kaggle_cifar10;
    de::Config de = preset_config(Preset::kaggle_cifar10);

    static AttackSpec from_preset(Preset preset, std::size_t pixels, std::uint64_t seed) {
        AttackSpec s;
        s.preset = preset;
        s.pixels = pixels;
        s.de = preset_config(preset);
        s.de.seed = seed;
        return s;
    }

    void validate() const {
        if (pixels < 1)
            throw UsageError("pixel budget must be >= 1");
        if (!(targeted_stop_threshold > 0.0 && targeted_stop_threshold < 1.0) ||
            !(nontargeted_stop_threshold > 0.0 && nontargeted_stop_threshold < 1.0))
            throw UsageError("stop thresholds must lie in (0, 1)");
        de.validate();
    }
};

/// Coordinates ~ U[0, W) and U[0, H); intensities ~ N(128, 127).
inline de::InitSpec attack_init(std::size_t pixels, std::size_t width, std::size_t height,
                                std::size_t channels) {
    de::InitSpec init;
    init.reserve(pixels * tuple_length(channels));
    for (std::size_t p = 0; p < pixels; ++p) {
        init.emplace_back(de::Uniform{0.0, static_cast<double>(width)});
        init.emplace_back(de::Uniform{0.0, static_cast<double>(height)});
        for (std::size_t c = 0; c < channels; ++c)
            init.emplace_back(de::Gaussian{128.0, 127.0});
    }
    return init;
}

struct AttackOutcome {
    std::string id;
    AttackMode mode = AttackMode::nontargeted;
    bool success = false;
    ImageTensor adversarial_image;
    std::vector<PixelPerturbation> perturbation;
    /// Clean colour at each perturbation's coordinate, parallel to `perturbation`.
    std::vector<std::vector<std::uint8_t>> original_colors;
    ProbabilityVector final_probs;
    std::size_t predicted_class = 0;
    std::size_t original_class = 0;
    std::optional<std::size_t> target_class;
    std::size_t generations_run = 0;
    std::size_t evaluations_used = 0;
    bool stopped_early = false;
    std::vector<de::TracePoint> fitness_trace;
};

namespace detail {

inline std::vector<std::vector<std::uint8_t>> original_colors(const ImageTensor& image,
                                                              std::span<const PixelPerturbation> ps) {
    std::vector<std::vector<std::uint8_t>> out;
    out.reserve(ps.size());
    for (const auto& p : ps) {
        auto px = image.pixel(p.x, p.y);
        out.emplace_back(px.begin(), px.end());
    }
    return out;
}

/// Runs DE with a batched oracle fitness that keeps each candidate's
/// probability vector alongside its score.
inline AttackOutcome run_de_attack(const Oracle& oracle, const LabeledImage& labeled,
                                   std::size_t objective_class, const AttackSpec& spec,
                                   AttackMode mode) {
    spec.validate();
    const auto& info = oracle.info();
    const auto& image = labeled.image;
    const bool maximize = mode == AttackMode::targeted;

    de::Config config = spec.de;
    config.direction = maximize ? de::Direction::maximize : de::Direction::minimize;

    std::size_t evaluations = 0;
    auto problem = [&](std::span<const de::Genome> genomes) {
        std::vector<ImageTensor> candidates;
        candidates.reserve(genomes.size());
        for (const auto& g : genomes)
            candidates.push_back(apply_genome(image, g));
        auto probs = oracle.predict_batch(candidates);
        evaluations += genomes.size();
        std::vector<de::Scored<ProbabilityVector>> out;
        out.reserve(probs.size());
        for (auto& p : probs) {
            const double f = p[objective_class];
            out.push_back({f, std::move(p)});
        }
        return out;
    };
    const double threshold = maximize ? spec.targeted_stop_threshold : spec.nontargeted_stop_threshold;
    auto stop = [&](double best, const ProbabilityVector&) {
        if (!spec.early_stop)
            return false;
        return maximize ? best > threshold : best < threshold;
    };

    de::EvolveResult<ProbabilityVector> result;
    try {
        result = de::evolve(problem, config,
                            attack_init(spec.pixels, info.width, info.height, info.channels), stop);
    } catch (const AttackError&) {
        throw;
    } catch (const Error& e) {
        throw AttackError(std::string("attack on '") + labeled.id + "' failed: " + e.what(), evaluations);
    }

    AttackOutcome out;
    out.id = labeled.id;
    out.mode = mode;
    out.perturbation = decode(result.best_genome, image.width(), image.height(), image.channels());
    out.original_colors = original_colors(image, out.perturbation);
    out.adversarial_image = apply_perturbation(image, out.perturbation);
    out.final_probs = std::move(result.best_aux);
    out.predicted_class = out.final_probs.argmax();
    out.original_class = labeled.true_class;
    if (maximize)
        out.target_class = objective_class;
    out.success = maximize ? out.predicted_class == objective_class
                           : out.predicted_class != labeled.true_class;
    out.generations_run = result.generations_run;
    out.evaluations_used = result.evaluations_used;
    out.stopped_early = result.stopped_early;
    out.fitness_trace = std::move(result.fitness_trace);
    return out;
}

inline void check_class(const Oracle& oracle, std::size_t cls, const char* what) {
    if (cls >= oracle.info().num_classes)
        throw UsageError(std::string(what) + " " + std::to_string(cls) + " out of range for " +
                         std::to_string(oracle.info().num_classes) + " classes");
}

} // namespace detail

/// Maximizes the target-class probability. Success iff the final argmax is
/// the target; stops early once the target probability exceeds the threshold.
inline AttackOutcome run_targeted_attack(const Oracle& oracle, const LabeledImage& labeled,
                                         std::size_t target_class, const AttackSpec& spec) {
    detail::check_class(oracle, labeled.true_class, "true class");
    detail::check_class(oracle, target_class, "target class");
    if (target_class == labeled.true_class)
        throw UsageError("target class equals the true class");
    return detail::run_de_attack(oracle, labeled, target_class, spec, AttackMode::targeted);
}

/// Minimizes the true-class probability. Success iff the final argmax is
/// any other class; stops early once the true-class probability falls below
/// the threshold.
inline AttackOutcome run_nontargeted_attack(const Oracle& oracle, const LabeledImage& labeled,
                                            const AttackSpec& spec) {
    detail::check_class(oracle, labeled.true_class, "true class");
    return detail::run_de_attack(oracle, labeled, labeled.true_class, spec, AttackMode::nontargeted);
}

/// Non-targeted success from one targeted outcome per other class.
inline bool derive_nontargeted_from_targeted(std::span<const AttackOutcome> outcomes) {
    if (outcomes.empty())
        throw UsageError("no targeted outcomes");
    const std::size_t k = outcomes.front().final_probs.size();
    const std::size_t true_class = outcomes.front().original_class;
    if (outcomes.size() + 1 != k)
        throw UsageError("expected " + std::to_string(k - 1) + " targeted outcomes, got " +
                         std::to_string(outcomes.size()));
    std::vector<bool> seen(k, false);
    for (const auto& o : outcomes) {
        if (o.mode != AttackMode::targeted || !o.target_class || o.original_class != true_class)
            throw UsageError("outcomes must be targeted attacks on one image");
        const std::size_t t = *o.target_class;
        if (t >= k || t == true_class || seen[t])
            throw UsageError("targeted outcomes must cover every class except the true class once");
        seen[t] = true;
    }
    return std::any_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success; });
}

/// Images whose clean argmax equals their label.
inline std::vector<LabeledImage> filter_correctly_classified(const Oracle& oracle,
                                                             std::span<const LabeledImage> images,
                                                             std::size_t batch = 256) {
    std::vector<LabeledImage> out;
    for (std::size_t start = 0; start < images.size(); start += batch) {
        const std::size_t end = std::min(images.size(), start + batch);
        std::vector<ImageTensor> chunk;
        for (std::size_t i = start; i < end; ++i)
            chunk.push_back(images[i].image);
        const auto probs = oracle.predict_batch(chunk);
        for (std::size_t i = start; i < end; ++i)
            if (probs[i - start].argmax() == images[i].true_class)
                out.push_back(images[i]);
    }
    return out;
}

} // namespace pixelstorm
