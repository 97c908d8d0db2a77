#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pixelstorm/attack.hpp"
#include "pixelstorm/error.hpp"
#include "pixelstorm/oracle.hpp"
#include "pixelstorm/rng.hpp"

namespace pixelstorm::metrics {

using CountMatrix = std::vector<std::vector<std::size_t>>;

/// successes / total.
inline double success_rate(std::span<const AttackOutcome> outcomes) {
    if (outcomes.empty())
        throw UsageError("success_rate of an empty outcome set");
    const auto wins = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success; });
    return static_cast<double>(wins) / static_cast<double>(outcomes.size());
}

/// Probability the classifier gave the realized adversarial class (the final
/// argmax), averaged over successful outcomes only. Empty without successes.
inline std::optional<double> confidence(std::span<const AttackOutcome> outcomes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : outcomes) {
        if (!o.success)
            continue;
        sum += o.final_probs[o.predicted_class];
        ++n;
    }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

/// Bin b counts images that reached exactly b of their target classes.
/// Every image must contribute one targeted outcome per other class.
inline std::vector<std::size_t> target_class_histogram(
    std::span<const std::vector<AttackOutcome>> per_image, std::size_t num_classes) {
    std::vector<std::size_t> bins(num_classes, 0);
    for (const auto& outcomes : per_image) {
        if (outcomes.size() + 1 != num_classes)
            throw UsageError("histogram needs " + std::to_string(num_classes - 1) +
                             " targeted outcomes per image, got " + std::to_string(outcomes.size()));
        const auto wins = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success; });
        ++bins[static_cast<std::size_t>(wins)];
    }
    return bins;
}

/// Entry (o, t) counts successes from original class o to realized class t.
inline CountMatrix pair_matrix(std::span<const AttackOutcome> outcomes, std::size_t num_classes) {
    CountMatrix m(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (const auto& o : outcomes) {
        if (!o.success)
            continue;
        if (o.original_class >= num_classes || o.predicted_class >= num_classes)
            throw UsageError("outcome class index out of range for pair matrix");
        if (o.original_class == o.predicted_class)
            throw UsageError("successful outcome '" + o.id + "' kept its original class");
        ++m[o.original_class][o.predicted_class];
    }
    return m;
}

struct ClassTotals {
    std::vector<std::size_t> as_origin;
    std::vector<std::size_t> as_target;

    friend bool operator==(const ClassTotals&, const ClassTotals&) = default;
};

/// Row sums (as origin) and column sums (as target).
inline ClassTotals class_totals(const CountMatrix& m) {
    ClassTotals t{std::vector<std::size_t>(m.size(), 0), std::vector<std::size_t>(m.size(), 0)};
    for (std::size_t o = 0; o < m.size(); ++o)
        for (std::size_t k = 0; k < m[o].size(); ++k) {
            t.as_origin[o] += m[o][k];
            t.as_target[k] += m[o][k];
        }
    return t;
}

/// Mean absolute channel change of one modified pixel.
inline double pixel_distortion(std::span<const std::uint8_t> before, std::span<const std::uint8_t> after) {
    double sum = 0.0;
    for (std::size_t c = 0; c < before.size(); ++c)
        sum += std::abs(static_cast<double>(after[c]) - static_cast<double>(before[c]));
    return sum / static_cast<double>(before.size());
}

/// Per outcome: mean pixel_distortion over distinct perturbed coordinates
/// (the last write at a coordinate is the one that counts).
inline double outcome_distortion(const AttackOutcome& o) {
    if (o.original_colors.size() != o.perturbation.size())
        throw UsageError("outcome '" + o.id + "' lacks original colours");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < o.perturbation.size(); ++i) {
        const auto& p = o.perturbation[i];
        bool overwritten = false;
        for (std::size_t j = i + 1; j < o.perturbation.size(); ++j)
            if (o.perturbation[j].x == p.x && o.perturbation[j].y == p.y)
                overwritten = true;
        if (overwritten)
            continue;
        sum += pixel_distortion(o.original_colors[i], p.color);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Mean outcome_distortion over successful outcomes; empty without successes.
inline std::optional<double> average_distortion(std::span<const AttackOutcome> outcomes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : outcomes)
        if (o.success) {
            sum += outcome_distortion(o);
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

/// Mean evaluations_used over successful outcomes; empty without successes.
inline std::optional<double> average_evaluations(std::span<const AttackOutcome> outcomes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : outcomes)
        if (o.success) {
            sum += static_cast<double>(o.evaluations_used);
            ++n;
        }
    if (n == 0)
        return std::nullopt;
    return sum / static_cast<double>(n);
}

struct RandomBaselineConfig {
    std::size_t attempts_per_image = 100;
    std::uint64_t seed = 0;
};

/// Independent random one-pixel overwrites (uniform coordinate, uniform
/// 0..255 per channel). All attempts always run. Success iff any attempt
/// moves the argmax off the true class. The reported attempt is the
/// successful one with the highest adversarial-class probability, or, if
/// none succeeded, the one with the highest non-true-class probability.
inline AttackOutcome random_one_pixel_attack(const Oracle& oracle, const LabeledImage& labeled,
                                             const RandomBaselineConfig& config,
                                             std::size_t batch = 512) {
    if (config.attempts_per_image < 1)
        throw UsageError("random baseline needs at least one attempt");
    const auto& img = labeled.image;
    const std::size_t true_class = labeled.true_class;
    if (true_class >= oracle.info().num_classes)
        throw UsageError("true class out of range");
    const std::uint64_t image_seed = derive_seed(config.seed, hash_string(labeled.id));

    struct Best {
        bool success = false;
        double score = -1.0;
        PixelPerturbation pixel;
        ProbabilityVector probs;
    } best;

    std::size_t evaluations = 0;
    std::vector<PixelPerturbation> pixels;
    std::vector<ImageTensor> candidates;
    for (std::size_t start = 0; start < config.attempts_per_image; start += batch) {
        const std::size_t end = std::min(config.attempts_per_image, start + batch);
        pixels.clear();
        candidates.clear();
        for (std::size_t a = start; a < end; ++a) {
            Rng rng = Rng::stream(image_seed, a);
            PixelPerturbation p;
            p.x = static_cast<std::size_t>(rng.below(img.width()));
            p.y = static_cast<std::size_t>(rng.below(img.height()));
            p.color.resize(img.channels());
            for (auto& c : p.color)
                c = static_cast<std::uint8_t>(rng.below(256));
            candidates.push_back(apply_perturbation(img, std::span<const PixelPerturbation>(&p, 1)));
            pixels.push_back(std::move(p));
        }
        std::vector<ProbabilityVector> probs;
        try {
            probs = oracle.predict_batch(candidates);
        } catch (const Error& e) {
            throw AttackError(std::string("random baseline on '") + labeled.id + "' failed: " + e.what(),
                              evaluations);
        }
        evaluations += candidates.size();
        for (std::size_t i = 0; i < probs.size(); ++i) {
            const std::size_t arg = probs[i].argmax();
            const bool success = arg != true_class;
            const double score = success ? probs[i][arg] : probs[i].max_excluding(true_class);
            if ((success && !best.success) || (success == best.success && score > best.score)) {
                best.success = success;
                best.score = score;
                best.pixel = pixels[i];
                best.probs = probs[i];
            }
        }
    }

    AttackOutcome out;
    out.id = labeled.id;
    out.mode = AttackMode::random;
    out.success = best.success;
    out.perturbation = {best.pixel};
    out.original_colors = detail::original_colors(img, out.perturbation);
    out.adversarial_image = apply_perturbation(img, out.perturbation);
    out.final_probs = std::move(best.probs);
    out.predicted_class = out.final_probs.argmax();
    out.original_class = true_class;
    out.evaluations_used = evaluations;
    return out;
}

/// Per-generation mean of best fitness across runs. Runs that stopped early
/// are padded with their final value up to the longest trace.
inline std::vector<double> aggregate_traces(std::span<const std::vector<de::TracePoint>> traces) {
    std::size_t longest = 0;
    for (const auto& t : traces)
        longest = std::max(longest, t.size());
    std::vector<double> mean(longest, 0.0);
    std::size_t runs = 0;
    for (const auto& t : traces) {
        if (t.empty())
            continue;
        ++runs;
        for (std::size_t g = 0; g < longest; ++g)
            mean[g] += (g < t.size() ? t[g] : t.back()).best_fitness;
    }
    if (runs == 0)
        return {};
    for (double& v : mean)
        v /= static_cast<double>(runs);
    return mean;
}

/// Aggregate statistics over one campaign. Rates are absent when the
/// campaign did not produce that kind of result; averages are absent
/// without successes.
struct MetricsReport {
    std::size_t num_classes = 0;
    std::size_t images = 0;

    std::size_t targeted_attacks = 0;
    std::size_t targeted_successes = 0;
    std::optional<double> success_rate_targeted;

    std::size_t nontargeted_attacks = 0;
    std::size_t nontargeted_successes = 0;
    std::optional<double> success_rate_nontargeted;

    std::optional<double> confidence;
    /// Present for targeted campaigns only.
    std::optional<std::vector<std::size_t>> target_class_histogram;
    CountMatrix pair_matrix;
    ClassTotals class_totals;
    std::optional<double> avg_evaluations;
    std::optional<double> avg_distortion;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Builds a report from per-image outcome groups. A group holds either the
/// K−1 targeted outcomes of one image (non-targeted success is then derived
/// from them) or a single non-targeted / random outcome. Groups are
/// processed in the given order.
inline MetricsReport build_report(std::span<const std::vector<AttackOutcome>> groups,
                                  std::size_t num_classes) {
    MetricsReport r;
    r.num_classes = num_classes;
    r.images = groups.size();
    std::vector<AttackOutcome> all;
    std::vector<std::vector<AttackOutcome>> targeted_groups;
    for (const auto& g : groups) {
        if (g.empty())
            throw UsageError("empty outcome group");
        const bool targeted = g.front().mode == AttackMode::targeted;
        for (const auto& o : g)
            if ((o.mode == AttackMode::targeted) != targeted)
                throw UsageError("outcome group mixes targeted and non-targeted results");
        if (targeted) {
            targeted_groups.push_back(g);
            r.targeted_attacks += g.size();
            for (const auto& o : g)
                r.targeted_successes += o.success;
            ++r.nontargeted_attacks;
            r.nontargeted_successes += derive_nontargeted_from_targeted(g);
        } else {
            if (g.size() != 1)
                throw UsageError("non-targeted groups hold exactly one outcome");
            ++r.nontargeted_attacks;
            r.nontargeted_successes += g.front().success;
        }
        all.insert(all.end(), g.begin(), g.end());
    }
    if (r.targeted_attacks > 0) {
        r.success_rate_targeted = static_cast<double>(r.targeted_successes) / static_cast<double>(r.targeted_attacks);
        r.target_class_histogram = target_class_histogram(targeted_groups, num_classes);
    }
    if (r.nontargeted_attacks > 0)
        r.success_rate_nontargeted =
            static_cast<double>(r.nontargeted_successes) / static_cast<double>(r.nontargeted_attacks);
    r.confidence = confidence(all);
    r.pair_matrix = pair_matrix(all, num_classes);
    r.class_totals = class_totals(r.pair_matrix);
    r.avg_evaluations = average_evaluations(all);
    r.avg_distortion = average_distortion(all);
    return r;
}

} // namespace pixelstorm::metrics
