#pragma once

// Batch campaigns over a dataset: image selection, per-image attacks on a
// worker pool, per-image flushing of outcomes and traces, and reports.
//
// Output directory layout:
//   campaign.json            settings plus oracle info
//   outcomes/<id>.json       JSON array of outcome records for one image
//   traces/<id>[-t<k>].csv   fitness traces
//   report.json, pair_matrix.csv, histogram.csv (targeted campaigns)

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pixelstorm/attack.hpp"
#include "pixelstorm/builtin.hpp"
#include "pixelstorm/dataset.hpp"
#include "pixelstorm/metrics.hpp"
#include "pixelstorm/parallel.hpp"
#include "pixelstorm/remote.hpp"
#include "pixelstorm/serialize.hpp"

namespace pixelstorm {

inline constexpr const char* kOracleUrlEnv = "PIXELSTORM_ORACLE_URL";

struct CampaignConfig {
    std::filesystem::path dataset;   ///< CIFAR-10 binary batch
    std::filesystem::path manifest;  ///< or a PNG manifest
    std::string oracle;              ///< builtin:<weights> | remote:<url>
    Preset preset = Preset::kaggle_cifar10;
    AttackMode mode = AttackMode::nontargeted;
    std::size_t pixels = 1;
    std::optional<std::size_t> population;   ///< overrides the preset
    std::optional<std::size_t> generations;  ///< overrides the preset
    std::size_t images = 0;                  ///< 0 = every usable image
    std::uint64_t sample_seed = 0;
    std::uint64_t de_seed = 0;
    std::size_t attempts = 100;              ///< random baseline only
    std::filesystem::path out;
    std::size_t workers = default_workers();
};

inline Preset parse_preset(std::string_view s) {
    if (s == "kaggle") return Preset::kaggle_cifar10;
    if (s == "original") return Preset::original_cifar10;
    if (s == "imagenet") return Preset::imagenet;
    throw UsageError("unknown preset '" + std::string(s) + "' (kaggle|original|imagenet)");
}

inline std::string_view preset_name(Preset p) {
    switch (p) {
    case Preset::kaggle_cifar10: return "kaggle";
    case Preset::original_cifar10: return "original";
    case Preset::imagenet: return "imagenet";
    }
    return "?";
}

/// "builtin:<path>" or "remote:<url>"; an empty spec falls back to the
/// PIXELSTORM_ORACLE_URL environment variable.
inline std::unique_ptr<Oracle> make_oracle(const std::string& spec) {
    std::string s = spec;
    if (s.empty()) {
        const char* env = std::getenv(kOracleUrlEnv);
        if (!env || !*env)
            throw UsageError(std::string("no --oracle given and ") + kOracleUrlEnv + " is unset");
        s = std::string("remote:") + env;
    }
    if (s.rfind("builtin:", 0) == 0)
        return load_builtin_oracle(s.substr(8));
    if (s.rfind("remote:", 0) == 0)
        return std::make_unique<RemoteOracle>(s.substr(7));
    throw UsageError("oracle spec must be builtin:<weights> or remote:<url>, got '" + s + "'");
}

/// Filesystem-safe form of an image id.
inline std::string safe_id(const std::string& id) {
    std::string out = id;
    for (char& ch : out)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.')
            ch = '_';
    return out;
}

inline std::vector<LabeledImage> load_campaign_dataset(const CampaignConfig& c) {
    if (c.dataset.empty() == c.manifest.empty())
        throw UsageError("give exactly one of --dataset or --manifest");
    return c.dataset.empty() ? load_manifest(c.manifest) : cifar10::load_batch(c.dataset);
}

/// Shuffles with the sampling seed and keeps correctly classified images,
/// in shuffled order, until `count` are found (0 = all of them).
inline std::vector<LabeledImage> select_images(const Oracle& oracle, std::vector<LabeledImage> pool,
                                               std::size_t count, std::uint64_t sample_seed) {
    Rng rng(derive_seed(sample_seed, 0x5a));
    for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[static_cast<std::size_t>(rng.below(i))]);
    std::vector<LabeledImage> out;
    const std::size_t k = oracle.info().num_classes;
    constexpr std::size_t chunk = 256;
    for (std::size_t start = 0; start < pool.size(); start += chunk) {
        std::vector<LabeledImage> slice;
        for (std::size_t i = start; i < std::min(pool.size(), start + chunk); ++i)
            if (pool[i].true_class < k)
                slice.push_back(std::move(pool[i]));
        for (auto& li : filter_correctly_classified(oracle, slice)) {
            out.push_back(std::move(li));
            if (count != 0 && out.size() == count)
                return out;
        }
    }
    return out;
}

inline AttackSpec campaign_spec(const CampaignConfig& c) {
    const bool custom = c.population || c.generations;
    if (!custom && c.pixels != 1 && c.pixels != 3 && c.pixels != 5)
        throw UsageError("presets support --pixels 1, 3 or 5");
    if (c.preset == Preset::imagenet && c.mode == AttackMode::targeted)
        throw UsageError("the imagenet preset runs non-targeted attacks only");
    AttackSpec spec = AttackSpec::from_preset(c.preset, c.pixels, c.de_seed);
    if (c.population)
        spec.de.population_size = *c.population;
    if (c.generations)
        spec.de.max_generations = *c.generations;
    spec.validate();
    return spec;
}

inline Json campaign_json(const CampaignConfig& c, const OracleInfo& info, const char* command) {
    return Json{{"command", command},
                {"mode", std::string(to_string(c.mode))},
                {"preset", std::string(preset_name(c.preset))},
                {"pixels", c.pixels},
                {"population", c.population ? Json(*c.population) : Json(nullptr)},
                {"generations", c.generations ? Json(*c.generations) : Json(nullptr)},
                {"images", c.images},
                {"sample_seed", c.sample_seed},
                {"de_seed", c.de_seed},
                {"attempts", c.attempts},
                {"num_classes", info.num_classes},
                {"labels", info.labels}};
}

struct CampaignResult {
    /// Outcome groups sorted by image id.
    std::vector<std::vector<AttackOutcome>> groups;
    std::optional<metrics::MetricsReport> report;
    std::size_t images_planned = 0;
    std::size_t images_completed = 0;
    std::string error;
    bool complete() const noexcept { return error.empty() && images_completed == images_planned; }
};

/// Writes report.json, pair_matrix.csv and (targeted) histogram.csv.
inline metrics::MetricsReport write_report(const std::filesystem::path& dir,
                                           const std::vector<std::vector<AttackOutcome>>& groups,
                                           std::size_t num_classes,
                                           const std::vector<std::string>& labels) {
    auto report = metrics::build_report(groups, num_classes);
    write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text(dir / "pair_matrix.csv", pair_matrix_csv(report.pair_matrix, labels));
    if (report.target_class_histogram)
        write_text(dir / "histogram.csv", histogram_csv(*report.target_class_histogram));
    return report;
}

namespace detail {

template <class AttackImage>
CampaignResult run_campaign(const CampaignConfig& c, const Oracle& oracle, const char* command,
                            AttackImage&& attack_image) {
    namespace fs = std::filesystem;
    if (c.out.empty())
        throw UsageError("--out is required");
    auto images = select_images(oracle, load_campaign_dataset(c), c.images, c.sample_seed);
    fs::create_directories(c.out / "outcomes");
    fs::create_directories(c.out / "traces");
    write_text(c.out / "campaign.json", campaign_json(c, oracle.info(), command).dump(2) + "\n");

    CampaignResult result;
    result.images_planned = images.size();
    std::vector<std::optional<std::vector<AttackOutcome>>> slots(images.size());
    try {
        parallel_for(images.size(), c.workers, [&](std::size_t i) {
            auto group = attack_image(images[i]);
            const std::string stem = safe_id(images[i].id);
            Json arr = Json::array();
            for (const auto& o : group) {
                arr.push_back(outcome_to_json(o));
                if (!o.fitness_trace.empty()) {
                    const std::string name =
                        o.target_class ? stem + "-t" + std::to_string(*o.target_class) : stem;
                    write_text(c.out / "traces" / (name + ".csv"), de::trace_csv(o.fitness_trace));
                }
            }
            write_text(c.out / "outcomes" / (stem + ".json"), arr.dump(2) + "\n");
            slots[i] = std::move(group);
        });
    } catch (const std::exception& e) {
        result.error = e.what();
    }
    for (auto& s : slots)
        if (s)
            result.groups.push_back(std::move(*s));
    result.images_completed = result.groups.size();
    std::sort(result.groups.begin(), result.groups.end(),
              [](const auto& a, const auto& b) { return a.front().id < b.front().id; });
    if (result.complete() && !result.groups.empty())
        result.report = write_report(c.out, result.groups, oracle.info().num_classes, oracle.info().labels);
    return result;
}

} // namespace detail

/// DE attacks. Targeted campaigns attack every class other than the true
/// class for each image; non-targeted campaigns minimize the true class.
/// Seeds derive from (de_seed, image id[, target]) so results do not
/// depend on the worker count or the image order.
inline CampaignResult run_attack_campaign(const CampaignConfig& c, const Oracle& oracle) {
    const AttackSpec base = campaign_spec(c);
    if (c.mode == AttackMode::random)
        throw UsageError("use the baseline command for random attacks");
    return detail::run_campaign(c, oracle, "attack", [&](const LabeledImage& li) {
        const std::uint64_t image_seed = derive_seed(c.de_seed, hash_string(li.id));
        std::vector<AttackOutcome> group;
        AttackSpec spec = base;
        if (c.mode == AttackMode::targeted) {
            for (std::size_t t = 0; t < oracle.info().num_classes; ++t) {
                if (t == li.true_class)
                    continue;
                spec.de.seed = derive_seed(image_seed, t + 1);
                group.push_back(run_targeted_attack(oracle, li, t, spec));
            }
        } else {
            spec.de.seed = image_seed;
            group.push_back(run_nontargeted_attack(oracle, li, spec));
        }
        return group;
    });
}

/// Random one-pixel baseline with `attempts` evaluations per image.
inline CampaignResult run_baseline_campaign(const CampaignConfig& c, const Oracle& oracle) {
    metrics::RandomBaselineConfig rb{c.attempts, c.de_seed};
    return detail::run_campaign(c, oracle, "baseline", [&](const LabeledImage& li) {
        return std::vector<AttackOutcome>{metrics::random_one_pixel_attack(oracle, li, rb)};
    });
}

/// Rebuilds the report from stored outcomes (same ordering and arithmetic
/// as the campaign itself, so the files come out identical).
inline metrics::MetricsReport report_from_directory(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path outcomes = dir / "outcomes";
    std::vector<std::vector<AttackOutcome>> groups;
    if (fs::is_directory(outcomes))
        for (const auto& entry : fs::directory_iterator(outcomes)) {
            if (entry.path().extension() != ".json")
                continue;
            Json arr;
            try {
                arr = Json::parse(read_text(entry.path()));
            } catch (const Json::exception& e) {
                throw FormatError(entry.path().string() + ": " + e.what());
            }
            std::vector<AttackOutcome> group;
            for (const auto& j : arr)
                group.push_back(outcome_from_json(j));
            if (!group.empty())
                groups.push_back(std::move(group));
        }
    if (groups.empty())
        throw UsageError("no outcome files under " + outcomes.string());
    std::sort(groups.begin(), groups.end(),
              [](const auto& a, const auto& b) { return a.front().id < b.front().id; });

    std::size_t k = groups.front().front().final_probs.size();
    std::vector<std::string> labels;
    if (fs::exists(dir / "campaign.json")) {
        const auto meta = Json::parse(read_text(dir / "campaign.json"));
        k = meta.value("num_classes", k);
        labels = meta.value("labels", std::vector<std::string>{});
    }
    return write_report(dir, groups, k, labels);
}

} // namespace pixelstorm
