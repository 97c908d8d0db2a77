#pragma once

// JSON/CSV forms of outcomes and reports.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pixelstorm/attack.hpp"
#include "pixelstorm/error.hpp"
#include "pixelstorm/metrics.hpp"

namespace pixelstorm {

using Json = nlohmann::json;

namespace detail {

template <class T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

template <class T>
std::optional<T> optional_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<T>();
}

} // namespace detail

/// Outcome record: id, mode, target_class, success, predicted_class,
/// original_class, pixels [{x, y, color, original}], final_probs,
/// generations, evaluations, stopped_early.
inline Json outcome_to_json(const AttackOutcome& o) {
    Json pixels = Json::array();
    for (std::size_t i = 0; i < o.perturbation.size(); ++i) {
        const auto& p = o.perturbation[i];
        Json px = {{"x", p.x}, {"y", p.y}, {"color", p.color}};
        if (i < o.original_colors.size())
            px["original"] = o.original_colors[i];
        pixels.push_back(std::move(px));
    }
    return Json{{"id", o.id},
                {"mode", std::string(to_string(o.mode))},
                {"target_class", detail::optional_json(o.target_class)},
                {"success", o.success},
                {"predicted_class", o.predicted_class},
                {"original_class", o.original_class},
                {"pixels", std::move(pixels)},
                {"final_probs", o.final_probs.values()},
                {"generations", o.generations_run},
                {"evaluations", o.evaluations_used},
                {"stopped_early", o.stopped_early}};
}

/// Inverse of outcome_to_json. The adversarial image and trace are not part
/// of the record and come back empty.
inline AttackOutcome outcome_from_json(const Json& j) {
    try {
        AttackOutcome o;
        o.id = j.at("id").get<std::string>();
        o.mode = parse_attack_mode(j.at("mode").get<std::string>());
        o.target_class = detail::optional_from<std::size_t>(j, "target_class");
        o.success = j.at("success").get<bool>();
        o.predicted_class = j.at("predicted_class").get<std::size_t>();
        o.original_class = j.at("original_class").get<std::size_t>();
        for (const auto& px : j.at("pixels")) {
            o.perturbation.push_back({px.at("x").get<std::size_t>(), px.at("y").get<std::size_t>(),
                                      px.at("color").get<std::vector<std::uint8_t>>()});
            if (px.contains("original"))
                o.original_colors.push_back(px.at("original").get<std::vector<std::uint8_t>>());
        }
        o.final_probs = ProbabilityVector(j.at("final_probs").get<std::vector<double>>());
        o.generations_run = j.at("generations").get<std::size_t>();
        o.evaluations_used = j.at("evaluations").get<std::size_t>();
        o.stopped_early = j.value("stopped_early", false);
        return o;
    } catch (const Json::exception& e) {
        throw FormatError(std::string("malformed outcome record: ") + e.what());
    }
}

inline Json report_to_json(const metrics::MetricsReport& r) {
    Json histogram = r.target_class_histogram ? Json(*r.target_class_histogram) : Json(nullptr);
    return Json{
        {"num_classes", r.num_classes},
        {"images", r.images},
        {"targeted", {{"attacks", r.targeted_attacks},
                      {"successes", r.targeted_successes},
                      {"success_rate", detail::optional_json(r.success_rate_targeted)}}},
        {"nontargeted", {{"attacks", r.nontargeted_attacks},
                         {"successes", r.nontargeted_successes},
                         {"success_rate", detail::optional_json(r.success_rate_nontargeted)}}},
        {"confidence", detail::optional_json(r.confidence)},
        {"confidence_rule", "mean probability of the final argmax class over successful attacks"},
        {"target_class_histogram", std::move(histogram)},
        {"pair_matrix", r.pair_matrix},
        {"class_totals", {{"as_origin", r.class_totals.as_origin}, {"as_target", r.class_totals.as_target}}},
        {"avg_evaluations", detail::optional_json(r.avg_evaluations)},
        {"avg_distortion", detail::optional_json(r.avg_distortion)}};
}

inline std::string labels_or_indices(const std::vector<std::string>& labels, std::size_t k) {
    std::ostringstream out;
    for (std::size_t i = 0; i < k; ++i)
        out << (i ? "," : "") << (i < labels.size() ? labels[i] : std::to_string(i));
    return out.str();
}

/// K rows × K columns; header row holds the class labels.
inline std::string pair_matrix_csv(const metrics::CountMatrix& m, const std::vector<std::string>& labels) {
    std::ostringstream out;
    out << labels_or_indices(labels, m.size()) << '\n';
    for (const auto& row : m) {
        for (std::size_t k = 0; k < row.size(); ++k)
            out << (k ? "," : "") << row[k];
        out << '\n';
    }
    return out.str();
}

inline std::string histogram_csv(const std::vector<std::size_t>& bins) {
    std::ostringstream out;
    out << "target_classes,images\n";
    for (std::size_t b = 0; b < bins.size(); ++b)
        out << b << ',' << bins[b] << '\n';
    return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out)
        throw FormatError("cannot write " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace pixelstorm
