#pragma once

// DE/rand/1 differential evolution without crossover. Each child competes
// only with the parent at its own population index.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "pixelstorm/error.hpp"
#include "pixelstorm/parallel.hpp"
#include "pixelstorm/rng.hpp"

namespace pixelstorm::de {

using Genome = std::vector<double>;

enum class Direction { maximize, minimize };

struct Config {
    std::size_t population_size = 400;
    double scale_f = 0.5;
    std::size_t max_generations = 100;
    std::uint64_t seed = 0;
    Direction direction = Direction::maximize;

    void validate() const {
        // Three donors plus the target slot.
        if (population_size < 4)
            throw UsageError("population_size must be >= 4");
        if (!(scale_f >= 0.0 && scale_f <= 2.0))
            throw UsageError("scale_f must lie in [0, 2]");
    }
};

struct Uniform {
    double lo;
    double hi;
};

struct Gaussian {
    double mu;
    double sigma;
};

using InitDistribution = std::variant<Uniform, Gaussian>;

/// One distribution per genome dimension.
using InitSpec = std::vector<InitDistribution>;

struct TracePoint {
    std::size_t generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;

    friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

/// A fitness value plus whatever the problem wants to remember about the
/// evaluation (the attack engine keeps the oracle's probability vector here).
template <class Aux = std::monostate>
struct Scored {
    double fitness = 0.0;
    Aux aux{};
};

template <class Aux = std::monostate>
struct EvolveResult {
    Genome best_genome;
    double best_fitness = 0.0;
    Aux best_aux{};
    std::size_t generations_run = 0;
    std::size_t evaluations_used = 0;
    /// generation 0 (initial population) through generations_run.
    std::vector<TracePoint> fitness_trace;
    bool stopped_early = false;
};

enum class Selection { keep_parent, keep_child };

inline bool better(double a, double b, Direction direction) noexcept {
    return direction == Direction::maximize ? a > b : a < b;
}

/// Child survives only when strictly better; ties keep the parent.
inline Selection select(double parent_fitness, double child_fitness, Direction direction) noexcept {
    return better(child_fitness, parent_fitness, direction) ? Selection::keep_child
                                                            : Selection::keep_parent;
}

inline void validate_init(const InitSpec& init, std::size_t dims) {
    if (init.size() != dims)
        throw UsageError("InitSpec has " + std::to_string(init.size()) + " entries for " +
                         std::to_string(dims) + " dimensions");
    for (const auto& d : init) {
        if (const auto* u = std::get_if<Uniform>(&d); u && !(u->lo <= u->hi))
            throw UsageError("Uniform init requires lo <= hi");
        if (const auto* g = std::get_if<Gaussian>(&d); g && !(g->sigma >= 0.0))
            throw UsageError("Gaussian init requires sigma >= 0");
    }
}

namespace detail {

// Stream tag 0 is initialization; generation g >= 1 uses tag g.
inline constexpr std::uint64_t kInitStream = 0;

inline double sample(const InitDistribution& dist, Rng& rng) {
    return std::visit(
        [&](const auto& d) -> double {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, Uniform>) {
                return d.lo + (d.hi - d.lo) * rng.unit();
            } else {
                if (d.sigma == 0.0)
                    return d.mu;
                std::normal_distribution<double> normal(d.mu, d.sigma);
                return normal(rng);
            }
        },
        dist);
}

} // namespace detail

/// population_size genomes; dimension j of genome i is drawn from init[j]
/// using the stream (seed, init, i).
inline std::vector<Genome> initialize_population(const Config& config, const InitSpec& init,
                                                 std::size_t dims) {
    config.validate();
    validate_init(init, dims);
    std::vector<Genome> population(config.population_size, Genome(dims));
    for (std::size_t i = 0; i < config.population_size; ++i) {
        Rng rng = Rng::stream(config.seed, detail::kInitStream, i);
        for (std::size_t j = 0; j < dims; ++j)
            population[i][j] = detail::sample(init[j], rng);
    }
    return population;
}

struct Donors {
    std::size_t r1, r2, r3;
};

/// Three indices, pairwise distinct and all different from target.
inline Donors pick_donors(std::size_t population_size, std::size_t target, Rng& rng) {
    if (population_size < 4)
        throw UsageError("mutation needs at least 4 population members");
    auto draw = [&](auto... exclude) {
        std::size_t r;
        do {
            r = static_cast<std::size_t>(rng.below(population_size));
        } while (((r == exclude) || ...));
        return r;
    };
    const std::size_t r1 = draw(target);
    const std::size_t r2 = draw(target, r1);
    const std::size_t r3 = draw(target, r1, r2);
    return {r1, r2, r3};
}

/// base + f·(plus − minus), element-wise.
inline Genome differential(const Genome& base, const Genome& plus, const Genome& minus, double f) {
    Genome child(base.size());
    for (std::size_t j = 0; j < base.size(); ++j)
        child[j] = base[j] + f * (plus[j] - minus[j]);
    return child;
}

inline Genome mutate(std::span<const Genome> population, std::size_t target_index, double scale_f,
                     Rng& rng) {
    const auto d = pick_donors(population.size(), target_index, rng);
    return differential(population[d.r1], population[d.r2], population[d.r3], scale_f);
}

// ---------------------------------------------------------------------------
// Problem adapters. A problem is either
//   - a batch function   std::span<const Genome> -> std::vector<X>, or
//   - a genome function  const Genome&            -> X,
// where X is a real number or Scored<Aux>.

template <class P>
concept BatchProblem = std::invocable<P&, std::span<const Genome>>;

template <class P>
concept GenomeProblem = !BatchProblem<P> && std::invocable<P&, const Genome&>;

namespace detail {

template <class X>
struct ScoredOf {
    using type = Scored<std::monostate>;
    static type wrap(X x) { return {static_cast<double>(x), {}}; }
};

template <class Aux>
struct ScoredOf<Scored<Aux>> {
    using type = Scored<Aux>;
    static type wrap(Scored<Aux> s) { return s; }
};

template <class P>
struct ProblemTraits;

template <BatchProblem P>
struct ProblemTraits<P> {
    using raw = typename std::invoke_result_t<P&, std::span<const Genome>>::value_type;
    using scored = typename ScoredOf<std::decay_t<raw>>::type;
};

template <GenomeProblem P>
struct ProblemTraits<P> {
    using raw = std::decay_t<std::invoke_result_t<P&, const Genome&>>;
    using scored = typename ScoredOf<raw>::type;
};

template <class S>
using aux_of = decltype(S::aux);

} // namespace detail

template <class P>
using problem_aux_t = detail::aux_of<typename detail::ProblemTraits<std::remove_reference_t<P>>::scored>;

/// Never stops early.
struct NoEarlyStop {
    template <class Aux>
    bool operator()(double, const Aux&) const noexcept { return false; }
};

struct Options {
    /// Threads used for genome problems; batch problems get one call per generation.
    std::size_t workers = 1;
    /// Called after the initial evaluation and after every generation with
    /// the full population fitness (index order).
    std::function<void(std::size_t generation, std::span<const double> fitness)> observer;
};

namespace detail {

template <class P, class S>
std::vector<S> evaluate(P& problem, std::span<const Genome> genomes, std::size_t generation,
                        std::size_t workers) {
    using Raw = typename ProblemTraits<P>::raw;
    std::vector<S> out;
    if constexpr (BatchProblem<P>) {
        auto raw = problem(genomes);
        if (raw.size() != genomes.size())
            throw UsageError("batch fitness returned " + std::to_string(raw.size()) +
                             " values for " + std::to_string(genomes.size()) + " genomes");
        out.reserve(raw.size());
        for (auto& r : raw)
            out.push_back(ScoredOf<Raw>::wrap(std::move(r)));
    } else {
        out.resize(genomes.size());
        parallel_for(genomes.size(), workers,
                     [&](std::size_t i) { out[i] = ScoredOf<Raw>::wrap(problem(genomes[i])); });
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out[i].fitness)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "non-finite fitness " << out[i].fitness << " at generation " << generation
                << ", index " << i << ", genome (";
            for (std::size_t j = 0; j < genomes[i].size(); ++j)
                msg << (j ? ", " : "") << genomes[i][j];
            msg << ")";
            throw EvaluationError(msg.str(), generation, i);
        }
    }
    return out;
}

template <class S>
std::size_t best_index(const std::vector<S>& scores, Direction direction) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (better(scores[i].fitness, scores[best].fitness, direction))
            best = i;
    return best;
}

template <class S>
TracePoint trace_point(std::size_t generation, const std::vector<S>& scores, std::size_t best) {
    double sum = 0.0;
    for (const auto& s : scores)
        sum += s.fitness;
    return {generation, scores[best].fitness, sum / static_cast<double>(scores.size())};
}

} // namespace detail

/// Runs DE until max_generations or until early_stop(best_fitness, best_aux)
/// holds after a completed generation (generation 0 is the initial
/// population). Every mutation event draws from the counter stream
/// (seed, generation, index), so results do not depend on `options.workers`.
template <class Problem, class EarlyStop = NoEarlyStop>
auto evolve(Problem&& problem, const Config& config, const InitSpec& init,
            EarlyStop&& early_stop = {}, const Options& options = {}) {
    using P = std::remove_reference_t<Problem>;
    using S = typename detail::ProblemTraits<P>::scored;
    using Aux = detail::aux_of<S>;

    EvolveResult<Aux> result;
    std::vector<Genome> population = initialize_population(config, init, init.size());
    std::vector<S> scores = detail::evaluate<P, S>(problem, population, 0, options.workers);
    result.evaluations_used = population.size();

    std::vector<double> fitness(population.size());
    auto publish = [&](std::size_t generation) {
        const std::size_t best = detail::best_index(scores, config.direction);
        result.fitness_trace.push_back(detail::trace_point(generation, scores, best));
        if (options.observer) {
            for (std::size_t i = 0; i < scores.size(); ++i)
                fitness[i] = scores[i].fitness;
            options.observer(generation, fitness);
        }
        return best;
    };

    std::size_t best = publish(0);
    if (early_stop(scores[best].fitness, std::as_const(scores[best].aux))) {
        result.stopped_early = true;
    } else {
        std::vector<Genome> children(population.size());
        for (std::size_t g = 1; g <= config.max_generations; ++g) {
            for (std::size_t i = 0; i < population.size(); ++i) {
                Rng rng = Rng::stream(config.seed, g, i);
                children[i] = mutate(population, i, config.scale_f, rng);
            }
            auto child_scores = detail::evaluate<P, S>(problem, children, g, options.workers);
            result.evaluations_used += children.size();
            for (std::size_t i = 0; i < population.size(); ++i) {
                if (select(scores[i].fitness, child_scores[i].fitness, config.direction) ==
                    Selection::keep_child) {
                    population[i] = std::move(children[i]);
                    scores[i] = std::move(child_scores[i]);
                }
            }
            result.generations_run = g;
            best = publish(g);
            if (early_stop(scores[best].fitness, std::as_const(scores[best].aux))) {
                result.stopped_early = true;
                break;
            }
        }
    }
    result.best_genome = population[best];
    result.best_fitness = scores[best].fitness;
    result.best_aux = scores[best].aux;
    return result;
}

/// Trace as CSV: header "generation,best_fitness,mean_fitness".
inline std::string trace_csv(std::span<const TracePoint> trace) {
    std::ostringstream out;
    out.precision(17);
    out << "generation,best_fitness,mean_fitness\n";
    for (const auto& p : trace)
        out << p.generation << ',' << p.best_fitness << ',' << p.mean_fitness << '\n';
    return out.str();
}

} // namespace pixelstorm::de
