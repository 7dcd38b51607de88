#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "anovats/core.hpp"
#include "anovats/csv.hpp"
#include "anovats/posthoc.hpp"
#include "anovats/simgen.hpp"

namespace anovats::harness {

struct SizeExperiment {
    std::vector<std::size_t> a_list{3, 9, 15};
    std::vector<std::size_t> n_list{20, 30, 50, 70, 100};
    std::vector<double> c_list{1, 1.5, 2, 2.5, 3, 4, 5, 6};
    std::vector<int> processes{1, 2, 3, 4};
    std::vector<sim::Dependence> cases{sim::Dependence::case1_independent, sim::Dependence::case2_correlated};
    std::size_t reps = 200;
    double alpha = 0.05;
};

struct PowerExperiment {
    std::size_t a = 6;
    std::vector<double> effects{0, 0, 0, 1, 1, 1};
    std::vector<std::size_t> n_list{20, 30, 50, 70, 100};
    double c = 2.5;
    std::vector<int> processes{1, 2, 3, 4};
    std::vector<sim::Dependence> cases{sim::Dependence::case1_independent, sim::Dependence::case2_correlated};
    std::size_t reps = 200;
    double alpha = 0.05;
};

/// One CSV row: `process,case,a,n,c,reps,seed,metric,value`.
struct ReportRow {
    std::string process;
    std::string case_id;
    std::size_t a = 0;
    std::size_t n = 0;
    double c = 0.0;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;  // NaN when undefined (empty denominator)
};

struct ExperimentReport {
    std::vector<ReportRow> rows;

    /// First row matching the key, or nullptr.
    [[nodiscard]] const ReportRow* find(const std::string& process, const std::string& case_id, std::size_t a,
                                        std::size_t n, double c, const std::string& metric) const {
        for (const auto& row : rows)
            if (row.process == process && row.case_id == case_id && row.a == a && row.n == n && row.c == c &&
                row.metric == metric)
                return &row;
        return nullptr;
    }
};

namespace metric {
inline constexpr const char* empirical_size = "empirical_size";
inline constexpr const char* first_split_power = "reject_and_correct_split";
inline constexpr const char* subgroup_size = "subgroup_rejection_given_correct_split";
inline constexpr const char* correct_split_count = "correct_split_count";
inline constexpr const char* correct_clustering = "correct_clustering";
inline constexpr const char* regenerated = "regenerated_draws";
}  // namespace metric

/// Worker count: ANOVATS_THREADS when set and positive, otherwise the
/// hardware concurrency.
[[nodiscard]] inline std::size_t thread_count() {
    if (const char* env = std::getenv("ANOVATS_THREADS")) {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && value > 0) return static_cast<std::size_t>(value);
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Evaluates `body(rep)` for rep = 0..reps-1 across threads. Results are
/// stored by replication index, so the output does not depend on scheduling.
template <typename Outcome>
[[nodiscard]] std::vector<Outcome> replicate(std::size_t reps, const std::function<Outcome(std::size_t)>& body,
                                             std::size_t threads = thread_count()) {
    std::vector<Outcome> outcomes(reps);
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(reps, 1));
    if (threads == 1) {
        for (std::size_t r = 0; r < reps; ++r) outcomes[r] = body(r);
        return outcomes;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t r = w; r < reps; r += threads) outcomes[r] = body(r);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (const auto& error : errors)
        if (error) std::rethrow_exception(error);
    return outcomes;
}

/// Draws one panel from the given stream.
using PanelGenerator = std::function<CompletePanel(sim::RngStream&)>;

struct Draw {
    std::optional<CompletePanel> panel;
    std::size_t regenerated = 0;
};

inline constexpr std::size_t max_regenerations = 1000;

/**
 * Panel for replication `rep` on stream (seed, rep). A trajectory rejected by
 * the generator (GARCH variance leaving (0, inf)) is redrawn on stream
 * (seed, rep + k * 2^32), k = 1, 2, ...
 */
[[nodiscard]] inline Draw draw_panel(const PanelGenerator& generator, std::uint64_t seed, std::size_t rep) {
    Draw draw;
    for (std::uint64_t attempt = 0; attempt <= max_regenerations; ++attempt) {
        sim::RngStream rng(seed, static_cast<std::uint64_t>(rep) + (attempt << 32));
        try {
            draw.panel.emplace(generator(rng));
            return draw;
        } catch (const sim::GenerationError&) {
            ++draw.regenerated;
        }
    }
    throw Error("harness", "generator failed " + std::to_string(max_regenerations) + " times in a row");
}

[[nodiscard]] inline PanelGenerator standard_generator(int process, sim::Dependence dependence, std::size_t groups,
                                                       std::size_t n, std::vector<double> effects = {}) {
    const sim::ProcessSpec spec = sim::standard_process(process, dependence, groups, n, std::move(effects));
    return [spec](sim::RngStream& rng) { return sim::assemble_panel(spec, rng); };
}

[[nodiscard]] inline std::string case_name(sim::Dependence dependence) {
    return dependence == sim::Dependence::case1_independent ? "1" : "2";
}

struct SizeCell {
    std::vector<std::size_t> rejections;  // per block constant
    std::size_t regenerated = 0;
};

/// Rejection counts under the null for each block constant, all constants
/// evaluated on the same replicated panels.
[[nodiscard]] inline SizeCell size_cell(const PanelGenerator& generator, const std::vector<double>& c_list,
                                        std::size_t reps, double alpha, std::uint64_t seed,
                                        std::size_t threads = thread_count()) {
    check_alpha(alpha);
    struct Outcome {
        std::vector<std::uint8_t> reject;
        std::size_t regenerated = 0;
    };
    const auto outcomes = replicate<Outcome>(
        reps,
        [&](std::size_t rep) {
            Draw draw = draw_panel(generator, seed, rep);
            const CompletePanel& panel = *draw.panel;
            const StatisticResult stat = statistic(panel);
            Outcome outcome;
            outcome.regenerated = draw.regenerated;
            for (const double c : c_list) {
                const std::size_t b = block_length(panel.num_times(), BlockRule{c, std::nullopt});
                const double p = p_value(stat.statistic, subsample_statistics(panel, b));
                outcome.reject.push_back(p < alpha ? 1 : 0);
            }
            return outcome;
        },
        threads);
    SizeCell cell;
    cell.rejections.assign(c_list.size(), 0);
    for (const auto& outcome : outcomes) {
        for (std::size_t k = 0; k < c_list.size(); ++k) cell.rejections[k] += outcome.reject[k];
        cell.regenerated += outcome.regenerated;
    }
    return cell;
}

/// Empirical size over the full (process, case, a, n, c) grid.
[[nodiscard]] inline ExperimentReport run_size(const SizeExperiment& exp, std::uint64_t seed,
                                               std::size_t threads = thread_count()) {
    if (exp.reps < 1) throw Error("harness", "reps must be at least 1");
    ExperimentReport report;
    for (const int process : exp.processes)
        for (const auto dependence : exp.cases)
            for (const std::size_t a : exp.a_list)
                for (const std::size_t n : exp.n_list) {
                    const auto cell =
                        size_cell(standard_generator(process, dependence, a, n), exp.c_list, exp.reps, exp.alpha,
                                  seed, threads);
                    for (std::size_t k = 0; k < exp.c_list.size(); ++k) {
                        report.rows.push_back({std::to_string(process), case_name(dependence), a, n, exp.c_list[k],
                                               exp.reps, seed, metric::empirical_size,
                                               static_cast<double>(cell.rejections[k]) /
                                                   static_cast<double>(exp.reps)});
                    }
                    if (cell.regenerated > 0) {
                        report.rows.push_back({std::to_string(process), case_name(dependence), a, n, 0.0, exp.reps,
                                               seed, metric::regenerated, static_cast<double>(cell.regenerated)});
                    }
                }
    return report;
}

struct PowerCell {
    std::size_t reps = 0;
    std::size_t correct_split = 0;      // rejected and split into the true two clusters
    std::size_t subgroup_rejected = 0;  // among correct splits: at least one side rejected
    std::size_t correct_clustering = 0;
    std::size_t regenerated = 0;

    [[nodiscard]] double first_split_power() const { return static_cast<double>(correct_split) / static_cast<double>(reps); }
    [[nodiscard]] double subgroup_size() const {
        return correct_split == 0 ? std::numeric_limits<double>::quiet_NaN()
                                  : static_cast<double>(subgroup_rejected) / static_cast<double>(correct_split);
    }
    [[nodiscard]] double clustering_rate() const {
        return static_cast<double>(correct_clustering) / static_cast<double>(reps);
    }
};

using LabelSet = std::set<std::string>;
using Partition = std::set<LabelSet>;

[[nodiscard]] inline Partition as_partition(const std::vector<std::vector<std::string>>& groups) {
    Partition out;
    for (const auto& g : groups) out.emplace(g.begin(), g.end());
    return out;
}

/**
 * Runs the full post-hoc procedure on each replication and scores it
 * against the true two-cluster partition, comparing unordered label sets.
 */
[[nodiscard]] inline PowerCell power_cell(const PanelGenerator& generator, const Partition& truth,
                                          const BlockRule& rule, std::size_t reps, double alpha,
                                          std::uint64_t seed, std::size_t threads = thread_count()) {
    check_alpha(alpha);
    struct Outcome {
        bool correct_split = false;
        bool subgroup_rejected = false;
        bool correct_clustering = false;
        std::size_t regenerated = 0;
    };
    const auto outcomes = replicate<Outcome>(
        reps,
        [&](std::size_t rep) {
            Draw draw = draw_panel(generator, seed, rep);
            const ClusterResult result = cluster(*draw.panel, rule, alpha);
            Outcome outcome;
            outcome.regenerated = draw.regenerated;
            const ClusterNode& root = result.root;
            if (!root.is_leaf()) {
                const Partition first = as_partition({root.children[0].member_labels, root.children[1].member_labels});
                outcome.correct_split = first == truth;
                if (outcome.correct_split) {
                    for (const auto& child : root.children)
                        if (child.p_value && *child.p_value < alpha) outcome.subgroup_rejected = true;
                }
            }
            outcome.correct_clustering = as_partition(result.final_groups) == truth;
            return outcome;
        },
        threads);
    PowerCell cell;
    cell.reps = reps;
    for (const auto& o : outcomes) {
        cell.correct_split += o.correct_split ? 1 : 0;
        cell.subgroup_rejected += o.subgroup_rejected ? 1 : 0;
        cell.correct_clustering += o.correct_clustering ? 1 : 0;
        cell.regenerated += o.regenerated;
    }
    return cell;
}

/// The true partition implied by distinct effect values, labelled Area_i.
[[nodiscard]] inline Partition partition_from_effects(const std::vector<double>& effects) {
    std::vector<double> levels(effects);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    Partition out;
    for (const double level : levels) {
        LabelSet set;
        for (std::size_t i = 0; i < effects.size(); ++i)
            if (effects[i] == level) set.insert("Area_" + std::to_string(i + 1));
        out.insert(std::move(set));
    }
    return out;
}

inline void append_power_rows(ExperimentReport& report, const std::string& process, const std::string& case_id,
                              std::size_t a, std::size_t n, double c, std::uint64_t seed, const PowerCell& cell) {
    auto row = [&](const char* name, double value) {
        report.rows.push_back({process, case_id, a, n, c, cell.reps, seed, name, value});
    };
    row(metric::first_split_power, cell.first_split_power());
    row(metric::subgroup_size, cell.subgroup_size());
    row(metric::correct_split_count, static_cast<double>(cell.correct_split));
    row(metric::correct_clustering, cell.clustering_rate());
    if (cell.regenerated > 0) row(metric::regenerated, static_cast<double>(cell.regenerated));
}

[[nodiscard]] inline ExperimentReport run_power(const PowerExperiment& exp, std::uint64_t seed,
                                                std::size_t threads = thread_count()) {
    if (exp.reps < 1) throw Error("harness", "reps must be at least 1");
    if (exp.effects.size() != exp.a) throw Error("harness", "number of effects must equal a");
    const Partition truth = partition_from_effects(exp.effects);
    const BlockRule rule{exp.c, std::nullopt};
    ExperimentReport report;
    for (const int process : exp.processes)
        for (const auto dependence : exp.cases)
            for (const std::size_t n : exp.n_list) {
                const auto cell = power_cell(standard_generator(process, dependence, exp.a, n, exp.effects), truth,
                                             rule, exp.reps, exp.alpha, seed, threads);
                append_power_rows(report, std::to_string(process), case_name(dependence), exp.a, n, exp.c, seed,
                                  cell);
            }
    return report;
}

/// CSV with header `process,case,a,n,c,reps,seed,metric,value`; undefined
/// values are written as `NA`.
inline void write_report(std::ostream& out, const ExperimentReport& report) {
    out << "process,case,a,n,c,reps,seed,metric,value\n";
    for (const auto& row : report.rows) {
        out << csv_detail::quote(row.process) << ',' << csv_detail::quote(row.case_id) << ',' << row.a << ','
            << row.n << ',' << csv_detail::format_number(row.c) << ',' << row.reps << ',' << row.seed << ','
            << row.metric << ',' << (std::isnan(row.value) ? std::string("NA") : csv_detail::format_number(row.value))
            << '\n';
    }
}

}  // namespace anovats::harness
