#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "anovats/error.hpp"
#include "anovats/panel.hpp"

namespace anovats {

/// Block length b = floor(c * n^(1/3)), clamped to [2, n - 1].
struct BlockRule {
    double c = 2.5;
    std::optional<std::size_t> override_b;
};

/**
 * Outcome of the subsampling homogeneity test.
 *
 * `subsample_stats` holds one statistic per length-`block_b` window
 * (n - b + 1 values); `p_value` is the fraction of them strictly above
 * `statistic`, and `reject` is `p_value < alpha`.
 */
struct TestResult {
    double statistic = 0.0;
    std::size_t block_b = 0;
    std::vector<double> subsample_stats;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    std::vector<std::vector<double>> group_means;  // a x p
    std::vector<double> grand_mean;                // p
};

struct StatisticResult {
    double statistic = 0.0;
    std::vector<std::vector<double>> group_means;
    std::vector<double> grand_mean;
};

namespace detail {

// Neumaier-compensated running sum; tolerates both adds and removals, which
// the sliding window needs.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            compensation_ += (sum_ - t) + x;
        else
            compensation_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + compensation_; }

private:
    double sum_ = 0.0;
    double compensation_ = 0.0;
};

// Sum over groups of squared distances between group means and their average,
// with means given row-major as groups x dim.
inline double between_group_sum_of_squares(std::span<const double> means, std::size_t groups, std::size_t dim) {
    double total = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        CompensatedSum centre;
        for (std::size_t i = 0; i < groups; ++i) centre.add(means[i * dim + d]);
        const double m = centre.value() / static_cast<double>(groups);
        CompensatedSum ss;
        for (std::size_t i = 0; i < groups; ++i) {
            const double diff = means[i * dim + d] - m;
            ss.add(diff * diff);
        }
        total += ss.value();
    }
    return total;
}

}  // namespace detail

/**
 * Block length for a series of length `n`. The formula gives b = n at n = 3,
 * so the result is clamped into [2, n - 1]; an override skips the formula but
 * is clamped the same way.
 */
[[nodiscard]] inline std::size_t block_length(std::size_t n, const BlockRule& rule = {}) {
    if (n < 3) throw InapplicableError("core", "at least 3 time points are required, got " + std::to_string(n));
    std::size_t b = 0;
    if (rule.override_b) {
        b = *rule.override_b;
    } else {
        if (!(rule.c > 0.0) || !std::isfinite(rule.c)) throw Error("core", "block constant c must be positive");
        b = static_cast<std::size_t>(std::floor(rule.c * std::cbrt(static_cast<double>(n))));
    }
    return std::clamp<std::size_t>(b, 2, n - 1);
}

/// T_n = n * sum_i |mean_i - grand mean|^2, with the grand mean taken over all
/// a * n observations.
[[nodiscard]] inline StatisticResult statistic(const CompletePanel& panel) {
    const std::size_t a = panel.num_groups();
    const std::size_t n = panel.num_times();
    const std::size_t p = panel.dim();
    if (a < 2) throw InapplicableError("core", "at least 2 groups are required");

    StatisticResult out;
    out.group_means.assign(a, std::vector<double>(p, 0.0));
    out.grand_mean.assign(p, 0.0);
    std::vector<double> flat(a * p);
    for (std::size_t d = 0; d < p; ++d) {
        detail::CompensatedSum all;
        for (std::size_t i = 0; i < a; ++i) {
            detail::CompensatedSum group;
            for (std::size_t t = 0; t < n; ++t) {
                group.add(panel.value(i, t, d));
                all.add(panel.value(i, t, d));
            }
            out.group_means[i][d] = group.value() / static_cast<double>(n);
            flat[i * p + d] = out.group_means[i][d];
        }
        out.grand_mean[d] = all.value() / static_cast<double>(a * n);
    }
    double ss = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
        detail::CompensatedSum acc;
        for (std::size_t i = 0; i < a; ++i) {
            const double diff = out.group_means[i][d] - out.grand_mean[d];
            acc.add(diff * diff);
        }
        ss += acc.value();
    }
    out.statistic = static_cast<double>(n) * ss;
    return out;
}

/**
 * Statistics on every window {t, ..., t + b - 1}, t = 0..n-b, scaled by the
 * finite population factor b / (1 - b/n). Window sums slide incrementally with
 * compensated accumulation over data centred at the per-coordinate grand mean.
 */
[[nodiscard]] inline std::vector<double> subsample_statistics(const CompletePanel& panel, std::size_t b) {
    const std::size_t a = panel.num_groups();
    const std::size_t n = panel.num_times();
    const std::size_t p = panel.dim();
    if (a < 2) throw InapplicableError("core", "at least 2 groups are required");
    if (b < 2 || b + 1 > n)
        throw Error("core", "block length " + std::to_string(b) + " outside [2, " + std::to_string(n - 1) + "]");

    std::vector<double> centre(p);
    for (std::size_t d = 0; d < p; ++d) {
        detail::CompensatedSum all;
        for (std::size_t i = 0; i < a; ++i)
            for (std::size_t t = 0; t < n; ++t) all.add(panel.value(i, t, d));
        centre[d] = all.value() / static_cast<double>(a * n);
    }

    const std::size_t windows = n - b + 1;
    const double bd = static_cast<double>(b);
    const double scale = bd / (1.0 - bd / static_cast<double>(n));
    std::vector<detail::CompensatedSum> sums(a * p);
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t t = 0; t < b; ++t)
            for (std::size_t d = 0; d < p; ++d) sums[i * p + d].add(panel.value(i, t, d) - centre[d]);

    std::vector<double> stats(windows);
    std::vector<double> means(a * p);
    for (std::size_t w = 0;; ++w) {
        for (std::size_t k = 0; k < a * p; ++k) means[k] = sums[k].value() / bd;
        stats[w] = scale * detail::between_group_sum_of_squares(means, a, p);
        if (w + 1 == windows) break;
        for (std::size_t i = 0; i < a; ++i) {
            for (std::size_t d = 0; d < p; ++d) {
                sums[i * p + d].add(panel.value(i, w + b, d) - centre[d]);
                sums[i * p + d].add(-(panel.value(i, w, d) - centre[d]));
            }
        }
    }
    return stats;
}

/// Fraction of subsample statistics strictly greater than `statistic`.
[[nodiscard]] inline double p_value(double statistic, std::span<const double> subsample_stats) {
    if (subsample_stats.empty()) throw Error("core", "no subsample statistics");
    const auto exceed = std::count_if(subsample_stats.begin(), subsample_stats.end(),
                                      [statistic](double s) { return s > statistic; });
    return static_cast<double>(exceed) / static_cast<double>(subsample_stats.size());
}

/**
 * Decision through the empirical quantile: reject when
 * `statistic >= inf{x : F(x) > 1 - alpha}` with F the right-continuous
 * empirical CDF of the subsample statistics.
 *
 * The jump of F at the k-th order statistic is tested as
 * (N - k) / N < alpha, i.e. on the empirical survival fraction, which is the
 * same floating-point quantity the p-value form compares with alpha.
 */
[[nodiscard]] inline bool quantile_decision(double statistic, std::span<const double> subsample_stats,
                                            double alpha) {
    if (subsample_stats.empty()) throw Error("core", "no subsample statistics");
    std::vector<double> sorted(subsample_stats.begin(), subsample_stats.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t total = sorted.size();
    std::size_t k = 1;
    while (k < total && !(static_cast<double>(total - k) / static_cast<double>(total) < alpha)) ++k;
    const double quantile = sorted[k - 1];
    return statistic >= quantile;
}

/// True when one exceedance T_{n,b,t} > T_n already forces p_n >= alpha,
/// i.e. 1 / (n - b + 1) >= alpha.
[[nodiscard]] inline bool small_n_guarantee(std::size_t n, const BlockRule& rule, double alpha) {
    const std::size_t b = block_length(n, rule);
    return 1.0 / static_cast<double>(n - b + 1) >= alpha;
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("core", "significance level must lie in (0, 1)");
}

/// The subsampling homogeneity test of equal group means.
[[nodiscard]] inline TestResult test(const CompletePanel& panel, const BlockRule& rule = {}, double alpha = 0.05) {
    check_alpha(alpha);
    if (panel.num_groups() < 2) throw InapplicableError("core", "at least 2 groups are required");
    TestResult result;
    result.alpha = alpha;
    result.block_b = block_length(panel.num_times(), rule);
    auto stat = statistic(panel);
    result.statistic = stat.statistic;
    result.group_means = std::move(stat.group_means);
    result.grand_mean = std::move(stat.grand_mean);
    result.subsample_stats = subsample_statistics(panel, result.block_b);
    result.p_value = p_value(result.statistic, result.subsample_stats);
    result.reject = result.p_value < alpha;
    return result;
}

}  // namespace anovats
