#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "anovats/core.hpp"
#include "anovats/error.hpp"
#include "anovats/panel.hpp"

namespace anovats {

/// Result of splitting a set of areas at the largest gap between adjacent
/// sorted sample means. `split_index` counts the areas on the left (1-based
/// i' in the usual notation).
struct GapSplit {
    std::size_t split_index = 0;
    std::vector<std::size_t> order;  // positions into the input, ascending by mean
    std::vector<std::string> sorted_labels;
    std::vector<double> sorted_means;
    std::vector<double> gaps;  // sorted_means[k + 1] - sorted_means[k]
    std::vector<std::string> left;
    std::vector<std::string> right;
};

/**
 * Sorts areas by mean (stable: ties keep input order) and splits after the
 * first position where the adjacent difference is maximal.
 */
[[nodiscard]] inline GapSplit split_at_largest_gap(const std::vector<std::string>& labels,
                                                   const std::vector<double>& means) {
    if (labels.size() != means.size()) throw Error("posthoc", "labels and means differ in length");
    if (labels.size() < 2) throw InapplicableError("posthoc", "splitting needs at least 2 areas");

    GapSplit out;
    out.order.resize(labels.size());
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&](std::size_t x, std::size_t y) { return means[x] < means[y]; });
    for (const std::size_t k : out.order) {
        out.sorted_labels.push_back(labels[k]);
        out.sorted_means.push_back(means[k]);
    }
    std::size_t best = 0;
    for (std::size_t k = 0; k + 1 < out.sorted_means.size(); ++k) {
        out.gaps.push_back(out.sorted_means[k + 1] - out.sorted_means[k]);
        if (out.gaps[k] > out.gaps[best]) best = k;
    }
    out.split_index = best + 1;
    out.left.assign(out.sorted_labels.begin(), out.sorted_labels.begin() + static_cast<std::ptrdiff_t>(out.split_index));
    out.right.assign(out.sorted_labels.begin() + static_cast<std::ptrdiff_t>(out.split_index), out.sorted_labels.end());
    return out;
}

struct ClusterNode {
    std::vector<std::string> member_labels;  // ascending by sample mean
    std::vector<std::size_t> member_groups;  // group indices into the input panel
    std::vector<double> sample_means;
    std::optional<double> p_value;
    std::optional<std::size_t> split_index;
    std::vector<ClusterNode> children;  // empty or exactly two

    [[nodiscard]] bool is_leaf() const noexcept { return children.empty(); }
};

struct TraceEntry {
    std::vector<std::string> members;
    double p_value = 1.0;
    bool reject = false;
    std::size_t depth = 0;
    double alpha = 0.05;
};

struct ClusterResult {
    ClusterNode root;
    std::vector<std::vector<std::string>> final_groups;
    double alpha = 0.05;
    std::size_t block_b = 0;
    std::vector<TraceEntry> trace;
};

/// Significance level for a node, given its depth (root = 0) and size.
using AlphaSchedule = std::function<double(std::size_t depth, std::size_t members)>;

namespace detail {

inline void grow(ClusterNode& node, const CompletePanel& panel, const BlockRule& rule, const AlphaSchedule& alpha_at,
                 std::size_t depth, ClusterResult& result) {
    if (node.member_groups.size() < 2) {
        result.final_groups.push_back(node.member_labels);
        return;
    }
    const double alpha = alpha_at(depth, node.member_groups.size());
    const TestResult test_result = test(select_groups(panel, node.member_groups), rule, alpha);
    node.p_value = test_result.p_value;
    result.trace.push_back({node.member_labels, test_result.p_value, test_result.reject, depth, alpha});
    if (!test_result.reject) {
        result.final_groups.push_back(node.member_labels);
        return;
    }

    const GapSplit split = split_at_largest_gap(node.member_labels, node.sample_means);
    node.split_index = split.split_index;
    node.children.resize(2);
    for (std::size_t k = 0; k < split.order.size(); ++k) {
        ClusterNode& child = node.children[k < split.split_index ? 0 : 1];
        const std::size_t from = split.order[k];
        child.member_labels.push_back(node.member_labels[from]);
        child.member_groups.push_back(node.member_groups[from]);
        child.sample_means.push_back(node.sample_means[from]);
    }
    for (ClusterNode& child : node.children) grow(child, panel, rule, alpha_at, depth + 1, result);
}

}  // namespace detail

/**
 * Recursive post-hoc division: test the node; when homogeneity is rejected,
 * split at the largest gap between sorted sample means and recurse on both
 * sides, until a test does not reject or a node holds a single area.
 * Every node is tested over the full time range, so b is the same everywhere.
 */
[[nodiscard]] inline ClusterResult cluster(const CompletePanel& panel, const BlockRule& rule,
                                           const AlphaSchedule& alpha_at) {
    if (panel.dim() != 1)
        throw InapplicableError("posthoc", "the post-hoc procedure is defined for one-dimensional panels (p = 1)");
    if (panel.num_groups() < 2) throw InapplicableError("posthoc", "at least 2 areas are required");

    ClusterResult result;
    result.block_b = block_length(panel.num_times(), rule);

    const StatisticResult stat = statistic(panel);
    std::vector<double> means(panel.num_groups());
    for (std::size_t i = 0; i < means.size(); ++i) means[i] = stat.group_means[i][0];

    std::vector<std::size_t> order(panel.num_groups());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return means[x] < means[y]; });
    for (const std::size_t g : order) {
        result.root.member_labels.push_back(panel.labels()[g]);
        result.root.member_groups.push_back(g);
        result.root.sample_means.push_back(means[g]);
    }
    detail::grow(result.root, panel, rule, alpha_at, 0, result);
    result.alpha = result.trace.front().alpha;
    return result;
}

[[nodiscard]] inline ClusterResult cluster(const CompletePanel& panel, const BlockRule& rule = {},
                                           double alpha = 0.05) {
    check_alpha(alpha);
    return cluster(panel, rule, [alpha](std::size_t, std::size_t) { return alpha; });
}

}  // namespace anovats
