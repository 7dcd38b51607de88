#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "anovats/core.hpp"
#include "anovats/posthoc.hpp"
#include "anovats/preprocess.hpp"

namespace anovats {

using json = nlohmann::ordered_json;

[[nodiscard]] inline json to_json(const TestResult& r) {
    return json{{"statistic", r.statistic},     {"b", r.block_b},
                {"p_value", r.p_value},         {"alpha", r.alpha},
                {"reject", r.reject},           {"group_means", r.group_means},
                {"subsample_stats", r.subsample_stats}};
}

[[nodiscard]] inline json to_json(const ClusterNode& node) {
    json out{{"members", node.member_labels}, {"sample_means", node.sample_means}};
    out["p_value"] = node.p_value ? json(*node.p_value) : json(nullptr);
    out["split_index"] = node.split_index ? json(*node.split_index) : json(nullptr);
    json children = json::array();
    for (const auto& child : node.children) children.push_back(to_json(child));
    out["children"] = std::move(children);
    return out;
}

[[nodiscard]] inline json to_json(const ClusterResult& r) {
    json trace = json::array();
    for (const auto& step : r.trace)
        trace.push_back({{"members", step.members}, {"p_value", step.p_value}, {"reject", step.reject},
                         {"depth", step.depth}, {"alpha", step.alpha}});
    return json{{"alpha", r.alpha},
                {"b", r.block_b},
                {"final_groups", r.final_groups},
                {"trace", std::move(trace)},
                {"root", to_json(r.root)}};
}

[[nodiscard]] inline json to_json(const prep::BoxCoxFit& fit) {
    return json{{"lambda", fit.lambda}, {"shift", fit.shift}, {"loglik", fit.loglik}};
}

[[nodiscard]] inline json to_json(const prep::ARModel& model) {
    return json{{"order", model.order},
                {"coefficients", model.coefficients},
                {"innovation_variance", model.innovation_variance},
                {"mean", model.mean},
                {"aic", model.aic}};
}

[[nodiscard]] inline json to_json(const prep::PreprocessResult& r) {
    json areas = json::array();
    for (const auto& area : r.areas)
        areas.push_back({{"area", area.label},
                         {"boxcox", to_json(area.boxcox)},
                         {"ar", to_json(area.ar)},
                         {"imputed_points", area.imputed}});
    return json{{"quarters", r.quarterly.num_times()}, {"areas", std::move(areas)}};
}

/// Six significant digits, for human-facing output.
[[nodiscard]] inline std::string short_number(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6g", value);
    return buffer;
}

namespace detail {

inline std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t k = 0; k < items.size(); ++k) out += (k > 0 ? ", " : "") + items[k];
    return out;
}

inline void render(std::ostringstream& os, const ClusterNode& node, double alpha, const std::string& indent) {
    os << indent << '(' << join(node.member_labels) << ')';
    if (node.p_value) {
        os << "  p=" << short_number(*node.p_value) << (*node.p_value < alpha ? "  rejected" : "  not rejected");
        if (node.split_index) os << ", split after position " << *node.split_index;
    } else {
        os << "  single area";
    }
    os << '\n';
    for (const auto& child : node.children) render(os, child, alpha, indent + "  ");
}

}  // namespace detail

/// Indented tree of the recursive division followed by the final groups.
[[nodiscard]] inline std::string render_tree(const ClusterResult& r) {
    std::ostringstream os;
    os << "block length b=" << r.block_b << ", alpha=" << short_number(r.alpha) << '\n';
    detail::render(os, r.root, r.alpha, "");
    os << "final groups:";
    for (const auto& group : r.final_groups) os << " (" << detail::join(group) << ')';
    os << '\n';
    return os.str();
}

[[nodiscard]] inline std::string summary_line(const TestResult& r) {
    return "T_n=" + short_number(r.statistic) + " b=" + std::to_string(r.block_b) +
           " p-value=" + short_number(r.p_value) + " alpha=" + short_number(r.alpha) + " -> " +
           (r.reject ? "reject homogeneity" : "do not reject homogeneity");
}

}  // namespace anovats
