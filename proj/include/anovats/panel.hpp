#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "anovats/error.hpp"

namespace anovats {

/**
 * Grouped time-series panel: `a` groups (areas) observed at the same `n`
 * time points, each observation a `p`-vector. Values are stored group-major,
 * `values[(i * n + t) * p + d]`.
 *
 * A panel may contain missing cells; the value stored at a missing cell is
 * unspecified (NaN after ingestion) and is never read by the analyses.
 */
class Panel {
public:
    Panel() = default;

    Panel(std::vector<std::string> labels, std::size_t num_times, std::size_t dim,
          std::vector<double> values, std::vector<std::uint8_t> missing = {},
          std::vector<std::string> time_index = {}, std::vector<std::string> dim_labels = {})
        : labels_(std::move(labels)),
          n_(num_times),
          p_(dim),
          values_(std::move(values)),
          missing_(std::move(missing)),
          time_index_(std::move(time_index)),
          dim_labels_(std::move(dim_labels)) {
        if (missing_.empty()) missing_.assign(values_.size(), 0);
        validate();
    }

    [[nodiscard]] std::size_t num_groups() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t num_times() const noexcept { return n_; }
    [[nodiscard]] std::size_t dim() const noexcept { return p_; }

    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<std::string>& time_index() const noexcept { return time_index_; }
    [[nodiscard]] const std::vector<std::string>& dim_labels() const noexcept { return dim_labels_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<const std::uint8_t> missing_mask() const noexcept { return missing_; }

    [[nodiscard]] std::size_t offset(std::size_t group, std::size_t time, std::size_t d = 0) const noexcept {
        return (group * n_ + time) * p_ + d;
    }
    [[nodiscard]] double value(std::size_t group, std::size_t time, std::size_t d = 0) const noexcept {
        return values_[offset(group, time, d)];
    }
    [[nodiscard]] bool is_missing(std::size_t group, std::size_t time, std::size_t d = 0) const noexcept {
        return missing_[offset(group, time, d)] != 0;
    }

    [[nodiscard]] std::size_t missing_count(std::size_t group) const noexcept {
        const auto begin = missing_.begin() + static_cast<std::ptrdiff_t>(offset(group, 0));
        return static_cast<std::size_t>(std::count(begin, begin + static_cast<std::ptrdiff_t>(n_ * p_), 1));
    }
    [[nodiscard]] bool has_missing() const noexcept {
        return std::find(missing_.begin(), missing_.end(), 1) != missing_.end();
    }

    /// Values of one coordinate of one group, in time order.
    [[nodiscard]] std::vector<double> series(std::size_t group, std::size_t d = 0) const {
        std::vector<double> out(n_);
        for (std::size_t t = 0; t < n_; ++t) out[t] = value(group, t, d);
        return out;
    }
    [[nodiscard]] std::vector<std::uint8_t> series_mask(std::size_t group, std::size_t d = 0) const {
        std::vector<std::uint8_t> out(n_);
        for (std::size_t t = 0; t < n_; ++t) out[t] = missing_[offset(group, t, d)];
        return out;
    }

    /// Index of the time label, if present.
    [[nodiscard]] std::optional<std::size_t> find_time(const std::string& label) const {
        const auto it = std::find(time_index_.begin(), time_index_.end(), label);
        if (it == time_index_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - time_index_.begin());
    }

    friend bool operator==(const Panel& lhs, const Panel& rhs) {
        if (lhs.labels_ != rhs.labels_ || lhs.n_ != rhs.n_ || lhs.p_ != rhs.p_ ||
            lhs.missing_ != rhs.missing_ || lhs.time_index_ != rhs.time_index_ ||
            lhs.dim_labels_ != rhs.dim_labels_)
            return false;
        for (std::size_t k = 0; k < lhs.values_.size(); ++k) {
            if (lhs.missing_[k] == 0 && lhs.values_[k] != rhs.values_[k]) return false;
        }
        return true;
    }

private:
    void validate() const {
        if (n_ == 0 || p_ == 0) throw Error("panel", "number of time points and dimension must be positive");
        if (labels_.empty()) throw Error("panel", "panel has no groups");
        if (values_.size() != labels_.size() * n_ * p_)
            throw Error("panel", "value array size does not match groups x times x dim");
        if (missing_.size() != values_.size()) throw Error("panel", "missing mask size does not match values");
        if (!time_index_.empty() && time_index_.size() != n_)
            throw Error("panel", "time index length does not match number of time points");
        if (!dim_labels_.empty() && dim_labels_.size() != p_)
            throw Error("panel", "dimension label count does not match dimension");
        std::unordered_set<std::string> seen;
        for (const auto& label : labels_) {
            if (label.empty()) throw Error("panel", "group label is empty");
            if (!seen.insert(label).second) throw Error("panel", "duplicate group label '" + label + "'");
        }
        for (std::size_t k = 0; k < values_.size(); ++k) {
            if (missing_[k] == 0 && !std::isfinite(values_[k]))
                throw Error("panel", "non-finite value at an observed cell of group '" +
                                         labels_[k / (n_ * p_)] + "'");
        }
    }

    std::vector<std::string> labels_;
    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> missing_;
    std::vector<std::string> time_index_;
    std::vector<std::string> dim_labels_;
};

/// A panel without missing cells. The test and the post-hoc procedure only
/// accept this type, so completeness is re-validated right before analysis.
class CompletePanel {
public:
    explicit CompletePanel(Panel panel) : panel_(std::move(panel)) {
        if (panel_.has_missing()) {
            for (std::size_t i = 0; i < panel_.num_groups(); ++i) {
                if (panel_.missing_count(i) > 0)
                    throw Error("panel", "group '" + panel_.labels()[i] +
                                             "' has missing values; drop, restrict or impute before testing");
            }
        }
    }

    [[nodiscard]] const Panel& panel() const noexcept { return panel_; }
    [[nodiscard]] std::size_t num_groups() const noexcept { return panel_.num_groups(); }
    [[nodiscard]] std::size_t num_times() const noexcept { return panel_.num_times(); }
    [[nodiscard]] std::size_t dim() const noexcept { return panel_.dim(); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return panel_.labels(); }
    [[nodiscard]] double value(std::size_t group, std::size_t time, std::size_t d = 0) const noexcept {
        return panel_.value(group, time, d);
    }

private:
    Panel panel_;
};

/// Sub-panel made of the listed groups, in the listed order.
[[nodiscard]] inline Panel select_groups(const Panel& panel, std::span<const std::size_t> groups) {
    const std::size_t block = panel.num_times() * panel.dim();
    std::vector<std::string> labels;
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
    labels.reserve(groups.size());
    values.reserve(groups.size() * block);
    missing.reserve(groups.size() * block);
    for (const std::size_t g : groups) {
        if (g >= panel.num_groups()) throw Error("panel", "group index out of range");
        labels.push_back(panel.labels()[g]);
        const std::size_t start = panel.offset(g, 0);
        values.insert(values.end(), panel.values().begin() + static_cast<std::ptrdiff_t>(start),
                      panel.values().begin() + static_cast<std::ptrdiff_t>(start + block));
        missing.insert(missing.end(), panel.missing_mask().begin() + static_cast<std::ptrdiff_t>(start),
                       panel.missing_mask().begin() + static_cast<std::ptrdiff_t>(start + block));
    }
    return Panel(std::move(labels), panel.num_times(), panel.dim(), std::move(values), std::move(missing),
                 panel.time_index(), panel.dim_labels());
}

[[nodiscard]] inline CompletePanel select_groups(const CompletePanel& panel, std::span<const std::size_t> groups) {
    return CompletePanel(select_groups(panel.panel(), groups));
}

/**
 * Keeps the groups whose fraction of missing cells is at most
 * `max_missing_fraction`, preserving group order.
 *
 * Throws InapplicableError when fewer than two groups survive.
 */
[[nodiscard]] inline Panel drop_incomplete_groups(const Panel& panel, double max_missing_fraction) {
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0))
        throw Error("panel", "max missing fraction must lie in [0, 1]");
    const double cells = static_cast<double>(panel.num_times() * panel.dim());
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < panel.num_groups(); ++i) {
        if (static_cast<double>(panel.missing_count(i)) / cells <= max_missing_fraction) keep.push_back(i);
    }
    if (keep.size() < 2)
        throw InapplicableError("panel", "fewer than 2 groups remain after dropping incomplete groups");
    return select_groups(panel, keep);
}

/// Slice of the panel between two time labels, both inclusive.
[[nodiscard]] inline Panel restrict_time(const Panel& panel, const std::string& from, const std::string& to) {
    const auto first = panel.find_time(from);
    if (!first) throw Error("panel", "unknown time label '" + from + "'");
    const auto last = panel.find_time(to);
    if (!last) throw Error("panel", "unknown time label '" + to + "'");
    if (*first > *last) throw Error("panel", "time range is reversed: '" + from + "' comes after '" + to + "'");

    const std::size_t n = *last - *first + 1;
    const std::size_t p = panel.dim();
    std::vector<double> values;
    std::vector<std::uint8_t> missing;
    values.reserve(panel.num_groups() * n * p);
    missing.reserve(panel.num_groups() * n * p);
    for (std::size_t i = 0; i < panel.num_groups(); ++i) {
        for (std::size_t t = *first; t <= *last; ++t) {
            for (std::size_t d = 0; d < p; ++d) {
                values.push_back(panel.value(i, t, d));
                missing.push_back(panel.is_missing(i, t, d) ? 1 : 0);
            }
        }
    }
    std::vector<std::string> times(panel.time_index().begin() + static_cast<std::ptrdiff_t>(*first),
                                   panel.time_index().begin() + static_cast<std::ptrdiff_t>(*last + 1));
    return Panel(panel.labels(), n, p, std::move(values), std::move(missing), std::move(times),
                 panel.dim_labels());
}

}  // namespace anovats
