#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "anovats/error.hpp"
#include "anovats/panel.hpp"

namespace anovats::prep {

// ---------------------------------------------------------------------------
// Seasonal aggregation

enum class Season { winter = 0, spring = 1, summer = 2, autumn = 3 };

inline constexpr std::array<const char*, 4> season_names{"winter", "spring", "summer", "autumn"};

struct YearMonth {
    int year = 0;
    int month = 0;  // 1..12
};

[[nodiscard]] inline std::optional<YearMonth> parse_year_month(const std::string& label) {
    if (label.size() != 7 || label[4] != '-') return std::nullopt;
    for (std::size_t k = 0; k < 7; ++k)
        if (k != 4 && (label[k] < '0' || label[k] > '9')) return std::nullopt;
    YearMonth ym{std::stoi(label.substr(0, 4)), std::stoi(label.substr(5, 2))};
    if (ym.month < 1 || ym.month > 12) return std::nullopt;
    return ym;
}

/// Season of a month, and the year it is labelled with: December belongs to
/// the winter of the following year.
[[nodiscard]] inline std::pair<int, Season> season_of(const YearMonth& ym) {
    switch (ym.month) {
        case 12: return {ym.year + 1, Season::winter};
        case 1:
        case 2: return {ym.year, Season::winter};
        case 3:
        case 4:
        case 5: return {ym.year, Season::spring};
        case 6:
        case 7:
        case 8: return {ym.year, Season::summer};
        default: return {ym.year, Season::autumn};
    }
}

[[nodiscard]] inline std::string season_label(int year, Season season) {
    return std::to_string(year) + "-" + season_names[static_cast<std::size_t>(season)];
}

/**
 * Monthly panel (time labels `YYYY-MM`) to quarterly panel (labels
 * `YYYY-winter`, `YYYY-spring`, ...). Each season is the mean of its available
 * months and missing when none is available. A season is emitted when at
 * least two of its three months fall inside the monthly range, so a series
 * running January to December yields whole calendar years of seasons.
 */
[[nodiscard]] inline Panel aggregate_seasons(const Panel& monthly) {
    if (monthly.time_index().empty()) throw Error("preprocess", "time index lacks year-month information");
    std::vector<YearMonth> months;
    for (const auto& label : monthly.time_index()) {
        const auto ym = parse_year_month(label);
        if (!ym) throw Error("preprocess", "time label '" + label + "' is not of the form YYYY-MM");
        months.push_back(*ym);
    }
    auto ordinal = [](const YearMonth& ym) { return ym.year * 12 + (ym.month - 1); };
    const auto [lo_it, hi_it] = std::minmax_element(
        months.begin(), months.end(), [&](const YearMonth& x, const YearMonth& y) { return ordinal(x) < ordinal(y); });
    const int first = ordinal(*lo_it);
    const int last = ordinal(*hi_it);

    // Season k of seasonal year y covers calendar ordinals start .. start + 2.
    auto season_start = [](int year, Season s) {
        return s == Season::winter ? year * 12 - 1 : year * 12 + 3 * static_cast<int>(s) - 1;
    };
    struct Slot {
        int year;
        Season season;
    };
    std::vector<Slot> slots;
    for (int year = lo_it->year; year <= hi_it->year + 1; ++year) {
        for (int s = 0; s < 4; ++s) {
            const int start = season_start(year, static_cast<Season>(s));
            int inside = 0;
            for (int k = 0; k < 3; ++k) inside += (start + k >= first && start + k <= last) ? 1 : 0;
            if (inside >= 2) slots.push_back({year, static_cast<Season>(s)});
        }
    }
    if (slots.empty()) throw Error("preprocess", "monthly range covers no complete season");

    auto slot_of = [&](const YearMonth& ym) -> std::optional<std::size_t> {
        const auto [year, season] = season_of(ym);
        for (std::size_t k = 0; k < slots.size(); ++k)
            if (slots[k].year == year && slots[k].season == season) return k;
        return std::nullopt;
    };

    const std::size_t a = monthly.num_groups();
    const std::size_t p = monthly.dim();
    const std::size_t q = slots.size();
    std::vector<double> sums(a * q * p, 0.0);
    std::vector<std::size_t> counts(a * q * p, 0);
    for (std::size_t t = 0; t < months.size(); ++t) {
        const auto slot = slot_of(months[t]);
        if (!slot) continue;
        for (std::size_t i = 0; i < a; ++i)
            for (std::size_t d = 0; d < p; ++d) {
                if (monthly.is_missing(i, t, d)) continue;
                sums[(i * q + *slot) * p + d] += monthly.value(i, t, d);
                ++counts[(i * q + *slot) * p + d];
            }
    }
    std::vector<double> values(a * q * p, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint8_t> missing(a * q * p, 1);
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (counts[k] == 0) continue;
        values[k] = sums[k] / static_cast<double>(counts[k]);
        missing[k] = 0;
    }
    std::vector<std::string> labels;
    for (const Slot& slot : slots) labels.push_back(season_label(slot.year, slot.season));
    return Panel(monthly.labels(), q, p, std::move(values), std::move(missing), std::move(labels),
                 monthly.dim_labels());
}

// ---------------------------------------------------------------------------
// Box-Cox

struct BoxCoxFit {
    double lambda = 1.0;
    double shift = 0.0;
    double loglik = 0.0;
};

[[nodiscard]] inline double boxcox_transform(double x, double lambda, double shift = 0.0) {
    const double v = x + shift;
    if (lambda == 0.0) return std::log(v);
    return (std::pow(v, lambda) - 1.0) / lambda;
}

[[nodiscard]] inline double boxcox_inverse(double y, double lambda, double shift = 0.0) {
    if (lambda == 0.0) return std::exp(y) - shift;
    const double base = lambda * y + 1.0;
    if (!(base > 0.0)) throw Error("preprocess", "value outside the range of the inverse Box-Cox transform");
    return std::pow(base, 1.0 / lambda) - shift;
}

/// Gaussian profile log-likelihood of the transformed sample, including the
/// Jacobian term (lambda - 1) * sum log x.
[[nodiscard]] inline double boxcox_loglik(std::span<const double> values, double lambda, double shift = 0.0) {
    const auto m = static_cast<double>(values.size());
    double mean = 0.0, log_sum = 0.0;
    std::vector<double> y(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        y[k] = boxcox_transform(values[k], lambda, shift);
        mean += y[k];
        log_sum += std::log(values[k] + shift);
    }
    mean /= m;
    double ss = 0.0;
    for (const double v : y) ss += (v - mean) * (v - mean);
    const double variance = ss / m;
    return -0.5 * m * (std::log(2.0 * std::numbers::pi * variance) + 1.0) + (lambda - 1.0) * log_sum;
}

/// Grid search for the Box-Cox lambda on [lambda_min, lambda_max].
[[nodiscard]] inline BoxCoxFit boxcox_fit(std::span<const double> values, double lambda_min = -2.0,
                                          double lambda_max = 2.0, double step = 0.01, double shift = 0.0) {
    if (values.size() < 2) throw Error("preprocess", "Box-Cox fit needs at least 2 values");
    if (!(step > 0.0) || !(lambda_max >= lambda_min)) throw Error("preprocess", "invalid Box-Cox lambda grid");
    if (shift < 0.0) throw Error("preprocess", "Box-Cox shift must be nonnegative");
    for (const double v : values) {
        if (!(v + shift > 0.0))
            throw Error("preprocess", "Box-Cox needs positive values; supply a positive shift (smallest value is " +
                                          std::to_string(*std::min_element(values.begin(), values.end())) + ")");
    }
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); }))
        throw Error("preprocess", "Box-Cox fit on a constant series is undefined");

    const auto points = static_cast<std::size_t>(std::floor((lambda_max - lambda_min) / step + 1e-9)) + 1;
    BoxCoxFit best{lambda_min, shift, -std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < points; ++k) {
        double lambda = lambda_min + static_cast<double>(k) * step;
        if (std::abs(lambda) < 1e-9 * step) lambda = 0.0;
        const double ll = boxcox_loglik(values, lambda, shift);
        if (ll > best.loglik) best = {lambda, shift, ll};
    }
    return best;
}

// ---------------------------------------------------------------------------
// AR imputation

struct ARModel {
    std::size_t order = 1;
    std::vector<double> coefficients;
    double innovation_variance = 1.0;
    double mean = 0.0;
    double aic = 0.0;
};

struct ImputationResult {
    std::vector<double> completed;
    ARModel model;
};

/// Largest modulus among the roots of the companion matrix.
[[nodiscard]] inline double spectral_radius(std::span<const double> coefficients) {
    const auto k = static_cast<Eigen::Index>(coefficients.size());
    if (k == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) companion(0, j) = coefficients[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 1; j < k; ++j) companion(j, j - 1) = 1.0;
    return companion.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

struct YuleWalkerPath {
    std::vector<std::vector<double>> coefficients;  // [k - 1] = AR(k) coefficients
    std::vector<double> variances;                  // [k - 1] = AR(k) innovation variance
};

// Levinson-Durbin recursion on autocovariances gamma[0..max_order].
inline YuleWalkerPath levinson(const std::vector<double>& gamma, std::size_t max_order) {
    YuleWalkerPath path;
    std::vector<double> phi;
    double variance = gamma[0];
    for (std::size_t k = 1; k <= max_order; ++k) {
        double acc = gamma[k];
        for (std::size_t j = 0; j + 1 < k; ++j) acc -= phi[j] * gamma[k - 1 - j];
        const double kappa = acc / variance;
        std::vector<double> next(k);
        for (std::size_t j = 0; j + 1 < k; ++j) next[j] = phi[j] - kappa * phi[k - 2 - j];
        next[k - 1] = kappa;
        phi = std::move(next);
        variance *= (1.0 - kappa * kappa);
        path.coefficients.push_back(phi);
        path.variances.push_back(variance);
    }
    return path;
}

// Stationary covariance of the companion state: P = T P T' + Q.
inline Eigen::MatrixXd stationary_state_covariance(const Eigen::MatrixXd& transition, double variance) {
    const Eigen::Index k = transition.rows();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
    q(0, 0) = variance;
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(k * k, k * k);
    Eigen::MatrixXd kron(k * k, k * k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) kron.block(r * k, c * k, k, k) = transition(r, c) * transition;
    const Eigen::VectorXd vec_q = Eigen::Map<const Eigen::VectorXd>(q.data(), k * k);
    const Eigen::VectorXd vec_p = (identity - kron).partialPivLu().solve(vec_q);
    Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(vec_p.data(), k, k);
    return 0.5 * (p + p.transpose());
}

}  // namespace detail

/**
 * Fixed-interval smoothing of an AR(k) series cast in state-space form
 * (companion state, no measurement noise). Missing positions are replaced
 * by their smoothed conditional means; observed positions are returned
 * unchanged.
 */
[[nodiscard]] inline std::vector<double> ar_smooth(std::span<const double> series, std::span<const std::uint8_t> missing,
                                                   const ARModel& model) {
    if (series.size() != missing.size()) throw Error("preprocess", "series and mask differ in length");
    if (model.coefficients.empty() || !(model.innovation_variance > 0.0))
        throw Error("preprocess", "AR model needs at least one coefficient and a positive innovation variance");
    if (spectral_radius(model.coefficients) >= 1.0)
        throw Error("preprocess", "AR model is not stationary; consider differencing the series");

    const auto k = static_cast<Eigen::Index>(model.coefficients.size());
    const std::size_t n = series.size();
    Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) transition(0, j) = model.coefficients[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 1; j < k; ++j) transition(j, j - 1) = 1.0;
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
    q(0, 0) = model.innovation_variance;

    std::vector<Eigen::VectorXd> a(n);
    std::vector<Eigen::MatrixXd> p(n);
    std::vector<Eigen::MatrixXd> l(n);
    std::vector<double> v(n, 0.0), f(n, 0.0);

    Eigen::VectorXd state = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd cov = detail::stationary_state_covariance(transition, model.innovation_variance);
    for (std::size_t t = 0; t < n; ++t) {
        a[t] = state;
        p[t] = cov;
        if (missing[t] != 0) {
            l[t] = transition;
            state = transition * state;
            cov = transition * cov * transition.transpose() + q;
            continue;
        }
        v[t] = (series[t] - model.mean) - state(0);
        f[t] = cov(0, 0);
        if (!(f[t] > 0.0)) throw Error("preprocess", "degenerate prediction variance in the AR smoother");
        const Eigen::VectorXd gain = transition * cov.col(0) / f[t];
        l[t] = transition;
        l[t].col(0) -= gain;
        state = transition * state + gain * v[t];
        cov = transition * cov * l[t].transpose() + q;
    }

    std::vector<double> out(series.begin(), series.end());
    Eigen::VectorXd r = Eigen::VectorXd::Zero(k);
    for (std::size_t t = n; t-- > 0;) {
        if (missing[t] != 0) {
            r = transition.transpose() * r;
            out[t] = model.mean + (a[t] + p[t] * r)(0);
        } else {
            Eigen::VectorXd next = l[t].transpose() * r;
            next(0) += v[t] / f[t];
            r = std::move(next);
        }
    }
    return out;
}

/**
 * Fits an AR model to the observed part of the series (Yule-Walker on
 * demeaned autocovariances over fully observed pairs, order by AIC over
 * 1..max_order) and fills the missing positions with smoothed means.
 */
[[nodiscard]] inline ImputationResult ar_impute(std::span<const double> series, std::span<const std::uint8_t> missing,
                                                std::size_t max_order = 5) {
    if (series.size() != missing.size()) throw Error("preprocess", "series and mask differ in length");
    if (max_order < 1) throw Error("preprocess", "maximum AR order must be at least 1");
    const std::size_t n = series.size();
    std::size_t observed = 0;
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t)
        if (missing[t] == 0) {
            ++observed;
            mean += series[t];
        }
    const std::size_t needed = std::max<std::size_t>(10, 3 * max_order);
    if (observed < needed)
        throw InapplicableError("preprocess", "AR imputation needs at least " + std::to_string(needed) +
                                                  " observed values, got " + std::to_string(observed));
    mean /= static_cast<double>(observed);

    std::size_t leading = 0, trailing = 0;
    while (leading < n && missing[leading] != 0) ++leading;
    while (trailing < n && missing[n - 1 - trailing] != 0) ++trailing;
    if (leading > max_order || trailing > max_order)
        throw InapplicableError("preprocess", "missing run at the start or end of the series is longer than " +
                                                  std::to_string(max_order));

    std::vector<double> gamma(max_order + 1, 0.0);
    for (std::size_t h = 0; h <= max_order; ++h) {
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t t = 0; t + h < n; ++t) {
            if (missing[t] != 0 || missing[t + h] != 0) continue;
            sum += (series[t] - mean) * (series[t + h] - mean);
            ++pairs;
        }
        if (pairs == 0) throw InapplicableError("preprocess", "no observed pairs at lag " + std::to_string(h));
        gamma[h] = sum / static_cast<double>(pairs) * static_cast<double>(n - h) / static_cast<double>(n);
    }
    if (!(gamma[0] > 0.0)) throw InapplicableError("preprocess", "observed series is constant");

    const auto path = detail::levinson(gamma, max_order);
    ARModel best;
    best.aic = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= max_order; ++k) {
        const double variance = path.variances[k - 1];
        if (!(variance > 0.0)) break;
        const double aic = static_cast<double>(observed) * std::log(variance) + 2.0 * static_cast<double>(k + 1);
        if (aic < best.aic) best = ARModel{k, path.coefficients[k - 1], variance, mean, aic};
    }
    if (!std::isfinite(best.aic)) throw InapplicableError("preprocess", "AR fit failed: degenerate autocovariances");
    if (spectral_radius(best.coefficients) >= 1.0)
        throw Error("preprocess", "fitted AR model is not stationary; consider differencing the series");

    return {ar_smooth(series, missing, best), best};
}

// ---------------------------------------------------------------------------
// Pipeline

struct AreaPreprocessing {
    std::string label;
    BoxCoxFit boxcox;
    ARModel ar;
    std::size_t imputed = 0;
};

struct PreprocessResult {
    Panel quarterly;
    std::vector<AreaPreprocessing> areas;
};

struct PreprocessOptions {
    double lambda_min = -2.0;
    double lambda_max = 2.0;
    double lambda_step = 0.01;
    std::size_t max_order = 5;
    double shift = 0.0;  // added before the Box-Cox transform
};

/**
 * Monthly panel to complete quarterly panel: seasonal means, then per area a
 * Box-Cox fit, AR imputation on the transformed scale, and back-transform of
 * the imputed cells. Observed quarterly values are passed through untouched.
 */
[[nodiscard]] inline PreprocessResult preprocess(const Panel& monthly, const PreprocessOptions& options = {}) {
    if (monthly.dim() != 1) throw InapplicableError("preprocess", "the pipeline handles one-dimensional panels only");
    Panel quarterly = aggregate_seasons(monthly);
    const std::size_t a = quarterly.num_groups();
    const std::size_t n = quarterly.num_times();

    PreprocessResult out;
    std::vector<double> values(quarterly.values().begin(), quarterly.values().end());
    for (std::size_t i = 0; i < a; ++i) {
        const auto series = quarterly.series(i);
        const auto mask = quarterly.series_mask(i);
        std::vector<double> observed;
        for (std::size_t t = 0; t < n; ++t)
            if (mask[t] == 0) observed.push_back(series[t]);
        AreaPreprocessing area;
        area.label = quarterly.labels()[i];
        try {
            area.boxcox = boxcox_fit(observed, options.lambda_min, options.lambda_max, options.lambda_step,
                                     options.shift);
            std::vector<double> transformed(n, 0.0);
            for (std::size_t t = 0; t < n; ++t)
                if (mask[t] == 0) transformed[t] = boxcox_transform(series[t], area.boxcox.lambda, options.shift);
            const auto imputed = ar_impute(transformed, mask, options.max_order);
            area.ar = imputed.model;
            for (std::size_t t = 0; t < n; ++t) {
                if (mask[t] == 0) continue;
                values[i * n + t] = boxcox_inverse(imputed.completed[t], area.boxcox.lambda, options.shift);
                ++area.imputed;
            }
        } catch (const InapplicableError& e) {
            throw InapplicableError("preprocess", "area '" + area.label + "': " + e.message());
        } catch (const Error& e) {
            throw Error("preprocess", "area '" + area.label + "': " + e.message());
        }
        out.areas.push_back(std::move(area));
    }
    out.quarterly = Panel(quarterly.labels(), n, 1, std::move(values), {}, quarterly.time_index());
    return out;
}

}  // namespace anovats::prep
