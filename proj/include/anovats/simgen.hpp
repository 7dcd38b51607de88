#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "anovats/error.hpp"
#include "anovats/panel.hpp"

namespace anovats::sim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Reproducible random stream: identical (seed, stream_id) pairs give
/// identical draws, distinct stream ids give independent streams.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                          0x414e4f56u};
        engine_.seed(seq);
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }

    double normal() { return normal_(engine_); }
    double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class InnovationFamily { gaussian, student_t5, skew_normal_50 };
enum class Dependence { case1_independent, case2_correlated };
enum class ProcessKind { ma1, garch };

struct InnovationSpec {
    InnovationFamily family = InnovationFamily::gaussian;
    Dependence dependence = Dependence::case1_independent;
    std::size_t dimension = 1;
};

struct ProcessSpec {
    ProcessKind kind = ProcessKind::ma1;
    Matrix psi;  // dimension x dimension, acting on the stacked disturbance vector
    InnovationSpec innovation;
    Matrix effects;  // groups x p; re-centred to sum to zero when assembled
    Vector mu;       // p
    std::size_t n = 0;
    std::size_t burn_in = 500;
};

/// Raised when a generated trajectory leaves the admissible region
/// (non-positive or non-finite conditional variance).
class GenerationError : public Error {
public:
    using Error::Error;
};

inline constexpr double skew_shape = 50.0;
inline constexpr double t_dof = 5.0;

/// Tridiagonal correlation with unit diagonal and 0.5 next to it.
[[nodiscard]] inline Matrix case2_covariance(std::size_t dim) {
    Matrix sigma = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (Eigen::Index j = 0; j + 1 < static_cast<Eigen::Index>(dim); ++j) {
        sigma(j, j + 1) = 0.5;
        sigma(j + 1, j) = 0.5;
    }
    return sigma;
}

/// Block-diagonal coefficient matrix with blocks (0.7,0,0; 0,-0.5,0; 0.3,0.1,0.3).
[[nodiscard]] inline Matrix case2_psi(std::size_t dim) {
    if (dim % 3 != 0) throw Error("simgen", "correlated case needs a dimension divisible by 3");
    Matrix block(3, 3);
    block << 0.7, 0.0, 0.0, 0.0, -0.5, 0.0, 0.3, 0.1, 0.3;
    Matrix psi = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(dim); k += 3) psi.block(k, k, 3, 3) = block;
    return psi;
}

[[nodiscard]] inline Matrix case1_psi(std::size_t dim) {
    return 0.5 * Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
}

namespace detail {

// Symmetric square root that tolerates a (numerically) singular matrix.
inline Matrix psd_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

struct InnovationSampler {
    InnovationSpec spec;
    Matrix chol;        // Case 2: Cholesky factor of the correlation
    Matrix skew_root;   // Case 2 skew normal: square root of Omega - delta delta'
    Vector skew_delta;  // skew normal delta (vector for Case 2)
    double delta = 0.0;

    explicit InnovationSampler(const InnovationSpec& s) : spec(s) {
        if (spec.dimension < 1) throw Error("simgen", "innovation dimension must be at least 1");
        delta = skew_shape / std::sqrt(1.0 + skew_shape * skew_shape);
        if (spec.dependence == Dependence::case2_correlated) {
            const Matrix sigma = case2_covariance(spec.dimension);
            chol = Eigen::LLT<Matrix>(sigma).matrixL();
            const Vector shape = Vector::Constant(static_cast<Eigen::Index>(spec.dimension), skew_shape);
            skew_delta = sigma * shape / std::sqrt(1.0 + shape.dot(sigma * shape));
            skew_root = psd_sqrt(sigma - skew_delta * skew_delta.transpose());
        }
    }

    void draw(RngStream& rng, Eigen::Ref<Vector> out) const {
        const auto m = static_cast<Eigen::Index>(spec.dimension);
        const double centre = std::sqrt(2.0 / std::numbers::pi);
        if (spec.dependence == Dependence::case1_independent) {
            for (Eigen::Index j = 0; j < m; ++j) {
                switch (spec.family) {
                    case InnovationFamily::gaussian:
                        out(j) = rng.normal();
                        break;
                    case InnovationFamily::student_t5: {
                        const double z = rng.normal();
                        out(j) = z * std::sqrt(t_dof / rng.chi_squared(t_dof));
                        break;
                    }
                    case InnovationFamily::skew_normal_50: {
                        const double u0 = rng.normal();
                        const double u1 = rng.normal();
                        out(j) = delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1 - delta * centre;
                        break;
                    }
                }
            }
            return;
        }
        Vector z(m);
        switch (spec.family) {
            case InnovationFamily::gaussian:
                for (Eigen::Index j = 0; j < m; ++j) z(j) = rng.normal();
                out = chol * z;
                break;
            case InnovationFamily::student_t5: {
                for (Eigen::Index j = 0; j < m; ++j) z(j) = rng.normal();
                const double w = std::sqrt(t_dof / rng.chi_squared(t_dof));
                out = (chol * z) * w;
                break;
            }
            case InnovationFamily::skew_normal_50: {
                const double u0 = std::abs(rng.normal());
                for (Eigen::Index j = 0; j < m; ++j) z(j) = rng.normal();
                out = skew_delta * (u0 - centre) + skew_root * z;
                break;
            }
        }
    }
};

}  // namespace detail

/// Rows are time steps, columns the stacked coordinates.
[[nodiscard]] inline Matrix draw_innovations(const InnovationSpec& spec, std::size_t n_draws, RngStream& rng) {
    const detail::InnovationSampler sampler(spec);
    Matrix out(static_cast<Eigen::Index>(n_draws), static_cast<Eigen::Index>(spec.dimension));
    Vector row(static_cast<Eigen::Index>(spec.dimension));
    for (Eigen::Index t = 0; t < out.rows(); ++t) {
        sampler.draw(rng, row);
        out.row(t) = row.transpose();
    }
    return out;
}

/// e_t = nu_t + Psi nu_{t-1}; `innovations` holds one presample row, so the
/// output has one row fewer.
[[nodiscard]] inline Matrix ma1_filter(const Matrix& innovations, const Matrix& psi) {
    if (innovations.rows() < 2) throw Error("simgen", "MA(1) filter needs at least 2 innovation rows");
    if (psi.rows() != innovations.cols() || psi.cols() != innovations.cols())
        throw Error("simgen", "MA(1) coefficient matrix does not match innovation dimension");
    const Eigen::Index n = innovations.rows() - 1;
    Matrix out = innovations.bottomRows(n);
    out.noalias() += innovations.topRows(n) * psi.transpose();
    return out;
}

/// Unconditional conditional-variance level h solving
/// h = 1 + 0.1 Psi h + 0.1 h.
[[nodiscard]] inline Vector garch_stationary_level(const Matrix& psi) {
    const Eigen::Index m = psi.rows();
    const Matrix system = Matrix::Identity(m, m) * 0.9 - 0.1 * psi;
    return system.partialPivLu().solve(Vector::Ones(m));
}

struct GarchPath {
    Matrix e;
    Matrix h;
};

namespace detail {

inline std::string describe(const Matrix& psi) {
    std::ostringstream os;
    os << '[';
    for (Eigen::Index r = 0; r < std::min<Eigen::Index>(psi.rows(), 3); ++r) {
        if (r > 0) os << "; ";
        for (Eigen::Index c = 0; c < std::min<Eigen::Index>(psi.cols(), 3); ++c) os << (c > 0 ? "," : "") << psi(r, c);
    }
    if (psi.rows() > 3) os << "; ...";
    os << ']';
    return os.str();
}

}  // namespace detail

/**
 * e_it = sqrt(h_it) nu_it with h_t = 1 + 0.1 Psi e^2_{t-1} + 0.1 h_{t-1}
 * (squares taken elementwise). The first row uses `h_first`.
 * Throws GenerationError when any h leaves (0, inf).
 */
[[nodiscard]] inline GarchPath garch_filter(const Matrix& innovations, const Matrix& psi, const Vector& h_first) {
    const Eigen::Index m = innovations.cols();
    if (psi.rows() != m || psi.cols() != m || h_first.size() != m)
        throw Error("simgen", "GARCH coefficient matrix does not match innovation dimension");
    GarchPath path{Matrix(innovations.rows(), m), Matrix(innovations.rows(), m)};
    Vector h = h_first;
    for (Eigen::Index t = 0; t < innovations.rows(); ++t) {
        if (t > 0) {
            const Vector e_sq = path.e.row(t - 1).transpose().cwiseAbs2();
            h = Vector::Ones(m) + 0.1 * (psi * e_sq) + 0.1 * path.h.row(t - 1).transpose();
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!(h(j) >= std::numeric_limits<double>::min()) || !std::isfinite(h(j)))
                throw GenerationError("simgen", "GARCH conditional variance left (0, inf) at step " +
                                                    std::to_string(t) + " for Psi = " + detail::describe(psi));
        }
        path.h.row(t) = h.transpose();
        path.e.row(t) = (h.cwiseSqrt().array() * innovations.row(t).transpose().array()).matrix().transpose();
    }
    return path;
}

[[nodiscard]] inline Matrix gen_ma1(const ProcessSpec& spec, RngStream& rng) {
    if (spec.kind != ProcessKind::ma1) throw Error("simgen", "process is not MA(1)");
    return ma1_filter(draw_innovations(spec.innovation, spec.n + 1, rng), spec.psi);
}

[[nodiscard]] inline Matrix gen_garch(const ProcessSpec& spec, RngStream& rng) {
    if (spec.kind != ProcessKind::garch) throw Error("simgen", "process is not GARCH");
    const Matrix nu = draw_innovations(spec.innovation, spec.burn_in + spec.n, rng);
    const GarchPath path = garch_filter(nu, spec.psi, garch_stationary_level(spec.psi));
    return path.e.bottomRows(static_cast<Eigen::Index>(spec.n));
}

[[nodiscard]] inline Matrix gen_disturbances(const ProcessSpec& spec, RngStream& rng) {
    return spec.kind == ProcessKind::ma1 ? gen_ma1(spec, rng) : gen_garch(spec, rng);
}

/// z_it = mu + psi_i + e_it from an n x (a p) disturbance matrix whose
/// columns are ordered group-major.
[[nodiscard]] inline CompletePanel panel_from_disturbances(const Matrix& effects, const Vector& mu,
                                                           const Matrix& disturbances) {
    const auto a = static_cast<std::size_t>(effects.rows());
    const auto p = static_cast<std::size_t>(effects.cols());
    const auto n = static_cast<std::size_t>(disturbances.rows());
    if (a == 0 || p == 0) throw Error("simgen", "effects matrix is empty");
    if (static_cast<std::size_t>(mu.size()) != p || static_cast<std::size_t>(disturbances.cols()) != a * p)
        throw Error("simgen", "effects and disturbances do not match the mean dimension");

    const Eigen::RowVectorXd centre = effects.colwise().mean();
    std::vector<std::string> labels(a);
    std::vector<std::string> times(n);
    for (std::size_t i = 0; i < a; ++i) labels[i] = "Area_" + std::to_string(i + 1);
    for (std::size_t t = 0; t < n; ++t) times[t] = std::to_string(t + 1);
    std::vector<double> values(a * n * p);
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t d = 0; d < p; ++d) {
                const auto row = static_cast<Eigen::Index>(i);
                const auto col = static_cast<Eigen::Index>(d);
                values[(i * n + t) * p + d] = mu(col) + (effects(row, col) - centre(col)) +
                                              disturbances(static_cast<Eigen::Index>(t),
                                                           static_cast<Eigen::Index>(i * p + d));
            }
    return CompletePanel(Panel(std::move(labels), n, p, std::move(values), {}, std::move(times)));
}

/// Generates disturbances and adds the (re-centred) group effects.
[[nodiscard]] inline CompletePanel assemble_panel(const ProcessSpec& spec, RngStream& rng) {
    const auto stacked = static_cast<std::size_t>(spec.effects.rows() * spec.effects.cols());
    if (spec.innovation.dimension != stacked || spec.psi.rows() != static_cast<Eigen::Index>(stacked))
        throw Error("simgen", "innovation dimension must equal groups x p");
    return panel_from_disturbances(spec.effects, spec.mu, gen_disturbances(spec, rng));
}

/**
 * The four simulation processes with p = 1: 1 MA(1) Gaussian, 2 MA(1)
 * Student t5, 3 MA(1) skew normal (shape 50), 4 GARCH Gaussian. Case 1 uses
 * Psi = 0.5 I and independent innovations; Case 2 the block-diagonal Psi
 * and tridiagonal innovation correlation.
 */
[[nodiscard]] inline ProcessSpec standard_process(int process, Dependence dependence, std::size_t groups,
                                                  std::size_t n, std::vector<double> effects = {}) {
    if (process < 1 || process > 4) throw Error("simgen", "process must be 1, 2, 3 or 4");
    if (groups < 1) throw Error("simgen", "number of groups must be at least 1");
    ProcessSpec spec;
    spec.kind = process == 4 ? ProcessKind::garch : ProcessKind::ma1;
    spec.innovation.dimension = groups;
    spec.innovation.dependence = dependence;
    spec.innovation.family = process == 2   ? InnovationFamily::student_t5
                             : process == 3 ? InnovationFamily::skew_normal_50
                                            : InnovationFamily::gaussian;
    spec.psi = dependence == Dependence::case1_independent ? case1_psi(groups) : case2_psi(groups);
    spec.effects = Matrix::Zero(static_cast<Eigen::Index>(groups), 1);
    if (!effects.empty()) {
        if (effects.size() != groups) throw Error("simgen", "number of effects must equal number of groups");
        for (std::size_t i = 0; i < groups; ++i) spec.effects(static_cast<Eigen::Index>(i), 0) = effects[i];
    }
    spec.mu = Vector::Zero(1);
    spec.n = n;
    return spec;
}

}  // namespace anovats::sim
