#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "ibnc/error.hpp"
#include "ibnc/parallel.hpp"
#include "ibnc/stats.hpp"

namespace ibnc {

/** Covariance pair (Sigma_x, Sigma_{x|y}) defining a Gaussian bottleneck problem. */
struct GaussianJoint {
    Eigen::MatrixXd sigma_x;          // d x d, symmetric positive-definite
    Eigen::MatrixXd sigma_x_given_y;  // d x d, symmetric positive-semidefinite
};

struct GibOptions {
    /**
     * Relative ridge for the whitening Cholesky: when Sigma_x is numerically
     * rank-deficient (or epsilon-regularization is forced by conditioning),
     * epsilon * (trace/d) * I is added before factoring. The ridge is applied
     * lazily - a cleanly factorizable Sigma_x is used as-is - so well-posed
     * population inputs are solved exactly.
     */
    double epsilon = 1e-6;
};

/**
 * Eigenstructure of Sigma_{x|y} Sigma_x^{-1}: ascending eigenvalues in [0,1],
 * matching left eigenvectors v_i (rows), and r_i = v_i^T Sigma_x v_i.
 */
struct GibSpectrum {
    Eigen::VectorXd lambdas;          // ascending, clamped to [0, 1]
    Eigen::MatrixXd vectors;          // rows are v_i^T
    Eigen::VectorXd r;                // v_i^T Sigma_x v_i (unit in this gauge)
    double regularization_used = 0.0; // absolute ridge added to Sigma_x (0 if none)
};

/** The optimal linear-Gaussian encoder T = A x + xi, xi ~ N(0, I). */
struct Projection {
    double beta = 0.0;
    Eigen::MatrixXd matrix_a;        // active_rank x d, rows alpha_i v_i^T
    int active_rank = 0;
    Eigen::VectorXd alphas;          // per active row
    std::vector<char> alpha_capped;  // rows where lambda ~ 0 forced the alpha cap
};

/** One point of the information curve, in nats. */
struct InfoPoint {
    double beta = 0.0;
    double i_tx = 0.0;
    double i_ty = 0.0;
};

namespace detail {

struct CholResult {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double ridge = 0.0;  // absolute ridge actually added
};

/**
 * Cholesky with a lazy relative ridge: factor the matrix as given; only if
 * that fails (or the factor is conditioned beyond ~1e12) retry once with
 * epsilon * (trace/d) * I added.
 */
inline CholResult cholesky_with_ridge(const Eigen::MatrixXd& m, double epsilon,
                                      const char* what) {
    CholResult out;
    out.llt.compute(m);
    if (out.llt.info() == Eigen::Success) {
        const Eigen::VectorXd diag = out.llt.matrixLLT().diagonal();
        const double dmin = diag.minCoeff();
        const double dmax = diag.maxCoeff();
        if (dmin > 0.0 && dmin >= 1e-6 * dmax) return out;  // (dmin/dmax)^2 >= 1e-12
    }
    const double ridge = epsilon * m.trace() / static_cast<double>(m.rows());
    if (!(ridge > 0.0))
        throw numeric_error(std::string(what) + ": matrix is not positive definite");
    Eigen::MatrixXd reg = m;
    reg.diagonal().array() += ridge;
    out.llt.compute(reg);
    if (out.llt.info() != Eigen::Success)
        throw numeric_error(std::string(what) +
                            ": Cholesky failed even after ridge regularization");
    out.ridge = ridge;
    return out;
}

}  // namespace detail

/**
 * Build (Sigma_x, Sigma_{x|y}) from samples of X and a continuous relevance
 * variable Y: Sigma_{x|y} = Sigma_x - Sigma_xy Sigma_y^{-1} Sigma_yx.
 */
inline GaussianJoint conditional_covariance(const Eigen::MatrixXd& x_features,
                                            const Eigen::MatrixXd& y_features,
                                            const GibOptions& options = {}) {
    if (x_features.rows() != y_features.rows())
        throw validation_error("conditional_covariance: row counts differ");
    if (x_features.rows() < 2)
        throw validation_error("conditional_covariance: need at least 2 samples");
    GaussianJoint joint;
    joint.sigma_x = stats::covariance(x_features);
    const Eigen::MatrixXd sigma_y = stats::covariance(y_features);
    const Eigen::MatrixXd sigma_xy = stats::cross_covariance(x_features, y_features);
    const auto chol = detail::cholesky_with_ridge(sigma_y, options.epsilon,
                                                  "conditional_covariance: sigma_y");
    Eigen::MatrixXd s = joint.sigma_x - sigma_xy * chol.llt.solve(sigma_xy.transpose());
    joint.sigma_x_given_y = 0.5 * (s + s.transpose());
    return joint;
}

/**
 * Discrete-relevance variant: Sigma_{x|y} is the pooled within-class
 * covariance, Sigma_x the total covariance.
 */
inline GaussianJoint conditional_covariance(const Eigen::MatrixXd& x_features,
                                            const std::vector<std::int64_t>& labels,
                                            int class_count) {
    const auto scatter = stats::class_scatter(x_features, labels, class_count);
    GaussianJoint joint;
    joint.sigma_x = stats::covariance(x_features);
    joint.sigma_x_given_y = scatter.within;
    return joint;
}

/**
 * Solve the left-eigenvector problem v^T Sigma_{x|y} Sigma_x^{-1} = lambda v^T
 * as the generalized symmetric-definite problem Sigma_{x|y} v = lambda Sigma_x v:
 * whiten with Sigma_x = L L^T, eigendecompose L^{-1} Sigma_{x|y} L^{-T}, and
 * map eigenvectors back through v = L^{-T} w. With unit-norm w this gauge
 * gives r_i = v_i^T Sigma_x v_i = 1. Signs are fixed so each v_i's first
 * nonzero component is positive. Eigenvalues outside [ -1e-6, 1+1e-6 ] signal
 * an invalid joint; anything inside is clamped to [0, 1].
 */
inline GibSpectrum gib_spectrum(const GaussianJoint& joint, const GibOptions& options = {}) {
    const Eigen::Index d = joint.sigma_x.rows();
    if (d == 0 || joint.sigma_x.cols() != d)
        throw validation_error("gib_spectrum: sigma_x must be square and nonempty");
    if (joint.sigma_x_given_y.rows() != d || joint.sigma_x_given_y.cols() != d)
        throw validation_error("gib_spectrum: covariance shapes differ");

    const Eigen::MatrixXd sx = 0.5 * (joint.sigma_x + joint.sigma_x.transpose());
    const Eigen::MatrixXd sxy =
        0.5 * (joint.sigma_x_given_y + joint.sigma_x_given_y.transpose());

    const auto chol = detail::cholesky_with_ridge(sx, options.epsilon, "gib_spectrum: sigma_x");
    const auto& l = chol.llt.matrixL();

    // M = L^{-1} S L^{-T}, symmetrized against roundoff.
    const Eigen::MatrixXd half = l.solve(sxy);
    const Eigen::MatrixXd half_t = l.solve(half.transpose());
    Eigen::MatrixXd m = 0.5 * (half_t + half_t.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw numeric_error("gib_spectrum: eigendecomposition failed");

    GibSpectrum spec;
    spec.regularization_used = chol.ridge;
    spec.lambdas = eig.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (spec.lambdas(i) < -1e-6 || spec.lambdas(i) > 1.0 + 1e-6)
            throw numeric_error("gib_spectrum: eigenvalue " + std::to_string(spec.lambdas(i)) +
                                " outside [0, 1]; the joint is not a valid conditional pair");
        spec.lambdas(i) = std::min(1.0, std::max(0.0, spec.lambdas(i)));
    }

    Eigen::MatrixXd sx_used = sx;
    sx_used.diagonal().array() += chol.ridge;
    spec.vectors.resize(d, d);
    spec.r.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd v = l.transpose().solve(eig.eigenvectors().col(i));
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::abs(v(j)) > 1e-12) {
                if (v(j) < 0.0) v = -v;
                break;
            }
        }
        spec.vectors.row(i) = v.transpose();
        spec.r(i) = v.dot(sx_used * v);
    }
    return spec;
}

/** Critical tradeoff values beta_i^c = 1/(1 - lambda_i); +inf where lambda_i = 1. */
inline Eigen::VectorXd critical_betas(const GibSpectrum& spectrum) {
    Eigen::VectorXd betas(spectrum.lambdas.size());
    for (Eigen::Index i = 0; i < spectrum.lambdas.size(); ++i)
        betas(i) = spectrum.lambdas(i) < 1.0
                       ? 1.0 / (1.0 - spectrum.lambdas(i))
                       : std::numeric_limits<double>::infinity();
    return betas;
}

/** Cap applied to alpha when lambda = 0 makes the closed form singular. */
inline constexpr double alpha_cap = 1e6;

/**
 * The optimal projection at tradeoff beta: rows alpha_i v_i^T for every
 * dimension with lambda_i < 1 and beta > beta_i^c, where
 * alpha_i = sqrt((beta (1 - lambda_i) - 1) / (lambda_i r_i)). Dimensions with
 * lambda_i = 0 (deterministic relevance) have a divergent alpha; those rows
 * are capped at alpha_cap and flagged.
 */
inline Projection projection_matrix(const GibSpectrum& spectrum, double beta) {
    if (!(beta > 0.0)) throw validation_error("projection_matrix: beta must be positive");
    const Eigen::Index d = spectrum.lambdas.size();
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double lam = spectrum.lambdas(i);
        if (lam < 1.0 && beta > 1.0 / (1.0 - lam)) active.push_back(i);
    }
    Projection proj;
    proj.beta = beta;
    proj.active_rank = static_cast<int>(active.size());
    proj.matrix_a.resize(static_cast<Eigen::Index>(active.size()), d);
    proj.alphas.resize(static_cast<Eigen::Index>(active.size()));
    proj.alpha_capped.assign(active.size(), 0);
    for (std::size_t k = 0; k < active.size(); ++k) {
        const Eigen::Index i = active[k];
        const double lam = spectrum.lambdas(i);
        const double numer = beta * (1.0 - lam) - 1.0;
        double alpha;
        if (lam <= 0.0) {
            alpha = alpha_cap;
            proj.alpha_capped[k] = 1;
        } else {
            alpha = std::sqrt(numer / (lam * spectrum.r(i)));
            if (alpha > alpha_cap) {
                alpha = alpha_cap;
                proj.alpha_capped[k] = 1;
            }
        }
        proj.alphas(static_cast<Eigen::Index>(k)) = alpha;
        proj.matrix_a.row(static_cast<Eigen::Index>(k)) = alpha * spectrum.vectors.row(i);
    }
    return proj;
}

/**
 * Gaussian information of the encoder T = A x + xi against X and Y:
 * I(T;X) = (1/2) ln det(A Sigma_x A^T + I) and
 * I(T;Y) = I(T;X) - (1/2) ln det(A Sigma_{x|y} A^T + I).
 */
inline InfoPoint gaussian_info(const Projection& projection, const GaussianJoint& joint) {
    InfoPoint point;
    point.beta = projection.beta;
    if (projection.active_rank == 0) return point;
    const auto& a = projection.matrix_a;
    auto logdet_plus_i = [&](const Eigen::MatrixXd& sigma) {
        Eigen::MatrixXd m = a * sigma * a.transpose();
        m = 0.5 * (m + m.transpose()).eval();
        m.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() != Eigen::Success)
            throw numeric_error("gaussian_info: projected covariance not positive definite");
        return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    };
    point.i_tx = 0.5 * logdet_plus_i(joint.sigma_x);
    const double gap = 0.5 * logdet_plus_i(joint.sigma_x_given_y);
    point.i_ty = std::max(0.0, point.i_tx - std::max(0.0, gap));
    return point;
}

/** Pointwise information curve over an ascending positive beta grid. */
inline std::vector<InfoPoint> information_curve(const GibSpectrum& spectrum,
                                                const GaussianJoint& joint,
                                                const std::vector<double>& betas,
                                                int threads = 1) {
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0))
            throw validation_error("information_curve: betas must be positive");
        if (i > 0 && betas[i] < betas[i - 1])
            throw validation_error("information_curve: beta grid must be ascending");
    }
    std::vector<InfoPoint> points(betas.size());
    parallel_for(betas.size(), threads, [&](std::size_t i) {
        points[i] = gaussian_info(projection_matrix(spectrum, betas[i]), joint);
    });
    return points;
}

/** Compression target: an explicit beta, an exact rank, or a relevance fraction. */
struct RankTarget {
    enum class kind { explicit_beta, rank, relevance_fraction };
    kind which = kind::rank;
    double beta = 0.0;
    int rank = 0;
    double fraction = 0.0;

    static RankTarget explicit_beta(double beta) {
        RankTarget t;
        t.which = kind::explicit_beta;
        t.beta = beta;
        return t;
    }
    static RankTarget for_rank(int rank) {
        RankTarget t;
        t.which = kind::rank;
        t.rank = rank;
        return t;
    }
    static RankTarget relevance_fraction(double fraction) {
        RankTarget t;
        t.which = kind::relevance_fraction;
        t.fraction = fraction;
        return t;
    }
};

/** Total relevant information (1/2) sum ln(1/lambda_i) over lambda_i > 0, in nats. */
inline double total_relevant_information(const GibSpectrum& spectrum) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < spectrum.lambdas.size(); ++i) {
        const double lam = spectrum.lambdas(i);
        if (lam > 0.0 && lam < 1.0) total += 0.5 * std::log(1.0 / lam);
    }
    return total;
}

namespace detail {

inline Projection projection_for_rank(const GibSpectrum& spectrum, int rank) {
    const Eigen::VectorXd bc = critical_betas(spectrum);
    const Eigen::Index d = spectrum.lambdas.size();
    Eigen::Index feasible = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        if (spectrum.lambdas(i) < 1.0) ++feasible;
    if (rank < 1 || rank > feasible)
        throw target_error("rank target " + std::to_string(rank) + " infeasible: only " +
                           std::to_string(feasible) + " dimensions have lambda < 1");
    // Beta placed at the log-midpoint of the rank's phase interval, or at
    // twice the last finite critical value when the interval is unbounded.
    const double lower = bc(rank - 1);
    double beta;
    if (rank == d || !std::isfinite(bc(rank)))
        beta = 2.0 * lower;
    else
        beta = std::sqrt(lower * bc(rank));
    Projection proj = projection_matrix(spectrum, beta);
    if (proj.active_rank != rank)
        throw target_error("rank target " + std::to_string(rank) +
                           " not attainable: adjacent critical betas coincide");
    return proj;
}

}  // namespace detail

/**
 * Resolve a compression target to a projection. Rank targets put beta
 * strictly inside the requested phase interval (geometric midpoint);
 * relevance-fraction targets pick the smallest rank whose cumulative
 * (1/2) ln(1/lambda) reaches the requested share of the total relevant
 * information, then place beta the same way.
 */
inline Projection rank_for_target(const GibSpectrum& spectrum, const RankTarget& target) {
    switch (target.which) {
        case RankTarget::kind::explicit_beta:
            return projection_matrix(spectrum, target.beta);
        case RankTarget::kind::rank:
            return detail::projection_for_rank(spectrum, target.rank);
        default: {
            if (!(target.fraction > 0.0 && target.fraction < 1.0))
                throw validation_error("rank_for_target: relevance fraction must be in (0, 1)");
            const double total = total_relevant_information(spectrum);
            if (total <= 0.0)
                throw target_error("rank_for_target: no relevant dimensions (all lambda = 1)");
            double captured = 0.0;
            for (Eigen::Index i = 0; i < spectrum.lambdas.size(); ++i) {
                const double lam = spectrum.lambdas(i);
                if (lam >= 1.0) break;
                if (lam > 0.0) captured += 0.5 * std::log(1.0 / lam);
                if (captured >= target.fraction * total)
                    return detail::projection_for_rank(spectrum, static_cast<int>(i) + 1);
            }
            throw target_error("rank_for_target: requested relevance fraction unreachable");
        }
    }
}

}  // namespace ibnc
