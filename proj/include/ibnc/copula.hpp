#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ibnc/error.hpp"
#include "ibnc/gib.hpp"
#include "ibnc/info.hpp"
#include "ibnc/parallel.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/stats.hpp"

namespace ibnc {

/**
 * Standard-normal quantile. Acklam's rational approximation (abs error about
 * 1e-9) refined by one Halley step through erfc, which brings the result to
 * within a few ulp over the full open interval.
 */
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw validation_error("normal_quantile: argument must lie strictly inside (0, 1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double dd[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                     2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
    }

    // One Halley step against Phi(x) = erfc(-x/sqrt(2))/2.
    const double err = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/**
 * Per-column scaled ranks: average ranks under ties, divided by N+1 so the
 * result lies strictly inside (0, 1).
 */
inline Eigen::MatrixXd rank_transform(const Eigen::MatrixXd& features, int threads = 1) {
    const Eigen::Index n = features.rows();
    if (n < 2) throw validation_error("rank_transform: need at least 2 rows");
    Eigen::MatrixXd u(n, features.cols());
    const double scale = 1.0 / static_cast<double>(n + 1);
    parallel_for(static_cast<std::size_t>(features.cols()), threads, [&](std::size_t jz) {
        const auto j = static_cast<Eigen::Index>(jz);
        const auto ranks =
            detail::average_ranks(features.col(j).data(), n, features.col(j).innerStride());
        for (Eigen::Index i = 0; i < n; ++i)
            u(i, j) = ranks[static_cast<std::size_t>(i)] * scale;
    });
    return u;
}

/** Elementwise standard-normal quantile of a matrix with entries in (0, 1). */
inline Eigen::MatrixXd normal_scores(const Eigen::MatrixXd& u, int threads = 1) {
    Eigen::MatrixXd scores(u.rows(), u.cols());
    parallel_for(static_cast<std::size_t>(u.cols()), threads, [&](std::size_t jz) {
        const auto j = static_cast<Eigen::Index>(jz);
        for (Eigen::Index i = 0; i < u.rows(); ++i) scores(i, j) = normal_quantile(u(i, j));
    });
    return scores;
}

/** Rank-based Gaussian-copula summary of one feature matrix. */
struct CopulaModel {
    Eigen::MatrixXd u;            // N x d scaled ranks in (0, 1)
    Eigen::MatrixXd scores;       // N x d normal scores
    Eigen::MatrixXd correlation;  // d x d score correlation, unit diagonal
};

inline CopulaModel fit_copula(const Eigen::MatrixXd& features, int threads = 1) {
    CopulaModel model;
    model.u = rank_transform(features, threads);
    model.scores = normal_scores(model.u, threads);
    model.correlation = stats::correlation(model.scores);
    return model;
}

/** Correlation of concatenated score matrices, partitioned into blocks. */
struct CopulaBlocks {
    Eigen::MatrixXd gaa, gbb, gab;
};

inline CopulaBlocks copula_correlation(const Eigen::MatrixXd& scores_a,
                                       const Eigen::MatrixXd& scores_b) {
    if (scores_a.rows() != scores_b.rows())
        throw validation_error("copula_correlation: row counts differ");
    const Eigen::Index da = scores_a.cols();
    const Eigen::Index db = scores_b.cols();
    Eigen::MatrixXd joint(scores_a.rows(), da + db);
    joint << scores_a, scores_b;
    const Eigen::MatrixXd g = stats::correlation(joint);
    CopulaBlocks blocks;
    blocks.gaa = g.topLeftCorner(da, da);
    blocks.gbb = g.bottomRightCorner(db, db);
    blocks.gab = g.topRightCorner(da, db);
    return blocks;
}

struct MgibOptions {
    double epsilon = 1e-6;  // lazy ridge for the whitening/conditional solves
    int threads = 1;
};

/**
 * A solved Meta-Gaussian bottleneck: the Gaussian problem implied by the
 * copula correlations, its spectrum and projection, and the compressed
 * training representation T = scores * A^T (the noise-free encoder mean).
 */
struct MgibSolution {
    GaussianJoint joint;       // Sigma_x = G_ss, Sigma_{x|y} = Schur complement
    GibSpectrum spectrum;
    Projection projection;
    InfoPoint info;            // Gaussian information of the projection
    Eigen::MatrixXd compressed;  // N x active_rank
    std::string source_name, relevance_name;
};

/**
 * Reduce the Meta-Gaussian IB between two row-aligned representations to a
 * Gaussian IB on normal scores: Sigma_x is the source score correlation G_ss
 * and Sigma_{x|y} = G_ss - G_sr G_rr^{-1} G_rs. The source is the variable
 * being compressed; the relevance variable is what the bottleneck preserves.
 */
inline MgibSolution mgib_solve(const RepresentationSet& source,
                               const RepresentationSet& relevance, const RankTarget& target,
                               const MgibOptions& options = {}) {
    validate(source);
    validate(relevance);
    if (source.n() != relevance.n())
        throw validation_error("mgib_solve: source and relevance row counts differ "
                               "(rows must describe the same samples in the same order)");

    const Eigen::MatrixXd scores_s =
        normal_scores(rank_transform(source.features, options.threads), options.threads);
    const Eigen::MatrixXd scores_r =
        normal_scores(rank_transform(relevance.features, options.threads), options.threads);
    const CopulaBlocks blocks = copula_correlation(scores_s, scores_r);

    const auto chol =
        detail::cholesky_with_ridge(blocks.gbb, options.epsilon, "mgib_solve: relevance block");
    Eigen::MatrixXd schur =
        blocks.gaa - blocks.gab * chol.llt.solve(blocks.gab.transpose());

    MgibSolution solution;
    solution.joint.sigma_x = blocks.gaa;
    solution.joint.sigma_x_given_y = 0.5 * (schur + schur.transpose());
    solution.spectrum = gib_spectrum(solution.joint, GibOptions{options.epsilon});
    solution.projection = rank_for_target(solution.spectrum, target);
    solution.info = gaussian_info(solution.projection, solution.joint);
    solution.compressed = scores_s * solution.projection.matrix_a.transpose();
    solution.source_name = source.name;
    solution.relevance_name = relevance.name;
    return solution;
}

/**
 * Map new samples through a reference set's empirical CDF: linear
 * interpolation between the reference's unique values at their average
 * scaled ranks, clamped to (0.5/(N+1), 1 - 0.5/(N+1)) beyond the extremes,
 * then the normal quantile.
 */
inline Eigen::MatrixXd reference_scores(const Eigen::MatrixXd& new_features,
                                        const Eigen::MatrixXd& reference_features,
                                        int threads = 1) {
    if (new_features.cols() != reference_features.cols())
        throw validation_error("reference_scores: column counts differ");
    const Eigen::Index n_ref = reference_features.rows();
    if (n_ref < 2) throw validation_error("reference_scores: need at least 2 reference rows");
    Eigen::MatrixXd scores(new_features.rows(), new_features.cols());
    const double scale = 1.0 / static_cast<double>(n_ref + 1);
    const double lo = 0.5 * scale;
    const double hi = 1.0 - 0.5 * scale;

    parallel_for(static_cast<std::size_t>(new_features.cols()), threads, [&](std::size_t jz) {
        const auto j = static_cast<Eigen::Index>(jz);
        const auto ranks = detail::average_ranks(reference_features.col(j).data(), n_ref,
                                                 reference_features.col(j).innerStride());
        // Collapse to unique (value, scaled average rank) nodes, ascending.
        std::vector<double> values(static_cast<std::size_t>(n_ref));
        for (Eigen::Index i = 0; i < n_ref; ++i)
            values[static_cast<std::size_t>(i)] = reference_features(i, j);
        std::vector<std::size_t> order(values.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
        std::vector<double> node_v, node_u;
        node_v.reserve(values.size());
        node_u.reserve(values.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            const double v = values[order[i]];
            if (node_v.empty() || v != node_v.back()) {
                node_v.push_back(v);
                node_u.push_back(ranks[order[i]] * scale);
            }
        }

        for (Eigen::Index i = 0; i < new_features.rows(); ++i) {
            const double x = new_features(i, j);
            double u;
            if (x < node_v.front()) {
                u = lo;
            } else if (x > node_v.back()) {
                u = hi;
            } else {
                const auto it = std::lower_bound(node_v.begin(), node_v.end(), x);
                const auto idx = static_cast<std::size_t>(it - node_v.begin());
                if (*it == x) {
                    u = node_u[idx];
                } else {
                    const double v0 = node_v[idx - 1], v1 = node_v[idx];
                    const double u0 = node_u[idx - 1], u1 = node_u[idx];
                    u = u0 + (x - v0) * (u1 - u0) / (v1 - v0);
                }
            }
            scores(i, j) = normal_quantile(u);
        }
    });
    return scores;
}

/**
 * Out-of-sample application of a solved bottleneck: new samples are mapped
 * through the reference (training source) empirical CDF, normal-scored, and
 * projected by the solution's A.
 */
inline Eigen::MatrixXd apply_projection(const MgibSolution& solution,
                                        const RepresentationSet& new_set,
                                        const RepresentationSet& reference_set,
                                        int threads = 1) {
    if (new_set.dim() != reference_set.dim())
        throw validation_error("apply_projection: new and reference dimensions differ");
    if (reference_set.dim() != solution.projection.matrix_a.cols())
        throw validation_error("apply_projection: reference dimension does not match the "
                               "solved projection");
    const Eigen::MatrixXd scores =
        reference_scores(new_set.features, reference_set.features, threads);
    return scores * solution.projection.matrix_a.transpose();
}

}  // namespace ibnc
