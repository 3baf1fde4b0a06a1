#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ibnc/error.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/stats.hpp"

namespace ibnc {

struct CcaResult {
    Eigen::VectorXd correlations;  // descending, clamped to [0, 1]
    int top_k = 0;
    double mean_top_k = 0.0;
    double std_top_k = 0.0;  // population std over the leading top_k
    double var_top_k = 0.0;
    double regularization = 0.0;  // relative ridge epsilon that was applied
};

/**
 * Canonical correlations between two row-aligned representations, computed
 * as the singular values of the whitened cross-covariance. Both
 * auto-covariances receive a relative ridge epsilon * (trace/d) before the
 * Cholesky whitening; epsilon = 0 requests the exact (unregularized) solve.
 */
inline CcaResult cca(const RepresentationSet& a, const RepresentationSet& b, int top_k = 0,
                     double epsilon = 1e-8) {
    if (a.n() != b.n()) throw validation_error("cca: row counts differ");
    if (a.n() < 2) throw validation_error("cca: need at least 2 samples");
    if (epsilon < 0.0) throw validation_error("cca: epsilon must be nonnegative");
    const Eigen::Index d_min = std::min(a.dim(), b.dim());
    if (top_k == 0) top_k = static_cast<int>(d_min);
    if (top_k < 1 || top_k > d_min)
        throw validation_error("cca: top_k must be in [1, min(d_a, d_b)]");

    auto whitener = [&](const Eigen::MatrixXd& features) {
        Eigen::MatrixXd cov = stats::covariance(features);
        if (epsilon > 0.0)
            cov.diagonal().array() += epsilon * cov.trace() / static_cast<double>(cov.rows());
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success)
            throw numeric_error("cca: covariance not positive definite "
                                "(increase epsilon or drop degenerate columns)");
        return llt;
    };

    const auto llt_a = whitener(a.features);
    const auto llt_b = whitener(b.features);
    const Eigen::MatrixXd cab = stats::cross_covariance(a.features, b.features);

    // M = L_a^{-1} C_ab L_b^{-T}; its singular values are the correlations.
    const Eigen::MatrixXd half = llt_a.matrixL().solve(cab);
    const Eigen::MatrixXd m = llt_b.matrixL().solve(half.transpose()).transpose();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    Eigen::VectorXd rho = svd.singularValues();
    const Eigen::Index len = std::min<Eigen::Index>(d_min, a.n());
    rho = rho.head(len).eval();
    for (Eigen::Index i = 0; i < rho.size(); ++i)
        rho(i) = std::min(1.0, std::max(0.0, rho(i)));

    CcaResult result;
    result.correlations = rho;
    result.top_k = top_k;
    result.regularization = epsilon;
    const Eigen::Index k = std::min<Eigen::Index>(top_k, rho.size());
    const auto head = rho.head(k);
    result.mean_top_k = head.mean();
    result.var_top_k = (head.array() - result.mean_top_k).square().sum() / static_cast<double>(k);
    result.std_top_k = std::sqrt(result.var_top_k);
    return result;
}

struct LinearFit {
    Eigen::MatrixXd matrix_a;      // d1 x d2 least-squares map (Z1 ~ Z2 A^T)
    Eigen::MatrixXd residual_cov;  // d1 x d1 covariance of the residuals
    Eigen::VectorXd r2_per_dim;    // explained-variance fraction per Z1 coordinate
};

/**
 * Least-squares fit of the explicit noise model Z1 = Z2 A^T + xi on centered
 * data. A tiny relative ridge keeps the normal equations solvable when Z2 is
 * rank-deficient or N <= d2.
 */
inline LinearFit linear_fit(const RepresentationSet& a, const RepresentationSet& b) {
    if (a.n() != b.n()) throw validation_error("linear_fit: row counts differ");
    const Eigen::MatrixXd z1 = a.features.rowwise() - stats::mean_row(a.features);
    const Eigen::MatrixXd z2 = b.features.rowwise() - stats::mean_row(b.features);

    Eigen::MatrixXd c22 = (z2.transpose() * z2) / static_cast<double>(z2.rows());
    c22 = 0.5 * (c22 + c22.transpose()).eval();
    c22.diagonal().array() += 1e-12 * c22.trace() / static_cast<double>(c22.rows());
    const Eigen::MatrixXd c21 = (z2.transpose() * z1) / static_cast<double>(z2.rows());

    LinearFit fit;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c22);
    if (ldlt.info() != Eigen::Success)
        throw numeric_error("linear_fit: normal equations not solvable");
    fit.matrix_a = ldlt.solve(c21).transpose();

    const Eigen::MatrixXd resid = z1 - z2 * fit.matrix_a.transpose();
    fit.residual_cov = stats::covariance(resid);

    fit.r2_per_dim.resize(z1.cols());
    for (Eigen::Index j = 0; j < z1.cols(); ++j) {
        const double total = z1.col(j).squaredNorm();
        const double unexplained = resid.col(j).squaredNorm();
        const double r2 = total > 0.0 ? 1.0 - unexplained / total : 0.0;
        fit.r2_per_dim(j) = std::min(1.0, std::max(0.0, r2));
    }
    return fit;
}

/** Fraction of positions where both prediction vectors match the truth. */
inline double joint_correct_fraction(const std::vector<std::int64_t>& predictions_a,
                                     const std::vector<std::int64_t>& predictions_b,
                                     const std::vector<std::int64_t>& truth) {
    if (predictions_a.size() != truth.size() || predictions_b.size() != truth.size())
        throw validation_error("joint_correct_fraction: length mismatch");
    if (truth.empty()) throw validation_error("joint_correct_fraction: empty inputs");
    std::size_t both = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predictions_a[i] == truth[i] && predictions_b[i] == truth[i]) ++both;
    return static_cast<double>(both) / static_cast<double>(truth.size());
}

}  // namespace ibnc
