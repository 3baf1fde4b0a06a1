#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ibnc/error.hpp"

namespace ibnc::stats {

inline Eigen::RowVectorXd mean_row(const Eigen::MatrixXd& m) {
    return m.colwise().mean();
}

/** Population covariance (1/N normalization), symmetrized. */
inline Eigen::MatrixXd covariance(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd centered = m.rowwise() - mean_row(m);
    Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(m.rows());
    return 0.5 * (c + c.transpose());
}

/** Cross-covariance (1/N normalization) between row-aligned matrices. */
inline Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) throw validation_error("cross_covariance: row counts differ");
    const Eigen::MatrixXd ac = a.rowwise() - mean_row(a);
    const Eigen::MatrixXd bc = b.rowwise() - mean_row(b);
    return (ac.transpose() * bc) / static_cast<double>(a.rows());
}

/** Sample correlation matrix with an exactly unit diagonal. */
inline Eigen::MatrixXd correlation(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd c = covariance(m);
    Eigen::VectorXd scale = c.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < scale.size(); ++i)
        if (!(scale(i) > 0.0))
            throw validation_error("correlation: column " + std::to_string(i) +
                                   " has zero variance");
    Eigen::MatrixXd g = scale.cwiseInverse().asDiagonal() * c * scale.cwiseInverse().asDiagonal();
    g = 0.5 * (g + g.transpose());
    g.diagonal().setOnes();
    return g;
}

struct Scatter {
    Eigen::MatrixXd class_means;    // K x d
    Eigen::RowVectorXd global_mean; // 1 x d (class-size weighted)
    Eigen::MatrixXd within;         // pooled within-class covariance, 1/N
    Eigen::MatrixXd between;        // between-class covariance, 1/N
    Eigen::VectorXd counts;         // samples per class
};

/**
 * Class-conditional scatter decomposition with 1/N weighting throughout, so
 * within + between equals the total covariance exactly (up to roundoff).
 *
 * Class means are computed anchored at the class's first sample
 * (mu = z0 + mean(z - z0)), which makes a fully collapsed class (all samples
 * identical) produce a bitwise-exact mean and an exactly zero within-scatter.
 */
inline Scatter class_scatter(const Eigen::MatrixXd& features,
                             const std::vector<std::int64_t>& labels, int class_count) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw validation_error("class_scatter: label count does not match row count");
    if (class_count < 1) throw validation_error("class_scatter: class_count must be positive");

    Scatter s;
    s.counts = Eigen::VectorXd::Zero(class_count);
    s.class_means = Eigen::MatrixXd::Zero(class_count, d);
    std::vector<Eigen::Index> anchor(class_count, -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = labels[static_cast<std::size_t>(i)];
        if (k < 0 || k >= class_count)
            throw validation_error("class_scatter: label out of range");
        if (anchor[static_cast<std::size_t>(k)] < 0) anchor[static_cast<std::size_t>(k)] = i;
    }
    for (int k = 0; k < class_count; ++k)
        if (anchor[static_cast<std::size_t>(k)] < 0)
            throw validation_error("class_scatter: class " + std::to_string(k) + " is empty");

    // Anchored accumulation of per-class means.
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = labels[static_cast<std::size_t>(i)];
        s.class_means.row(k) += features.row(i) - features.row(anchor[static_cast<std::size_t>(k)]);
        s.counts(k) += 1.0;
    }
    for (int k = 0; k < class_count; ++k)
        s.class_means.row(k) =
            features.row(anchor[static_cast<std::size_t>(k)]) + s.class_means.row(k) / s.counts(k);

    s.global_mean = (s.counts.transpose() * s.class_means) / static_cast<double>(n);

    s.within = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = labels[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd dev = features.row(i) - s.class_means.row(k);
        s.within.noalias() += dev.transpose() * dev;
    }
    s.within /= static_cast<double>(n);
    s.within = 0.5 * (s.within + s.within.transpose()).eval();

    s.between = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < class_count; ++k) {
        const Eigen::RowVectorXd dev = s.class_means.row(k) - s.global_mean;
        s.between.noalias() += s.counts(k) * (dev.transpose() * dev);
    }
    s.between /= static_cast<double>(n);
    s.between = 0.5 * (s.between + s.between.transpose()).eval();
    return s;
}

}  // namespace ibnc::stats
