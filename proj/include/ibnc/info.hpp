#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ibnc/error.hpp"

namespace ibnc {

struct MiEstimate {
    double nats = 0.0;      // clamped at 0
    double raw_nats = 0.0;  // before the nonnegativity clamp
    std::string method;     // "closed_form" or "binned"
    int bins = 0;           // binned only
    Eigen::Index n = 0;     // sample count (binned only)
};

/** Empirical label entropy in nats. */
inline double label_entropy(const std::vector<std::int64_t>& labels) {
    if (labels.empty()) throw validation_error("label_entropy: empty label vector");
    std::map<std::int64_t, double> counts;
    for (auto l : labels) counts[l] += 1.0;
    const double n = static_cast<double>(labels.size());
    double h = 0.0;
    for (const auto& [label, c] : counts) {
        const double p = c / n;
        h -= p * std::log(p);
    }
    return std::max(0.0, h);
}

/**
 * Exact mutual information between two coordinate blocks of a Gaussian
 * vector: I = (1/2) ln(det S_aa det S_bb / det S_ab), evaluated via Cholesky
 * log-determinants on the restricted covariance.
 */
inline MiEstimate gaussian_mi_closed_form(const Eigen::MatrixXd& joint_cov,
                                          const std::vector<Eigen::Index>& dims_a,
                                          const std::vector<Eigen::Index>& dims_b) {
    if (joint_cov.rows() != joint_cov.cols())
        throw validation_error("gaussian_mi_closed_form: covariance must be square");
    if (dims_a.empty() || dims_b.empty())
        throw validation_error("gaussian_mi_closed_form: empty index set");
    std::vector<Eigen::Index> all = dims_a;
    all.insert(all.end(), dims_b.begin(), dims_b.end());
    std::vector<Eigen::Index> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw validation_error("gaussian_mi_closed_form: index sets must be disjoint");
    for (auto i : all)
        if (i < 0 || i >= joint_cov.rows())
            throw validation_error("gaussian_mi_closed_form: index out of range");

    auto logdet = [](const Eigen::MatrixXd& m) {
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() != Eigen::Success)
            throw numeric_error("gaussian_mi_closed_form: covariance block not positive definite");
        return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    };
    auto submatrix = [&](const std::vector<Eigen::Index>& rows,
                         const std::vector<Eigen::Index>& cols) {
        Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j)
                s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    joint_cov(rows[i], cols[j]);
        return s;
    };

    MiEstimate est;
    est.method = "closed_form";
    est.raw_nats = 0.5 * (logdet(submatrix(dims_a, dims_a)) + logdet(submatrix(dims_b, dims_b)) -
                          logdet(submatrix(all, all)));
    est.nats = std::max(0.0, est.raw_nats);
    return est;
}

namespace detail {

/** 1-based average (mid) ranks; ties share the mean of their rank block. */
inline std::vector<double> average_ranks(const double* col, Eigen::Index n,
                                         Eigen::Index stride = 1) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double va = col[a * stride], vb = col[b * stride];
        return va < vb || (va == vb && a < b);
    });
    std::vector<double> ranks(static_cast<std::size_t>(n));
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && col[order[static_cast<std::size_t>(j + 1)] * stride] ==
                                col[order[static_cast<std::size_t>(i)] * stride])
            ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based midrank
        for (Eigen::Index t = i; t <= j; ++t)
            ranks[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = mid;
        i = j + 1;
    }
    return ranks;
}

/**
 * Equal-frequency bin index per sample for one coordinate, derived from
 * midranks so tied values always land in the same bin.
 */
inline std::vector<std::uint32_t> quantile_bins(const double* col, Eigen::Index n,
                                                Eigen::Index stride, int bins) {
    const auto ranks = average_ranks(col, n, stride);
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double scaled =
            (ranks[static_cast<std::size_t>(i)] - 0.5) * static_cast<double>(bins) /
            static_cast<double>(n);
        auto b = static_cast<std::int64_t>(scaled);
        if (b >= bins) b = bins - 1;
        if (b < 0) b = 0;
        idx[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(b);
    }
    return idx;
}

/** Compose per-coordinate bins (1 or 2 columns) into one cell id per row. */
inline std::vector<std::uint32_t> side_cells(const Eigen::MatrixXd& m, int bins) {
    const Eigen::Index n = m.rows();
    auto cells = quantile_bins(m.col(0).data(), n, m.col(0).innerStride(), bins);
    if (m.cols() == 2) {
        const auto second = quantile_bins(m.col(1).data(), n, m.col(1).innerStride(), bins);
        for (std::size_t i = 0; i < cells.size(); ++i)
            cells[i] += static_cast<std::uint32_t>(bins) * second[i];
    }
    return cells;
}

}  // namespace detail

/**
 * Histogram mutual-information estimate: equal-frequency bins per coordinate
 * (at most two coordinates per side), plug-in MI of the discretized joint,
 * plus the Miller-Madow bias correction computed from occupied-cell counts.
 */
inline MiEstimate binned_mi(const Eigen::MatrixXd& samples_a, const Eigen::MatrixXd& samples_b,
                            int bins) {
    if (samples_a.rows() != samples_b.rows())
        throw validation_error("binned_mi: sample counts differ");
    const Eigen::Index n = samples_a.rows();
    if (n < 1000) throw validation_error("binned_mi: need at least 1000 samples");
    if (bins < 8 || bins > 64) throw validation_error("binned_mi: bins must be in [8, 64]");
    if (samples_a.cols() < 1 || samples_a.cols() > 2 || samples_b.cols() < 1 ||
        samples_b.cols() > 2)
        throw validation_error("binned_mi: each side supports 1 or 2 columns only");

    const auto ca = detail::side_cells(samples_a, bins);
    const auto cb = detail::side_cells(samples_b, bins);

    std::vector<std::uint64_t> joint(static_cast<std::size_t>(n));
    const auto cells_per_side = static_cast<std::uint64_t>(bins) * static_cast<std::uint64_t>(bins);
    for (std::size_t i = 0; i < joint.size(); ++i)
        joint[i] = static_cast<std::uint64_t>(ca[i]) * cells_per_side + cb[i];
    std::sort(joint.begin(), joint.end());

    std::unordered_map<std::uint32_t, double> marg_a, marg_b;
    for (std::size_t i = 0; i < joint.size(); ++i) {
        marg_a[ca[i]] += 1.0;
        marg_b[cb[i]] += 1.0;
    }

    const double dn = static_cast<double>(n);
    double mi = 0.0;
    std::size_t occupied_joint = 0;
    std::size_t i = 0;
    while (i < joint.size()) {
        std::size_t j = i;
        while (j + 1 < joint.size() && joint[j + 1] == joint[i]) ++j;
        const double njoint = static_cast<double>(j - i + 1);
        const auto cell_a = static_cast<std::uint32_t>(joint[i] / cells_per_side);
        const auto cell_b = static_cast<std::uint32_t>(joint[i] % cells_per_side);
        mi += (njoint / dn) *
              std::log(njoint * dn / (marg_a.at(cell_a) * marg_b.at(cell_b)));
        ++occupied_joint;
        i = j + 1;
    }
    const double correction =
        (static_cast<double>(marg_a.size() - 1) + static_cast<double>(marg_b.size() - 1) -
         static_cast<double>(occupied_joint - 1)) /
        (2.0 * dn);

    MiEstimate est;
    est.method = "binned";
    est.bins = bins;
    est.n = n;
    est.raw_nats = mi + correction;
    est.nats = std::max(0.0, est.raw_nats);
    return est;
}

}  // namespace ibnc
