#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ibnc/error.hpp"
#include "ibnc/info.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/stats.hpp"

namespace ibnc {

/** Neural-collapse geometry summary for one labeled representation. */
struct NcReport {
    double equinorm_std = 0.0;   // Std_k ||mu_k - mu_G|| / Avg_k ||mu_k - mu_G||
    double angle_std_deg = 0.0;  // std of pairwise angles between centered means
    double mean_cos = 0.0;       // mean pairwise cosine of centered means
    double target_cos = 0.0;     // -1/(K-1), the simplex-ETF value
    double nc1 = 0.0;            // Tr(Sigma_W) / Tr(Sigma_B)
    double ncm_accuracy = 0.0;   // nearest-class-mean accuracy on the set itself
    std::optional<double> nc4_agreement;  // probe-vs-NCM agreement, if probe given
};

struct ClassStatistics {
    Eigen::MatrixXd class_means;     // K x d
    Eigen::RowVectorXd global_mean;  // 1 x d
    Eigen::MatrixXd within;          // pooled within-class covariance (1/N)
    Eigen::MatrixXd between;         // between-class covariance (1/N)
    Eigen::VectorXd counts;
};

/** Scatter decomposition; within + between equals the total covariance. */
inline ClassStatistics class_statistics(const RepresentationSet& set) {
    validate(set);
    const auto s = stats::class_scatter(set.features, set.labels, set.class_count);
    return ClassStatistics{s.class_means, s.global_mean, s.within, s.between, s.counts};
}

/** Nearest-class-mean labels for test_features, ties to the smallest class index. */
inline std::vector<std::int64_t> ncm_classify(const RepresentationSet& train,
                                              const Eigen::MatrixXd& test_features) {
    if (test_features.cols() != train.dim())
        throw validation_error("ncm_classify: dimension mismatch");
    const Eigen::MatrixXd means = class_statistics(train).class_means;
    std::vector<std::int64_t> labels(static_cast<std::size_t>(test_features.rows()));
    for (Eigen::Index i = 0; i < test_features.rows(); ++i) {
        int best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int k = 0; k < train.class_count; ++k) {
            const double d2 = (test_features.row(i) - means.row(k)).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = k;
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
    return labels;
}

struct NcOptions {
    bool papyan_nc1 = false;  // Tr(Sigma_W pinv(Sigma_B))/K instead of the trace ratio
};

/**
 * All collapse metrics at once. Angles and norms are computed on centered
 * class means mu_k - mu_G; nc4_agreement is filled only when the caller
 * supplies probe predictions (one per row of the set).
 */
inline NcReport nc_report(const RepresentationSet& set,
                          const std::vector<std::int64_t>* probe_predictions = nullptr,
                          const NcOptions& options = {}) {
    const auto cs = class_statistics(set);
    const int k = set.class_count;
    if (k < 2) throw validation_error("nc_report: need at least 2 classes");

    const Eigen::MatrixXd centered = cs.class_means.rowwise() - cs.global_mean;
    Eigen::VectorXd norms(k);
    for (int i = 0; i < k; ++i) norms(i) = centered.row(i).norm();
    const double norm_mean = norms.mean();

    NcReport report;
    report.target_cos = -1.0 / static_cast<double>(k - 1);
    if (norm_mean > 0.0) {
        const double var = (norms.array() - norm_mean).square().sum() / k;
        report.equinorm_std = std::sqrt(var) / norm_mean;
    }

    std::vector<double> cosines, angles;
    cosines.reserve(static_cast<std::size_t>(k) * (k - 1) / 2);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double denom = norms(i) * norms(j);
            const double c = denom > 0.0 ? centered.row(i).dot(centered.row(j)) / denom : 0.0;
            const double clamped = std::min(1.0, std::max(-1.0, c));
            cosines.push_back(clamped);
            angles.push_back(std::acos(clamped) * 180.0 / std::numbers::pi);
        }
    }
    double cos_sum = 0.0, ang_sum = 0.0;
    for (double c : cosines) cos_sum += c;
    for (double a : angles) ang_sum += a;
    report.mean_cos = cos_sum / static_cast<double>(cosines.size());
    const double ang_mean = ang_sum / static_cast<double>(angles.size());
    double ang_var = 0.0;
    for (double a : angles) ang_var += (a - ang_mean) * (a - ang_mean);
    report.angle_std_deg = std::sqrt(ang_var / static_cast<double>(angles.size()));

    const double tr_w = cs.within.trace();
    const double tr_b = cs.between.trace();
    if (options.papyan_nc1) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cs.between);
        const double lam_max = eig.eigenvalues().maxCoeff();
        const double tol = 1e-12 * std::max(1.0, lam_max) * static_cast<double>(set.dim());
        Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(set.dim(), set.dim());
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
            const double lam = eig.eigenvalues()(i);
            if (lam > tol)
                pinv.noalias() +=
                    eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose() / lam;
        }
        report.nc1 = (cs.within * pinv).trace() / static_cast<double>(k);
    } else {
        report.nc1 = tr_b > 0.0 ? tr_w / tr_b
                                : (tr_w > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    }

    const auto ncm = ncm_classify(set, set.features);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ncm.size(); ++i)
        if (ncm[i] == set.labels[i]) ++correct;
    report.ncm_accuracy = static_cast<double>(correct) / static_cast<double>(ncm.size());

    if (probe_predictions) {
        if (probe_predictions->size() != set.labels.size())
            throw validation_error("nc_report: probe prediction count does not match rows");
        std::size_t agree = 0;
        for (std::size_t i = 0; i < ncm.size(); ++i)
            if (ncm[i] == (*probe_predictions)[i]) ++agree;
        report.nc4_agreement = static_cast<double>(agree) / static_cast<double>(ncm.size());
    }
    return report;
}

struct ProbeResult {
    std::vector<std::int64_t> predictions;  // on the test set
    double accuracy = 0.0;
    Eigen::MatrixXd weights;  // K x (d+1), last column is the bias
    int iterations = 0;
    double final_grad_norm = 0.0;
};

/**
 * Multinomial logistic-regression probe: full-batch L-BFGS (memory 10) with
 * Armijo backtracking from zero initialization, bias unpenalized, run until
 * the mean-loss gradient norm reaches 1e-6. Deterministic; throws
 * convergence_error (reporting the final gradient norm) if 500 iterations do
 * not suffice.
 */
inline ProbeResult linear_probe(const RepresentationSet& train, const RepresentationSet& test,
                                double l2 = 1e-3) {
    validate(train);
    validate(test);
    if (train.dim() != test.dim()) throw validation_error("linear_probe: dimension mismatch");
    if (l2 < 0.0) throw validation_error("linear_probe: l2 must be nonnegative");
    for (auto l : test.labels)
        if (l < 0 || l >= train.class_count)
            throw validation_error("linear_probe: test label outside the train label range");

    const Eigen::Index n = train.n();
    const Eigen::Index d = train.dim();
    const int k = train.class_count;

    Eigen::MatrixXd xb(n, d + 1);
    xb << train.features, Eigen::VectorXd::Ones(n);

    const Eigen::Index dim = static_cast<Eigen::Index>(k) * (d + 1);
    auto as_matrix = [&](Eigen::VectorXd& v) {
        return Eigen::Map<Eigen::MatrixXd>(v.data(), k, d + 1);
    };

    // Mean cross-entropy + (l2/2)||W||^2 on the non-bias block.
    auto evaluate = [&](const Eigen::VectorXd& wflat, Eigen::VectorXd& grad) {
        const Eigen::Map<const Eigen::MatrixXd> w(wflat.data(), k, d + 1);
        Eigen::MatrixXd logits = xb * w.transpose();  // N x K
        Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
        logits.colwise() -= row_max;
        Eigen::MatrixXd p = logits.array().exp().matrix();
        Eigen::VectorXd row_sum = p.rowwise().sum();

        double loss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto yi = train.labels[static_cast<std::size_t>(i)];
            loss -= logits(i, static_cast<Eigen::Index>(yi)) - std::log(row_sum(i));
        }
        loss /= static_cast<double>(n);

        p.array().colwise() /= row_sum.array();
        for (Eigen::Index i = 0; i < n; ++i)
            p(i, static_cast<Eigen::Index>(train.labels[static_cast<std::size_t>(i)])) -= 1.0;
        Eigen::MatrixXd g = (p.transpose() * xb) / static_cast<double>(n);

        if (l2 > 0.0) {
            loss += 0.5 * l2 * w.leftCols(d).squaredNorm();
            g.leftCols(d) += l2 * w.leftCols(d);
        }
        grad = Eigen::Map<Eigen::VectorXd>(g.data(), dim);
        return loss;
    };

    constexpr double tol = 1e-6;
    constexpr int max_iterations = 500;
    constexpr int memory = 10;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd grad(dim);
    double loss = evaluate(w, grad);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    int iter = 0;
    while (grad.norm() > tol && iter < max_iterations) {
        // Two-loop recursion for the L-BFGS direction.
        Eigen::VectorXd q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t h = s_hist.size(); h-- > 0;) {
            alpha[h] = rho_hist[h] * s_hist[h].dot(q);
            q -= alpha[h] * y_hist[h];
        }
        if (!s_hist.empty()) {
            const auto& s = s_hist.back();
            const auto& y = y_hist.back();
            q *= s.dot(y) / y.dot(y);
        }
        for (std::size_t h = 0; h < s_hist.size(); ++h) {
            const double beta = rho_hist[h] * y_hist[h].dot(q);
            q += (alpha[h] - beta) * s_hist[h];
        }
        Eigen::VectorXd direction = -q;
        double slope = grad.dot(direction);
        if (slope >= 0.0) {  // fall back to steepest descent
            direction = -grad;
            slope = -grad.squaredNorm();
        }

        double step = 1.0;
        Eigen::VectorXd w_next(dim), grad_next(dim);
        double loss_next = 0.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            w_next = w + step * direction;
            loss_next = evaluate(w_next, grad_next);
            if (loss_next <= loss + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw convergence_error("linear_probe: line search failed at gradient norm " +
                                    std::to_string(grad.norm()));

        const Eigen::VectorXd s = w_next - w;
        const Eigen::VectorXd y = grad_next - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > static_cast<std::size_t>(memory)) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        w = std::move(w_next);
        grad = std::move(grad_next);
        loss = loss_next;
        ++iter;
    }
    if (grad.norm() > tol)
        throw convergence_error("linear_probe: no convergence in " +
                                std::to_string(max_iterations) +
                                " iterations; final gradient norm " + std::to_string(grad.norm()));

    ProbeResult result;
    result.weights = as_matrix(w);
    result.iterations = iter;
    result.final_grad_norm = grad.norm();

    Eigen::MatrixXd xt(test.n(), d + 1);
    xt << test.features, Eigen::VectorXd::Ones(test.n());
    const Eigen::MatrixXd logits = xt * result.weights.transpose();
    result.predictions.resize(static_cast<std::size_t>(test.n()));
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < test.n(); ++i) {
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (logits(i, c) > logits(i, best)) best = c;
        result.predictions[static_cast<std::size_t>(i)] = best;
        if (best == test.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(test.n());
    return result;
}

/** The decodable-information gap delta = H(Y) - I(Z;Y). */
struct IbGap {
    double label_entropy_nats = 0.0;
    double mutual_info_nats = 0.0;
    double delta = 0.0;
};

/**
 * IB-gap diagnostic. H(Y) comes from the empirical label frequencies of the
 * whole set. I(Z;Y) is the plug-in mutual information between true labels
 * and nearest-class-mean decisions on a held-out half (stratified 50/50
 * split with a fixed internal seed); when any class is too small to split,
 * the NCM is evaluated in-sample instead.
 */
inline IbGap ib_gap(const RepresentationSet& set) {
    validate(set);
    IbGap gap;
    gap.label_entropy_nats = label_entropy(set.labels);

    const auto counts = class_counts(set);
    const bool can_split =
        *std::min_element(counts.begin(), counts.end()) >= 4;

    std::vector<std::int64_t> truth, predicted;
    if (can_split) {
        constexpr std::uint64_t split_seed = 27;
        const auto [train, test] = split_train_test(set, 0.5, split_seed);
        predicted = ncm_classify(train, test.features);
        truth = test.labels;
    } else {
        predicted = ncm_classify(set, set.features);
        truth = set.labels;
    }

    const int k = set.class_count;
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t i = 0; i < truth.size(); ++i)
        joint(static_cast<Eigen::Index>(truth[i]), static_cast<Eigen::Index>(predicted[i])) += 1.0;
    const double n = static_cast<double>(truth.size());
    const Eigen::VectorXd row = joint.rowwise().sum();
    const Eigen::VectorXd col = joint.colwise().sum();
    double mi = 0.0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            if (joint(a, b) > 0.0)
                mi += (joint(a, b) / n) * std::log(joint(a, b) * n / (row(a) * col(b)));
    gap.mutual_info_nats = std::max(0.0, mi);
    gap.delta = gap.label_entropy_nats - gap.mutual_info_nats;
    return gap;
}

/**
 * Reference supervised-contrastive loss. Rows are l2-normalized first; for
 * each anchor i, A(i) is everything else in the batch and P(i) its co-labeled
 * peers. Log-sum-exp stabilized; requires every anchor to have a positive.
 */
inline double supcon_loss(const Eigen::MatrixXd& embeddings,
                          const std::vector<std::int64_t>& labels) {
    const Eigen::Index n = embeddings.rows();
    if (n < 3) throw validation_error("supcon_loss: batch must have at least 3 samples");
    if (static_cast<Eigen::Index>(labels.size()) != n)
        throw validation_error("supcon_loss: label count does not match rows");

    Eigen::MatrixXd z = embeddings;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = z.row(i).norm();
        if (!(norm > 0.0))
            throw validation_error("supcon_loss: zero embedding row cannot be normalized");
        z.row(i) /= norm;
    }
    const Eigen::MatrixXd sim = z * z.transpose();

    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double max_sim = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) max_sim = std::max(max_sim, sim(i, j));
        double denom = 0.0, numer = 0.0;
        Eigen::Index positives = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double e = std::exp(sim(i, j) - max_sim);
            denom += e;
            if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
                numer += e;
                ++positives;
            }
        }
        if (positives == 0)
            throw validation_error("supcon_loss: anchor " + std::to_string(i) +
                                   " has no positive in the batch");
        loss += std::log(static_cast<double>(positives)) - std::log(numer) + std::log(denom);
    }
    return loss;
}

}  // namespace ibnc
