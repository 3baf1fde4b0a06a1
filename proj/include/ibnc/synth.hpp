#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "ibnc/error.hpp"
#include "ibnc/parallel.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/rng.hpp"

namespace ibnc {

/** Geometry of a K-simplex equiangular tight frame. */
struct EtfSpec {
    int class_count = 2;   // K >= 2
    int ambient_dim = 1;   // d >= K-1
    double norm = 1.0;     // common vertex norm
};

/** An isotropic Gaussian mixture centered on an ETF. */
struct MixtureSpec {
    EtfSpec etf;
    double within_std = 0.0;    // sigma_w >= 0
    int samples_per_class = 2;  // n >= 2
    std::uint64_t seed = 0;
};

namespace detail {

/**
 * Helmert-style orthonormal basis of the hyperplane {x : sum x = 0} in R^K,
 * returned as a K x (K-1) matrix with orthonormal columns summing to zero.
 * Key identity: U * U^T = I_K - J/K (the centering projector).
 */
inline Eigen::MatrixXd helmert_basis(int k) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(k, k - 1);
    for (int j = 1; j < k; ++j) {
        const double c = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
        for (int i = 0; i < j; ++i) u(i, j - 1) = c;
        u(j, j - 1) = -static_cast<double>(j) * c;
    }
    return u;
}

inline void check_etf_spec(const EtfSpec& spec) {
    if (spec.class_count < 2) throw validation_error("simplex_etf: need at least 2 classes");
    if (spec.ambient_dim < spec.class_count - 1)
        throw validation_error("simplex_etf: ambient dimension " +
                               std::to_string(spec.ambient_dim) + " is too small for K=" +
                               std::to_string(spec.class_count) +
                               " (need at least K-1)");
    if (!(spec.norm > 0.0)) throw validation_error("simplex_etf: norm must be positive");
}

/** ETF vertices with the rotation drawn from the caller's generator. */
inline Eigen::MatrixXd simplex_etf_impl(const EtfSpec& spec, rng& gen) {
    check_etf_spec(spec);
    const int k = spec.class_count;
    const int d = spec.ambient_dim;
    // Centered simplex in its (K-1)-dim span. Scaling by sqrt(K/(K-1)) gives
    // unit vertex norms and pairwise cosine exactly -1/(K-1); the Gram matrix
    // is norm^2 * ((K/(K-1)) I - (1/(K-1)) J) by the Helmert identity.
    const Eigen::MatrixXd local =
        std::sqrt(static_cast<double>(k) / (k - 1)) * spec.norm * helmert_basis(k);
    const Eigen::MatrixXd frame = gen.haar_orthogonal(d).leftCols(k - 1);
    return local * frame.transpose();  // K x d
}

}  // namespace detail

/**
 * Exact K-simplex ETF: K equal-norm class means with every pairwise cosine
 * equal to -1/(K-1), embedded in d dimensions by a seeded random rotation.
 * Returns a K x d matrix of means; deterministic per seed.
 */
inline Eigen::MatrixXd simplex_etf(const EtfSpec& spec, std::uint64_t seed) {
    rng gen(seed);
    return detail::simplex_etf_impl(spec, gen);
}

/**
 * Balanced mixture: samples_per_class draws from N(mu_k, sigma_w^2 I) per
 * class, rows grouped by class. One generator seeded by spec.seed drives the
 * ETF rotation first, then the noise (row-major order), so the whole output
 * is a pure function of the spec.
 */
inline RepresentationSet sample_mixture(const MixtureSpec& spec) {
    if (spec.samples_per_class < 2)
        throw validation_error("sample_mixture: need at least 2 samples per class");
    if (spec.within_std < 0.0)
        throw validation_error("sample_mixture: within_std must be nonnegative");
    rng gen(spec.seed);
    const Eigen::MatrixXd means = detail::simplex_etf_impl(spec.etf, gen);
    const int k = spec.etf.class_count;
    const int d = spec.etf.ambient_dim;
    const int n = spec.samples_per_class;

    RepresentationSet set;
    set.features.resize(static_cast<Eigen::Index>(k) * n, d);
    set.labels.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(n));
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < n; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(c) * n + i;
            for (int j = 0; j < d; ++j)
                set.features(row, j) = means(c, j) + spec.within_std * gen.normal();
            set.labels.push_back(c);
        }
    }
    set.class_count = k;
    set.name = "mixture-k" + std::to_string(k) + "-d" + std::to_string(d) + "-n" +
               std::to_string(n) + "-seed" + std::to_string(spec.seed);
    validate(set);
    return set;
}

struct LinearPairResult {
    RepresentationSet set;     // Z1 = Z2 A^T + xi
    Eigen::MatrixXd mixing;    // the d x d map A actually used
    double condition_number;
};

/**
 * Z1 = Z2 A^T + xi with A a seeded random invertible d x d matrix and
 * xi ~ N(0, noise_std^2 I). A is drawn with N(0, 1/d) entries and resampled
 * (up to 100 times) until its condition number is at most 100; if no draw
 * qualifies, the last draw's singular values are clipped to enforce the
 * bound. Labels are copied from the source.
 */
inline LinearPairResult linear_pair(const RepresentationSet& source, std::uint64_t mixing_seed,
                                    double noise_std) {
    validate(source);
    if (noise_std < 0.0) throw validation_error("linear_pair: noise_std must be nonnegative");
    const Eigen::Index d = source.dim();
    rng gen(mixing_seed);

    constexpr double cond_limit = 100.0;
    Eigen::MatrixXd a;
    double cond = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 100; ++attempt) {
        a = gen.gaussian(d, d) / std::sqrt(static_cast<double>(d));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        const double smin = svd.singularValues()(d - 1);
        const double smax = svd.singularValues()(0);
        cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        if (cond <= cond_limit) break;
        if (attempt == 99) {
            // Fallback: clip the spectrum of the final draw.
            Eigen::JacobiSVD<Eigen::MatrixXd> full(a,
                                                   Eigen::ComputeFullU | Eigen::ComputeFullV);
            Eigen::VectorXd s = full.singularValues();
            const double floor_val = s(0) / cond_limit;
            s = s.cwiseMax(floor_val);
            a = full.matrixU() * s.asDiagonal() * full.matrixV().transpose();
            cond = s(0) / s(d - 1);
        }
    }

    LinearPairResult out;
    out.mixing = a;
    out.condition_number = cond;
    out.set.features = source.features * a.transpose();
    if (noise_std > 0.0)
        out.set.features += noise_std * gen.gaussian(source.n(), d);
    out.set.labels = source.labels;
    out.set.class_count = source.class_count;
    out.set.name = source.name + " [linear-pair]";
    validate(out.set);
    return out;
}

enum class warp_kind { exp, cubic_plus_linear, arctan };

inline warp_kind parse_warp(const std::string& s) {
    if (s == "exp") return warp_kind::exp;
    if (s == "cubic_plus_linear") return warp_kind::cubic_plus_linear;
    if (s == "arctan") return warp_kind::arctan;
    throw validation_error("unknown warp '" + s +
                           "' (expected exp, cubic_plus_linear, or arctan)");
}

/**
 * Apply a strictly increasing scalar map per coordinate. Ranks per column are
 * unchanged, so every rank-based quantity downstream is exactly invariant.
 * exp outputs are clamped from below at the smallest positive normal double,
 * keeping them strictly positive; inputs beyond the underflow point (< -708)
 * can still collapse to ties, which is outside the intended data scale.
 */
inline RepresentationSet monotone_warp(const RepresentationSet& set, warp_kind warp,
                                       int threads = 1) {
    validate(set);
    RepresentationSet out = set;
    const Eigen::Index n = set.n();
    parallel_for(static_cast<std::size_t>(set.dim()), threads, [&](std::size_t jz) {
        const auto j = static_cast<Eigen::Index>(jz);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = set.features(i, j);
            double y;
            switch (warp) {
                case warp_kind::exp:
                    y = std::max(std::exp(x), std::numeric_limits<double>::min());
                    break;
                case warp_kind::cubic_plus_linear: y = x * x * x + x; break;
                default: y = std::atan(x); break;
            }
            out.features(i, j) = y;
        }
    });
    switch (warp) {
        case warp_kind::exp: out.name += " [warp-exp]"; break;
        case warp_kind::cubic_plus_linear: out.name += " [warp-cubic]"; break;
        default: out.name += " [warp-arctan]"; break;
    }
    return out;
}

}  // namespace ibnc
