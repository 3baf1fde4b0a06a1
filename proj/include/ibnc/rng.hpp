#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "ibnc/error.hpp"

namespace ibnc {

/**
 * Deterministic random source.
 *
 * Wraps std::mt19937_64 but implements the real-valued transforms (uniform
 * doubles, Box-Muller normals, bounded integers) by hand, because the
 * distributions in <random> are not pinned by the standard and may differ
 * between library implementations. Everything downstream of a seed is a pure
 * function of that seed.
 */
class rng {
  public:
    explicit rng(std::uint64_t seed) : gen_(seed) {}

    /** Uniform double in [0, 1) with 53 random bits. */
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /** Standard normal via Box-Muller; draws are paired, the spare is cached. */
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // 1 - U keeps the log argument strictly positive.
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /** Uniform integer in [0, n) by rejection (no modulo bias). */
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw validation_error("rng::bounded: n must be positive");
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = max - max % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    /** rows x cols matrix of iid standard normals, filled row-major. */
    Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    /**
     * Haar-distributed orthogonal n x n matrix: QR of a Gaussian matrix with
     * the sign of R's diagonal folded into Q, which makes the factorization
     * unique and the distribution rotation-invariant.
     */
    Eigen::MatrixXd haar_orthogonal(Eigen::Index n) {
        Eigen::MatrixXd g = gaussian(n, n);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd& qrm = qr.matrixQR();
        for (Eigen::Index j = 0; j < n; ++j)
            if (qrm(j, j) < 0.0) q.col(j) = -q.col(j);
        return q;
    }

    /** In-place Fisher-Yates shuffle. */
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ibnc
