#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "ibnc/copula.hpp"
#include "ibnc/error.hpp"
#include "ibnc/repr.hpp"
#include "ibnc/rng.hpp"
#include "ibnc/synth.hpp"

namespace {

ibnc::RepresentationSet gaussian_set(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                                     const char* name) {
    ibnc::rng gen(seed);
    std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
    return ibnc::make_representation(gen.gaussian(n, d), labels, name);
}

}  // namespace

TEST_CASE("scaled ranks: average ranks over N+1") {
    Eigen::MatrixXd x(3, 1);
    x << 3.0, 1.0, 2.0;
    const Eigen::MatrixXd u = ibnc::rank_transform(x);
    REQUIRE(u(0, 0) == 0.75);
    REQUIRE(u(1, 0) == 0.25);
    REQUIRE(u(2, 0) == 0.5);

    Eigen::MatrixXd tied(2, 1);
    tied << 5.0, 5.0;
    const Eigen::MatrixXd ut = ibnc::rank_transform(tied);
    REQUIRE(ut(0, 0) == 0.5);
    REQUIRE(ut(1, 0) == 0.5);

    REQUIRE_THROWS_AS(ibnc::rank_transform(Eigen::MatrixXd::Zero(1, 2)),
                      ibnc::validation_error);
}

TEST_CASE("normal quantile matches reference values to high precision") {
    // Reference values from an independent high-precision implementation.
    const std::vector<std::pair<double, double>> table = {
        {1e-12, -7.034483825301131},
        {1e-9, -5.9978070150076865},
        {1e-6, -4.753424308822899},
        {0.001, -3.090232306167813},
        {0.025, -1.9599639845400545},
        {0.1, -1.2815515655446004},
        {0.25, -0.6744897501960817},
        {0.4, -0.2533471031357997},
        {0.5, 0.0},
        {0.6, 0.2533471031357997},
        {0.75, 0.6744897501960817},
        {0.9, 1.2815515655446004},
        {0.975, 1.959963984540054},
        {0.999, 3.090232306167813},
        {0.999999, 4.753424308817087},
        {0.999999999, 5.997807019601637},
    };
    for (const auto& [p, q] : table)
        REQUIRE(ibnc::normal_quantile(p) == Catch::Approx(q).margin(1e-9));

    REQUIRE(ibnc::normal_quantile(0.5) == 0.0);

    SECTION("antisymmetry and monotonicity") {
        for (double p : {0.002, 0.025, 0.1, 0.3, 0.45})
            REQUIRE(std::abs(ibnc::normal_quantile(p) + ibnc::normal_quantile(1.0 - p)) <
                    1e-12);
        double prev = -std::numeric_limits<double>::infinity();
        for (double p = 0.001; p < 1.0; p += 0.001) {
            const double q = ibnc::normal_quantile(p);
            REQUIRE(q > prev);
            prev = q;
        }
    }

    SECTION("the open interval is enforced") {
        REQUIRE_THROWS_AS(ibnc::normal_quantile(0.0), ibnc::validation_error);
        REQUIRE_THROWS_AS(ibnc::normal_quantile(1.0), ibnc::validation_error);
        REQUIRE_THROWS_AS(ibnc::normal_quantile(-0.5), ibnc::validation_error);
        REQUIRE_THROWS_AS(ibnc::normal_quantile(std::nan("")), ibnc::validation_error);
    }
}

TEST_CASE("normal scores apply the quantile elementwise") {
    Eigen::MatrixXd u(2, 2);
    u << 0.1, 0.9, 0.5, 0.25;
    const Eigen::MatrixXd s = ibnc::normal_scores(u);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j)
            REQUIRE(s(i, j) == ibnc::normal_quantile(u(i, j)));
}

TEST_CASE("fitted copulas have unit-diagonal symmetric correlations") {
    ibnc::rng gen(91);
    const Eigen::MatrixXd x = gen.gaussian(200, 3);
    const auto model = ibnc::fit_copula(x);
    REQUIRE(model.u.rows() == 200);
    REQUIRE(model.scores.rows() == 200);
    REQUIRE(model.correlation.rows() == 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
        REQUIRE(model.correlation(i, i) == Catch::Approx(1.0).margin(1e-12));
        for (Eigen::Index j = 0; j < 3; ++j) {
            REQUIRE(model.correlation(i, j) == Catch::Approx(model.correlation(j, i)).margin(1e-14));
            REQUIRE(std::abs(model.correlation(i, j)) <= 1.0 + 1e-12);
        }
    }
    REQUIRE((model.u.array() > 0.0).all());
    REQUIRE((model.u.array() < 1.0).all());
}

TEST_CASE("monotone warps leave normal scores bitwise unchanged") {
    const auto set = gaussian_set(300, 4, 92, "plain");
    const Eigen::MatrixXd base = ibnc::normal_scores(ibnc::rank_transform(set.features));
    for (auto warp : {ibnc::warp_kind::exp, ibnc::warp_kind::cubic_plus_linear,
                      ibnc::warp_kind::arctan}) {
        const Eigen::MatrixXd warped = ibnc::normal_scores(
            ibnc::rank_transform(ibnc::monotone_warp(set, warp).features));
        REQUIRE(base == warped);
    }
}

TEST_CASE("joint score correlation splits into aligned blocks") {
    ibnc::rng gen(93);
    const Eigen::MatrixXd sa = ibnc::normal_scores(ibnc::rank_transform(gen.gaussian(150, 3)));
    const Eigen::MatrixXd sb = ibnc::normal_scores(ibnc::rank_transform(gen.gaussian(150, 2)));
    const auto blocks = ibnc::copula_correlation(sa, sb);
    REQUIRE(blocks.gaa.rows() == 3);
    REQUIRE(blocks.gbb.rows() == 2);
    REQUIRE(blocks.gab.rows() == 3);
    REQUIRE(blocks.gab.cols() == 2);
    REQUIRE(blocks.gaa.isApprox(ibnc::stats::correlation(sa), 1e-12));
    REQUIRE(blocks.gbb.isApprox(ibnc::stats::correlation(sb), 1e-12));
    REQUIRE_THROWS_AS(ibnc::copula_correlation(sa, sb.topRows(100)), ibnc::validation_error);
}

TEST_CASE("a representation is fully relevant to itself") {
    const auto set = gaussian_set(500, 3, 94, "self");
    const auto solution =
        ibnc::mgib_solve(set, set, ibnc::RankTarget::explicit_beta(2.0));
    REQUIRE(solution.projection.active_rank == 3);
    REQUIRE(solution.projection.alpha_capped == std::vector<char>{1, 1, 1});
    for (Eigen::Index i = 0; i < 3; ++i)
        REQUIRE(solution.projection.alphas(i) == ibnc::alpha_cap);
    REQUIRE(solution.source_name == "self");
    REQUIRE(solution.relevance_name == "self");
}

TEST_CASE("independent representations carry almost no relevant information") {
    const auto a = gaussian_set(2000, 2, 95, "a");
    const auto b = gaussian_set(2000, 2, 96, "b");
    const auto solution = ibnc::mgib_solve(a, b, ibnc::RankTarget::explicit_beta(5.0));
    REQUIRE(ibnc::total_relevant_information(solution.spectrum) < 0.05);
    REQUIRE(solution.info.i_ty < 0.05);
}

TEST_CASE("the bottleneck compresses the source, not the relevance variable") {
    const auto a = gaussian_set(400, 3, 97, "wide");
    const auto b = gaussian_set(400, 2, 98, "narrow");
    const auto ab = ibnc::mgib_solve(a, b, ibnc::RankTarget::explicit_beta(3.0));
    const auto ba = ibnc::mgib_solve(b, a, ibnc::RankTarget::explicit_beta(3.0));
    REQUIRE(ab.joint.sigma_x.rows() == 3);
    REQUIRE(ba.joint.sigma_x.rows() == 2);
    REQUIRE(ab.source_name == "wide");
    REQUIRE(ab.relevance_name == "narrow");

    const auto short_b = gaussian_set(399, 2, 99, "short");
    REQUIRE_THROWS_WITH(ibnc::mgib_solve(a, short_b, ibnc::RankTarget::explicit_beta(3.0)),
                        Catch::Matchers::ContainsSubstring("same samples"));
}

TEST_CASE("compressed columns have the prescribed encoder variances") {
    // Source = relevance signal plus noise, with one pure-noise column.
    const Eigen::Index n = 20000;
    ibnc::rng gen(101);
    const Eigen::MatrixXd r = gen.gaussian(n, 2);
    const Eigen::MatrixXd e = gen.gaussian(n, 3);
    Eigen::MatrixXd src(n, 3);
    src.col(0) = r.col(0) + 0.5 * e.col(0);
    src.col(1) = r.col(1) + 0.5 * e.col(1);
    src.col(2) = e.col(2);

    std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
    const auto source = ibnc::make_representation(src, labels, "src");
    const auto relevance = ibnc::make_representation(r, labels, "rel");

    const auto solution = ibnc::mgib_solve(source, relevance, ibnc::RankTarget::for_rank(2));
    REQUIRE(solution.projection.active_rank == 2);
    REQUIRE(solution.compressed.cols() == 2);
    REQUIRE(solution.compressed.rows() == n);

    // The informative dimensions have lambda = 1 - rho^2 = 1 - 0.8 = 0.2.
    REQUIRE(solution.spectrum.lambdas(0) == Catch::Approx(0.2).margin(0.05));
    REQUIRE(solution.spectrum.lambdas(1) == Catch::Approx(0.2).margin(0.05));
    REQUIRE(solution.spectrum.lambdas(2) > 0.9);

    for (Eigen::Index j = 0; j < 2; ++j) {
        const Eigen::VectorXd col = solution.compressed.col(j);
        const double mean = col.mean();
        const double var =
            (col.array() - mean).matrix().squaredNorm() / static_cast<double>(n - 1);
        const double alpha2 = solution.projection.alphas(j) * solution.projection.alphas(j);
        REQUIRE(var == Catch::Approx(alpha2).epsilon(0.05));
    }
}

TEST_CASE("reference scores reproduce the training transform exactly") {
    const auto a = gaussian_set(300, 3, 102, "train");
    ibnc::rng gen(103);
    const Eigen::MatrixXd rel =
        a.features.leftCols(2) + 0.5 * gen.gaussian(300, 2);
    const auto b = ibnc::make_representation(rel, a.labels, "rel");
    const auto solution = ibnc::mgib_solve(a, b, ibnc::RankTarget::explicit_beta(4.0));
    REQUIRE(solution.projection.active_rank >= 1);
    const Eigen::MatrixXd replay = ibnc::apply_projection(solution, a, a);
    REQUIRE(replay == solution.compressed);
}

TEST_CASE("out-of-sample scores interpolate the reference CDF") {
    Eigen::MatrixXd ref(10, 1);
    for (Eigen::Index i = 0; i < 10; ++i) ref(i, 0) = static_cast<double>(i + 1);

    Eigen::MatrixXd probe(4, 1);
    probe << 2.5, 7.0, -100.0, 100.0;
    const Eigen::MatrixXd s = ibnc::reference_scores(probe, ref);

    REQUIRE(s(0, 0) == Catch::Approx(ibnc::normal_quantile(2.5 / 11.0)).margin(1e-12));
    REQUIRE(s(1, 0) == Catch::Approx(ibnc::normal_quantile(7.0 / 11.0)).margin(1e-12));
    REQUIRE(s(2, 0) == Catch::Approx(ibnc::normal_quantile(0.5 / 11.0)).margin(1e-12));
    REQUIRE(s(3, 0) == Catch::Approx(ibnc::normal_quantile(10.5 / 11.0)).margin(1e-12));

    SECTION("tied reference values collapse to one node") {
        Eigen::MatrixXd tied(3, 1);
        tied << 1.0, 1.0, 2.0;
        Eigen::MatrixXd at(2, 1);
        at << 1.0, 1.5;
        const Eigen::MatrixXd st = ibnc::reference_scores(at, tied);
        // Value 1 has average rank 1.5 of 3 -> u = 1.5/4; value 2 has u = 3/4.
        REQUIRE(st(0, 0) == Catch::Approx(ibnc::normal_quantile(0.375)).margin(1e-12));
        REQUIRE(st(1, 0) ==
                Catch::Approx(ibnc::normal_quantile(0.5 * (0.375 + 0.75))).margin(1e-12));
    }

    SECTION("shape validation") {
        REQUIRE_THROWS_AS(ibnc::reference_scores(probe, Eigen::MatrixXd::Zero(10, 2)),
                          ibnc::validation_error);
        REQUIRE_THROWS_AS(ibnc::reference_scores(probe, Eigen::MatrixXd::Zero(1, 1)),
                          ibnc::validation_error);
    }
}

TEST_CASE("projection application validates dimensions") {
    const auto a = gaussian_set(200, 3, 104, "a");
    const auto b = gaussian_set(200, 2, 105, "b");
    const auto solution = ibnc::mgib_solve(a, b, ibnc::RankTarget::explicit_beta(4.0));
    const auto wrong = gaussian_set(50, 4, 106, "wrong");
    REQUIRE_THROWS_AS(ibnc::apply_projection(solution, wrong, a), ibnc::validation_error);
    REQUIRE_THROWS_AS(ibnc::apply_projection(solution, wrong, wrong), ibnc::validation_error);
}
