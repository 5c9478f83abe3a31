#include <doctest.h>

#include "fgfpca/binning.hpp"
#include "fgfpca/bspline.hpp"
#include "fgfpca/errors.hpp"
#include "oracles.hpp"

#include <numeric>
#include <set>

using namespace fgfpca;

namespace {

std::vector<std::size_t> one_based(const std::vector<std::size_t>& v)
{
    std::vector<std::size_t> out;
    for (auto j : v) out.push_back(j + 1);
    return out;
}

} // namespace

TEST_SUITE("binning")
{
    TEST_CASE("cyclic overlap wraps at the start of the day")
    {
        auto spec = build_bins(1440, 6, true, true);
        CHECK(spec.size() == 1440);
        CHECK(one_based(spec.bins[0]) == std::vector<std::size_t>{1438, 1439, 1440, 1, 2, 3, 4});
        CHECK(one_based(spec.bins[1439]) == std::vector<std::size_t>{1437, 1438, 1439, 1440, 1, 2, 3});
    }

    TEST_CASE("non-cyclic overlap truncates")
    {
        auto spec = build_bins(100, 6, true, false);
        CHECK(one_based(spec.bins[0]) == std::vector<std::size_t>{1, 2, 3, 4});
        CHECK(spec.bins[99].size() == 4);
        for (std::size_t l = 3; l < 97; ++l) CHECK(spec.bins[l].size() == 7);
        for (std::size_t l = 0; l < spec.size(); ++l) {
            CHECK(spec.midpoints[l] == l);
            CHECK(spec.bins[l].size() >= 4);
        }
    }

    TEST_CASE("non-overlapping exact cover")
    {
        auto spec = build_bins(10, 2, false, false);
        REQUIRE(spec.size() == 4);
        CHECK(one_based(spec.bins[0]) == std::vector<std::size_t>{1, 2, 3});
        CHECK(one_based(spec.bins[1]) == std::vector<std::size_t>{4, 5, 6});
        CHECK(one_based(spec.bins[2]) == std::vector<std::size_t>{7, 8, 9});
        CHECK(one_based(spec.bins[3]) == std::vector<std::size_t>{10});
        CHECK(one_based(spec.midpoints) == std::vector<std::size_t>{2, 5, 8, 10});

        std::multiset<std::size_t> seen;
        for (auto& b : spec.bins) seen.insert(b.begin(), b.end());
        CHECK(seen.size() == 10);
        for (std::size_t j = 0; j < 10; ++j) CHECK(seen.count(j) == 1);
    }

    TEST_CASE("non-overlapping J=100 w=10")
    {
        auto spec = build_bins(100, 10, false, false);
        REQUIRE(spec.size() == 10);
        for (int l = 0; l < 9; ++l) CHECK(spec.bins[l].size() == 11);
        CHECK(spec.bins[9].size() == 1);
        for (int l = 1; l < 9; ++l) CHECK(spec.midpoints[l] - spec.midpoints[l - 1] == 11);
    }

    TEST_CASE("validation")
    {
        CHECK_THROWS_WITH_AS(build_bins(100, 7, true, false), "width must be even", ConfigError);
        CHECK_THROWS_AS(build_bins(10, 10, true, false), ConfigError);
        CHECK_THROWS_AS(build_bins(10, 0, true, false), ConfigError);
    }
}

TEST_SUITE("bspline")
{
    TEST_CASE("partition of unity")
    {
        std::vector<double> x;
        for (int i = 0; i <= 200; ++i) x.push_back(i / 200.0);
        for (auto basis : {BSplineBasis::open(0, 1, 7), BSplineBasis::periodic(0, 1, 12)}) {
            auto B = basis.design(x);
            for (Eigen::Index i = 0; i < B.rows(); ++i) CHECK(B.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(B.minCoeff() >= -1e-15);
        }
        CHECK(BSplineBasis::open(0, 1, 7).size() == 11);
        CHECK(BSplineBasis::periodic(0, 1, 12).size() == 12);
    }

    TEST_CASE("periodic basis wraps")
    {
        auto basis = BSplineBasis::periodic(0, 1, 9);
        std::vector<double> a{0.03, 0.5}, b{1.03, 1.5};
        CHECK((basis.design(a) - basis.design(b)).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("cubics are reproduced")
    {
        auto basis = BSplineBasis::open(0, 1, 5);
        std::vector<double> x;
        for (int i = 0; i < 40; ++i) x.push_back(i / 39.0);
        auto B = basis.design(x);
        Eigen::VectorXd y(40);
        for (int i = 0; i < 40; ++i) y(i) = 1 - 2 * x[i] + 3 * std::pow(x[i], 3);
        Eigen::VectorXd coef = B.colPivHouseholderQr().solve(y);
        CHECK((B * coef - y).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("difference penalty null space")
    {
        auto open = BSplineBasis::open(0, 1, 6);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(open.difference_penalty(2));
        CHECK((e1.eigenvalues().array().abs() < 1e-10).count() == open.penalty_null_dim(2));
        auto per = BSplineBasis::periodic(0, 1, 10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(per.difference_penalty(2));
        CHECK((e2.eigenvalues().array().abs() < 1e-10).count() == 1);
        // linear coefficients are unpenalised on an open basis
        Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(open.size(), -1, 2);
        CHECK(lin.dot(open.difference_penalty(2) * lin) == doctest::Approx(0.0).epsilon(1e-12));
    }

    TEST_CASE("smoother matches the dense formula")
    {
        std::vector<double> x;
        for (int i = 0; i < 30; ++i) x.push_back(i / 30.0);
        auto basis = BSplineBasis::periodic(0, 1, 12);
        const Eigen::MatrixXd B = basis.design(x);
        const Eigen::MatrixXd P = basis.difference_penalty(2);
        PenalizedSmoother sm(B, P);
        std::mt19937_64 rng(3);
        std::normal_distribution<double> nd;
        Eigen::MatrixXd rows(5, 30);
        for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = nd(rng);
        for (double lambda : {0.01, 1.0, 50.0}) {
            const Eigen::MatrixXd S = B * (B.transpose() * B + lambda * P).inverse() * B.transpose();
            CHECK((sm.smoother_matrix(lambda) - S).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(sm.trace(lambda) == doctest::Approx(S.trace()).epsilon(1e-10));
            const Eigen::MatrixXd fit = rows * S.transpose();
            CHECK((sm.smooth_rows(rows, lambda) - fit).cwiseAbs().maxCoeff() < 1e-10);
            const double rss = (rows - fit).squaredNorm();
            const double gcv = rss / (5.0 * 30.0) / std::pow(1 - S.trace() / 30.0, 2);
            CHECK(sm.gcv(rows, lambda) == doctest::Approx(gcv).epsilon(1e-10));
        }
    }

    TEST_CASE("GCV selection minimises over the interval")
    {
        std::vector<double> x;
        for (int i = 0; i < 60; ++i) x.push_back(i / 60.0);
        auto basis = BSplineBasis::periodic(0, 1, 16);
        PenalizedSmoother sm(basis.design(x), basis.difference_penalty(2));
        std::mt19937_64 rng(11);
        std::normal_distribution<double> nd(0, 0.3);
        Eigen::MatrixXd rows(20, 60);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 60; ++j) rows(i, j) = std::sin(2 * oracle::kPi * x[j]) * (1 + 0.1 * i) + nd(rng);
        auto sel = sm.select(rows, -5, 10);
        CHECK_FALSE(sel.fallback);
        for (double t = -5; t <= 10; t += 0.05) CHECK(sm.gcv(rows, std::exp(t)) >= sel.gcv - 1e-12);
    }

    TEST_CASE("Gauss-Hermite integrates polynomials against exp(-x^2)")
    {
        auto rule = gauss_hermite(10);
        const double sqrt_pi = std::sqrt(oracle::kPi);
        CHECK(rule.weights.sum() == doctest::Approx(sqrt_pi).epsilon(1e-12));
        double m2 = 0, m4 = 0, m6 = 0;
        for (Eigen::Index q = 0; q < 10; ++q) {
            const double x = rule.nodes(q), w = rule.weights(q);
            m2 += w * x * x;
            m4 += w * std::pow(x, 4);
            m6 += w * std::pow(x, 6);
            CHECK(rule.log_adjusted_weights(q) == doctest::Approx(std::log(w) + x * x).epsilon(1e-12));
        }
        CHECK(m2 == doctest::Approx(sqrt_pi / 2).epsilon(1e-12));
        CHECK(m4 == doctest::Approx(3 * sqrt_pi / 4).epsilon(1e-12));
        CHECK(m6 == doctest::Approx(15 * sqrt_pi / 8).epsilon(1e-12));
    }
}
