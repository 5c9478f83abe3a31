#include <doctest.h>

#include "fgfpca/binning.hpp"
#include "fgfpca/errors.hpp"
#include "fgfpca/metrics.hpp"
#include "fgfpca/pipeline.hpp"
#include "fgfpca/simulation.hpp"
#include "oracles.hpp"

#include <set>

using namespace fgfpca;

TEST_SUITE("simulation")
{
    TEST_CASE("default eigenvalues are halving")
    {
        SimScenario sc;
        sc.n_subjects = 5;
        auto [d, t] = generate(sc);
        CHECK(t.eigenvalues.size() == 4);
        CHECK(t.eigenvalues(0) == 1.0);
        CHECK(t.eigenvalues(1) == 0.5);
        CHECK(t.eigenvalues(2) == 0.25);
        CHECK(t.eigenvalues(3) == 0.125);
        CHECK(d.cyclic());
        CHECK(d.subject_ids().front() == "1");
    }

    TEST_CASE("null process is fair coin flips")
    {
        SimScenario sc;
        sc.eigenvalues = {0, 0, 0, 0};
        sc.seed = 99;
        auto [d, t] = generate(sc);
        REQUIRE(d.values().size() == 10000);
        const double m = d.values().mean();
        CHECK(m > 0.45);
        CHECK(m < 0.55);
        CHECK(t.eta.cwiseAbs().maxCoeff() == 0.0);
    }

    TEST_CASE("true eigenfunctions are orthonormal under the trapezoid rule")
    {
        for (auto set : {EigenSet::nonperiodic, EigenSet::periodic}) {
            const auto grid = simulation_grid(1000, set);
            const auto phi = true_eigenfunctions(set, grid);
            const Eigen::VectorXd w = trapezoid_weights(grid);
            const Eigen::MatrixXd G = phi.transpose() * w.asDiagonal() * phi;
            CHECK((G - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-2);
            if (set == EigenSet::nonperiodic) CHECK((G - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-3);
        }
    }

    TEST_CASE("periodic grid wraps with one ordinary step")
    {
        auto g = simulation_grid(100, EigenSet::periodic);
        CHECK(g.front() == 0.0);
        CHECK(g.back() == doctest::Approx(0.99));
        auto h = simulation_grid(100);
        CHECK(h.back() == 1.0);
    }

    TEST_CASE("generation is seeded")
    {
        SimScenario sc;
        sc.n_subjects = 20;
        sc.family = LinkFamily(Family::poisson);
        auto [a, ta] = generate(sc);
        auto [b, tb] = generate(sc);
        CHECK(a.values() == b.values());
        CHECK(ta.scores == tb.scores);
        sc.seed = 2;
        auto [c, tc] = generate(sc);
        CHECK(a.values() != c.values());
    }

    TEST_CASE("subjects do not depend on N")
    {
        // per-subject streams: the first subjects are the same whatever N is
        SimScenario sc;
        sc.n_subjects = 10;
        auto [a, ta] = generate(sc);
        sc.n_subjects = 30;
        auto [b, tb] = generate(sc);
        CHECK(ta.scores == tb.scores.topRows(10));
    }

    TEST_CASE("derived seeds are distinct")
    {
        std::set<std::uint64_t> seen;
        for (std::uint64_t r = 0; r < 1000; ++r) seen.insert(derive_seed(1, r));
        CHECK(seen.size() == 1000);
        CHECK(derive_seed(5, 3) == derive_seed(5, 3));
        CHECK(derive_seed(5, 3) != derive_seed(6, 3));
    }

    TEST_CASE("scenario json")
    {
        nlohmann::json j = nlohmann::json::parse(R"({"N": 40, "J": 80, "family": "poisson", "eigen_set": "nonperiodic",
            "eigenvalues": [2, 1], "mean": "spline", "seed": 7})");
        SimScenario sc;
        from_json(j, sc);
        CHECK(sc.n_subjects == 40);
        CHECK(sc.n_points == 80);
        CHECK(sc.family == LinkFamily(Family::poisson));
        CHECK(sc.eigen_set == EigenSet::nonperiodic);
        CHECK(sc.mean == MeanSpec::spline);
        nlohmann::json back;
        to_json(back, sc);
        SimScenario again;
        from_json(back, again);
        CHECK(again.eigenvalues == sc.eigenvalues);
        CHECK(again.seed == 7);

        SimScenario bad;
        CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"N": 10, "colour": 1})"), bad), ConfigError);
        CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"eigenvalues": [0.5, 1.0]})"), bad), ConfigError);
    }

    TEST_CASE("binned covariance oracle: constant and linear eigenfunctions")
    {
        const auto bins = build_bins(60, 6, true, false);
        Eigen::MatrixXd phi(60, 2);
        for (int j = 0; j < 60; ++j) {
            phi(j, 0) = 1.0;
            phi(j, 1) = 0.1 * j - 2;
        }
        auto c = binned_cov_oracle(phi.leftCols(1), Eigen::VectorXd::Ones(1), bins);
        CHECK(c.bias.cwiseAbs().maxCoeff() == 0.0);
        auto lin = binned_cov_oracle(phi, Eigen::Vector2d(1.0, 0.5), bins);
        for (int u = 3; u < 57; ++u)
            for (int v = 3; v < 57; ++v) CHECK(std::abs(lin.bias(u, v)) < 1e-10);
    }

    TEST_CASE("binned covariance bias shrinks with the bin width")
    {
        const auto grid = simulation_grid(100, EigenSet::periodic);
        Eigen::MatrixXd phi = true_eigenfunctions(EigenSet::periodic, grid, 1);
        const Eigen::VectorXd lambda = Eigen::VectorXd::Ones(1);
        const double b6 = binned_cov_oracle(phi, lambda, build_bins(100, 6, true, true)).bias.norm();
        const double b2 = binned_cov_oracle(phi, lambda, build_bins(100, 2, true, true)).bias.norm();
        CHECK(b2 < b6);
    }

    TEST_CASE("parametric bootstrap")
    {
        SimScenario sc;
        sc.n_subjects = 100;
        auto [d, t] = generate(sc);
        PipelineConfig cfg;
        cfg.npc = 4;
        auto fit = fast_gfpca(d, cfg);
        auto [boot, truth] = simulate_from_fit(fit, 100, 5);
        CHECK(boot.n_subjects() == d.n_subjects());
        CHECK(boot.n_points() == d.n_points());
        CHECK(boot.cyclic() == d.cyclic());
        CHECK(truth.phi == fit.basis.eigenfunctions_full);

        auto degenerate = fit;
        degenerate.score_vars.setZero();
        CHECK_THROWS_AS(simulate_from_fit(degenerate, 10, 1), ConfigError);
    }

    TEST_CASE("parametric bootstrap self-consistency at N=2000")
    {
        SimScenario sc;
        sc.n_subjects = 300;
        sc.seed = 21;
        auto [d, t] = generate(sc);
        PipelineConfig cfg;
        cfg.npc = 4;
        auto fit = fast_gfpca(d, cfg);
        auto [boot, truth] = simulate_from_fit(fit, 2000, 8);
        auto refit = fast_gfpca(boot, cfg);
        auto err = mise_phi(refit.basis.eigenfunctions_full, truth.phi, boot.grid());
        for (Eigen::Index k = 0; k < 4; ++k) CHECK(err.per_component(k) < 0.05);
    }
}
