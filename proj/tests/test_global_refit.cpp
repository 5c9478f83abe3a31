#include <doctest.h>

#include "fgfpca/errors.hpp"
#include "fgfpca/global_refit.hpp"
#include "fgfpca/simulation.hpp"
#include "oracles.hpp"

using namespace fgfpca;

namespace {

FpcaBasis true_basis(const SimTruth& t, int K)
{
    FpcaBasis b;
    b.eigenfunctions_full = t.phi.leftCols(K);
    b.eigenvalues = t.eigenvalues.head(K);
    b.npc = K;
    return b;
}

std::pair<FunctionalDataset, SimTruth> scenario(Family f, int N, int J, std::uint64_t seed)
{
    SimScenario sc;
    sc.family = LinkFamily(f);
    sc.n_subjects = N;
    sc.n_points = J;
    sc.seed = seed;
    return generate(sc);
}

double subject_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& beta0, const Eigen::MatrixXd& phi,
                         const Eigen::VectorXd& vars, const Eigen::VectorXd& xi)
{
    const Eigen::VectorXd eta = beta0 + phi * xi;
    double v = 0;
    for (Eigen::Index j = 0; j < z.size(); ++j) v += oracle::log_density("binomial", z(j), eta(j));
    for (Eigen::Index k = 0; k < xi.size(); ++k) v -= 0.5 * xi(k) * xi(k) / vars(k);
    return v;
}

} // namespace

TEST_SUITE("global_refit")
{
    TEST_CASE("beta0 basis follows the domain")
    {
        auto [d, t] = scenario(Family::binomial, 10, 50, 1);
        auto b = beta0_basis(d, 20);
        CHECK(b.design.rows() == 50);
        CHECK(b.design.cols() == 20);
        CHECK(b.null_dim == 1);
        SimScenario sc;
        sc.n_subjects = 10;
        sc.n_points = 50;
        sc.eigen_set = EigenSet::nonperiodic;
        auto [e, u] = generate(sc);
        auto c = beta0_basis(e, 20);
        CHECK(c.design.cols() == 20);
        CHECK(c.null_dim == 2);
    }

    TEST_CASE("random intercept model matches closed-form BLUPs")
    {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> nd;
        Eigen::MatrixXd v(40, 30);
        std::vector<std::string> ids;
        for (int i = 0; i < 40; ++i) {
            ids.push_back(std::to_string(i));
            const double b = nd(rng);
            for (int j = 0; j < 30; ++j) v(i, j) = 0.3 + b + 0.7 * nd(rng);
        }
        FunctionalDataset d(ids, simulation_grid(30, EigenSet::periodic), v, LinkFamily(Family::gaussian), true);
        FpcaBasis basis;
        basis.eigenfunctions_full = Eigen::MatrixXd::Ones(30, 1);
        basis.eigenvalues = Eigen::VectorXd::Ones(1);
        auto fit = refit_global(d, basis);
        REQUIRE(fit.diagnostics.converged);
        REQUIRE(fit.score_vars(0) > 0);
        for (Eigen::Index i = 0; i < 40; ++i) {
            const double resid = (d.values().row(i).transpose() - fit.beta0_full).sum();
            const double ref = resid / (30.0 + fit.dispersion / fit.score_vars(0));
            CHECK(std::abs(fit.scores(i, 0) - ref) < 1e-6);
        }
    }

    TEST_CASE("Gaussian scores are the BLUPs given the fitted mean")
    {
        SimScenario sc;
        sc.family = LinkFamily(Family::gaussian);
        sc.n_subjects = 30;
        sc.n_points = 40;
        sc.noise_sd = 0.5;
        sc.seed = 8;
        auto [d, t] = generate(sc);
        auto fit = refit_global(d, true_basis(t, 3));
        for (Eigen::Index i = 0; i < 30; ++i) {
            Eigen::VectorXd ref = oracle::blup(d.values().row(i).transpose(), fit.beta0_full, t.phi.leftCols(3),
                                               fit.score_vars, fit.dispersion);
            CHECK((fit.scores.row(i).transpose() - ref).cwiseAbs().maxCoeff() < 1e-6);
        }
    }

    TEST_CASE("penalised likelihood is stationary at the fit")
    {
        for (auto f : {Family::binomial, Family::poisson}) {
            auto [d, t] = scenario(f, 30, 40, 6);
            RefitOptions opts;
            opts.beta0_basis = 12;
            auto fit = refit_global(d, true_basis(t, 2), opts);
            const double h = 1e-5;
            Eigen::VectorXd a = fit.beta0_coefficients;
            Eigen::MatrixXd xi = fit.scores;
            double norm2 = 0;
            for (Eigen::Index c = 0; c < a.size(); ++c) {
                Eigen::VectorXd up = a, dn = a;
                up(c) += h;
                dn(c) -= h;
                const double g = (penalized_loglik(d, fit, up, xi) - penalized_loglik(d, fit, dn, xi)) / (2 * h);
                norm2 += g * g;
            }
            for (Eigen::Index i = 0; i < xi.rows(); ++i)
                for (Eigen::Index k = 0; k < xi.cols(); ++k) {
                    if (fit.score_vars(k) == 0) continue;
                    Eigen::MatrixXd up = xi, dn = xi;
                    up(i, k) += h;
                    dn(i, k) -= h;
                    const double g = (penalized_loglik(d, fit, a, up) - penalized_loglik(d, fit, a, dn)) / (2 * h);
                    norm2 += g * g;
                }
            CHECK(std::sqrt(norm2) < 1e-4);
        }
    }

    TEST_CASE("PIRLS never increases the penalised deviance within a phase")
    {
        for (auto f : {Family::binomial, Family::poisson}) {
            auto [d, t] = scenario(f, 60, 60, 13);
            auto fit = refit_global(d, true_basis(t, 4));
            const auto& tr = fit.diagnostics.deviance_trace;
            REQUIRE(tr.size() > 2);
            for (std::size_t s = 1; s < tr.size(); ++s)
                if (tr[s].phase == tr[s - 1].phase) CHECK(tr[s].value <= tr[s - 1].value + 1e-10 * std::max(1.0, std::abs(tr[s - 1].value)));
            CHECK(fit.diagnostics.converged);
        }
    }

    TEST_CASE("null process")
    {
        SimScenario sc;
        sc.n_subjects = 500;
        sc.n_points = 100;
        sc.eigenvalues = {0, 0, 0, 0};
        sc.seed = 31;
        auto [d, t] = generate(sc);
        FpcaBasis basis;
        basis.eigenfunctions_full = true_eigenfunctions(EigenSet::periodic, simulation_grid(100, EigenSet::periodic));
        basis.eigenvalues = Eigen::VectorXd::Constant(4, 0.1);
        auto fit = refit_global(d, basis);
        for (Eigen::Index k = 0; k < 4; ++k) CHECK(fit.score_vars(k) < 0.05);
        CHECK(fit.beta0_full.cwiseAbs().maxCoeff() < 0.1);
    }

    TEST_CASE("score variances track the eigenvalues")
    {
        auto [d, t] = scenario(Family::poisson, 500, 100, 17);
        auto fit = refit_global(d, true_basis(t, 4));
        for (Eigen::Index k = 0; k < 4; ++k) {
            const Eigen::VectorXd c = fit.scores.col(k).array() - fit.scores.col(k).mean();
            const double v = c.squaredNorm() / (c.size() - 1);
            CHECK(v >= 0.5 * t.eigenvalues(k));
            CHECK(v <= 1.2 * t.eigenvalues(k));
        }
    }

    TEST_CASE("too many components for the subjects")
    {
        auto [d, t] = scenario(Family::binomial, 4, 30, 2);
        CHECK_THROWS_AS(refit_global(d, true_basis(t, 4)), ConfigError);
        FpcaBasis wrong;
        wrong.eigenfunctions_full = Eigen::MatrixXd::Ones(10, 1);
        CHECK_THROWS_AS(refit_global(d, wrong), ConfigError);
    }
}

TEST_SUITE("score_only")
{
    TEST_CASE("data at the mean give zero scores")
    {
        const int J = 25;
        Eigen::VectorXd beta0(J);
        Eigen::MatrixXd phi(J, 2);
        for (int j = 0; j < J; ++j) {
            beta0(j) = std::cos(j * 0.3);
            phi(j, 0) = 1;
            phi(j, 1) = std::sin(j * 0.2);
        }
        std::vector<double> z(beta0.data(), beta0.data() + J);
        auto xi = score_only_fit(z, beta0, phi, Eigen::Vector2d(1.0, 0.5), LinkFamily(Family::gaussian), 0.3);
        CHECK(xi.cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("Gaussian ridge closed form")
    {
        const int J = 30;
        std::mt19937_64 rng(2);
        std::normal_distribution<double> nd;
        Eigen::VectorXd beta0(J), z(J);
        Eigen::MatrixXd phi(J, 1);
        for (int j = 0; j < J; ++j) {
            beta0(j) = 0.1 * j;
            phi(j, 0) = std::sin(0.4 * j);
            z(j) = beta0(j) + 0.8 * phi(j, 0) + 0.5 * nd(rng);
        }
        const double s1 = 0.7, se2 = 0.25;
        auto xi = score_only_fit(std::vector<double>(z.data(), z.data() + J), beta0, phi, Eigen::VectorXd::Constant(1, s1),
                                 LinkFamily(Family::gaussian), se2);
        const double ref = phi.col(0).dot(z - beta0) / (phi.col(0).squaredNorm() + se2 / s1);
        CHECK(std::abs(xi(0) - ref) < 1e-8);
    }

    TEST_CASE("binomial K=2 beats a grid search")
    {
        auto [d, t] = scenario(Family::binomial, 5, 80, 23);
        const Eigen::MatrixXd phi = t.phi.leftCols(2);
        const Eigen::Vector2d vars(1.0, 0.5);
        for (Eigen::Index i = 0; i < 5; ++i) {
            std::vector<double> z;
            for (Eigen::Index j = 0; j < 80; ++j) z.push_back(d.values()(i, j));
            auto xi = score_only_fit(z, t.beta0, phi, vars, LinkFamily(Family::binomial));
            const Eigen::VectorXd zv = d.values().row(i).transpose();
            const double best = subject_objective(zv, t.beta0, phi, vars, xi);
            double grid_best = -1e300;
            for (int a = 0; a <= 100; ++a)
                for (int b = 0; b <= 100; ++b) {
                    Eigen::Vector2d g(-4 + 0.08 * a, -4 + 0.08 * b);
                    grid_best = std::max(grid_best, subject_objective(zv, t.beta0, phi, vars, g));
                }
            CHECK(best >= grid_best - 1e-12);
        }
    }

    TEST_CASE("zero variance components get zero scores")
    {
        auto [d, t] = scenario(Family::poisson, 3, 40, 5);
        std::vector<double> z;
        for (Eigen::Index j = 0; j < 40; ++j) z.push_back(d.values()(0, j));
        auto xi = score_only_fit(z, t.beta0, t.phi.leftCols(2), Eigen::Vector2d(0.8, 0.0), LinkFamily(Family::poisson));
        CHECK(xi(1) == 0.0);
        CHECK(xi(0) != 0.0);
    }

    TEST_CASE("parallel and serial score fits agree exactly")
    {
        auto [d, t] = scenario(Family::binomial, 200, 60, 9);
        const Eigen::VectorXd vars = t.eigenvalues;
        auto a = score_only_fit_all(d, t.beta0, t.phi, vars);
        auto b = score_only_fit_all_serial(d, t.beta0, t.phi, vars);
        CHECK(a == b);
    }
}

TEST_SUITE("subsampled")
{
    TEST_CASE("one subsample of everyone reproduces the full fit")
    {
        auto [d, t] = scenario(Family::binomial, 60, 50, 3);
        auto basis = true_basis(t, 3);
        auto full = refit_global(d, basis);
        auto sub = refit_global_subsampled(d, basis, 1, 60, 77);
        CHECK((full.beta0_full - sub.beta0_full).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((full.score_vars - sub.score_vars).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(full.log_lambda_beta == doctest::Approx(sub.log_lambda_beta).epsilon(1e-10));
        CHECK((full.scores - sub.scores).cwiseAbs().maxCoeff() < 1e-6);
    }

    TEST_CASE("subsample curves are kept and averaged")
    {
        auto [d, t] = scenario(Family::binomial, 120, 50, 4);
        auto sub = refit_global_subsampled(d, true_basis(t, 2), 3, 40, 5);
        REQUIRE(sub.diagnostics.subsample_beta0.cols() == 3);
        const Eigen::VectorXd avg = sub.diagnostics.subsample_beta0.rowwise().mean();
        CHECK((avg - sub.beta0_full).cwiseAbs().maxCoeff() < 1e-10);
        auto again = refit_global_subsampled(d, true_basis(t, 2), 3, 40, 5);
        CHECK(again.eta_full == sub.eta_full);
    }

    TEST_CASE("oversized subsamples are rejected")
    {
        auto [d, t] = scenario(Family::binomial, 20, 30, 4);
        CHECK_THROWS_AS(refit_global_subsampled(d, true_basis(t, 2), 4, 6, 1), ConfigError);
    }
}
