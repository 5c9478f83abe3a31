#include <doctest.h>

#include "fgfpca/bspline.hpp"
#include "fgfpca/errors.hpp"
#include "fgfpca/latent_fpca.hpp"
#include "fgfpca/metrics.hpp"
#include "oracles.hpp"

using namespace fgfpca;

namespace {

// Cyclic latent matrix on L equally spaced coordinates from phi = sqrt2 (sin, cos).
LatentEstimates rank_two(int N, int L, std::uint64_t seed, double noise = 0.0)
{
    LatentEstimates lat;
    lat.cyclic = true;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    lat.eta.resize(N, L);
    for (int l = 0; l < L; ++l) {
        lat.midpoints.push_back(static_cast<std::size_t>(l));
        lat.coordinates.push_back(static_cast<double>(l) / L);
    }
    for (int i = 0; i < N; ++i) {
        const double a = nd(rng), b = std::sqrt(0.5) * nd(rng);
        for (int l = 0; l < L; ++l) {
            const double s = lat.coordinates[static_cast<std::size_t>(l)];
            lat.eta(i, l) = 0.3 + a * std::sqrt(2.0) * std::sin(2 * oracle::kPi * s) +
                            b * std::sqrt(2.0) * std::cos(2 * oracle::kPi * s) + noise * nd(rng);
        }
    }
    return lat;
}

double roughness(const Eigen::VectorXd& v)
{
    double r = 0;
    for (Eigen::Index l = 1; l + 1 < v.size(); ++l) r += std::pow(v(l + 1) - 2 * v(l) + v(l - 1), 2);
    return r;
}

} // namespace

TEST_SUITE("latent_fpca")
{
    TEST_CASE("identical rows are degenerate")
    {
        auto lat = rank_two(20, 40, 1);
        for (Eigen::Index i = 1; i < 20; ++i) lat.eta.row(i) = lat.eta.row(0);
        CHECK_THROWS_WITH_AS(fpca_latent(lat), "degenerate latent covariance", NumericalError);
    }

    TEST_CASE("noiseless rank two matches the exact covariance eigenpairs")
    {
        const int N = 200, L = 100;
        auto lat = rank_two(N, L, 42);
        FpcaOptions opts;
        opts.npc = 2;
        auto basis = fpca_latent(lat, opts);

        // oracle: eigen-decomposition of the unsmoothed sample covariance, grid spacing 1/L
        const Eigen::MatrixXd X = lat.eta.rowwise() - lat.eta.colwise().mean();
        const Eigen::MatrixXd C = X.transpose() * X / N;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C / L);
        const Eigen::VectorXd vals = eig.eigenvalues().reverse().head(2);
        const Eigen::MatrixXd vecs = eig.eigenvectors().rowwise().reverse().leftCols(2) * std::sqrt(double(L));

        std::vector<double> grid(lat.coordinates);
        for (int k = 0; k < 2; ++k) CHECK(std::abs(basis.eigenvalues(k) / vals(k) - 1) < 0.05);
        auto err = mise_phi(basis.eigenfunctions_mid, vecs, grid);
        CHECK(err.per_component(0) < 0.01);
        CHECK(err.per_component(1) < 0.01);
        // and against the generating functions
        Eigen::MatrixXd truth(L, 2);
        for (int l = 0; l < L; ++l) {
            truth(l, 0) = std::sqrt(2.0) * std::sin(2 * oracle::kPi * grid[l]);
            truth(l, 1) = std::sqrt(2.0) * std::cos(2 * oracle::kPi * grid[l]);
        }
        CHECK(mise_phi(basis.eigenfunctions_mid, truth, grid).overall < 0.05);
    }

    TEST_CASE("eigenfunctions are orthonormal under the quadrature weights")
    {
        auto lat = rank_two(150, 80, 7, 0.5);
        FpcaOptions opts;
        opts.pve = 0.99;
        auto basis = fpca_latent(lat, opts);
        const Eigen::MatrixXd& P = basis.positive_eigenfunctions_mid;
        const Eigen::MatrixXd G = P.transpose() * basis.quadrature_weights.asDiagonal() * P;
        CHECK((G - Eigen::MatrixXd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() < 1e-6);
        for (Eigen::Index k = 0; k < basis.eigenvalues.size(); ++k) {
            CHECK(basis.eigenvalues(k) > 0);
            if (k > 0) CHECK(basis.eigenvalues(k) <= basis.eigenvalues(k - 1));
        }
        const double total = basis.positive_eigenvalues.sum();
        CHECK(basis.eigenvalues.sum() / total >= 0.99 - 1e-12);
        if (basis.npc > 1) CHECK(basis.eigenvalues.head(basis.npc - 1).sum() / total < 0.99);
    }

    TEST_CASE("pve of one keeps every positive eigenvalue")
    {
        auto lat = rank_two(60, 40, 3, 0.3);
        FpcaOptions opts;
        opts.pve = 1.0;
        opts.smoothing.nknots = 10;
        auto basis = fpca_latent(lat, opts);
        CHECK(basis.npc == basis.positive_eigenvalues.size());
    }

    TEST_CASE("sign convention and determinism")
    {
        auto lat = rank_two(80, 50, 9, 0.2);
        FpcaOptions opts;
        opts.npc = 3;
        auto a = fpca_latent(lat, opts);
        auto b = fpca_latent(lat, opts);
        CHECK(a.eigenfunctions_mid == b.eigenfunctions_mid);
        for (Eigen::Index k = 0; k < 3; ++k) CHECK(a.eigenfunctions_mid.col(k).sum() >= 0);
    }

    TEST_CASE("mean smoothing reduces roughness")
    {
        auto lat = rank_two(50, 60, 21, 0.8);
        auto basis = fpca_latent(lat);
        const Eigen::VectorXd raw = lat.eta.colwise().mean().transpose();
        CHECK(roughness(basis.mean_mid) <= roughness(raw));
    }

    TEST_CASE("too few bins is a configuration error")
    {
        auto lat = rank_two(30, 20, 2);
        CHECK_THROWS_AS(fpca_latent(lat), ConfigError);
    }

    TEST_CASE("projection on the identity grid reproduces the midpoint values")
    {
        auto lat = rank_two(100, 100, 5, 0.3);
        FpcaOptions opts;
        opts.npc = 3;
        auto basis = project_to_full_grid(fpca_latent(lat, opts), lat.coordinates);
        CHECK((basis.eigenfunctions_full - basis.eigenfunctions_mid).cwiseAbs().maxCoeff() < 1e-8);
    }

    TEST_CASE("projection reproduces a line on an open basis")
    {
        FpcaBasis basis;
        basis.cyclic = false;
        basis.nknots = 8;
        const int L = 30, J = 200;
        basis.eigenfunctions_mid.resize(L, 1);
        for (int l = 0; l < L; ++l) {
            basis.coordinates.push_back((l + 0.5) / L);
            basis.eigenfunctions_mid(l, 0) = 2.0 - 3.0 * basis.coordinates.back();
        }
        std::vector<double> full;
        for (int j = 0; j < J; ++j) full.push_back((j + 0.5) / J * (basis.coordinates.back() - basis.coordinates.front()) +
                                                   basis.coordinates.front());
        auto out = project_to_full_grid(basis, full);
        for (int j = 0; j < J; ++j) CHECK(std::abs(out.eigenfunctions_full(j, 0) - (2.0 - 3.0 * full[j])) < 1e-8);
    }

    TEST_CASE("cyclic projection interpolates a sine from 96 bins to 1440 points")
    {
        FpcaBasis basis;
        basis.cyclic = true;
        basis.nknots = 20;
        const int L = 96, J = 1440;
        basis.eigenfunctions_mid.resize(L, 1);
        for (int l = 0; l < L; ++l) {
            const double m = 15.0 * l + 7.0; // centre index of each 15-point block
            basis.coordinates.push_back(m / J);
            basis.eigenfunctions_mid(l, 0) = std::sin(2 * oracle::kPi * basis.coordinates.back());
        }
        std::vector<double> full;
        for (int j = 0; j < J; ++j) full.push_back(static_cast<double>(j) / J);
        auto out = project_to_full_grid(basis, full);
        double worst = 0;
        for (int j = 0; j < J; ++j) worst = std::max(worst, std::abs(out.eigenfunctions_full(j, 0) - std::sin(2 * oracle::kPi * full[j])));
        CHECK(worst < 1e-3);
    }

    TEST_CASE("projection needs enough bins")
    {
        FpcaBasis basis;
        basis.cyclic = false;
        basis.nknots = 8;
        basis.coordinates = {0.0, 0.25, 0.5, 0.75, 1.0};
        basis.eigenfunctions_mid = Eigen::MatrixXd::Ones(5, 1);
        CHECK_THROWS_AS(project_to_full_grid(basis, {0.0, 0.5, 1.0}), NumericalError);
    }
}
