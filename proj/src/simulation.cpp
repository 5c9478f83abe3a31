#include "fgfpca/simulation.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "fgfpca/bspline.hpp"
#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

// Coefficients of the shipped nonzero mean on an open cubic basis with six
// interior knots on [0,1].
constexpr double kMeanCoefficients[] = {-1.0, -0.6, 0.2, 0.8, 0.5, -0.3, -0.9, -0.4, 0.3, 0.6};
constexpr int kMeanInteriorKnots = 6;

void check(const SimScenario& s)
{
    if (s.n_subjects < 1) throw ConfigError("n_subjects must be positive");
    if (s.n_points < 2) throw ConfigError("n_points must be at least 2");
    if (s.eigenvalues.empty() || s.eigenvalues.size() > 4) throw ConfigError("eigenvalues: need 1 to 4 values");
    for (std::size_t k = 0; k < s.eigenvalues.size(); ++k) {
        if (!(s.eigenvalues[k] >= 0.0)) throw ConfigError("eigenvalues must be nonnegative");
        if (k > 0 && s.eigenvalues[k] > s.eigenvalues[k - 1]) throw ConfigError("eigenvalues must be non-increasing");
    }
    if (!(s.noise_sd > 0.0)) throw ConfigError("noise_sd must be positive");
}

double draw(LinkFamily family, double eta, double noise_sd, std::mt19937_64& rng)
{
    switch (family.family()) {
    case Family::binomial: return std::bernoulli_distribution(family.inverse_link(eta))(rng) ? 1.0 : 0.0;
    case Family::poisson: return static_cast<double>(std::poisson_distribution<long>(std::exp(eta))(rng));
    case Family::gaussian: return eta + noise_sd * std::normal_distribution<double>()(rng);
    }
    return 0.0;
}

// Scores and observations for every subject; subject i uses its own stream.
void sample(const Eigen::VectorXd& beta0, const Eigen::MatrixXd& phi, const Eigen::VectorXd& vars,
            LinkFamily family, double noise_sd, std::uint64_t seed, SimTruth& truth, Eigen::MatrixXd& z)
{
    const auto J = phi.rows();
    const auto K = phi.cols();
    const auto N = truth.scores.rows();
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < N; ++i) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> normal;
        for (Eigen::Index k = 0; k < K; ++k) truth.scores(i, k) = std::sqrt(vars(k)) * normal(rng);
        truth.eta.row(i) = beta0.transpose() + truth.scores.row(i) * phi.transpose();
        for (Eigen::Index j = 0; j < J; ++j) z(i, j) = draw(family, truth.eta(i, j), noise_sd, rng);
    }
}

std::vector<std::string> numbered_ids(Eigen::Index n)
{
    std::vector<std::string> ids;
    ids.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i + 1));
    return ids;
}

} // namespace

void to_json(nlohmann::json& j, const SimScenario& s)
{
    j = nlohmann::json{{"n_subjects", s.n_subjects},
                       {"n_points", s.n_points},
                       {"family", std::string(s.family.name())},
                       {"eigen_set", s.eigen_set == EigenSet::periodic ? "periodic" : "nonperiodic"},
                       {"eigenvalues", s.eigenvalues},
                       {"mean", s.mean == MeanSpec::zero ? "zero" : "spline"},
                       {"noise_sd", s.noise_sd},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SimScenario& s)
{
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "n_subjects" || key == "N") s.n_subjects = value.get<int>();
        else if (key == "n_points" || key == "J") s.n_points = value.get<int>();
        else if (key == "family") s.family = LinkFamily::parse(value.get<std::string>());
        else if (key == "eigen_set") {
            const auto v = value.get<std::string>();
            if (v == "periodic") s.eigen_set = EigenSet::periodic;
            else if (v == "nonperiodic") s.eigen_set = EigenSet::nonperiodic;
            else throw ConfigError("eigen_set: expected periodic or nonperiodic, got '" + v + "'");
        } else if (key == "eigenvalues") s.eigenvalues = value.get<std::vector<double>>();
        else if (key == "mean") {
            const auto v = value.get<std::string>();
            if (v == "zero") s.mean = MeanSpec::zero;
            else if (v == "spline") s.mean = MeanSpec::spline;
            else throw ConfigError("mean: expected zero or spline, got '" + v + "'");
        } else if (key == "noise_sd") s.noise_sd = value.get<double>();
        else if (key == "seed") s.seed = value.get<std::uint64_t>();
        else throw ConfigError("scenario: unknown field '" + key + "'");
    }
    check(s);
}

std::vector<double> simulation_grid(int n_points, EigenSet set)
{
    if (n_points < 2) throw ConfigError("n_points must be at least 2");
    std::vector<double> g(static_cast<std::size_t>(n_points));
    const double span = set == EigenSet::periodic ? n_points : n_points - 1;
    for (int j = 0; j < n_points; ++j) g[static_cast<std::size_t>(j)] = static_cast<double>(j) / span;
    return g;
}

Eigen::MatrixXd true_eigenfunctions(EigenSet set, const std::vector<double>& grid, int k)
{
    if (k < 1 || k > 4) throw ConfigError("true eigenfunctions: k must be in 1..4");
    const auto J = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd phi(J, k);
    constexpr double pi = std::numbers::pi;
    const double r2 = std::sqrt(2.0), r3 = std::sqrt(3.0), r5 = std::sqrt(5.0), r7 = std::sqrt(7.0);
    for (Eigen::Index j = 0; j < J; ++j) {
        const double s = grid[static_cast<std::size_t>(j)];
        double v[4];
        if (set == EigenSet::periodic) {
            v[0] = r2 * std::sin(2 * pi * s);
            v[1] = r2 * std::cos(2 * pi * s);
            v[2] = r2 * std::sin(4 * pi * s);
            v[3] = r2 * std::cos(4 * pi * s);
        } else {
            v[0] = 1.0;
            v[1] = r3 * (2 * s - 1);
            v[2] = r5 * (6 * s * s - 6 * s + 1);
            v[3] = r7 * (20 * s * s * s - 30 * s * s + 12 * s - 1);
        }
        for (int c = 0; c < k; ++c) phi(j, c) = v[c];
    }
    return phi;
}

Eigen::VectorXd spline_mean(const std::vector<double>& grid)
{
    const auto basis = BSplineBasis::open(0.0, 1.0, kMeanInteriorKnots);
    const Eigen::Map<const Eigen::VectorXd> coef(kMeanCoefficients, std::size(kMeanCoefficients));
    return basis.design(grid) * coef;
}

std::pair<FunctionalDataset, SimTruth> generate(const SimScenario& scenario)
{
    check(scenario);
    const auto grid = simulation_grid(scenario.n_points, scenario.eigen_set);
    const int K = static_cast<int>(scenario.eigenvalues.size());
    SimTruth truth;
    truth.phi = true_eigenfunctions(scenario.eigen_set, grid, K);
    truth.eigenvalues = Eigen::Map<const Eigen::VectorXd>(scenario.eigenvalues.data(), K);
    truth.beta0 = scenario.mean == MeanSpec::zero ? Eigen::VectorXd::Zero(scenario.n_points) : spline_mean(grid);
    truth.scores.resize(scenario.n_subjects, K);
    truth.eta.resize(scenario.n_subjects, scenario.n_points);
    Eigen::MatrixXd z(scenario.n_subjects, scenario.n_points);
    sample(truth.beta0, truth.phi, truth.eigenvalues, scenario.family, scenario.noise_sd, scenario.seed, truth, z);
    FunctionalDataset data(numbered_ids(scenario.n_subjects), grid, std::move(z), scenario.family,
                           scenario.eigen_set == EigenSet::periodic);
    return {std::move(data), std::move(truth)};
}

std::pair<FunctionalDataset, SimTruth> simulate_from_fit(const GfpcaFit& fit, int n_subjects, std::uint64_t seed)
{
    if (n_subjects < 1) throw ConfigError("n_subjects must be positive");
    if (fit.score_vars.size() == 0 || fit.score_vars.maxCoeff() <= 0.0)
        throw ConfigError("simulate_from_fit: every score variance is zero");
    if (fit.basis.eigenfunctions_full.rows() != static_cast<Eigen::Index>(fit.grid.size()))
        throw ConfigError("simulate_from_fit: fit has no full-grid eigenfunctions");
    SimTruth truth;
    truth.phi = fit.basis.eigenfunctions_full;
    truth.eigenvalues = fit.score_vars;
    truth.beta0 = fit.beta0_full;
    truth.scores.resize(n_subjects, truth.phi.cols());
    truth.eta.resize(n_subjects, truth.phi.rows());
    Eigen::MatrixXd z(n_subjects, truth.phi.rows());
    sample(truth.beta0, truth.phi, truth.eigenvalues, fit.family, std::sqrt(fit.dispersion), seed, truth, z);
    FunctionalDataset data(numbered_ids(n_subjects), fit.grid, std::move(z), fit.family, fit.cyclic);
    return {std::move(data), std::move(truth)};
}

BinnedCovariance binned_cov_oracle(const Eigen::MatrixXd& phi, const Eigen::VectorXd& eigenvalues, const BinSpec& bins)
{
    if (phi.cols() != eigenvalues.size()) throw ConfigError("binned_cov_oracle: K mismatch");
    if (static_cast<std::size_t>(phi.rows()) != bins.n_points)
        throw ConfigError("binned_cov_oracle: phi is not on the binned grid");
    const auto L = static_cast<Eigen::Index>(bins.size());
    Eigen::MatrixXd avg(L, phi.cols()), at_mid(L, phi.cols());
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto& bin = bins.bins[static_cast<std::size_t>(l)];
        avg.row(l).setZero();
        for (const auto j : bin) avg.row(l) += phi.row(static_cast<Eigen::Index>(j));
        avg.row(l) /= static_cast<double>(bin.size());
        at_mid.row(l) = phi.row(static_cast<Eigen::Index>(bins.midpoints[static_cast<std::size_t>(l)]));
    }
    BinnedCovariance out;
    out.covariance = avg * eigenvalues.asDiagonal() * avg.transpose();
    out.bias = out.covariance - at_mid * eigenvalues.asDiagonal() * at_mid.transpose();
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace fgfpca
