#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline double log1pexp(double x)
{
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log f(z | eta) for one observation, canonical links.
inline double log_density(const std::string& family, double z, double eta)
{
    if (family == "binomial") return z * eta - log1pexp(eta);
    if (family == "poisson") return z * eta - std::exp(eta) - std::lgamma(z + 1.0);
    throw std::invalid_argument(family);
}

// log of int prod_j f(z_j | beta + b) N(b; 0, sigma2) db by the trapezoid rule.
// Integrates over b in [-10, 10] with 2001 nodes; for small sigma the same rule
// runs on the standardised variable u = b / sigma so the spike is resolved.
inline double marginal_loglik(const std::vector<double>& z, double beta, double sigma2, const std::string& family)
{
    const double sigma = std::sqrt(sigma2);
    const bool standardised = sigma < 0.2;
    const int n = 2001;
    const double lo = -10.0, hi = 10.0;
    const double h = (hi - lo) / (n - 1);
    std::vector<double> logs(n);
    for (int q = 0; q < n; ++q) {
        const double t = lo + q * h;
        const double b = standardised ? sigma * t : t;
        double v = standardised ? -0.5 * t * t - 0.5 * std::log(2 * kPi)
                                : -0.5 * b * b / sigma2 - 0.5 * std::log(2 * kPi * sigma2);
        for (double zj : z) v += log_density(family, zj, beta + b);
        logs[q] = v;
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double acc = 0.0;
    for (int q = 0; q < n; ++q) acc += (q == 0 || q == n - 1 ? 0.5 : 1.0) * std::exp(logs[q] - top);
    return top + std::log(acc * h);
}

// Log density of a N(mean 1, Sigma) vector with Sigma = se2 I + sb2 11'.
inline double mvn_loglik(const Eigen::VectorXd& y, double mean, double se2, double sb2)
{
    const auto n = y.size();
    Eigen::MatrixXd S = se2 * Eigen::MatrixXd::Identity(n, n) + sb2 * Eigen::MatrixXd::Ones(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::VectorXd r = y.array() - mean;
    const double quad = r.dot(llt.solve(r));
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (n * std::log(2 * kPi) + logdet + quad);
}

// Ridge / BLUP: argmin |z - beta0 - Phi xi|^2 / se2 + sum xi_k^2 / var_k.
inline Eigen::VectorXd blup(const Eigen::VectorXd& z, const Eigen::VectorXd& beta0, const Eigen::MatrixXd& phi,
                            const Eigen::VectorXd& vars, double se2)
{
    Eigen::MatrixXd A = phi.transpose() * phi;
    for (Eigen::Index k = 0; k < vars.size(); ++k) A(k, k) += se2 / vars(k);
    return A.ldlt().solve(phi.transpose() * (z - beta0));
}

// Integral over [0,1] of the piecewise-linear interpolant of `values` on an
// increasing grid, by a midpoint Riemann sum at `refine` times the resolution.
inline double riemann(const std::vector<double>& grid, const Eigen::VectorXd& values, int refine = 10)
{
    const double span = grid.back() - grid.front();
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        const double h = (grid[j + 1] - grid[j]) / span / refine;
        for (int r = 0; r < refine; ++r) {
            const double t = (r + 0.5) / refine;
            acc += h * ((1 - t) * values(static_cast<Eigen::Index>(j)) + t * values(static_cast<Eigen::Index>(j + 1)));
        }
    }
    return acc;
}

// Mann-Whitney over every (positive, negative) pair.
inline double auc_all_pairs(const std::vector<double>& labels, const std::vector<double>& scores)
{
    double wins = 0.0, pairs = 0.0;
    for (std::size_t a = 0; a < labels.size(); ++a) {
        if (labels[a] != 1.0) continue;
        for (std::size_t b = 0; b < labels.size(); ++b) {
            if (labels[b] != 0.0) continue;
            pairs += 1.0;
            if (scores[a] > scores[b]) wins += 1.0;
            else if (scores[a] == scores[b]) wins += 0.5;
        }
    }
    return wins / pairs;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("fgfpca_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace oracle
