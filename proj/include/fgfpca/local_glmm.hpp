#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fgfpca/binning.hpp"
#include "fgfpca/data.hpp"
#include "fgfpca/family.hpp"

namespace fgfpca {

enum class DegeneracyPolicy {
    /// Bound the fitted linear predictor by +/- linpred_bound.
    clamp,
    /// Binomial only: add two successes and two failures per subject in every bin.
    augment,
};

struct LocalGlmmOptions {
    int quadrature_nodes = 10;
    int max_iterations = 200;
    double tolerance = 1e-6;
    DegeneracyPolicy policy = DegeneracyPolicy::clamp;
    double linpred_bound = 10.0;
    double log_sigma_min = -8.0;
    double log_sigma_max = 5.0;
    double initial_log_sigma = -1.0;
};

/// Random-intercept fit g(E[Z_ij]) = beta0 + b_i within one bin.
struct LocalFit {
    std::size_t bin = 0;
    double beta0 = 0.0;
    double sigma2 = 0.0;
    /// Posterior modes b_i.
    Eigen::VectorXd b;
    /// Per-subject marginal log-likelihood at the optimum.
    Eigen::VectorXd subject_loglik;
    double loglik = 0.0;
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;
    bool at_sigma_boundary = false;
};

/// Per-subject sufficient statistics of one bin.
struct BinStatistics {
    /// Observations per subject.
    int n_obs = 0;
    /// Sum of responses per subject.
    Eigen::VectorXd sums;
    /// Data-only log-density terms per subject (Poisson -sum log z!; Gaussian unused).
    Eigen::VectorXd constants;
    /// Gaussian only: within-subject sum of squares.
    Eigen::VectorXd within_ss;
};

BinStatistics bin_statistics(const FunctionalDataset& data, std::span<const std::size_t> bin);

/// AGQ approximation of log integral prod_j f(z_ij | beta + b) N(b; 0, sigma^2) db
/// for one subject with `n_obs` observations summing to `sum`.
/// Non-Gaussian families only.
double subject_marginal_loglik(double sum, int n_obs, double constant, double beta, double sigma2,
                               LinkFamily family, int quadrature_nodes);

/// Fits the local model for the bin's grid indices. Never throws for
/// non-convergence; inspect `converged`.
LocalFit fit_local_glmm(const FunctionalDataset& data, std::span<const std::size_t> bin,
                        const LocalGlmmOptions& opts = {});

/// Step-2 output: eta_i(s_{m_l}) for every subject and bin.
struct LatentEstimates {
    std::vector<std::size_t> midpoints;
    /// Normalised coordinates of the midpoints.
    std::vector<double> coordinates;
    bool cyclic = false;
    /// N x L.
    Eigen::MatrixXd eta;
    std::vector<bool> converged;
    Eigen::VectorXd beta0;
    Eigen::VectorXd sigma2;
    std::size_t n_failed = 0;
    std::size_t n_degenerate = 0;

    [[nodiscard]] std::size_t n_bins() const { return midpoints.size(); }
};

/// OpenMP over bins. Output is identical to fit_all_bins_serial.
LatentEstimates fit_all_bins(const FunctionalDataset& data, const BinSpec& bins,
                             const LocalGlmmOptions& opts = {});

/// Single-threaded reference.
LatentEstimates fit_all_bins_serial(const FunctionalDataset& data, const BinSpec& bins,
                                    const LocalGlmmOptions& opts = {});

} // namespace fgfpca
