#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgfpca/data.hpp"
#include "fgfpca/latent_fpca.hpp"

namespace fgfpca {

struct RefitOptions {
    /// Basis size for beta0(s); cyclic basis when the data are cyclic.
    int beta0_basis = 20;
    int max_outer_iterations = 100;
    /// Relative change of the penalised deviance between outer iterations.
    double tolerance = 1e-6;
    int max_pirls_iterations = 100;
    /// Score variances below this are reported as zero.
    double variance_floor = 1e-8;
    /// Newton tolerance for score-only fits.
    double score_tolerance = 1e-8;
};

/// One entry of the penalised-deviance trace: `phase` counts variance
/// parameter updates; within a phase the penalty is fixed and PIRLS steps
/// never increase the value.
struct DevianceStep {
    int phase;
    double value;
};

struct StepTimes {
    double step1 = 0.0;
    double step2 = 0.0;
    double step3 = 0.0;
    double step4 = 0.0;
    double total = 0.0;
};

struct FitDiagnostics {
    int outer_iterations = 0;
    int pirls_iterations = 0;
    bool converged = false;
    std::vector<DevianceStep> deviance_trace;
    /// Seconds.
    StepTimes times;
    std::size_t failed_bins = 0;
    std::size_t degenerate_bins = 0;
    std::size_t n_bins = 0;
    std::vector<std::string> warnings;
    /// Subsampled fits: J x n_subsamples beta0 curves before averaging.
    Eigen::MatrixXd subsample_beta0;
};

/// Fitted g(E[Z_i(s)]) = beta0(s) + sum_k xi_ik phi_k(s).
struct GfpcaFit {
    std::vector<std::string> subject_ids;
    std::vector<double> grid;
    LinkFamily family;
    bool cyclic = false;

    Eigen::VectorXd beta0_full;
    Eigen::VectorXd beta0_coefficients;
    double log_lambda_beta = 0.0;
    /// N x K.
    Eigen::MatrixXd scores;
    Eigen::VectorXd score_vars;
    /// Gaussian residual variance; 1 otherwise.
    double dispersion = 1.0;

    FpcaBasis basis;
    /// N x J, eta = beta0 + scores * phi'.
    Eigen::MatrixXd eta_full;
    Eigen::MatrixXd fitted_means;
    FitDiagnostics diagnostics;

    [[nodiscard]] int npc() const { return static_cast<int>(scores.cols()); }
};

/// PIRLS for the penalised GLMM with K independent random slopes, variance
/// parameters by working-model REML.
GfpcaFit refit_global(const FunctionalDataset& data, const FpcaBasis& basis, const RefitOptions& opts = {});

/// Population quantities averaged over disjoint random subsets of subjects,
/// then per-subject scores with those quantities held fixed.
GfpcaFit refit_global_subsampled(const FunctionalDataset& data, const FpcaBasis& basis, int n_subsamples,
                                 int subsample_size, std::uint64_t seed, const RefitOptions& opts = {});

/// Posterior mode of one subject's scores given beta0, phi (J x K) and the
/// score variances. Components with zero variance get score 0.
Eigen::VectorXd score_only_fit(std::span<const double> subject_values, const Eigen::VectorXd& beta0,
                               const Eigen::MatrixXd& phi, const Eigen::VectorXd& score_vars, LinkFamily family,
                               double dispersion = 1.0, double tolerance = 1e-8);

/// score_only_fit for every subject (OpenMP over subjects).
Eigen::MatrixXd score_only_fit_all(const FunctionalDataset& data, const Eigen::VectorXd& beta0,
                                   const Eigen::MatrixXd& phi, const Eigen::VectorXd& score_vars,
                                   double dispersion = 1.0, double tolerance = 1e-8);

/// Single-threaded reference for score_only_fit_all.
Eigen::MatrixXd score_only_fit_all_serial(const FunctionalDataset& data, const Eigen::VectorXd& beta0,
                                          const Eigen::MatrixXd& phi, const Eigen::VectorXd& score_vars,
                                          double dispersion = 1.0, double tolerance = 1e-8);

/// log-likelihood of the data minus the beta0 roughness penalty and the
/// Gaussian score priors, at (beta0 coefficients, scores).
double penalized_loglik(const FunctionalDataset& data, const GfpcaFit& fit, const Eigen::VectorXd& beta0_coefficients,
                        const Eigen::MatrixXd& scores);

/// Design of the beta0 spline on the data grid (J x D) and its penalty.
struct Beta0Basis {
    Eigen::MatrixXd design;
    Eigen::MatrixXd penalty;
    /// penalty = difference' difference.
    Eigen::MatrixXd difference;
    int null_dim = 0;
};
Beta0Basis beta0_basis(const FunctionalDataset& data, int size);

} // namespace fgfpca
