#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fgfpca/local_glmm.hpp"

namespace fgfpca {

struct SmoothingOptions {
    /// Interior knots of the covariance smoother basis (basis size nknots + 4).
    int nknots = 20;
    /// Search interval for log(lambda) in GCV.
    double log_lambda_lower = 0.0;
    double log_lambda_upper = 15.0;
    /// Skips GCV when set.
    std::optional<double> fixed_log_lambda;
};

struct FpcaOptions {
    double pve = 0.95;
    /// Fixed number of components; overrides pve.
    std::optional<int> npc;
    SmoothingOptions smoothing;
};

/// Eigen-decomposition of the smoothed latent covariance.
///
/// Eigenfunctions are orthonormal under <f, g> = sum_l w_l f(t_l) g(t_l),
/// with w_l the quadrature weights (the common spacing on a uniform
/// midpoint grid).
struct FpcaBasis {
    std::vector<std::size_t> midpoints;
    std::vector<double> coordinates;
    Eigen::VectorXd quadrature_weights;
    bool cyclic = false;

    Eigen::VectorXd mean_mid;
    Eigen::MatrixXd covariance;
    /// L x K.
    Eigen::MatrixXd eigenfunctions_mid;
    Eigen::VectorXd eigenvalues;
    /// Every eigenpair with a positive eigenvalue, K columns first.
    Eigen::MatrixXd positive_eigenfunctions_mid;
    Eigen::VectorXd positive_eigenvalues;
    double pve_target = 0.95;
    int npc = 0;

    int nknots = 20;
    double log_lambda_mean = 0.0;
    double log_lambda_cov = 0.0;
    bool gcv_fallback = false;

    /// Filled by project_to_full_grid: J x K values and D x K coefficients.
    Eigen::MatrixXd eigenfunctions_full;
    Eigen::MatrixXd coefficients;
    std::vector<double> full_coordinates;
};

/// Cubic basis matching the smoother for these midpoint coordinates.
class BSplineBasis;
BSplineBasis latent_basis(const std::vector<double>& coordinates, bool cyclic, int nknots);

FpcaBasis fpca_latent(const LatentEstimates& latent, const FpcaOptions& opts = {});

/// Regresses each midpoint eigenfunction on the smoother's B-spline basis and
/// evaluates the fit at `full_coordinates` (normalised).
FpcaBasis project_to_full_grid(FpcaBasis basis, const std::vector<double>& full_coordinates);

} // namespace fgfpca
