#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fgfpca/binning.hpp"
#include "fgfpca/data.hpp"
#include "fgfpca/global_refit.hpp"

namespace fgfpca {

enum class EigenSet { periodic, nonperiodic };
enum class MeanSpec { zero, spline };

struct SimScenario {
    int n_subjects = 100;
    int n_points = 100;
    LinkFamily family{Family::binomial};
    EigenSet eigen_set = EigenSet::periodic;
    std::vector<double> eigenvalues{1.0, 0.5, 0.25, 0.125};
    MeanSpec mean = MeanSpec::zero;
    /// Gaussian observation noise.
    double noise_sd = 1.0;
    std::uint64_t seed = 1;
};

struct SimTruth {
    Eigen::MatrixXd eta;
    Eigen::MatrixXd scores;
    Eigen::MatrixXd phi;
    Eigen::VectorXd beta0;
    Eigen::VectorXd eigenvalues;
};

void to_json(nlohmann::json& j, const SimScenario& s);
void from_json(const nlohmann::json& j, SimScenario& s);

/// Equally spaced grid: (j-1)/(J-1) on [0,1], or (j-1)/J for the periodic set
/// so that the wrap from s_J back to s_1 is one ordinary step.
std::vector<double> simulation_grid(int n_points, EigenSet set = EigenSet::nonperiodic);

/// Columns are the first `k` true eigenfunctions on `grid`.
Eigen::MatrixXd true_eigenfunctions(EigenSet set, const std::vector<double>& grid, int k = 4);

/// Shipped nonzero mean: cubic B-spline with fixed coefficients.
Eigen::VectorXd spline_mean(const std::vector<double>& grid);

std::pair<FunctionalDataset, SimTruth> generate(const SimScenario& scenario);

/// Parametric bootstrap from a fitted model.
std::pair<FunctionalDataset, SimTruth> simulate_from_fit(const GfpcaFit& fit, int n_subjects, std::uint64_t seed);

struct BinnedCovariance {
    /// sum_k lambda_k avg_{S_u}(phi_k) avg_{S_v}(phi_k), L x L.
    Eigen::MatrixXd covariance;
    /// covariance minus sum_k lambda_k phi_k(m_u) phi_k(m_v).
    Eigen::MatrixXd bias;
};

/// Theoretical covariance of the per-bin latent estimands. `phi` is J x K on
/// the grid the bins index; bin averages are over the bin's grid points.
BinnedCovariance binned_cov_oracle(const Eigen::MatrixXd& phi, const Eigen::VectorXd& eigenvalues,
                                   const BinSpec& bins);

/// Seed for stream `index` derived from `seed` (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

} // namespace fgfpca
