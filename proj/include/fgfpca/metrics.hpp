#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fgfpca/data.hpp"

namespace fgfpca {

/// Trapezoid weights on the grid rescaled to [0,1].
Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid);

/// (1/N) sum_i int (est_i - truth_i)^2 ds over [0,1].
double mise_eta(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, const std::vector<double>& grid);

struct PhiError {
    double overall;
    Eigen::VectorXd per_component;
};

/// Columns matched by index after flipping est_k when <est_k, truth_k> < 0.
PhiError mise_phi(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, const std::vector<double>& grid);

double ise_beta0(const Eigen::VectorXd& est, const Eigen::VectorXd& truth, const std::vector<double>& grid);

struct Predictive {
    double auc;
    double logloss;
};

/// Pooled over all cells. Probabilities are clipped to [1e-12, 1 - 1e-12];
/// ties count one half in the AUC.
Predictive predictive_metrics(const Eigen::MatrixXd& labels, const Eigen::MatrixXd& probs);

struct EvalReport {
    std::optional<double> mise_eta;
    std::optional<double> mise_phi;
    Eigen::VectorXd mise_phi_per_k;
    std::optional<double> ise_beta0;
    std::optional<double> auc;
    std::optional<double> logloss;
    double time_step1 = 0, time_step2 = 0, time_step3 = 0, time_step4 = 0, time_total = 0;
};

nlohmann::json to_json(const EvalReport& r);

} // namespace fgfpca
