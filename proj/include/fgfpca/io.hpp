#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fgfpca/global_refit.hpp"
#include "fgfpca/simulation.hpp"

namespace fgfpca {

/// Files written by write_fit, in order.
std::vector<std::string> fit_file_names();

/// scores.csv, beta0.csv, eigenfunctions.csv, eigenvalues.csv, fitted.csv, fit.json.
void write_fit(const std::filesystem::path& dir, const GfpcaFit& fit);

/// Long-format plotting table: panel,series,s,value.
void write_plot_csv(const std::filesystem::path& path, const GfpcaFit& fit);

/// Same layout as a fit directory (fitted.csv holds the true eta).
void write_truth(const std::filesystem::path& dir, const SimTruth& truth, const FunctionalDataset& data);

/// The parts of a fit (or truth) directory the evaluator needs.
struct CurveSet {
    std::vector<std::string> subject_ids;
    std::vector<double> grid;
    Eigen::MatrixXd eta;
    Eigen::MatrixXd means;
    Eigen::VectorXd beta0;
    Eigen::MatrixXd phi;
    nlohmann::json fit_json;
};

CurveSet read_curves(const std::filesystem::path& dir);

/// Writes via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

} // namespace fgfpca
