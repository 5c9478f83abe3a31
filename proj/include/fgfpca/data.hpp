#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fgfpca/family.hpp"

namespace fgfpca {

/// Dense functional observations Z_i(s_j) on a grid shared by all subjects.
///
/// Immutable after construction; the constructor enforces the invariants
/// (strictly increasing grid with J >= 2, values inside the family support,
/// one row per unique subject id).
class FunctionalDataset {
public:
    FunctionalDataset(std::vector<std::string> subject_ids, std::vector<double> grid,
                      Eigen::MatrixXd values, LinkFamily family, bool cyclic);

    [[nodiscard]] const std::vector<std::string>& subject_ids() const { return subject_ids_; }
    [[nodiscard]] const std::vector<double>& grid() const { return grid_; }
    [[nodiscard]] const Eigen::MatrixXd& values() const { return values_; }
    [[nodiscard]] LinkFamily family() const { return family_; }
    [[nodiscard]] bool cyclic() const { return cyclic_; }

    [[nodiscard]] Eigen::Index n_subjects() const { return values_.rows(); }
    [[nodiscard]] Eigen::Index n_points() const { return values_.cols(); }

    /// Grid mapped to [0,1]. Non-cyclic: (s - s_1) / (s_J - s_1).
    /// Cyclic: the period is J mean spacings, so coordinates lie in [0,1).
    [[nodiscard]] std::vector<double> normalized_grid() const;

    /// Rows `rows`, in the given order.
    [[nodiscard]] FunctionalDataset subset(const std::vector<Eigen::Index>& rows) const;

private:
    std::vector<std::string> subject_ids_;
    std::vector<double> grid_;
    Eigen::MatrixXd values_;
    LinkFamily family_;
    bool cyclic_;
};

/// Normalised coordinates for an arbitrary increasing grid (see FunctionalDataset).
std::vector<double> normalize_grid(const std::vector<double>& grid, bool cyclic);

/// Daily curves Y_ih(s) per subject, before binarisation.
struct DailyProfileSet {
    std::vector<std::string> subject_ids;
    std::vector<double> grid;
    /// days[i] is H_i x J.
    std::vector<Eigen::MatrixXd> days;
};

inline constexpr double kDefaultActivityThreshold = 10.558;

/// Reads a long CSV with header `id,s_index,value`. Subjects keep their
/// first-appearance order. `coordinates`, when given, must have J entries and
/// replaces the default grid 1..J.
FunctionalDataset load_long_csv(const std::filesystem::path& path, LinkFamily family, bool cyclic,
                                const std::optional<std::vector<double>>& coordinates = std::nullopt);

/// Writes `id,s_index,value` with round-trip precision.
void write_long_csv(const std::filesystem::path& path, const FunctionalDataset& data);

/// Reads `id,day,s_index,value`.
DailyProfileSet load_daily_csv(const std::filesystem::path& path);

/// Active/inactive profile: Z_i(s) = 1 iff at least floor(H_i/2)+1 of the
/// H_i days have Y_ih(s) >= threshold (upper median of the indicators).
FunctionalDataset binarize_profiles(const DailyProfileSet& profiles,
                                    double threshold = kDefaultActivityThreshold,
                                    bool cyclic = true);

} // namespace fgfpca
