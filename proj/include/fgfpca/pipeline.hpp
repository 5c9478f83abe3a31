#pragma once

#include <cstdint>
#include <optional>

#include "fgfpca/global_refit.hpp"
#include "fgfpca/latent_fpca.hpp"
#include "fgfpca/local_glmm.hpp"

namespace fgfpca {

struct ModifiedStep4 {
    bool enabled = false;
    int n_subsamples = 4;
    int subsample_size = 0; // 0: N / n_subsamples
};

struct PipelineConfig {
    int width = 6;
    bool overlap = true;
    /// Empty: take the dataset's flag.
    std::optional<bool> cyclic;
    double pve = 0.95;
    std::optional<int> npc;
    LocalGlmmOptions local;
    SmoothingOptions smoothing;
    RefitOptions refit;
    ModifiedStep4 modified;
    std::uint64_t seed = 1;
    /// Fraction of non-converged local fits tolerated before failing.
    double max_failed_bin_fraction = 0.10;
};

/// Throws ConfigError naming the offending field.
void validate(const PipelineConfig& cfg, const FunctionalDataset& data);

/// Steps 1-4 with per-step wall-clock times in fit.diagnostics.times.
GfpcaFit fast_gfpca(const FunctionalDataset& data, const PipelineConfig& cfg);

} // namespace fgfpca
