#include "fgfpca/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "fgfpca/binning.hpp"
#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b)
{
    return std::chrono::duration<double>(b - a).count();
}

// Runs `f`, prefixing any library error with the stage name.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + ": " + e.what());
    }
}

} // namespace

void validate(const PipelineConfig& cfg, const FunctionalDataset& data)
{
    const auto J = data.n_points();
    if (cfg.width < 2) throw ConfigError("width: must be at least 2");
    if (cfg.width % 2 != 0) throw ConfigError("width must be even");
    if (cfg.width >= J) throw ConfigError("width: must be smaller than the number of grid points");
    if (cfg.npc) {
        if (*cfg.npc < 1) throw ConfigError("npc: must be positive");
        if (*cfg.npc > data.n_subjects() - 1) throw ConfigError("npc: must not exceed N-1");
    } else if (!(cfg.pve > 0.0 && cfg.pve <= 1.0)) {
        throw ConfigError("pve: must lie in (0, 1]");
    }
    if (cfg.local.quadrature_nodes < 1) throw ConfigError("quadrature_nodes: must be positive");
    if (cfg.local.max_iterations < 1) throw ConfigError("max_iterations: must be positive");
    if (cfg.local.policy == DegeneracyPolicy::augment && data.family().family() != Family::binomial)
        throw ConfigError("policy: augment is only defined for the binomial family");
    if (cfg.smoothing.nknots < 1) throw ConfigError("nknots: must be positive");
    if (cfg.smoothing.log_lambda_lower >= cfg.smoothing.log_lambda_upper)
        throw ConfigError("log_lambda: lower bound must be below the upper bound");
    if (cfg.refit.beta0_basis < 5 || cfg.refit.beta0_basis > J) throw ConfigError("beta0_basis: must be in [5, J]");
    if (cfg.refit.max_outer_iterations < 1) throw ConfigError("max_outer_iterations: must be positive");
    if (!(cfg.max_failed_bin_fraction >= 0.0 && cfg.max_failed_bin_fraction <= 1.0))
        throw ConfigError("max_failed_bin_fraction: must lie in [0, 1]");
    if (cfg.modified.enabled) {
        const auto& m = cfg.modified;
        if (m.n_subsamples < 1) throw ConfigError("n_subsamples: must be positive");
        const long size = m.subsample_size ? m.subsample_size : data.n_subjects() / m.n_subsamples;
        if (size < 2) throw ConfigError("subsample_size: must be at least 2");
        if (static_cast<long>(m.n_subsamples) * size > data.n_subjects())
            throw ConfigError("subsample_size: n_subsamples x subsample_size exceeds N");
    }
}

GfpcaFit fast_gfpca(const FunctionalDataset& input, const PipelineConfig& cfg)
{
    validate(cfg, input);
    const bool cyclic = cfg.cyclic.value_or(input.cyclic());
    const FunctionalDataset data = cyclic == input.cyclic()
                                       ? input
                                       : FunctionalDataset(input.subject_ids(), input.grid(), input.values(),
                                                           input.family(), cyclic);
    const auto t0 = Clock::now();

    const BinSpec bins = stage("step 1 (binning)", [&] {
        return build_bins(static_cast<std::size_t>(data.n_points()), cfg.width, cfg.overlap, cyclic);
    });
    const auto t1 = Clock::now();

    const LatentEstimates latent = stage("step 2 (local GLMM)", [&] { return fit_all_bins(data, bins, cfg.local); });
    const auto limit = static_cast<double>(latent.n_bins()) * cfg.max_failed_bin_fraction;
    if (static_cast<double>(latent.n_failed) > limit)
        throw NumericalError("step 2 (local GLMM): " + std::to_string(latent.n_failed) + " of " +
                             std::to_string(latent.n_bins()) +
                             " local fits did not converge; try a larger --width");
    const auto t2 = Clock::now();

    FpcaOptions fo;
    fo.pve = cfg.pve;
    fo.npc = cfg.npc;
    fo.smoothing = cfg.smoothing;
    std::vector<std::string> warnings;
    const int max_knots = static_cast<int>(latent.n_bins()) - 4;
    if (max_knots < 1) throw ConfigError("width: too few bins for the covariance smoother; use a smaller width");
    if (fo.smoothing.nknots > max_knots) {
        warnings.push_back("nknots reduced from " + std::to_string(fo.smoothing.nknots) + " to " +
                           std::to_string(max_knots) + " (only " + std::to_string(latent.n_bins()) + " bins)");
        // Keep the penalty on the same roughness scale: a difference penalty on a basis with
        // knot spacing h approximates h^3 times the integrated squared second derivative.
        const bool cyc = latent.cyclic;
        const double seg_req = cyc ? fo.smoothing.nknots + 4 : fo.smoothing.nknots + 1;
        const double seg_new = cyc ? max_knots + 4 : max_knots + 1;
        const double shift = 3.0 * std::log(seg_new / seg_req);
        fo.smoothing.log_lambda_lower += shift;
        fo.smoothing.log_lambda_upper += shift;
        if (fo.smoothing.fixed_log_lambda) *fo.smoothing.fixed_log_lambda += shift;
        fo.smoothing.nknots = max_knots;
    }
    FpcaBasis basis = stage("step 3 (latent FPCA)", [&] {
        return project_to_full_grid(fpca_latent(latent, fo), data.normalized_grid());
    });
    if (basis.gcv_fallback) warnings.emplace_back("GCV found no interior minimum; used the interval midpoint");
    const auto t3 = Clock::now();

    RefitOptions ro = cfg.refit;
    ro.beta0_basis = std::min<int>(ro.beta0_basis, static_cast<int>(data.n_points()));
    GfpcaFit fit = stage("step 4 (global refit)", [&] {
        if (cfg.modified.enabled)
        {
            const int size = cfg.modified.subsample_size
                                 ? cfg.modified.subsample_size
                                 : static_cast<int>(data.n_subjects() / cfg.modified.n_subsamples);
            return refit_global_subsampled(data, basis, cfg.modified.n_subsamples, size, cfg.seed, ro);
        }
        return refit_global(data, basis, ro);
    });
    const auto t4 = Clock::now();

    auto& d = fit.diagnostics;
    d.times.step1 = seconds(t0, t1);
    d.times.step2 = seconds(t1, t2);
    d.times.step3 = seconds(t2, t3);
    d.times.step4 = seconds(t3, t4);
    d.times.total = seconds(t0, t4);
    d.failed_bins = latent.n_failed;
    d.degenerate_bins = latent.n_degenerate;
    d.n_bins = latent.n_bins();
    if (latent.n_failed > 0)
        warnings.push_back(std::to_string(latent.n_failed) + " local fits did not converge");
    if (latent.n_degenerate > 0)
        warnings.push_back(std::to_string(latent.n_degenerate) + " bins had degenerate local fits");
    if (!d.converged) warnings.emplace_back("step 4 outer loop hit the iteration limit");
    d.warnings.insert(d.warnings.begin(), warnings.begin(), warnings.end());
    return fit;
}

} // namespace fgfpca
