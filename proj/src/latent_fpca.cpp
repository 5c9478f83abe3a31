#include "fgfpca/latent_fpca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "fgfpca/bspline.hpp"
#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

Eigen::VectorXd midpoint_weights(const std::vector<double>& t, bool cyclic)
{
    const auto L = static_cast<Eigen::Index>(t.size());
    Eigen::VectorXd w(L);
    if (L == 1) {
        w(0) = 1.0;
        return w;
    }
    for (Eigen::Index l = 0; l < L; ++l) {
        const auto u = static_cast<std::size_t>(l);
        double left, right;
        if (l == 0) left = cyclic ? t[u] - (t.back() - 1.0) : t[1] - t[0];
        else left = t[u] - t[u - 1];
        if (l == L - 1) right = cyclic ? (t.front() + 1.0) - t[u] : t[u] - t[u - 1];
        else right = t[u + 1] - t[u];
        w(l) = 0.5 * (left + right);
    }
    return w;
}

void fix_signs(Eigen::MatrixXd& phi)
{
    for (Eigen::Index k = 0; k < phi.cols(); ++k) {
        const double s = phi.col(k).sum();
        bool flip = s < 0;
        if (s == 0) {
            for (Eigen::Index l = 0; l < phi.rows(); ++l)
                if (phi(l, k) != 0) {
                    flip = phi(l, k) < 0;
                    break;
                }
        }
        if (flip) phi.col(k) = -phi.col(k);
    }
}

} // namespace

BSplineBasis latent_basis(const std::vector<double>& coordinates, bool cyclic, int nknots)
{
    if (cyclic) return BSplineBasis::periodic(0.0, 1.0, nknots + 4);
    return BSplineBasis::open(coordinates.front(), coordinates.back(), nknots);
}

FpcaBasis fpca_latent(const LatentEstimates& latent, const FpcaOptions& opts)
{
    const auto N = latent.eta.rows();
    const auto L = latent.eta.cols();
    const int nknots = opts.smoothing.nknots;
    if (!(opts.pve > 0.0 && opts.pve <= 1.0)) throw ConfigError("pve must lie in (0, 1]");
    if (nknots < 1) throw ConfigError("nknots must be >= 1");
    if (L < nknots + 4)
        throw ConfigError("fpca needs at least nknots + 4 = " + std::to_string(nknots + 4) + " bins, got " +
                          std::to_string(L));
    if (N < 2) throw DataError("fpca needs at least 2 subjects");
    if (opts.npc && *opts.npc < 1) throw ConfigError("npc must be >= 1");

    FpcaBasis out;
    out.midpoints = latent.midpoints;
    out.coordinates = latent.coordinates;
    out.cyclic = latent.cyclic;
    out.nknots = nknots;
    out.pve_target = opts.pve;
    out.quadrature_weights = midpoint_weights(latent.coordinates, latent.cyclic);

    const auto spline = latent_basis(latent.coordinates, latent.cyclic, nknots);
    const PenalizedSmoother smoother(spline.design(latent.coordinates), spline.difference_penalty(2));
    const auto& sm = opts.smoothing;

    const Eigen::RowVectorXd raw_mean = latent.eta.colwise().mean();
    if (sm.fixed_log_lambda) {
        out.log_lambda_mean = *sm.fixed_log_lambda;
    } else {
        const auto sel = smoother.select(raw_mean, sm.log_lambda_lower, sm.log_lambda_upper);
        out.log_lambda_mean = sel.log_lambda;
        out.gcv_fallback = sel.fallback;
    }
    out.mean_mid = smoother.smooth_rows(raw_mean, std::exp(out.log_lambda_mean)).transpose();

    // centre on the raw column means so the covariance carries no mean-smoothing bias
    const Eigen::MatrixXd centred = latent.eta.rowwise() - raw_mean;
    if (sm.fixed_log_lambda) {
        out.log_lambda_cov = *sm.fixed_log_lambda;
    } else {
        const auto sel = smoother.select(centred, sm.log_lambda_lower, sm.log_lambda_upper);
        out.log_lambda_cov = sel.log_lambda;
        out.gcv_fallback = out.gcv_fallback || sel.fallback;
    }
    const Eigen::MatrixXd smoothed = smoother.smooth_rows(centred, std::exp(out.log_lambda_cov));
    out.covariance = smoothed.transpose() * smoothed / static_cast<double>(N);
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();

    const Eigen::VectorXd sqrt_w = out.quadrature_weights.array().sqrt();
    const Eigen::MatrixXd weighted = sqrt_w.asDiagonal() * out.covariance * sqrt_w.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weighted);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the latent covariance failed");

    // descending order
    const Eigen::VectorXd values = eig.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double scale = std::max(1.0, latent.eta.squaredNorm() / static_cast<double>(N * L));
    if (!(values(0) > 1e-12 * scale)) throw NumericalError("degenerate latent covariance");

    Eigen::Index n_pos = 0;
    while (n_pos < values.size() && values(n_pos) > 1e-10 * values(0)) ++n_pos;

    int k = 0;
    if (opts.npc) {
        if (*opts.npc > n_pos)
            throw NumericalError("requested " + std::to_string(*opts.npc) + " components but the latent covariance has " +
                                 std::to_string(n_pos) + " positive eigenvalues");
        k = *opts.npc;
    } else {
        const double total = values.head(n_pos).sum();
        double acc = 0.0;
        while (k < n_pos) {
            acc += values(k);
            ++k;
            if (acc / total >= opts.pve - 1e-12) break;
        }
    }

    out.positive_eigenvalues = values.head(n_pos);
    out.positive_eigenfunctions_mid = sqrt_w.cwiseInverse().asDiagonal() * vectors.leftCols(n_pos);
    fix_signs(out.positive_eigenfunctions_mid);
    out.npc = k;
    out.eigenvalues = out.positive_eigenvalues.head(k);
    out.eigenfunctions_mid = out.positive_eigenfunctions_mid.leftCols(k);
    return out;
}

FpcaBasis project_to_full_grid(FpcaBasis basis, const std::vector<double>& full_coordinates)
{
    if (basis.eigenfunctions_mid.cols() == 0) throw ConfigError("basis has no eigenfunctions to project");
    const auto spline = latent_basis(basis.coordinates, basis.cyclic, basis.nknots);
    const Eigen::MatrixXd design = spline.design(basis.coordinates);
    if (design.rows() < design.cols())
        throw NumericalError("projection design has " + std::to_string(design.rows()) + " rows for " +
                             std::to_string(design.cols()) + " basis functions: use more bins or fewer knots");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols())
        throw NumericalError("projection design is rank deficient: use more bins or fewer knots");
    basis.coefficients = qr.solve(basis.eigenfunctions_mid);
    basis.eigenfunctions_full = spline.design(full_coordinates) * basis.coefficients;
    basis.full_coordinates = full_coordinates;
    return basis;
}

} // namespace fgfpca
