#include "fgfpca/global_refit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <omp.h>

#include "fgfpca/bspline.hpp"
#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

// Box for the log variance parameters.
constexpr double kRhoBetaMin = -12.0, kRhoBetaMax = 25.0;
constexpr double kRhoScoreMin = -27.6, kRhoScoreMax = 10.0;
constexpr double kRhoDispMin = -25.0, kRhoDispMax = 10.0;

// rho = (log lambda_beta, log sigma_1^2 .. log sigma_K^2 [, log dispersion])
struct Params {
    Eigen::VectorXd rho;
    int K;
    bool has_dispersion;

    [[nodiscard]] double lambda_beta() const { return std::exp(rho(0)); }
    [[nodiscard]] double precision(int k) const { return std::exp(-rho(1 + k)); }
    [[nodiscard]] double dispersion() const { return has_dispersion ? std::exp(rho(K + 1)) : 1.0; }
    [[nodiscard]] double lower(Eigen::Index i) const
    {
        if (i == 0) return kRhoBetaMin;
        return i <= K ? kRhoScoreMin : kRhoDispMin;
    }
    [[nodiscard]] double upper(Eigen::Index i) const
    {
        if (i == 0) return kRhoBetaMax;
        return i <= K ? kRhoScoreMax : kRhoDispMax;
    }
};

struct Model {
    const Eigen::MatrixXd& z;
    Eigen::MatrixXd B;   // J x D
    Eigen::MatrixXd P;   // D x D
    Eigen::MatrixXd phi; // J x K
    int penalty_rank;
    LinkFamily family;
    Eigen::Index N, J, D, K;
};

struct State {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd xi;  // N x K
    Eigen::MatrixXd eta; // N x J

    void refresh(const Model& m)
    {
        const Eigen::VectorXd mean = m.B * alpha;
        eta = xi * m.phi.transpose();
        eta.rowwise() += mean.transpose();
    }
};

// Working linear model at the current eta. Weights exclude the dispersion,
// which is applied when the stats are used.
struct WorkingStats {
    Eigen::MatrixXd F;              // B' W B
    Eigen::VectorXd u;              // B' W y
    std::vector<Eigen::MatrixXd> G; // phi' W_i phi
    std::vector<Eigen::MatrixXd> H; // B' W_i phi
    Eigen::MatrixXd r;              // K x N, phi' W_i y_i
    double yWy = 0.0;
    double n_obs = 0.0;
};

WorkingStats working_stats(const Model& m, const Eigen::MatrixXd& eta)
{
    WorkingStats ws;
    const auto N = m.N, J = m.J, K = m.K;
    Eigen::MatrixXd W(N, J), Y(N, J);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index i = 0; i < N; ++i) {
            const double e = eta(i, j);
            if (m.family.family() == Family::gaussian) {
                W(i, j) = 1.0;
                Y(i, j) = m.z(i, j);
            } else {
                const double w = std::max(m.family.cumulant_d2(e), 1e-12);
                W(i, j) = w;
                Y(i, j) = e + (m.z(i, j) - m.family.cumulant_d1(e)) / w;
            }
        }
    ws.G.resize(static_cast<std::size_t>(N));
    ws.H.resize(static_cast<std::size_t>(N));
    ws.r.resize(K, N);
    Eigen::VectorXd yWy_i(N);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < N; ++i) {
        const Eigen::VectorXd w = W.row(i).transpose();
        const Eigen::MatrixXd wphi = w.asDiagonal() * m.phi;
        ws.G[static_cast<std::size_t>(i)] = m.phi.transpose() * wphi;
        ws.H[static_cast<std::size_t>(i)] = m.B.transpose() * wphi;
        ws.r.col(i) = wphi.transpose() * Y.row(i).transpose();
        yWy_i(i) = (Y.row(i).array().square() * W.row(i).array()).sum();
    }
    const Eigen::VectorXd wsum = W.colwise().sum().transpose();
    const Eigen::VectorXd wysum = (W.array() * Y.array()).colwise().sum().transpose();
    ws.F = m.B.transpose() * wsum.asDiagonal() * m.B;
    ws.u = m.B.transpose() * wysum;
    ws.yWy = yWy_i.sum();
    ws.n_obs = static_cast<double>(N * J);
    return ws;
}

struct Solution {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd xi; // N x K
    double reml = 0.0;
    Eigen::VectorXd gradient;
    bool ok = true;
};

// Penalised least squares for the working model; optionally the REML score and gradient.
Solution solve_working(const Model& m, const WorkingStats& ws, const Params& p, bool want_reml)
{
    const auto N = m.N, D = m.D, K = m.K;
    const double s = 1.0 / p.dispersion();
    const double lam = p.lambda_beta();
    Eigen::VectorXd prec(K);
    for (int k = 0; k < K; ++k) prec(k) = p.precision(k);

    Solution sol;
    Eigen::MatrixXd T = s * ws.F + lam * m.P;
    Eigen::VectorXd rhs = s * ws.u;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> chol(static_cast<std::size_t>(N));
    std::vector<Eigen::MatrixXd> E(static_cast<std::size_t>(N)); // A_i^-1 H_i' (scaled)
    double logdet_a = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto u = static_cast<std::size_t>(i);
        Eigen::MatrixXd A = s * ws.G[u];
        A.diagonal() += prec;
        chol[u].compute(A);
        if (chol[u].info() != Eigen::Success) {
            sol.ok = false;
            return sol;
        }
        const Eigen::MatrixXd Hs = s * ws.H[u];
        E[u] = chol[u].solve(Hs.transpose());
        T.noalias() -= Hs * E[u];
        rhs.noalias() -= E[u].transpose() * (s * ws.r.col(i));
        const Eigen::MatrixXd l = chol[u].matrixL();
        logdet_a += 2.0 * l.diagonal().array().log().sum();
    }
    T = 0.5 * (T + T.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> tchol(T);
    if (tchol.info() != Eigen::Success) {
        sol.ok = false;
        return sol;
    }
    sol.alpha = tchol.solve(rhs);
    sol.xi.resize(N, K);
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto u = static_cast<std::size_t>(i);
        sol.xi.row(i) = chol[u].solve(s * ws.r.col(i)).transpose() - (E[u] * sol.alpha).transpose();
    }
    if (!want_reml) return sol;

    const Eigen::MatrixXd tl = tchol.matrixL();
    const double logdet_t = 2.0 * tl.diagonal().array().log().sum();
    const double fitted = sol.alpha.dot(s * ws.u) + (sol.xi.transpose().cwiseProduct(s * ws.r)).sum();
    const double pen_beta = lam * sol.alpha.dot(m.P * sol.alpha);
    Eigen::VectorXd xi_ss = sol.xi.colwise().squaredNorm().transpose();
    double pen_scores = xi_ss.dot(prec);
    const double rss_plus_pen = s * ws.yWy - fitted;

    sol.reml = rss_plus_pen + logdet_t + logdet_a - m.penalty_rank * p.rho(0);
    for (int k = 0; k < K; ++k) sol.reml += static_cast<double>(N) * p.rho(1 + k);
    if (p.has_dispersion) sol.reml += ws.n_obs * p.rho(K + 1);

    // diagonal of the inverse Hessian over the score blocks
    const Eigen::MatrixXd tinv = tchol.solve(Eigen::MatrixXd::Identity(D, D));
    Eigen::VectorXd post_var = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const Eigen::MatrixXd ainv = chol[u].solve(Eigen::MatrixXd::Identity(K, K));
        post_var += ainv.diagonal() + (E[u] * tinv * E[u].transpose()).diagonal();
    }
    const double tr_tp = (tinv * m.P).trace();

    sol.gradient.resize(p.rho.size());
    sol.gradient(0) = lam * (sol.alpha.dot(m.P * sol.alpha) + tr_tp) - m.penalty_rank;
    for (int k = 0; k < K; ++k) sol.gradient(1 + k) = -prec(k) * (xi_ss(k) + post_var(k)) + static_cast<double>(N);
    if (p.has_dispersion) {
        const double rss = rss_plus_pen - pen_beta - pen_scores;
        const double tr_hs = lam * tr_tp + post_var.dot(prec);
        const double n_coef = static_cast<double>(D + N * K);
        sol.gradient(K + 1) = -rss - (n_coef - tr_hs) + ws.n_obs;
    }
    return sol;
}

double unit_deviance(LinkFamily family, double z, double eta)
{
    switch (family.family()) {
    case Family::binomial: return -2.0 * (z * eta - family.cumulant(eta));
    case Family::poisson: {
        const double mu = std::exp(eta);
        const double zlog = z > 0 ? z * (std::log(z) - eta) : 0.0;
        return 2.0 * (zlog - (z - mu));
    }
    case Family::gaussian: return (z - eta) * (z - eta);
    }
    return 0.0;
}

double penalized_deviance(const Model& m, const State& st, const Params& p)
{
    double dev = 0.0;
    for (Eigen::Index j = 0; j < m.J; ++j)
        for (Eigen::Index i = 0; i < m.N; ++i) dev += unit_deviance(m.family, m.z(i, j), st.eta(i, j));
    dev /= p.dispersion();
    double pen = p.lambda_beta() * st.alpha.dot(m.P * st.alpha);
    for (int k = 0; k < m.K; ++k) pen += p.precision(k) * st.xi.col(k).squaredNorm();
    return dev + pen;
}

// Newton-PIRLS at fixed variance parameters; step halving keeps the
// penalised deviance non-increasing.
int pirls(const Model& m, State& st, const Params& p, int phase, int max_iter, std::vector<DevianceStep>& trace)
{
    double pd = penalized_deviance(m, st, p);
    trace.push_back({phase, pd});
    int it = 0;
    for (; it < max_iter; ++it) {
        const auto ws = working_stats(m, st.eta);
        const auto sol = solve_working(m, ws, p, false);
        if (!sol.ok) throw NumericalError("step 4: working model is not positive definite");

        State cand = st;
        double t = 1.0;
        bool accepted = false;
        double pd_new = pd;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
            cand.alpha = st.alpha + t * (sol.alpha - st.alpha);
            cand.xi = st.xi + t * (sol.xi - st.xi);
            cand.refresh(m);
            pd_new = penalized_deviance(m, cand, p);
            if (std::isfinite(pd_new) && pd_new <= pd) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        const double change = (cand.eta - st.eta).cwiseAbs().maxCoeff();
        st = std::move(cand);
        const double decrease = pd - pd_new;
        pd = pd_new;
        trace.push_back({phase, pd});
        if (change < 1e-10 || decrease <= 1e-14 * (std::abs(pd) + 1.0)) {
            ++it;
            break;
        }
    }
    return it;
}

// Damped Newton on the working REML score; Hessian by differencing the analytic gradient.
Params optimize_reml(const Model& m, const WorkingStats& ws, Params p)
{
    const auto n = p.rho.size();
    auto clamp = [&](Eigen::VectorXd r) {
        for (Eigen::Index i = 0; i < n; ++i) r(i) = std::clamp(r(i), p.lower(i), p.upper(i));
        return r;
    };
    auto eval = [&](const Eigen::VectorXd& rho) {
        Params q = p;
        q.rho = rho;
        return solve_working(m, ws, q, true);
    };

    Solution cur = eval(p.rho);
    if (!cur.ok) return p;
    for (int it = 0; it < 100; ++it) {
        std::vector<bool> free(static_cast<std::size_t>(n));
        double pg = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool at_lo = p.rho(i) <= p.lower(i) && cur.gradient(i) > 0;
            const bool at_hi = p.rho(i) >= p.upper(i) && cur.gradient(i) < 0;
            free[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
            if (free[static_cast<std::size_t>(i)]) pg = std::max(pg, std::abs(cur.gradient(i)));
        }
        if (pg < 1e-7 * (1.0 + static_cast<double>(m.N))) break;

        Eigen::MatrixXd hess(n, n);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd up = p.rho, dn = p.rho;
            up(i) += h;
            dn(i) -= h;
            const auto su = eval(up), sd = eval(dn);
            if (!su.ok || !sd.ok) {
                hess.col(i).setZero();
                hess(i, i) = 1.0;
            } else {
                hess.col(i) = (su.gradient - sd.gradient) / (2.0 * h);
            }
        }
        hess = 0.5 * (hess + hess.transpose()).eval();
        for (Eigen::Index i = 0; i < n; ++i)
            if (!free[static_cast<std::size_t>(i)]) {
                hess.row(i).setZero();
                hess.col(i).setZero();
                hess(i, i) = 1.0;
            }
        Eigen::VectorXd g = cur.gradient;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!free[static_cast<std::size_t>(i)]) g(i) = 0.0;

        double mu = 0.0;
        Eigen::VectorXd step;
        for (int tries = 0; tries < 60; ++tries) {
            Eigen::MatrixXd damped = hess;
            damped.diagonal().array() += mu;
            Eigen::LLT<Eigen::MatrixXd> llt(damped);
            if (llt.info() == Eigen::Success) {
                step = -llt.solve(g);
                break;
            }
            mu = mu == 0.0 ? 1e-6 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff()) : mu * 10.0;
        }
        if (step.size() == 0) step = -g / (1.0 + g.cwiseAbs().maxCoeff());
        const double len = step.cwiseAbs().maxCoeff();
        if (len > 5.0) step *= 5.0 / len;

        bool moved = false;
        double t = 1.0;
        for (int half = 0; half < 30; ++half, t *= 0.5) {
            const Eigen::VectorXd trial_rho = clamp(p.rho + t * step);
            const auto trial = eval(trial_rho);
            if (trial.ok && std::isfinite(trial.reml) && trial.reml <= cur.reml) {
                const double gain = cur.reml - trial.reml;
                const double moved_by = (trial_rho - p.rho).cwiseAbs().maxCoeff();
                p.rho = trial_rho;
                cur = trial;
                moved = true;
                if (gain < 1e-12 * (1.0 + std::abs(cur.reml)) && moved_by < 1e-8) moved = false;
                break;
            }
        }
        if (!moved) break;
    }
    return p;
}

Model make_model(const FunctionalDataset& data, const Eigen::MatrixXd& phi, int beta0_size)
{
    const auto b = beta0_basis(data, beta0_size);
    Model m{data.values(), b.design, b.penalty, phi, static_cast<int>(b.design.cols()) - b.null_dim,
            data.family(), data.n_subjects(), data.n_points(), b.design.cols(), phi.cols()};
    return m;
}

void check_inputs(const FunctionalDataset& data, const FpcaBasis& basis)
{
    if (basis.eigenfunctions_full.rows() != data.n_points())
        throw ConfigError("eigenfunctions are not on the data grid: project them to the full grid first");
    const auto K = basis.eigenfunctions_full.cols();
    if (K < 1) throw ConfigError("need at least one eigenfunction");
    if (K > data.n_subjects() - 1)
        throw ConfigError("K=" + std::to_string(K) + " exceeds N-1=" + std::to_string(data.n_subjects() - 1));
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void finish(GfpcaFit& fit, const FunctionalDataset& data, const Eigen::MatrixXd& B)
{
    const auto K = fit.scores.cols();
    for (Eigen::Index k = 0; k < K; ++k)
        if (fit.score_vars(k) == 0.0) fit.scores.col(k).setZero();
    fit.beta0_full = B * fit.beta0_coefficients;
    fit.eta_full = fit.scores * fit.basis.eigenfunctions_full.transpose();
    fit.eta_full.rowwise() += fit.beta0_full.transpose();
    fit.fitted_means = fit.eta_full.unaryExpr([&](double e) { return data.family().inverse_link(e); });
    fit.subject_ids = data.subject_ids();
    fit.grid = data.grid();
    fit.family = data.family();
    fit.cyclic = data.cyclic();
}

} // namespace

Beta0Basis beta0_basis(const FunctionalDataset& data, int size)
{
    const auto coords = data.normalized_grid();
    Beta0Basis out;
    if (data.cyclic()) {
        if (size < 4) throw ConfigError("beta0 basis needs at least 4 functions");
        const auto b = BSplineBasis::periodic(0.0, 1.0, size);
        out.design = b.design(coords);
        out.difference = b.difference_matrix(2);
        out.penalty = out.difference.transpose() * out.difference;
        out.null_dim = b.penalty_null_dim(2);
    } else {
        if (size < 5) throw ConfigError("beta0 basis needs at least 5 functions");
        const auto b = BSplineBasis::open(0.0, 1.0, size - 4);
        out.design = b.design(coords);
        out.difference = b.difference_matrix(2);
        out.penalty = out.difference.transpose() * out.difference;
        out.null_dim = b.penalty_null_dim(2);
    }
    if (out.design.cols() > data.n_points())
        throw ConfigError("beta0 basis size exceeds the number of grid points");
    return out;
}

GfpcaFit refit_global(const FunctionalDataset& data, const FpcaBasis& basis, const RefitOptions& opts)
{
    check_inputs(data, basis);
    const auto t0 = std::chrono::steady_clock::now();
    const Model m = make_model(data, basis.eigenfunctions_full, opts.beta0_basis);
    const int K = static_cast<int>(m.K);

    Params p;
    p.K = K;
    p.has_dispersion = data.family().has_dispersion();
    p.rho = Eigen::VectorXd::Zero(1 + K + (p.has_dispersion ? 1 : 0));
    for (int k = 0; k < K; ++k) {
        const double init = basis.eigenvalues.size() > k ? basis.eigenvalues(k) : 1.0;
        p.rho(1 + k) = std::log(std::max(init, 1e-3));
    }
    if (p.has_dispersion) {
        const Eigen::MatrixXd centred = data.values().colwise() - data.values().rowwise().mean();
        p.rho(K + 1) = std::log(std::max(centred.squaredNorm() / static_cast<double>(m.N * m.J), 1e-8));
    }

    State st;
    st.alpha = Eigen::VectorXd::Zero(m.D);
    st.xi = Eigen::MatrixXd::Zero(m.N, K);
    if (data.family().family() == Family::gaussian) {
        // start from the mean level so the first PIRLS step is exact anyway
        st.alpha.setConstant(data.values().mean());
    }
    st.refresh(m);

    GfpcaFit fit;
    auto& diag = fit.diagnostics;
    diag.pirls_iterations += pirls(m, st, p, 0, opts.max_pirls_iterations, diag.deviance_trace);
    double pd_prev = penalized_deviance(m, st, p);

    int outer = 0;
    for (; outer < opts.max_outer_iterations; ++outer) {
        const auto ws = working_stats(m, st.eta);
        const Params next = optimize_reml(m, ws, p);
        const double moved = (next.rho - p.rho).cwiseAbs().maxCoeff();
        p = next;
        diag.pirls_iterations += pirls(m, st, p, outer + 1, opts.max_pirls_iterations, diag.deviance_trace);
        const double pd = penalized_deviance(m, st, p);
        const bool small = std::abs(pd - pd_prev) / (std::abs(pd) + 0.1) < opts.tolerance;
        pd_prev = pd;
        if (small && (outer > 0 || moved < 1e-6)) {
            diag.converged = true;
            ++outer;
            break;
        }
    }
    diag.outer_iterations = outer;

    fit.basis = basis;
    fit.beta0_coefficients = st.alpha;
    fit.log_lambda_beta = p.rho(0);
    fit.scores = st.xi;
    fit.score_vars.resize(K);
    for (int k = 0; k < K; ++k) {
        const double v = std::exp(p.rho(1 + k));
        fit.score_vars(k) = v < opts.variance_floor ? 0.0 : v;
    }
    fit.dispersion = p.dispersion();
    finish(fit, data, m.B);
    diag.times.step4 = seconds_since(t0);
    return fit;
}

GfpcaFit refit_global_subsampled(const FunctionalDataset& data, const FpcaBasis& basis, int n_subsamples,
                                 int subsample_size, std::uint64_t seed, const RefitOptions& opts)
{
    check_inputs(data, basis);
    if (n_subsamples < 1) throw ConfigError("n_subsamples must be >= 1");
    if (subsample_size < 1) throw ConfigError("subsample_size must be >= 1");
    if (static_cast<long>(n_subsamples) * subsample_size > data.n_subjects())
        throw ConfigError("n_subsamples x subsample_size exceeds the number of subjects");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.n_subjects()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto J = data.n_points();
    const auto K = basis.eigenfunctions_full.cols();
    GfpcaFit fit;
    fit.basis = basis;
    fit.beta0_coefficients.setZero(0);
    fit.score_vars = Eigen::VectorXd::Zero(K);
    fit.diagnostics.subsample_beta0.resize(J, n_subsamples);
    fit.diagnostics.converged = true;
    double log_lambda = 0.0, dispersion = 0.0;
    for (int s = 0; s < n_subsamples; ++s) {
        std::vector<Eigen::Index> rows(order.begin() + static_cast<long>(s) * subsample_size,
                                       order.begin() + static_cast<long>(s + 1) * subsample_size);
        std::sort(rows.begin(), rows.end());
        const auto part = refit_global(data.subset(rows), basis, opts);
        if (s == 0) fit.beta0_coefficients = Eigen::VectorXd::Zero(part.beta0_coefficients.size());
        fit.beta0_coefficients += part.beta0_coefficients / n_subsamples;
        fit.score_vars += part.score_vars / n_subsamples;
        log_lambda += part.log_lambda_beta / n_subsamples;
        dispersion += part.dispersion / n_subsamples;
        fit.diagnostics.subsample_beta0.col(s) = part.beta0_full;
        fit.diagnostics.converged = fit.diagnostics.converged && part.diagnostics.converged;
        fit.diagnostics.outer_iterations += part.diagnostics.outer_iterations;
        fit.diagnostics.pirls_iterations += part.diagnostics.pirls_iterations;
    }
    fit.log_lambda_beta = log_lambda;
    fit.dispersion = data.family().has_dispersion() ? dispersion : 1.0;

    const auto b = beta0_basis(data, static_cast<int>(fit.beta0_coefficients.size()));
    const Eigen::VectorXd beta0 = b.design * fit.beta0_coefficients;
    fit.scores = score_only_fit_all(data, beta0, basis.eigenfunctions_full, fit.score_vars, fit.dispersion,
                                    opts.score_tolerance);
    finish(fit, data, b.design);
    fit.diagnostics.times.step4 = seconds_since(t0);
    return fit;
}

Eigen::VectorXd score_only_fit(std::span<const double> subject_values, const Eigen::VectorXd& beta0,
                               const Eigen::MatrixXd& phi, const Eigen::VectorXd& score_vars, LinkFamily family,
                               double dispersion, double tolerance)
{
    const auto J = phi.rows();
    const auto K = phi.cols();
    if (static_cast<Eigen::Index>(subject_values.size()) != J || beta0.size() != J || score_vars.size() != K)
        throw ConfigError("score_only_fit: dimension mismatch");
    for (const double z : subject_values)
        if (!std::isfinite(z)) throw DataError("score_only_fit: non-finite observation");
    if (!beta0.allFinite() || !phi.allFinite() || !score_vars.allFinite())
        throw NumericalError("score_only_fit: non-finite inputs");

    std::vector<Eigen::Index> active;
    for (Eigen::Index k = 0; k < K; ++k)
        if (score_vars(k) > 0) active.push_back(k);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
    if (active.empty()) return out;

    const auto A = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd Phi(J, A);
    Eigen::VectorXd prec(A);
    for (Eigen::Index a = 0; a < A; ++a) {
        Phi.col(a) = phi.col(active[static_cast<std::size_t>(a)]);
        prec(a) = 1.0 / score_vars(active[static_cast<std::size_t>(a)]);
    }
    const Eigen::Map<const Eigen::VectorXd> z(subject_values.data(), J);

    auto objective = [&](const Eigen::VectorXd& xi) {
        const Eigen::VectorXd eta = beta0 + Phi * xi;
        double f = 0.0;
        for (Eigen::Index j = 0; j < J; ++j) f += family.log_density(z(j), eta(j), dispersion);
        return f - 0.5 * xi.cwiseProduct(xi).dot(prec);
    };

    Eigen::VectorXd xi = Eigen::VectorXd::Zero(A);
    double f = objective(xi);
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd eta = beta0 + Phi * xi;
        Eigen::VectorXd resid(J), w(J);
        for (Eigen::Index j = 0; j < J; ++j) {
            resid(j) = (z(j) - family.cumulant_d1(eta(j))) / dispersion;
            w(j) = family.cumulant_d2(eta(j)) / dispersion;
        }
        const Eigen::VectorXd grad = Phi.transpose() * resid - prec.cwiseProduct(xi);
        Eigen::MatrixXd info = Phi.transpose() * w.asDiagonal() * Phi;
        info.diagonal() += prec;
        const Eigen::VectorXd step = info.llt().solve(grad);

        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 50; ++half, t *= 0.5) {
            const Eigen::VectorXd cand = xi + t * step;
            const double fc = objective(cand);
            if (std::isfinite(fc) && fc >= f) {
                xi = cand;
                f = fc;
                accepted = true;
                break;
            }
        }
        if (!accepted || (t * step).cwiseAbs().maxCoeff() < tolerance) break;
    }
    for (Eigen::Index a = 0; a < A; ++a) out(active[static_cast<std::size_t>(a)]) = xi(a);
    return out;
}

Eigen::MatrixXd score_only_fit_all(const FunctionalDataset& data, const Eigen::VectorXd& beta0,
                                   const Eigen::MatrixXd& phi, const Eigen::VectorXd& score_vars, double dispersion,
                                   double tolerance)
{
    const auto N = data.n_subjects();
    Eigen::MatrixXd scores(N, phi.cols());
    const Eigen::MatrixXd zt = data.values().transpose();
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < N; ++i) {
        try {
            scores.row(i) = score_only_fit({zt.col(i).data(), static_cast<std::size_t>(zt.rows())}, beta0, phi,
                                           score_vars, data.family(), dispersion, tolerance)
                                .transpose();
        } catch (...) {
#pragma omp critical(fgfpca_score_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return scores;
}

Eigen::MatrixXd score_only_fit_all_serial(const FunctionalDataset& data, const Eigen::VectorXd& beta0,
                                          const Eigen::MatrixXd& phi, const Eigen::VectorXd& score_vars,
                                          double dispersion, double tolerance)
{
    const auto N = data.n_subjects();
    Eigen::MatrixXd scores(N, phi.cols());
    const Eigen::MatrixXd zt = data.values().transpose();
    for (Eigen::Index i = 0; i < N; ++i)
        scores.row(i) = score_only_fit({zt.col(i).data(), static_cast<std::size_t>(zt.rows())}, beta0, phi,
                                       score_vars, data.family(), dispersion, tolerance)
                            .transpose();
    return scores;
}

double penalized_loglik(const FunctionalDataset& data, const GfpcaFit& fit, const Eigen::VectorXd& beta0_coefficients,
                        const Eigen::MatrixXd& scores)
{
    const auto b = beta0_basis(data, static_cast<int>(beta0_coefficients.size()));
    const Eigen::VectorXd beta0 = b.design * beta0_coefficients;
    const Eigen::MatrixXd& phi = fit.basis.eigenfunctions_full;
    Eigen::MatrixXd eta = scores * phi.transpose();
    eta.rowwise() += beta0.transpose();
    const auto& z = data.values();
    double ll = 0.0;
    for (Eigen::Index j = 0; j < eta.cols(); ++j)
        for (Eigen::Index i = 0; i < eta.rows(); ++i) ll += data.family().log_density(z(i, j), eta(i, j), fit.dispersion);
    // |D a|^2 rather than a'Pa: the penalty weight can be ~1e9 with a nearly in the null space
    ll -= 0.5 * std::exp(fit.log_lambda_beta) * (b.difference * beta0_coefficients).squaredNorm();
    for (Eigen::Index k = 0; k < scores.cols(); ++k)
        if (fit.score_vars(k) > 0) ll -= 0.5 * scores.col(k).squaredNorm() / fit.score_vars(k);
    return ll;
}

} // namespace fgfpca
