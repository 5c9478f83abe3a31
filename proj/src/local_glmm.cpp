#include "fgfpca/local_glmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include <omp.h>

#include "fgfpca/bspline.hpp"
#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Subjects sharing a response sum share the whole likelihood up to a constant.
struct SumGroup {
    double sum;
    double count;
    std::vector<Eigen::Index> members;
    double mode = 0.0;
};

struct GroupEval {
    double loglik; // without data-only constants
    double mode;
    double g_beta, g_rho;
    double h_bb, h_rr, h_br;
};

// Mode of f(b) = y(beta+b) - n A(beta+b) - b^2/(2 sigma2), safeguarded Newton in a bracket.
double posterior_mode(double y, int n, double beta, double sigma2, LinkFamily family, double start)
{
    auto d1 = [&](double b) { return y - n * family.cumulant_d1(beta + b) - b / sigma2; };
    auto d2 = [&](double b) { return -n * family.cumulant_d2(beta + b) - 1.0 / sigma2; };

    double lo, hi;
    if (family.family() == Family::binomial) {
        lo = sigma2 * (y - n) - 1e-12;
        hi = sigma2 * y + 1e-12;
    } else {
        hi = sigma2 * y + 1e-12;
        lo = d1(0.0) >= 0 ? 0.0 : -sigma2 * n * std::exp(beta) - 1e-12;
    }
    double b = std::clamp(start, lo, hi);
    double last_step = hi - lo;
    for (int it = 0; it < 200; ++it) {
        const double g = d1(b);
        if (g > 0) lo = b;
        else hi = b;
        const double step = -g / d2(b);
        double next = b + step;
        // Far above the mode the Poisson branch is exponential and Newton crawls one unit per step.
        if (!(next > lo && next < hi) || 2.0 * std::abs(step) > std::abs(last_step)) next = 0.5 * (lo + hi);
        last_step = next - b;
        if (std::abs(next - b) <= 1e-13 * (1.0 + std::abs(b))) return next;
        b = next;
        if (hi - lo <= 1e-14 * (1.0 + std::abs(b))) break;
    }
    return b;
}

double cumulant_d3(LinkFamily family, double eta)
{
    switch (family.family()) {
    case Family::binomial: {
        const double mu = family.inverse_link(eta);
        return mu * (1.0 - mu) * (1.0 - 2.0 * mu);
    }
    case Family::poisson: return std::exp(eta);
    case Family::gaussian: return 0.0;
    }
    return 0.0;
}

GroupEval evaluate_group(double y, int n, double beta, double log_sigma, LinkFamily family,
                         const GaussHermiteRule& rule, double start)
{
    const double sigma2 = std::exp(2.0 * log_sigma);
    const double mode = posterior_mode(y, n, beta, sigma2, family, start);
    const double curvature = n * family.cumulant_d2(beta + mode) + 1.0 / sigma2;
    const double scale = std::sqrt(2.0 / curvature);

    const auto q = rule.nodes.size();
    Eigen::VectorXd nodes(q), logs(q);
    for (Eigen::Index k = 0; k < q; ++k) {
        const double b = mode + scale * rule.nodes(k);
        nodes(k) = b;
        const double eta = beta + b;
        logs(k) = rule.log_adjusted_weights(k) + y * eta - n * family.cumulant(eta) - 0.5 * b * b / sigma2;
    }
    const double top = logs.maxCoeff();
    const Eigen::VectorXd w = (logs.array() - top).exp();
    const double total = w.sum();
    const Eigen::VectorXd p = w / total;

    GroupEval ev{};
    ev.mode = mode;
    ev.loglik = top + std::log(total) + std::log(scale) - 0.5 * (kLog2Pi + 2.0 * log_sigma);

    // The nodes follow the mode and scale, so the exact gradient of the
    // quadrature sum picks up their derivatives as well.
    const double a3 = n * cumulant_d3(family, beta + mode);
    const double m_beta = -(curvature - 1.0 / sigma2) / curvature;
    const double m_rho = 2.0 * mode / (sigma2 * curvature);
    const double c_beta = a3 * (1.0 + m_beta);
    const double c_rho = a3 * m_rho - 2.0 / sigma2;
    const double s_beta = -0.5 * scale * c_beta / curvature;
    const double s_rho = -0.5 * scale * c_rho / curvature;

    double eb = 0, er = 0, ebb = 0, err = 0, ebr = 0, e2b = 0, e2r = 0, move_b = 0, move_r = 0;
    for (Eigen::Index k = 0; k < q; ++k) {
        const double b = nodes(k);
        const double gb = y - n * family.cumulant_d1(beta + b);
        const double gr = b * b / sigma2 - 1.0;
        const double slope = gb - b / sigma2;
        eb += p(k) * gb;
        er += p(k) * gr;
        ebb += p(k) * gb * gb;
        err += p(k) * gr * gr;
        ebr += p(k) * gb * gr;
        e2b += p(k) * (-n * family.cumulant_d2(beta + b));
        e2r += p(k) * (-2.0 * b * b / sigma2);
        move_b += p(k) * slope * (m_beta + rule.nodes(k) * s_beta);
        move_r += p(k) * slope * (m_rho + rule.nodes(k) * s_rho);
    }
    ev.g_beta = eb + move_b + s_beta / scale;
    ev.g_rho = er + move_r + s_rho / scale;
    ev.h_bb = e2b + ebb - eb * eb;
    ev.h_rr = e2r + err - er * er;
    ev.h_br = ebr - eb * er;
    return ev;
}

LocalFit fit_gaussian(const BinStatistics& st, std::size_t n_subjects)
{
    LocalFit fit;
    const auto N = static_cast<double>(n_subjects);
    const double n = st.n_obs;
    const Eigen::VectorXd means = st.sums / n;
    const double grand = means.mean();
    const double ssb = n * (means.array() - grand).square().sum();
    const double ssw = st.within_ss.sum();

    double sb2 = 0.0;
    double se2 = 0.0;
    if (st.n_obs >= 2) {
        const double msw = ssw / (N * (n - 1.0));
        const double msb = ssb / (N - 1.0);
        if (msb > msw) {
            sb2 = (msb - msw) / n;
            se2 = msw;
        } else {
            se2 = (ssw + ssb) / (N * n - 1.0);
        }
    } else {
        sb2 = ssb / (N - 1.0);
    }

    double shrink = 0.0;
    if (sb2 > 0) shrink = sb2 / (sb2 + se2 / n);
    fit.beta0 = grand;
    fit.sigma2 = sb2;
    fit.b = shrink * (means.array() - grand).matrix();
    fit.subject_loglik.resize(static_cast<Eigen::Index>(n_subjects));
    const double total_var = se2 + n * sb2;
    for (Eigen::Index i = 0; i < fit.b.size(); ++i) {
        const double dev = means(i) - grand;
        double ll = n * kLog2Pi + std::log(total_var) + n * dev * dev / total_var;
        if (st.n_obs >= 2) ll += (n - 1.0) * std::log(se2) + st.within_ss(i) / se2;
        fit.subject_loglik(i) = -0.5 * ll;
    }
    fit.loglik = fit.subject_loglik.sum();
    fit.converged = true;
    fit.degenerate = ssb == 0.0 && ssw == 0.0;
    fit.at_sigma_boundary = sb2 == 0.0;
    return fit;
}

bool is_degenerate(const BinStatistics& st, LinkFamily family)
{
    const double lo = st.sums.minCoeff();
    const double hi = st.sums.maxCoeff();
    if (family.family() == Family::binomial) return hi == 0.0 || lo == st.n_obs;
    return hi == 0.0;
}

} // namespace

BinStatistics bin_statistics(const FunctionalDataset& data, std::span<const std::size_t> bin)
{
    if (bin.empty()) throw ConfigError("empty bin");
    const auto N = data.n_subjects();
    BinStatistics st;
    st.n_obs = static_cast<int>(bin.size());
    st.sums = Eigen::VectorXd::Zero(N);
    st.constants = Eigen::VectorXd::Zero(N);
    const auto& z = data.values();
    for (const auto j : bin) st.sums += z.col(static_cast<Eigen::Index>(j));
    if (data.family().family() == Family::poisson) {
        for (Eigen::Index i = 0; i < N; ++i)
            for (const auto j : bin) st.constants(i) -= std::lgamma(z(i, static_cast<Eigen::Index>(j)) + 1.0);
    }
    if (data.family().family() == Family::gaussian) {
        st.within_ss = Eigen::VectorXd::Zero(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double m = st.sums(i) / st.n_obs;
            for (const auto j : bin) {
                const double r = z(i, static_cast<Eigen::Index>(j)) - m;
                st.within_ss(i) += r * r;
            }
        }
    }
    return st;
}

double subject_marginal_loglik(double sum, int n_obs, double constant, double beta, double sigma2,
                               LinkFamily family, int quadrature_nodes)
{
    if (family.family() == Family::gaussian)
        throw ConfigError("subject_marginal_loglik: gaussian marginals are available in closed form");
    const auto rule = gauss_hermite(quadrature_nodes);
    return constant + evaluate_group(sum, n_obs, beta, 0.5 * std::log(sigma2), family, rule, 0.0).loglik;
}

LocalFit fit_local_glmm(const FunctionalDataset& data, std::span<const std::size_t> bin, const LocalGlmmOptions& opts)
{
    if (data.n_subjects() < 2) throw DataError("local mixed model needs at least 2 subjects");
    const LinkFamily family = data.family();
    BinStatistics st = bin_statistics(data, bin);
    if (family.family() == Family::gaussian) return fit_gaussian(st, static_cast<std::size_t>(data.n_subjects()));

    LocalFit fit;
    fit.degenerate = is_degenerate(st, family);
    if (opts.policy == DegeneracyPolicy::augment && family.family() == Family::binomial) {
        st.sums.array() += 2.0;
        st.n_obs += 4;
    }
    const int n = st.n_obs;
    const double bound = opts.linpred_bound;

    std::map<double, SumGroup> by_sum;
    for (Eigen::Index i = 0; i < st.sums.size(); ++i) {
        auto& g = by_sum[st.sums(i)];
        g.sum = st.sums(i);
        g.count += 1.0;
        g.members.push_back(i);
    }
    std::vector<SumGroup> groups;
    groups.reserve(by_sum.size());
    for (auto& [_, g] : by_sum) groups.push_back(std::move(g));

    const auto rule = gauss_hermite(opts.quadrature_nodes);

    // GLM intercept ignoring the random effect
    const double mean = st.sums.mean() / n;
    double beta = family.family() == Family::binomial ? family.link(std::clamp(mean, 1e-6, 1.0 - 1e-6))
                                                      : std::log(std::max(mean, 1e-6));
    beta = std::clamp(beta, -bound, bound);
    double rho = std::clamp(opts.initial_log_sigma, opts.log_sigma_min, opts.log_sigma_max);

    struct Totals {
        double f, gb, gr, hbb, hrr, hbr;
    };
    auto evaluate = [&](double b0, double r, bool keep_modes) {
        Totals t{};
        for (auto& g : groups) {
            const auto ev = evaluate_group(g.sum, n, b0, r, family, rule, g.mode);
            if (keep_modes) g.mode = ev.mode;
            t.f += g.count * ev.loglik;
            t.gb += g.count * ev.g_beta;
            t.gr += g.count * ev.g_rho;
            t.hbb += g.count * ev.h_bb;
            t.hrr += g.count * ev.h_rr;
            t.hbr += g.count * ev.h_br;
        }
        return t;
    };

    auto projected = [&](double b0, double r, double gb, double gr) {
        if ((b0 <= -bound && gb < 0) || (b0 >= bound && gb > 0)) gb = 0;
        if ((r <= opts.log_sigma_min && gr < 0) || (r >= opts.log_sigma_max && gr > 0)) gr = 0;
        return std::max(std::abs(gb), std::abs(gr));
    };

    // With few nodes the Louis-identity curvature drops most of its variance terms; difference the
    // exact gradient instead.
    const bool fd_hessian = rule.nodes.size() < 5;
    auto curvature = [&](Totals& t, double b0, double r) {
        if (!fd_hessian) return;
        const double h = 1e-4;
        const Totals bp = evaluate(b0 + h, r, false), bm = evaluate(b0 - h, r, false);
        const Totals rp = evaluate(b0, r + h, false), rm = evaluate(b0, r - h, false);
        t.hbb = (bp.gb - bm.gb) / (2 * h);
        t.hrr = (rp.gr - rm.gr) / (2 * h);
        t.hbr = 0.25 * ((bp.gr - bm.gr) + (rp.gb - rm.gb)) / h;
    };

    Totals cur = evaluate(beta, rho, true);
    curvature(cur, beta, rho);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (projected(beta, rho, cur.gb, cur.gr) < opts.tolerance) {
            fit.converged = true;
            break;
        }
        const bool free_b = !((beta <= -bound && cur.gb < 0) || (beta >= bound && cur.gb > 0));
        const bool free_r = !((rho <= opts.log_sigma_min && cur.gr < 0) || (rho >= opts.log_sigma_max && cur.gr > 0));

        double db = 0, dr = 0;
        const double det = cur.hbb * cur.hrr - cur.hbr * cur.hbr;
        if (free_b && free_r && cur.hbb < 0 && det > 0) {
            db = -(cur.hrr * cur.gb - cur.hbr * cur.gr) / det;
            dr = -(-cur.hbr * cur.gb + cur.hbb * cur.gr) / det;
        } else {
            if (free_b) db = cur.hbb < 0 ? -cur.gb / cur.hbb : cur.gb / (1.0 + std::abs(cur.hbb));
            if (free_r) dr = cur.hrr < 0 ? -cur.gr / cur.hrr : cur.gr / (1.0 + std::abs(cur.hrr));
        }
        // keep steps in a trust region of the link scale
        const double len = std::max(std::abs(db), std::abs(dr));
        if (len > 2.0) {
            db *= 2.0 / len;
            dr *= 2.0 / len;
        }

        double t = 1.0;
        bool moved = false;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
            const double nb = std::clamp(beta + t * db, -bound, bound);
            const double nr = std::clamp(rho + t * dr, opts.log_sigma_min, opts.log_sigma_max);
            if (nb == beta && nr == rho) break;
            const Totals trial = evaluate(nb, nr, false);
            if (std::isfinite(trial.f) && trial.f >= cur.f - 1e-12 * std::abs(cur.f)) {
                beta = nb;
                rho = nr;
                cur = evaluate(beta, rho, true);
                curvature(cur, beta, rho);
                moved = true;
                break;
            }
        }
        if (!moved) {
            fit.converged = projected(beta, rho, cur.gb, cur.gr) < 1e3 * opts.tolerance;
            break;
        }
    }
    if (it == opts.max_iterations && !fit.converged)
        fit.converged = projected(beta, rho, cur.gb, cur.gr) < opts.tolerance;

    fit.iterations = it;
    fit.beta0 = beta;
    fit.sigma2 = std::exp(2.0 * rho);
    fit.at_sigma_boundary = rho <= opts.log_sigma_min || rho >= opts.log_sigma_max;
    fit.b.resize(st.sums.size());
    fit.subject_loglik.resize(st.sums.size());
    for (const auto& g : groups) {
        const auto ev = evaluate_group(g.sum, n, beta, rho, family, rule, g.mode);
        for (const auto i : g.members) {
            fit.b(i) = std::clamp(beta + ev.mode, -bound, bound) - beta;
            fit.subject_loglik(i) = ev.loglik + st.constants(i);
        }
    }
    fit.loglik = fit.subject_loglik.sum();
    return fit;
}

namespace {

LatentEstimates assemble(const FunctionalDataset& data, const BinSpec& bins, std::vector<LocalFit>& fits)
{
    LatentEstimates out;
    out.midpoints = bins.midpoints;
    out.cyclic = bins.cyclic;
    const auto coords = data.normalized_grid();
    for (const auto m : bins.midpoints) out.coordinates.push_back(coords[m]);
    const auto L = static_cast<Eigen::Index>(bins.size());
    out.eta.resize(data.n_subjects(), L);
    out.beta0.resize(L);
    out.sigma2.resize(L);
    out.converged.resize(bins.size());
    for (Eigen::Index l = 0; l < L; ++l) {
        auto& f = fits[static_cast<std::size_t>(l)];
        f.bin = static_cast<std::size_t>(l);
        out.eta.col(l) = (f.b.array() + f.beta0).matrix();
        out.beta0(l) = f.beta0;
        out.sigma2(l) = f.sigma2;
        out.converged[static_cast<std::size_t>(l)] = f.converged;
        if (!f.converged) ++out.n_failed;
        if (f.degenerate) ++out.n_degenerate;
    }
    if (!out.eta.allFinite()) throw NumericalError("local fits produced non-finite linear predictors");
    return out;
}

void check_bins(const FunctionalDataset& data, const BinSpec& bins)
{
    if (bins.n_points != static_cast<std::size_t>(data.n_points()))
        throw ConfigError("bins were built for J=" + std::to_string(bins.n_points) + " but the data have J=" +
                          std::to_string(data.n_points()));
}

} // namespace

LatentEstimates fit_all_bins(const FunctionalDataset& data, const BinSpec& bins, const LocalGlmmOptions& opts)
{
    check_bins(data, bins);
    std::vector<LocalFit> fits(bins.size());
    const auto L = static_cast<long>(bins.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4)
    for (long l = 0; l < L; ++l) {
        try {
            fits[static_cast<std::size_t>(l)] = fit_local_glmm(data, bins.bins[static_cast<std::size_t>(l)], opts);
        } catch (...) {
#pragma omp critical(fgfpca_local_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return assemble(data, bins, fits);
}

LatentEstimates fit_all_bins_serial(const FunctionalDataset& data, const BinSpec& bins, const LocalGlmmOptions& opts)
{
    check_bins(data, bins);
    std::vector<LocalFit> fits;
    fits.reserve(bins.size());
    for (const auto& bin : bins.bins) fits.push_back(fit_local_glmm(data, bin, opts));
    return assemble(data, bins, fits);
}

} // namespace fgfpca
