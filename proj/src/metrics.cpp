#include "fgfpca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgfpca/errors.hpp"

namespace fgfpca {

Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid)
{
    const auto J = static_cast<Eigen::Index>(grid.size());
    if (J < 2) throw ConfigError("trapezoid weights need at least two grid points");
    const double span = grid.back() - grid.front();
    if (!(span > 0.0)) throw ConfigError("grid must be increasing");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(J);
    for (Eigen::Index j = 0; j + 1 < J; ++j) {
        const double h = (grid[static_cast<std::size_t>(j + 1)] - grid[static_cast<std::size_t>(j)]) / span;
        w(j) += 0.5 * h;
        w(j + 1) += 0.5 * h;
    }
    return w;
}

double mise_eta(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, const std::vector<double>& grid)
{
    if (est.rows() != truth.rows() || est.cols() != truth.cols())
        throw ConfigError("mise_eta: shape mismatch");
    if (est.cols() != static_cast<Eigen::Index>(grid.size())) throw ConfigError("mise_eta: grid length mismatch");
    if (est.rows() == 0) throw ConfigError("mise_eta: no subjects");
    const Eigen::VectorXd w = trapezoid_weights(grid);
    return ((est - truth).array().square().matrix() * w).mean();
}

PhiError mise_phi(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, const std::vector<double>& grid)
{
    if (est.cols() != truth.cols()) throw ConfigError("mise_phi: number of components differs");
    if (est.rows() != truth.rows() || est.rows() != static_cast<Eigen::Index>(grid.size()))
        throw ConfigError("mise_phi: grid length mismatch");
    if (est.cols() == 0) throw ConfigError("mise_phi: no components");
    const Eigen::VectorXd w = trapezoid_weights(grid);
    PhiError out{0.0, Eigen::VectorXd(est.cols())};
    for (Eigen::Index k = 0; k < est.cols(); ++k) {
        const double sign = est.col(k).cwiseProduct(w).dot(truth.col(k)) < 0 ? -1.0 : 1.0;
        out.per_component(k) = (sign * est.col(k) - truth.col(k)).array().square().matrix().dot(w);
    }
    out.overall = out.per_component.mean();
    return out;
}

double ise_beta0(const Eigen::VectorXd& est, const Eigen::VectorXd& truth, const std::vector<double>& grid)
{
    return mise_eta(est.transpose(), truth.transpose(), grid);
}

Predictive predictive_metrics(const Eigen::MatrixXd& labels, const Eigen::MatrixXd& probs)
{
    if (labels.rows() != probs.rows() || labels.cols() != probs.cols())
        throw ConfigError("predictive metrics: shape mismatch");
    const auto n = static_cast<std::size_t>(labels.size());
    std::vector<double> p(n);
    std::vector<int> y(n);
    double logloss = 0.0;
    std::size_t positives = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const double z = labels(static_cast<Eigen::Index>(c));
        if (z != 0.0 && z != 1.0) throw DataError("predictive metrics: labels must be 0 or 1");
        y[c] = static_cast<int>(z);
        positives += static_cast<std::size_t>(y[c]);
        p[c] = std::clamp(probs(static_cast<Eigen::Index>(c)), 1e-12, 1.0 - 1e-12);
        logloss -= z * std::log(p[c]) + (1.0 - z) * std::log1p(-p[c]);
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw DataError("AUC undefined: labels are all 0 or all 1");

    // Mann-Whitney: average ranks over ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && p[order[j]] == p[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t)
            if (y[order[t]] == 1) rank_sum += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
    const double auc = (rank_sum - np * (np + 1) / 2.0) / (np * nn);
    return {auc, logloss / static_cast<double>(n)};
}

nlohmann::json to_json(const EvalReport& r)
{
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) { j[key] = v ? nlohmann::json(*v) : nullptr; };
    put("mise_eta", r.mise_eta);
    put("mise_phi", r.mise_phi);
    j["mise_phi_per_k"] = std::vector<double>(r.mise_phi_per_k.data(), r.mise_phi_per_k.data() + r.mise_phi_per_k.size());
    put("ise_beta0", r.ise_beta0);
    put("auc", r.auc);
    put("logloss", r.logloss);
    j["time_step1"] = r.time_step1;
    j["time_step2"] = r.time_step2;
    j["time_step3"] = r.time_step3;
    j["time_step4"] = r.time_step4;
    j["time_total"] = r.time_total;
    return j;
}

} // namespace fgfpca
