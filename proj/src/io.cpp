#include "fgfpca/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace fs = std::filesystem;

namespace {

std::string num(double v)
{
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

double parse_double(const std::string& s, const fs::path& file)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError(file.string() + ": not a number: '" + s + "'");
    return v;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Table read_table(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto f = split(line);
        if (f.size() != t.header.size())
            throw DataError(path.string() + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                            std::to_string(f.size()) + " fields, expected " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(f));
    }
    return t;
}

void write_matrix_file(const fs::path& path, const std::string& header, const std::vector<std::string>& keys,
                       const std::vector<double>* grid, const Eigen::MatrixXd& m)
{
    std::ostringstream out;
    out << header << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << keys[static_cast<std::size_t>(r)];
        if (grid) out << ',' << num((*grid)[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << num(m(r, c));
        out << '\n';
    }
    write_text_atomic(path, out.str());
}

std::vector<std::string> index_keys(Eigen::Index n)
{
    std::vector<std::string> keys;
    for (Eigen::Index j = 0; j < n; ++j) keys.push_back(std::to_string(j + 1));
    return keys;
}

std::string columns(const char* prefix, Eigen::Index k)
{
    std::string s;
    for (Eigen::Index c = 0; c < k; ++c) s += std::string(",") + prefix + std::to_string(c + 1);
    return s;
}

void write_fitted(const fs::path& path, const std::vector<std::string>& ids, const Eigen::MatrixXd& eta,
                  const Eigen::MatrixXd& means)
{
    std::ostringstream out;
    out << "id,s_index,eta,mean\n";
    for (Eigen::Index i = 0; i < eta.rows(); ++i)
        for (Eigen::Index j = 0; j < eta.cols(); ++j)
            out << ids[static_cast<std::size_t>(i)] << ',' << (j + 1) << ',' << num(eta(i, j)) << ','
                << num(means(i, j)) << '\n';
    write_text_atomic(path, out.str());
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

std::vector<std::string> fit_file_names()
{
    return {"scores.csv", "beta0.csv", "eigenfunctions.csv", "eigenvalues.csv", "fitted.csv", "fit.json"};
}

void write_fit(const fs::path& dir, const GfpcaFit& fit)
{
    fs::create_directories(dir);
    const auto K = fit.scores.cols();
    const auto J = static_cast<Eigen::Index>(fit.grid.size());
    write_matrix_file(dir / "scores.csv", "id" + columns("xi_", K), fit.subject_ids, nullptr, fit.scores);
    write_matrix_file(dir / "beta0.csv", "s_index,s,beta0", index_keys(J), &fit.grid, fit.beta0_full);
    write_matrix_file(dir / "eigenfunctions.csv", "s_index,s" + columns("phi_", K), index_keys(J), &fit.grid,
                      fit.basis.eigenfunctions_full);

    {
        std::ostringstream out;
        out << "k,eigenvalue,score_variance,pve\n";
        const auto& ev = fit.basis.positive_eigenvalues;
        const double total = ev.size() ? ev.sum() : 0.0;
        double cum = 0.0;
        for (Eigen::Index k = 0; k < K; ++k) {
            const double lam = k < fit.basis.eigenvalues.size() ? fit.basis.eigenvalues(k) : 0.0;
            cum += lam;
            out << (k + 1) << ',' << num(lam) << ',' << num(fit.score_vars(k)) << ','
                << num(total > 0 ? cum / total : 0.0) << '\n';
        }
        write_text_atomic(dir / "eigenvalues.csv", out.str());
    }
    write_fitted(dir / "fitted.csv", fit.subject_ids, fit.eta_full, fit.fitted_means);

    const auto& d = fit.diagnostics;
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& s : d.deviance_trace) trace.push_back({{"phase", s.phase}, {"value", s.value}});
    auto minutes = [](double sec) { return sec / 60.0; };
    nlohmann::json j{
        {"family", std::string(fit.family.name())},
        {"cyclic", fit.cyclic},
        {"n_subjects", fit.scores.rows()},
        {"n_points", J},
        {"npc", K},
        {"pve_target", fit.basis.pve_target},
        {"dispersion", fit.dispersion},
        {"log_lambda_beta0", fit.log_lambda_beta},
        {"beta0_coefficients", to_vector(fit.beta0_coefficients)},
        {"score_variances", to_vector(fit.score_vars)},
        {"smoothing",
         {{"nknots", fit.basis.nknots},
          {"log_lambda_mean", fit.basis.log_lambda_mean},
          {"log_lambda_cov", fit.basis.log_lambda_cov},
          {"gcv_fallback", fit.basis.gcv_fallback}}},
        {"diagnostics",
         {{"outer_iterations", d.outer_iterations},
          {"pirls_iterations", d.pirls_iterations},
          {"converged", d.converged},
          {"n_bins", d.n_bins},
          {"failed_bins", d.failed_bins},
          {"degenerate_bins", d.degenerate_bins},
          {"warnings", d.warnings},
          {"deviance_trace", trace}}},
        {"times_seconds",
         {{"step1", d.times.step1},
          {"step2", d.times.step2},
          {"step3", d.times.step3},
          {"step4", d.times.step4},
          {"total", d.times.total}}},
        {"times_minutes",
         {{"step1", minutes(d.times.step1)},
          {"step2", minutes(d.times.step2)},
          {"step3", minutes(d.times.step3)},
          {"step4", minutes(d.times.step4)},
          {"total", minutes(d.times.total)}}},
    };
    write_text_atomic(dir / "fit.json", j.dump(2) + "\n");
}

void write_plot_csv(const fs::path& path, const GfpcaFit& fit)
{
    std::ostringstream out;
    out << "panel,series,s,value\n";
    const auto J = static_cast<Eigen::Index>(fit.grid.size());
    for (Eigen::Index j = 0; j < J; ++j)
        out << "beta0,beta0," << num(fit.grid[static_cast<std::size_t>(j)]) << ',' << num(fit.beta0_full(j)) << '\n';
    for (Eigen::Index k = 0; k < fit.basis.eigenfunctions_full.cols(); ++k)
        for (Eigen::Index j = 0; j < J; ++j)
            out << "eigenfunction,phi_" << (k + 1) << ',' << num(fit.grid[static_cast<std::size_t>(j)]) << ','
                << num(fit.basis.eigenfunctions_full(j, k)) << '\n';
    for (Eigen::Index i = 0; i < fit.eta_full.rows(); ++i)
        for (Eigen::Index j = 0; j < J; ++j)
            out << "fitted_mean," << fit.subject_ids[static_cast<std::size_t>(i)] << ','
                << num(fit.grid[static_cast<std::size_t>(j)]) << ',' << num(fit.fitted_means(i, j)) << '\n';
    write_text_atomic(path, out.str());
}

void write_truth(const fs::path& dir, const SimTruth& truth, const FunctionalDataset& data)
{
    fs::create_directories(dir);
    const auto K = truth.phi.cols();
    const auto J = data.n_points();
    write_matrix_file(dir / "scores.csv", "id" + columns("xi_", K), data.subject_ids(), nullptr, truth.scores);
    write_matrix_file(dir / "beta0.csv", "s_index,s,beta0", index_keys(J), &data.grid(), truth.beta0);
    write_matrix_file(dir / "eigenfunctions.csv", "s_index,s" + columns("phi_", K), index_keys(J), &data.grid(),
                      truth.phi);
    {
        std::ostringstream out;
        out << "k,eigenvalue\n";
        for (Eigen::Index k = 0; k < K; ++k) out << (k + 1) << ',' << num(truth.eigenvalues(k)) << '\n';
        write_text_atomic(dir / "eigenvalues.csv", out.str());
    }
    const Eigen::MatrixXd means = truth.eta.unaryExpr([&](double e) { return data.family().inverse_link(e); });
    write_fitted(dir / "fitted.csv", data.subject_ids(), truth.eta, means);
    nlohmann::json j{{"truth", true},
                     {"family", std::string(data.family().name())},
                     {"cyclic", data.cyclic()},
                     {"n_subjects", data.n_subjects()},
                     {"n_points", J},
                     {"npc", K},
                     {"eigenvalues", to_vector(truth.eigenvalues)}};
    write_text_atomic(dir / "fit.json", j.dump(2) + "\n");
}

CurveSet read_curves(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    CurveSet c;

    const auto beta = read_table(dir / "beta0.csv");
    const auto J = static_cast<Eigen::Index>(beta.rows.size());
    if (J < 2 || beta.header.size() != 3) throw DataError((dir / "beta0.csv").string() + ": malformed");
    c.beta0.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) {
        c.grid.push_back(parse_double(beta.rows[static_cast<std::size_t>(j)][1], dir / "beta0.csv"));
        c.beta0(j) = parse_double(beta.rows[static_cast<std::size_t>(j)][2], dir / "beta0.csv");
    }

    const auto ef = read_table(dir / "eigenfunctions.csv");
    if (static_cast<Eigen::Index>(ef.rows.size()) != J || ef.header.size() < 2)
        throw DataError((dir / "eigenfunctions.csv").string() + ": expected " + std::to_string(J) + " rows");
    const auto K = static_cast<Eigen::Index>(ef.header.size()) - 2;
    c.phi.resize(J, K);
    for (Eigen::Index j = 0; j < J; ++j)
        for (Eigen::Index k = 0; k < K; ++k)
            c.phi(j, k) = parse_double(ef.rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(k + 2)],
                                       dir / "eigenfunctions.csv");

    const auto fitted = read_table(dir / "fitted.csv");
    if (fitted.header.size() != 4) throw DataError((dir / "fitted.csv").string() + ": malformed header");
    if (fitted.rows.size() % static_cast<std::size_t>(J) != 0)
        throw DataError((dir / "fitted.csv").string() + ": row count is not a multiple of J");
    const auto N = static_cast<Eigen::Index>(fitted.rows.size()) / J;
    c.eta.resize(N, J);
    c.means.resize(N, J);
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < J; ++j) {
            const auto& r = fitted.rows[static_cast<std::size_t>(i * J + j)];
            if (j == 0) c.subject_ids.push_back(r[0]);
            else if (r[0] != c.subject_ids.back())
                throw DataError((dir / "fitted.csv").string() + ": rows for subject " + r[0] + " are not contiguous");
            c.eta(i, j) = parse_double(r[2], dir / "fitted.csv");
            c.means(i, j) = parse_double(r[3], dir / "fitted.csv");
        }
    }

    std::ifstream in(dir / "fit.json");
    if (in) {
        try {
            c.fit_json = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw DataError((dir / "fit.json").string() + ": " + e.what());
        }
    }
    return c;
}

void write_text_atomic(const fs::path& path, const std::string& content)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string sha256_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256: digest initialisation failed");
    }
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int b = 0; b < len; ++b) {
        out.push_back(hex[md[b] >> 4]);
        out.push_back(hex[md[b] & 15]);
    }
    return out;
}

} // namespace fgfpca
