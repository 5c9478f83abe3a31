#include "fgfpca/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "fgfpca/data.hpp"
#include "fgfpca/errors.hpp"
#include "fgfpca/io.hpp"
#include "fgfpca/metrics.hpp"
#include "fgfpca/pipeline.hpp"
#include "fgfpca/simulation.hpp"

#ifndef FGFPCA_VERSION
#define FGFPCA_VERSION "0.0.0"
#endif

namespace fgfpca::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

template <class T>
T get(const json& j, const char* key)
{
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

DegeneracyPolicy parse_policy(const std::string& s)
{
    if (s == "clamp") return DegeneracyPolicy::clamp;
    if (s == "augment") return DegeneracyPolicy::augment;
    throw ConfigError("policy: expected clamp or augment, got '" + s + "'");
}

// Everything `fit` needs besides the data.
struct FitSettings {
    std::string data;
    std::string family = "binomial";
    std::string out;
    std::string plot_csv;
    bool cyclic = false;
    PipelineConfig pipeline;
};

void apply_config(const json& j, FitSettings& s)
{
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    auto& p = s.pipeline;
    for (const auto& [key, value] : j.items()) {
        if (key == "data") s.data = get<std::string>(j, "data");
        else if (key == "family") s.family = get<std::string>(j, "family");
        else if (key == "out") s.out = get<std::string>(j, "out");
        else if (key == "width") p.width = get<int>(j, "width");
        else if (key == "overlap") p.overlap = get<bool>(j, "overlap");
        else if (key == "cyclic") s.cyclic = get<bool>(j, "cyclic");
        else if (key == "pve") p.pve = get<double>(j, "pve");
        else if (key == "npc") {
            if (value.is_null()) p.npc.reset();
            else p.npc = get<int>(j, "npc");
        } else if (key == "nknots") p.smoothing.nknots = get<int>(j, "nknots");
        else if (key == "quadrature_nodes") p.local.quadrature_nodes = get<int>(j, "quadrature_nodes");
        else if (key == "policy") p.local.policy = parse_policy(get<std::string>(j, "policy"));
        else if (key == "beta0_basis") p.refit.beta0_basis = get<int>(j, "beta0_basis");
        else if (key == "modified") p.modified.enabled = get<bool>(j, "modified");
        else if (key == "subsamples") p.modified.n_subsamples = get<int>(j, "subsamples");
        else if (key == "subsample_size") p.modified.subsample_size = get<int>(j, "subsample_size");
        else if (key == "seed") p.seed = get<std::uint64_t>(j, "seed");
        else if (key == "max_failed_bin_fraction") p.max_failed_bin_fraction = get<double>(j, "max_failed_bin_fraction");
        else throw ConfigError("config: unknown field '" + key + "'");
    }
}

json resolved(const FitSettings& s)
{
    const auto& p = s.pipeline;
    return json{{"data", s.data},
                {"family", s.family},
                {"out", s.out},
                {"width", p.width},
                {"overlap", p.overlap},
                {"cyclic", s.cyclic},
                {"pve", p.pve},
                {"npc", p.npc ? json(*p.npc) : json(nullptr)},
                {"nknots", p.smoothing.nknots},
                {"quadrature_nodes", p.local.quadrature_nodes},
                {"policy", p.local.policy == DegeneracyPolicy::clamp ? "clamp" : "augment"},
                {"beta0_basis", p.refit.beta0_basis},
                {"modified", p.modified.enabled},
                {"subsamples", p.modified.n_subsamples},
                {"subsample_size", p.modified.subsample_size},
                {"seed", p.seed},
                {"max_failed_bin_fraction", p.max_failed_bin_fraction}};
}

json times_json(const StepTimes& t)
{
    return json{{"step1", t.step1}, {"step2", t.step2}, {"step3", t.step3}, {"step4", t.step4}, {"total", t.total}};
}

int cmd_fit(CLI::App& app, const FitSettings& flags, const std::string& config_path)
{
    FitSettings s;
    if (!config_path.empty()) apply_config(read_json_file(config_path), s);
    auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--data")) s.data = flags.data;
    if (given("--family")) s.family = flags.family;
    if (given("--out")) s.out = flags.out;
    if (given("--plot-csv")) s.plot_csv = flags.plot_csv;
    if (given("--width")) s.pipeline.width = flags.pipeline.width;
    if (given("--overlap") || given("--no-overlap")) s.pipeline.overlap = flags.pipeline.overlap;
    if (given("--cyclic")) s.cyclic = flags.cyclic;
    if (given("--pve")) {
        s.pipeline.pve = flags.pipeline.pve;
        s.pipeline.npc.reset();
    }
    if (given("--npc")) s.pipeline.npc = flags.pipeline.npc;
    if (given("--nknots")) s.pipeline.smoothing.nknots = flags.pipeline.smoothing.nknots;
    if (given("--policy")) s.pipeline.local.policy = flags.pipeline.local.policy;
    if (given("--modified")) s.pipeline.modified.enabled = true;
    if (given("--subsamples")) s.pipeline.modified.n_subsamples = flags.pipeline.modified.n_subsamples;
    if (given("--subsample-size")) s.pipeline.modified.subsample_size = flags.pipeline.modified.subsample_size;
    if (given("--seed")) s.pipeline.seed = flags.pipeline.seed;

    if (s.data.empty()) throw ConfigError("--data is required");
    if (s.out.empty()) throw ConfigError("--out is required");
    const auto family = LinkFamily::parse(s.family);
    if (s.pipeline.width % 2 != 0) throw ConfigError("width must be even");

    const auto data = load_long_csv(s.data, family, s.cyclic);
    const auto fit = fast_gfpca(data, s.pipeline);

    const fs::path out(s.out);
    write_fit(out, fit);
    auto outputs = fit_file_names();
    if (!s.plot_csv.empty()) {
        write_plot_csv(s.plot_csv, fit);
        outputs.push_back(s.plot_csv);
    }
    outputs.emplace_back("manifest.json");
    for (const auto& w : fit.diagnostics.warnings) std::cerr << "warning: " << w << '\n';

    const json manifest{{"tool", "fgfpca"},
                        {"version", FGFPCA_VERSION},
                        {"command", "fit"},
                        {"config", resolved(s)},
                        {"seed", s.pipeline.seed},
                        {"inputs", json::array({{{"path", s.data}, {"sha256", sha256_file(s.data)}}})},
                        {"outputs", outputs},
                        {"times_seconds", times_json(fit.diagnostics.times)}};
    write_text_atomic(out / "manifest.json", manifest.dump(2) + "\n");

    const json summary{{"status", "ok"},
                       {"out", s.out},
                       {"n_subjects", data.n_subjects()},
                       {"n_points", data.n_points()},
                       {"npc", fit.npc()},
                       {"converged", fit.diagnostics.converged},
                       {"failed_bins", fit.diagnostics.failed_bins},
                       {"times_seconds", times_json(fit.diagnostics.times)}};
    std::cout << summary.dump() << '\n';
    return kExitOk;
}

struct Method {
    std::string name;
    int width;
    bool overlap;
};

std::vector<Method> parse_methods(const std::string& list)
{
    std::vector<Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto dash = item.rfind('-');
        if (dash == std::string::npos) throw ConfigError("methods: expected overlap-<w> or nonoverlap-<w>, got '" + item + "'");
        const auto kind = item.substr(0, dash);
        if (kind != "overlap" && kind != "nonoverlap")
            throw ConfigError("methods: expected overlap-<w> or nonoverlap-<w>, got '" + item + "'");
        int w = 0;
        try {
            std::size_t used = 0;
            w = std::stoi(item.substr(dash + 1), &used);
            if (used != item.size() - dash - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("methods: bad width in '" + item + "'");
        }
        if (w % 2 != 0) throw ConfigError("width must be even (method '" + item + "')");
        out.push_back({item, w, kind == "overlap"});
    }
    if (out.empty()) throw ConfigError("methods: empty list");
    return out;
}

struct ResultRow {
    std::string method;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::string status = "ok";
    EvalReport report;
};

double median(std::vector<double> v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string cell(const std::optional<double>& v)
{
    if (!v) return "";
    std::ostringstream os;
    os.precision(10);
    os << *v;
    return os.str();
}

EvalReport evaluate_fit(const GfpcaFit& fit, const FunctionalDataset& data, const SimTruth& truth)
{
    EvalReport r;
    r.mise_eta = mise_eta(fit.eta_full, truth.eta, data.grid());
    const auto K = std::min(fit.basis.eigenfunctions_full.cols(), truth.phi.cols());
    const auto pe = mise_phi(fit.basis.eigenfunctions_full.leftCols(K), truth.phi.leftCols(K), data.grid());
    r.mise_phi = pe.overall;
    r.mise_phi_per_k = pe.per_component;
    r.ise_beta0 = ise_beta0(fit.beta0_full, truth.beta0, data.grid());
    if (data.family().family() == Family::binomial) {
        const auto pm = predictive_metrics(data.values(), fit.fitted_means);
        r.auc = pm.auc;
        r.logloss = pm.logloss;
    }
    const auto& t = fit.diagnostics.times;
    r.time_step1 = t.step1;
    r.time_step2 = t.step2;
    r.time_step3 = t.step3;
    r.time_step4 = t.step4;
    r.time_total = t.total;
    return r;
}

int cmd_simulate(const std::string& scenario_path, int replicates, const std::string& methods_list,
                 const std::string& out_dir, std::optional<std::uint64_t> seed, int npc, int jobs)
{
    SimScenario base;
    from_json(read_json_file(scenario_path), base);
    if (replicates < 1) throw ConfigError("replicates must be positive");
    if (out_dir.empty()) throw ConfigError("--out is required");
    const auto methods = parse_methods(methods_list);
    const std::uint64_t master = seed.value_or(base.seed);

    std::vector<ResultRow> rows(static_cast<std::size_t>(replicates) * methods.size());
    std::vector<std::string> errors(rows.size());
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (int r = 0; r < replicates; ++r) {
        SimScenario sc = base;
        sc.seed = derive_seed(master, static_cast<std::uint64_t>(r));
        std::optional<std::pair<FunctionalDataset, SimTruth>> sim;
        std::string gen_error;
        try {
            sim.emplace(generate(sc));
        } catch (const std::exception& e) {
            gen_error = e.what();
        }
        for (std::size_t m = 0; m < methods.size(); ++m) {
            auto& row = rows[static_cast<std::size_t>(r) * methods.size() + m];
            row.method = methods[m].name;
            row.replicate = r + 1;
            row.seed = sc.seed;
            if (!sim) {
                row.status = "error";
                errors[static_cast<std::size_t>(r) * methods.size() + m] = gen_error;
                continue;
            }
            PipelineConfig cfg;
            cfg.width = methods[m].width;
            cfg.overlap = methods[m].overlap;
            cfg.npc = npc;
            cfg.seed = sc.seed;
            try {
                const auto fit = fast_gfpca(sim->first, cfg);
                row.report = evaluate_fit(fit, sim->first, sim->second);
            } catch (const Error& e) {
                row.status = "error";
                errors[static_cast<std::size_t>(r) * methods.size() + m] = e.what();
            }
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!errors[i].empty())
            std::cerr << "warning: " << rows[i].method << " replicate " << rows[i].replicate << ": " << errors[i]
                      << '\n';

    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "method,replicate,seed,status,mise_eta,mise_phi";
    for (int k = 1; k <= npc; ++k) csv << ",mise_phi_" << k;
    csv << ",ise_beta0,auc,logloss,time_step1,time_step2,time_step3,time_step4,time_total\n";
    for (const auto& row : rows) {
        const auto& e = row.report;
        csv << row.method << ',' << row.replicate << ',' << row.seed << ',' << row.status << ','
            << cell(e.mise_eta) << ',' << cell(e.mise_phi);
        for (Eigen::Index k = 0; k < npc; ++k)
            csv << ',' << (k < e.mise_phi_per_k.size() ? cell(e.mise_phi_per_k(k)) : "");
        const bool ok = row.status == "ok";
        auto t = [&](double v) { return ok ? cell(v) : std::string(); };
        csv << ',' << cell(e.ise_beta0) << ',' << cell(e.auc) << ',' << cell(e.logloss) << ',' << t(e.time_step1)
            << ',' << t(e.time_step2) << ',' << t(e.time_step3) << ',' << t(e.time_step4) << ',' << t(e.time_total)
            << '\n';
    }
    write_text_atomic(fs::path(out_dir) / "results.csv", csv.str());

    json per_method = json::array();
    for (const auto& m : methods) {
        std::map<std::string, std::vector<double>> col;
        int n_ok = 0;
        for (const auto& row : rows) {
            if (row.method != m.name || row.status != "ok") continue;
            ++n_ok;
            const auto& e = row.report;
            auto add = [&](const char* k, const std::optional<double>& v) {
                if (v) col[k].push_back(*v);
            };
            add("mise_eta", e.mise_eta);
            add("mise_phi", e.mise_phi);
            add("ise_beta0", e.ise_beta0);
            add("auc", e.auc);
            add("logloss", e.logloss);
            col["time_step1_min"].push_back(e.time_step1 / 60.0);
            col["time_step2_min"].push_back(e.time_step2 / 60.0);
            col["time_step3_min"].push_back(e.time_step3 / 60.0);
            col["time_step4_min"].push_back(e.time_step4 / 60.0);
            col["time_total_min"].push_back(e.time_total / 60.0);
        }
        json entry{{"method", m.name}, {"width", m.width}, {"overlap", m.overlap}, {"n_ok", n_ok}};
        for (const auto& [k, v] : col) entry["median_" + k] = median(v);
        per_method.push_back(entry);
    }
    json scen;
    to_json(scen, base);
    const json summary{{"scenario", scen}, {"replicates", replicates}, {"seed", master}, {"npc", npc},
                       {"methods", per_method}};
    write_text_atomic(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
    const json manifest{{"tool", "fgfpca"},
                        {"version", FGFPCA_VERSION},
                        {"command", "simulate"},
                        {"config", {{"scenario", scen}, {"replicates", replicates}, {"methods", methods_list},
                                    {"npc", npc}, {"jobs", jobs}}},
                        {"seed", master},
                        {"inputs", json::array({{{"path", scenario_path}, {"sha256", sha256_file(scenario_path)}}})},
                        {"outputs", {"results.csv", "summary.json", "manifest.json"}}};
    write_text_atomic(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << summary.dump() << '\n';
    return kExitOk;
}

// Rows of `m` reordered to follow `order` (subject ids).
Eigen::MatrixXd align_rows(const Eigen::MatrixXd& m, const std::vector<std::string>& ids,
                           const std::vector<std::string>& order)
{
    std::map<std::string, Eigen::Index> pos;
    for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = static_cast<Eigen::Index>(i);
    if (pos.size() != order.size()) throw DataError("subject sets differ between fit and reference");
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto it = pos.find(order[i]);
        if (it == pos.end()) throw DataError("subject '" + order[i] + "' missing from the reference");
        out.row(static_cast<Eigen::Index>(i)) = m.row(it->second);
    }
    return out;
}

int cmd_evaluate(const std::string& fit_dir, const std::string& truth_path, const std::string& data_path,
                 const std::string& family_name, const std::string& out_path)
{
    if (fit_dir.empty()) throw ConfigError("--fit is required");
    if (truth_path.empty() && data_path.empty()) throw ConfigError("need --truth or --data");
    const auto fit = read_curves(fit_dir);
    EvalReport r;
    if (!truth_path.empty()) {
        if (fs::is_directory(truth_path)) {
            const auto truth = read_curves(truth_path);
            if (truth.grid.size() != fit.grid.size()) throw DataError("fit and truth grids differ in length");
            r.mise_eta = mise_eta(fit.eta, align_rows(truth.eta, truth.subject_ids, fit.subject_ids), fit.grid);
            const auto K = std::min(fit.phi.cols(), truth.phi.cols());
            if (fit.phi.cols() != truth.phi.cols())
                std::cerr << "warning: comparing the first " << K << " eigenfunctions only\n";
            if (K > 0) {
                const auto pe = mise_phi(fit.phi.leftCols(K), truth.phi.leftCols(K), fit.grid);
                r.mise_phi = pe.overall;
                r.mise_phi_per_k = pe.per_component;
            }
            r.ise_beta0 = ise_beta0(fit.beta0, truth.beta0, fit.grid);
        } else {
            // long CSV of true linear predictors
            const auto truth = load_long_csv(truth_path, LinkFamily(Family::gaussian), false);
            if (truth.n_points() != static_cast<Eigen::Index>(fit.grid.size()))
                throw DataError("fit and truth grids differ in length");
            r.mise_eta = mise_eta(fit.eta, align_rows(truth.values(), truth.subject_ids(), fit.subject_ids), fit.grid);
        }
    }
    if (!data_path.empty()) {
        const auto family = LinkFamily::parse(family_name);
        if (family.family() != Family::binomial) throw ConfigError("predictive metrics need binomial data");
        const auto data = load_long_csv(data_path, family, false);
        const auto pm = predictive_metrics(align_rows(data.values(), data.subject_ids(), fit.subject_ids), fit.means);
        r.auc = pm.auc;
        r.logloss = pm.logloss;
    }
    if (fit.fit_json.contains("times_seconds")) {
        const auto& t = fit.fit_json["times_seconds"];
        r.time_step1 = t.value("step1", 0.0);
        r.time_step2 = t.value("step2", 0.0);
        r.time_step3 = t.value("step3", 0.0);
        r.time_step4 = t.value("step4", 0.0);
        r.time_total = t.value("total", 0.0);
    }
    const json report = to_json(r);
    const fs::path dest = out_path.empty() ? fs::path(fit_dir) / "evaluation.json" : fs::path(out_path);
    write_text_atomic(dest, report.dump(2) + "\n");
    std::cout << report.dump() << '\n';
    return kExitOk;
}

int cmd_generate(const std::string& scenario_path, const std::string& out_dir, std::optional<std::uint64_t> seed)
{
    SimScenario sc;
    from_json(read_json_file(scenario_path), sc);
    if (seed) sc.seed = *seed;
    if (out_dir.empty()) throw ConfigError("--out is required");
    const auto [data, truth] = generate(sc);
    fs::create_directories(out_dir);
    write_long_csv(fs::path(out_dir) / "data.csv", data);
    write_truth(fs::path(out_dir) / "truth", truth, data);
    json scen;
    to_json(scen, sc);
    std::cout << json{{"status", "ok"}, {"out", out_dir}, {"scenario", scen}}.dump() << '\n';
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args)
{
    CLI::App app{"Fast generalized functional principal components analysis", "fgfpca"};
    app.require_subcommand(1);
    app.set_version_flag("--version", FGFPCA_VERSION);

    FitSettings fit_flags;
    std::string config_path;
    auto* fit = app.add_subcommand("fit", "fit a model to long-format data");
    fit->add_option("--data", fit_flags.data, "CSV with columns id,s_index,value");
    fit->add_option("--family", fit_flags.family, "binomial, poisson or gaussian");
    fit->add_option("--width", fit_flags.pipeline.width, "bin width (even)");
    fit->add_flag("--overlap,!--no-overlap", fit_flags.pipeline.overlap, "overlapping bins (default)");
    fit->add_flag("--cyclic", fit_flags.cyclic, "the domain wraps around");
    auto* pve = fit->add_option("--pve", fit_flags.pipeline.pve, "variance explained used to choose K");
    int npc_flag = 0;
    auto* npc = fit->add_option("--npc", npc_flag, "fixed number of components");
    pve->excludes(npc);
    fit->add_option("--nknots", fit_flags.pipeline.smoothing.nknots, "covariance smoother knots");
    std::string policy = "clamp";
    fit->add_option("--policy", policy, "degenerate bins: clamp or augment");
    fit->add_flag("--modified", "subsampled step 4 followed by score-only fits");
    fit->add_option("--subsamples", fit_flags.pipeline.modified.n_subsamples, "number of subsamples");
    fit->add_option("--subsample-size", fit_flags.pipeline.modified.subsample_size, "subjects per subsample");
    fit->add_option("--out", fit_flags.out, "output directory");
    fit->add_option("--seed", fit_flags.pipeline.seed, "seed for subsampling");
    fit->add_option("--config", config_path, "JSON config; flags take precedence");
    fit->add_option("--plot-csv", fit_flags.plot_csv, "also write a long-format plotting table");

    std::string scenario, methods = "overlap-6,overlap-10,nonoverlap-6,nonoverlap-10", sim_out;
    int replicates = 20, sim_npc = 4, jobs = std::max(1, omp_get_max_threads());
    std::uint64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "simulation study over replicates and binning methods");
    sim->add_option("--scenario", scenario, "scenario JSON")->required();
    sim->add_option("--replicates", replicates, "number of replicates");
    sim->add_option("--methods", methods, "comma list of overlap-<w> / nonoverlap-<w>");
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--seed", sim_seed, "master seed (default: scenario seed)");
    sim->add_option("--npc", sim_npc, "components fitted per replicate");
    sim->add_option("--jobs", jobs, "replicates run concurrently");

    std::string eval_fit, eval_truth, eval_data, eval_family = "binomial", eval_out;
    auto* ev = app.add_subcommand("evaluate", "accuracy and predictive metrics of a fit");
    ev->add_option("--fit", eval_fit, "fit directory")->required();
    ev->add_option("--truth", eval_truth, "truth directory or long CSV of true eta");
    ev->add_option("--data", eval_data, "observed binomial data for AUC and log-loss");
    ev->add_option("--family", eval_family, "family of --data");
    ev->add_option("--out", eval_out, "report path (default <fit>/evaluation.json)");

    std::string gen_scenario, gen_out;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("generate", "write one simulated dataset and its truth");
    gen->add_option("--scenario", gen_scenario, "scenario JSON")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "overrides the scenario seed");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, std::cout, std::cerr);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*fit) {
            if (fit->count("--npc")) fit_flags.pipeline.npc = npc_flag;
            if (fit->count("--policy")) fit_flags.pipeline.local.policy = parse_policy(policy);
            return cmd_fit(*fit, fit_flags, config_path);
        }
        if (*sim)
            return cmd_simulate(scenario, replicates, methods, sim_out,
                                sim->count("--seed") ? std::optional(sim_seed) : std::nullopt, sim_npc, jobs);
        if (*ev) return cmd_evaluate(eval_fit, eval_truth, eval_data, eval_family, eval_out);
        if (*gen)
            return cmd_generate(gen_scenario, gen_out, gen->count("--seed") ? std::optional(gen_seed) : std::nullopt);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitConfig;
}

} // namespace fgfpca::cli
