#include "rapo/boltzmann.hpp"
#include "rapo/ensemble.hpp"
#include "rapo/io.hpp"
#include "rapo/kl_dual.hpp"
#include "rapo/rapo.hpp"
#include "rapo/robust_mdp.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace rapo;

namespace
{

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct Globals
{
    std::string seed;
    std::string out;
    std::string config;
    std::vector<std::string> sets;
};

Json dual_defaults()
{
    DualConfig<double> d;
    return Json{{"seed", nullptr},
                {"out_dir", ""},
                {"values", nullptr},
                {"values_file", nullptr},
                {"probs", nullptr},
                {"epsilon", 0.1},
                {"dual",
                 {{"eta_min", d.eta_min},
                  {"eta_max", d.eta_max},
                  {"tol_kl", d.tol_kl},
                  {"max_iter", d.max_iter},
                  {"newton_refine", d.newton_refine},
                  {"bias_correction", d.bias_correction},
                  {"bias_c_m", d.bias_c_m}}}};
}

Json reweight_defaults()
{
    return Json{{"seed", nullptr}, {"out_dir", ""},   {"scores", nullptr},
                {"prior", nullptr}, {"kappa", 0.1}, {"tol", 1e-10},
                {"beta_max", 1e3}};
}

Json solve_defaults()
{
    return Json{{"seed", nullptr}, {"out_dir", ""},  {"world", nullptr},        {"epsilon", 0.1},
                {"tol_v", 1e-8},   {"max_iter", 100000}, {"dual", dual_defaults()["dual"]}};
}

Json scale_defaults()
{
    return Json{{"lo", 0.5}, {"hi", 1.5}, {"count", 11}};
}

Json train_defaults()
{
    Json train = TrainConfig{};
    train.erase("seed");
    return Json{{"seed", nullptr},
                {"out_dir", "run"},
                {"world", nullptr},
                {"ensemble", {{"family", "slip"}, {"scales", nullptr}, {"prior", nullptr}}},
                {"train", train},
                {"eval", {{"family", nullptr}, {"scales", nullptr}}}};
}

Json sweep_defaults()
{
    return Json{{"seed", nullptr}, {"out_dir", ""},       {"world", nullptr},
                {"family", "slip"}, {"scales", nullptr}, {"checkpoints", Json::array()}};
}

Json heatmap_defaults()
{
    return Json{{"seed", nullptr},         {"out_dir", ""},       {"world", nullptr},    {"family", "slip"},
                {"scales", nullptr},       {"snapshots", ""},     {"probe_states", nullptr}};
}

Json converge_defaults()
{
    return Json{{"seed", nullptr},
                {"out_dir", ""},
                {"kappa", 0.1},
                {"k_grid", {16, 64, 256, 1024}},
                {"trials", 200},
                {"k_ref", 1000000},
                {"scores", {{"dist", "uniform"}, {"mean", 0.0}, {"sd", 1.0}, {"lo", 0.0}, {"hi", 1.0}}}};
}

/// Defaults, then the config file, then subcommand flags, then --set, then the global flags.
Json resolve(Json doc, const Globals& g, const std::vector<std::string>& flag_sets)
{
    if (!g.config.empty()) {
        doc = merge_config(doc, load_json(g.config));
    }
    for (const auto& s : flag_sets) {
        apply_override(doc, s);
    }
    for (const auto& s : g.sets) {
        apply_override(doc, s);
    }
    if (!g.seed.empty()) {
        apply_override(doc, "seed=" + g.seed);
    }
    if (!g.out.empty()) {
        doc["out_dir"] = g.out;
    }
    return doc;
}

std::uint64_t require_seed(const Json& doc)
{
    const Json& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
        throw ConfigError("seed is required for this subcommand (nonnegative integer; --seed or config)");
    }
    return s.get<std::uint64_t>();
}

std::vector<double> numbers(const Json& v, const std::string& what)
{
    if (v.is_string()) {
        return parse_number_list(v.get<std::string>());
    }
    if (v.is_number()) {
        return {v.get<double>()};
    }
    if (v.is_array()) {
        std::vector<double> out;
        for (const Json& x : v) {
            if (!x.is_number()) {
                throw ConfigError(what + ": non-numeric entry");
            }
            out.push_back(x.get<double>());
        }
        if (out.empty()) {
            throw ConfigError(what + ": empty list");
        }
        return out;
    }
    throw ConfigError(what + " is required");
}

std::vector<double> numbers_from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    for (char& c : text) {
        if (c == '\n' || c == '\r' || c == ' ' || c == '\t') {
            c = ',';
        }
    }
    std::string cleaned;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == ',' && (cleaned.empty() || cleaned.back() == ',')) {
            continue;
        }
        cleaned += text[i];
    }
    if (!cleaned.empty() && cleaned.back() == ',') {
        cleaned.pop_back();
    }
    return parse_number_list(cleaned);
}

DualConfig<double> dual_config(const Json& d, double epsilon)
{
    DualConfig<double> cfg;
    cfg.epsilon = epsilon;
    cfg.eta_min = d.at("eta_min").get<double>();
    cfg.eta_max = d.at("eta_max").get<double>();
    cfg.tol_kl = d.at("tol_kl").get<double>();
    cfg.max_iter = d.at("max_iter").get<int>();
    cfg.newton_refine = d.at("newton_refine").get<bool>();
    cfg.bias_correction = d.at("bias_correction").get<bool>();
    cfg.bias_c_m = d.at("bias_c_m").get<double>();
    cfg.validate();
    return cfg;
}

TabularMdp world(const Json& doc)
{
    if (doc.is_null()) {
        return bridge_world(BridgeParams{});
    }
    return world_from_json(doc);
}

VectorXd scales(const Json& doc)
{
    return doc.is_null() ? scale_grid_from_json(scale_defaults()) : scale_grid_from_json(doc);
}

std::string out_path(const Json& doc, const std::string& name)
{
    const std::string dir = doc.at("out_dir").get<std::string>();
    if (dir.empty()) {
        return {};
    }
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

void emit(const Json& doc, const Json& result, const std::string& name)
{
    std::cout << result.dump(2) << '\n';
    const std::string path = out_path(doc, name);
    if (!path.empty()) {
        save_json(path, result);
    }
}

void emit_csv(const Json& doc, const CsvTable& table, const std::string& name)
{
    const std::string path = out_path(doc, name);
    if (path.empty()) {
        write_csv(std::cout, table);
    }
    else {
        write_csv(path, table);
    }
}

int cmd_dual_solve(const Json& doc)
{
    std::vector<double> values;
    if (!doc.at("values_file").is_null()) {
        values = numbers_from_file(doc.at("values_file").get<std::string>());
    }
    else {
        values = numbers(doc.at("values"), "values");
    }
    ValueSamples<double> s;
    s.values = to_vector(values);
    if (doc.at("probs").is_null()) {
        s.base_probs = VectorXd::Constant(s.values.size(), 1.0 / static_cast<double>(s.values.size()));
    }
    else {
        s.base_probs = to_vector(numbers(doc.at("probs"), "probs"));
    }
    try {
        s.validate();
    }
    catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    const DualConfig<double> cfg = dual_config(doc.at("dual"), doc.at("epsilon").get<double>());
    const DualSolution<double> sol = solve_eta(s, cfg);
    const WorstCase<double> wc = worst_case(s, cfg);
    emit(doc,
         Json{{"eta_star", sol.eta_star},
              {"dual_value", sol.dual_value},
              {"kl_achieved", sol.kl_achieved},
              {"status", to_string(sol.status)},
              {"iterations", sol.iterations},
              {"tilted", to_std(sol.tilted)},
              {"robust_value", wc.value},
              {"mean", s.base_probs.dot(s.values)}},
         "dual.json");
    return 0;
}

int cmd_reweight(const Json& doc)
{
    const VectorXd scores = to_vector(numbers(doc.at("scores"), "scores"));
    VectorXd prior = doc.at("prior").is_null()
                         ? VectorXd::Constant(scores.size(), 1.0 / static_cast<double>(scores.size()))
                         : to_vector(numbers(doc.at("prior"), "prior"));
    if (prior.size() != scores.size()) {
        throw ConfigError("prior and scores differ in length");
    }
    const MixtureWeights<double> w = solve_beta<double>(prior, scores, doc.at("kappa").get<double>(),
                                                        doc.at("tol").get<double>(), doc.at("beta_max").get<double>());
    Json out{{"weights", to_std(w.weights)},
             {"kl_to_prior", w.kl_to_prior},
             {"beta", w.beta},
             {"source", to_string(w.source)}};
    if (w.source == MixtureSource::DegenerateConstant) {
        out["note"] = "scores are constant; the prior is returned unchanged";
    }
    else if (w.source == MixtureSource::BudgetExceedsMax) {
        out["note"] = "kappa exceeds the KL reachable at beta_max; weights are the beta_max tilt";
    }
    emit(doc, out, "weights.json");
    return 0;
}

int cmd_solve_mdp(const Json& doc)
{
    const TabularMdp mdp = world(doc.at("world"));
    const double eps = doc.at("epsilon").get<double>();
    const DualConfig<double> cfg = dual_config(doc.at("dual"), eps);
    const RobustViResult vi =
        robust_value_iteration(mdp, eps, cfg, doc.at("tol_v").get<double>(), doc.at("max_iter").get<int>());
    const ValueFn v_nominal = nominal_policy_evaluation(mdp.kernel, mdp.rewards, vi.policy, mdp.gamma);
    const WorstCaseKernel wc = extract_worst_case_kernel(mdp, vi.policy, vi.v, eps, cfg);
    const ValueDrop drop = value_drop_check(mdp, vi.policy, eps, cfg);

    CsvTable values{{"state", "v_robust", "v_nominal", "action"}, {}};
    for (int s = 0; s < mdp.n_states; ++s) {
        Eigen::Index a = 0;
        vi.policy.row(s).maxCoeff(&a);
        values.rows.push_back({double(s), vi.v(s), v_nominal(s), double(a)});
    }
    CsvTable kernel{{"state", "action"}, {}};
    for (int sp = 0; sp < mdp.n_states; ++sp) {
        kernel.header.push_back("p" + std::to_string(sp));
    }
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            std::vector<double> row{double(s), double(a)};
            for (int sp = 0; sp < mdp.n_states; ++sp) {
                row.push_back(wc.kernel(mdp.row(s, a), sp));
            }
            kernel.rows.push_back(row);
        }
    }
    const double min_gap = drop.gap.minCoeff();
    const double max_gap = drop.gap.maxCoeff();
    const bool within = min_gap >= -1e-9 && max_gap <= drop.bound + 1e-9;
    const Json report{{"epsilon", eps},
                      {"iterations", vi.iterations},
                      {"residual", vi.residual},
                      {"robust_return", expected_return(mdp, vi.v)},
                      {"nominal_return", expected_return(mdp, v_nominal)},
                      {"gap", to_std(drop.gap)},
                      {"min_gap", min_gap},
                      {"max_gap", max_gap},
                      {"bound", drop.bound},
                      {"all_within_bound", within}};
    if (!doc.at("out_dir").get<std::string>().empty()) {
        write_csv(out_path(doc, "values.csv"), values);
        write_csv(out_path(doc, "worst_case_kernel.csv"), kernel);
        save_json(out_path(doc, "mdp.json"), mdp_to_json(mdp));
    }
    emit(doc, report, "value_drop.json");
    return 0;
}

EnsembleSpec ensemble_from(const Json& e, const TabularMdp& mdp)
{
    VectorXd prior;
    if (!e.at("prior").is_null()) {
        prior = to_vector(numbers(e.at("prior"), "ensemble.prior"));
    }
    try {
        return build_ensemble(mdp, scales(e.at("scales")), perturbation_from_string(e.at("family").get<std::string>()),
                              prior);
    }
    catch (const DomainError& err) {
        throw ConfigError(std::string("ensemble: ") + err.what());
    }
}

int cmd_train(const Json& doc)
{
    TrainConfig cfg = doc.at("train").get<TrainConfig>();
    cfg.seed = require_seed(doc);
    const TabularMdp mdp = world(doc.at("world"));
    const EnsembleSpec ens = ensemble_from(doc.at("ensemble"), mdp);
    const std::string dir = doc.at("out_dir").get<std::string>();
    if (dir.empty()) {
        throw ConfigError("train needs an output directory (--out)");
    }
    fs::create_directories(dir);
    save_json(out_path(doc, "config.json"), doc);

    std::ofstream log(out_path(doc, "metrics.jsonl"), std::ios::binary);
    std::vector<UpdateMetrics> seen;
    auto on_update = [&](const UpdateMetrics& m) {
        seen.push_back(m);
        log << Json(m).dump() << '\n';
    };
    TrainResult res;
    try {
        res = rapo_train(mdp, ens, cfg, on_update);
    }
    catch (const NumericalError& e) {
        Json dump{{"error", e.what()}, {"completed_updates", seen.size()}, {"config", doc}};
        dump["last_metrics"] = seen.empty() ? Json(nullptr) : Json(seen.back());
        save_json(out_path(doc, "diagnostic.json"), dump);
        throw;
    }
    save_json(out_path(doc, "checkpoint.json"), checkpoint_to_json(res));
    save_json(out_path(doc, "snapshots.json"), snapshots_to_json(res));

    const Json& ev = doc.at("eval");
    const Perturbation family = perturbation_from_string(
        ev.at("family").is_null() ? doc.at("ensemble").at("family").get<std::string>() : ev.at("family").get<std::string>());
    const VectorXd grid = scales(ev.at("scales").is_null() ? doc.at("ensemble").at("scales") : ev.at("scales"));
    const PolicyTable pi = res.policy.probs();
    CsvTable sweep{{"scale", "mean", "ci_low", "ci_high"}, {}};
    for (const SweepRow& r : robustness_sweep({pi}, mdp, family, grid)) {
        sweep.rows.push_back({r.scale, r.mean, r.ci_low, r.ci_high});
    }
    write_csv(out_path(doc, "sweep.csv"), sweep);
    const VectorXd per_model = per_model_returns(mdp, ens, pi);
    const Json summary{{"updates", cfg.updates},
                       {"use_advnet", cfg.use_advnet},
                       {"use_reweighting", cfg.use_reweighting},
                       {"nominal_return", expected_return(mdp, nominal_policy_evaluation(mdp.kernel, mdp.rewards, pi,
                                                                                         mdp.gamma))},
                       {"worst_case_return", per_model.minCoeff()},
                       {"per_model_returns", to_std(per_model)},
                       {"final_mixture", to_std(res.mixture_history.empty() ? ens.prior : res.mixture_history.back())}};
    emit(doc, summary, "summary.json");
    return 0;
}

int cmd_sweep(const Json& doc)
{
    const TabularMdp mdp = world(doc.at("world"));
    std::vector<PolicyTable> policies;
    for (const Json& p : doc.at("checkpoints")) {
        policies.push_back(checkpoint_policy(load_json(p.get<std::string>())));
        validate_policy(policies.back(), mdp.n_states, mdp.n_actions);
    }
    if (policies.empty()) {
        throw ConfigError("sweep needs at least one --checkpoint");
    }
    CsvTable t{{"scale", "mean", "ci_low", "ci_high"}, {}};
    for (const SweepRow& r :
         robustness_sweep(policies, mdp, perturbation_from_string(doc.at("family").get<std::string>()), scales(doc.at("scales")))) {
        t.rows.push_back({r.scale, r.mean, r.ci_low, r.ci_high});
    }
    emit_csv(doc, t, "sweep.csv");
    return 0;
}

int cmd_heatmap(const Json& doc)
{
    const TabularMdp mdp = world(doc.at("world"));
    if (doc.at("snapshots").get<std::string>().empty()) {
        throw ConfigError("heatmap needs --snapshots");
    }
    std::vector<int> updates;
    std::vector<VectorXd> critics;
    std::vector<PolicyTable> policies;
    snapshots_from_json(load_json(doc.at("snapshots").get<std::string>()), updates, critics, policies);
    for (std::size_t i = 0; i < critics.size(); ++i) {
        if (critics[i].size() != mdp.n_states) {
            throw ConfigError("heatmap: snapshot critic does not match the world");
        }
        validate_policy(policies[i], mdp.n_states, mdp.n_actions);
    }
    std::vector<int> probes;
    if (doc.at("probe_states").is_null()) {
        probes = default_probe_states(mdp);
    }
    else {
        for (double x : numbers(doc.at("probe_states"), "probe_states")) {
            if (x < 0 || x >= mdp.n_states || x != std::floor(x)) {
                throw ConfigError("probe_states: invalid state index");
            }
            probes.push_back(static_cast<int>(x));
        }
    }
    const Heatmap hm = value_heatmap(critics, policies, updates, mdp,
                                     perturbation_from_string(doc.at("family").get<std::string>()),
                                     scales(doc.at("scales")), probes);
    CsvTable t{{"update", "scale", "value", "is_argmax"}, {}};
    for (Eigen::Index u = 0; u < hm.values.rows(); ++u) {
        for (Eigen::Index j = 0; j < hm.values.cols(); ++j) {
            t.rows.push_back({double(hm.updates[static_cast<std::size_t>(u)]), hm.scales(j), hm.values(u, j),
                              hm.argmax[static_cast<std::size_t>(u)] == j ? 1.0 : 0.0});
        }
    }
    emit_csv(doc, t, "heatmap.csv");
    return 0;
}

int cmd_converge_k(const Json& doc)
{
    Rng rng(require_seed(doc));
    const Json& sc = doc.at("scores");
    const std::string dist = sc.at("dist").get<std::string>();
    std::function<double(Rng&)> sampler;
    if (dist == "normal") {
        const double mu = sc.at("mean").get<double>();
        const double sd = sc.at("sd").get<double>();
        if (!(sd > 0.0)) {
            throw ConfigError("scores.sd must be positive");
        }
        sampler = [mu, sd](Rng& r) {
            const double u1 = 1.0 - r.uniform();
            const double u2 = r.uniform();
            return mu + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        };
    }
    else if (dist == "uniform") {
        const double lo = sc.at("lo").get<double>();
        const double hi = sc.at("hi").get<double>();
        if (!(lo < hi)) {
            throw ConfigError("scores: need lo < hi");
        }
        sampler = [lo, hi](Rng& r) { return r.uniform(lo, hi); };
    }
    else {
        throw ConfigError("scores.dist must be 'normal' or 'uniform'");
    }
    std::vector<int> grid;
    for (double k : numbers(doc.at("k_grid"), "k_grid")) {
        if (k < 2 || k != std::floor(k)) {
            throw ConfigError("k_grid entries must be integers >= 2");
        }
        grid.push_back(static_cast<int>(k));
    }
    const int trials = doc.at("trials").get<int>();
    const int k_ref = doc.at("k_ref").get<int>();
    if (trials < 1 || k_ref < 2) {
        throw ConfigError("need trials >= 1 and k_ref >= 2");
    }
    const FiniteKTable tab = finite_k_convergence(sampler, grid, doc.at("kappa").get<double>(), trials, rng, k_ref);
    CsvTable t{{"k", "beta_deviation", "value_gap"}, {}};
    for (const FiniteKRow& r : tab.rows) {
        t.rows.push_back({double(r.k), r.beta_deviation, r.value_gap});
    }
    emit_csv(doc, t, "converge_k.csv");
    std::cerr << Json{{"beta_ref", tab.beta_ref},
                      {"value_ref", tab.value_ref},
                      {"degenerate", tab.degenerate},
                      {"beta_slope", tab.beta_slope},
                      {"gap_slope", tab.gap_slope}}
                     .dump()
              << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust adversarial policy optimization on tabular MDPs"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "RNG seed (overrides config)");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--config", g.config, "JSON config document")->check(CLI::ExistingFile);
    app.add_option("--set", g.sets, "Dot-path override, e.g. train.epsilon=0.2 (repeatable)");

    std::vector<std::string> flag_sets;
    auto set_from = [&flag_sets](const std::string& path) {
        return [&flag_sets, path](const std::string& v) { flag_sets.push_back(path + "=" + v); };
    };
    auto quoted = [&flag_sets](const std::string& path) {
        return [&flag_sets, path](const std::string& v) { flag_sets.push_back(path + "=" + Json(v).dump()); };
    };

    auto* dual = app.add_subcommand("dual-solve", "Solve the KL-ball dual for one sample of values");
    dual->add_option_function<std::string>("--values", quoted("values"), "Comma-separated values");
    dual->add_option_function<std::string>("--values-file", quoted("values_file"), "File of values");
    dual->add_option_function<std::string>("--probs", quoted("probs"), "Comma-separated base probabilities");
    dual->add_option_function<std::string>("--epsilon", set_from("epsilon"), "KL budget");

    auto* rw = app.add_subcommand("reweight", "Boltzmann mixture weights under a KL budget");
    rw->add_option_function<std::string>("--scores", quoted("scores"), "Comma-separated model scores");
    rw->add_option_function<std::string>("--prior", quoted("prior"), "Comma-separated prior");
    rw->add_option_function<std::string>("--kappa", set_from("kappa"), "KL budget");

    auto* solve = app.add_subcommand("solve-mdp", "Robust value iteration on a tabular MDP");
    solve->add_option_function<std::string>(
        "--mdp", [&flag_sets](const std::string& p) { flag_sets.push_back("world=" + Json{{"type", "file"}, {"path", p}}.dump()); },
        "MDP JSON file");
    solve->add_option_function<std::string>("--epsilon", set_from("epsilon"), "KL budget");

    auto* train = app.add_subcommand("train", "Train RAPO or an ablation");
    std::vector<std::string> ablate;
    train->add_option("--ablate", ablate, "no-advnet and/or no-reweight")
        ->check(CLI::IsMember({"no-advnet", "no-reweight"}));

    auto* sweep = app.add_subcommand("sweep", "Exact returns of checkpoints across perturbation scales");
    std::vector<std::string> ckpts;
    sweep->add_option("--checkpoint", ckpts, "checkpoint.json from train (repeatable)");
    sweep->add_option_function<std::string>("--family", quoted("family"), "slip or stay");

    auto* heat = app.add_subcommand("heatmap", "Critic value heatmap over updates and scales");
    heat->add_option_function<std::string>("--snapshots", quoted("snapshots"), "snapshots.json from train");
    heat->add_option_function<std::string>("--family", quoted("family"), "slip or stay");

    auto* conv = app.add_subcommand("converge-k", "Finite-ensemble convergence of the reweighting temperature");
    conv->add_option_function<std::string>("--kappa", set_from("kappa"), "KL budget");
    conv->add_option_function<std::string>("--trials", set_from("trials"), "Trials per K");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*dual) {
            return cmd_dual_solve(resolve(dual_defaults(), g, flag_sets));
        }
        if (*rw) {
            return cmd_reweight(resolve(reweight_defaults(), g, flag_sets));
        }
        if (*solve) {
            return cmd_solve_mdp(resolve(solve_defaults(), g, flag_sets));
        }
        if (*train) {
            for (const auto& a : ablate) {
                flag_sets.push_back(a == "no-advnet" ? "train.use_advnet=false" : "train.use_reweighting=false");
            }
            return cmd_train(resolve(train_defaults(), g, flag_sets));
        }
        if (*sweep) {
            Json doc = resolve(sweep_defaults(), g, flag_sets);
            for (const auto& c : ckpts) {
                doc["checkpoints"].push_back(c);
            }
            return cmd_sweep(doc);
        }
        if (*heat) {
            return cmd_heatmap(resolve(heatmap_defaults(), g, flag_sets));
        }
        if (*conv) {
            return cmd_converge_k(resolve(converge_defaults(), g, flag_sets));
        }
    }
    catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    catch (const ConvergenceError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const Json::exception& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const fs::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitInput;
    }
    catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitInput;
}
