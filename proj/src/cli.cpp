#include "metats/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "metats/csv_io.hpp"
#include "metats/errors.hpp"
#include "metats/experiment.hpp"
#include "metats/linalg.hpp"
#include "metats/stats.hpp"
#include "metats/theory.hpp"
#include "metats/verify.hpp"

namespace metats {

using json = nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    body(f);
    if (!f) throw Error("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    bool normalize = false;
    bool shared = false;
    std::string agents;
    std::optional<int> threads;
    bool env_log = false;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
    ExperimentConfig c = load_config(a.config);
    if (a.seed) c.root_seed = *a.seed;
    if (a.normalize) c.normalize_contexts = true;
    if (a.shared) c.shared_contexts = true;
    if (a.threads) c.threads = *a.threads;
    if (a.env_log) c.record_env_log = true;
    if (!a.agents.empty()) {
        c.agents.clear();
        for (const std::string& name : split_list(a.agents)) {
            const auto agent = parse_agent(name);
            if (!agent) throw ConfigError("unknown agent '" + name + "'");
            c.agents.push_back(*agent);
        }
    }
    c.validate();

    const std::filesystem::path dir(a.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw ConfigError("cannot create output directory '" + a.out + "'");

    auto emit = [&](const ExperimentResult& r, const std::string& suffix) {
        write_file(dir / ("trace" + suffix + ".csv"), [&](std::ostream& f) { r.write_trace(f); });
        write_file(dir / ("summary" + suffix + ".csv"), [&](std::ostream& f) { r.write_summary(f); });
        if (c.record_env_log) write_file(dir / ("env_log" + suffix + ".csv"), [&](std::ostream& f) { r.write_env_log(f); });
        out << "wrote " << (dir / ("trace" + suffix + ".csv")).string() << " (" << r.trace_rows() << " rows) and "
            << (dir / ("summary" + suffix + ".csv")).string() << '\n';
    };
    if (c.experiment == ExperimentKind::kGeneralization) {
        for (const ExperimentResult& r : run_generalization(c)) emit(r, "_eps" + format_real(r.epsilon_norm));
    } else {
        emit(run_experiment(c), "");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_bounds(const BoundInputs& in, bool as_json, std::ostream& out) {
    const BoundConstants u = bound_constants(in);
    const double tslb = theorem_rhs(in, BoundKind::kMetaTslb);
    const double ts = theorem_rhs(in, BoundKind::kMetaTs);
    std::optional<double> threshold;
    if (in.m >= 2) threshold = check_generalization_threshold(in);

    if (as_json) {
        json j = {{"u1", u.u1},
                  {"u2", u.u2},
                  {"u3", u.u3},
                  {"u4", u.u4},
                  {"u5", u.u5},
                  {"rhs_meta_tslb", tslb},
                  {"rhs_meta_ts", ts},
                  {"eigenvalue_condition", in.eigenvalue_condition()},
                  {"generalization_threshold", threshold ? json(*threshold) : json(nullptr)}};
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    const std::pair<const char*, double> rows[] = {{"u1", u.u1}, {"u2", u.u2}, {"u3", u.u3}, {"u4", u.u4},
                                                   {"u5", u.u5}, {"rhs_meta_tslb", tslb}, {"rhs_meta_ts", ts}};
    for (const auto& [name, value] : rows) out << std::left << std::setw(26) << name << format_real(value) << '\n';
    out << std::setw(26) << "generalization_threshold" << (threshold ? format_real(*threshold) : "n/a (m < 2)") << '\n';
    out << std::setw(26) << "eigenvalue_condition" << (in.eigenvalue_condition() ? "holds" : "fails") << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct VarthetaArgs {
    std::string config;
    int run = 0;
    int task = 1;
    int window = 0;
    std::string mode = "exact";
    int samples = kMinMonteCarloSamples;
    bool json = false;
};

int cmd_vartheta(const VarthetaArgs& a, std::ostream& out) {
    const ExperimentConfig c = load_config(a.config);
    if (c.experiment != ExperimentKind::kLinear && c.experiment != ExperimentKind::kGeneralization) {
        throw ConfigError("vartheta works on linear-context experiments");
    }
    const int window = a.window > 0 ? a.window : c.d;
    VarthetaMode mode;
    if (a.mode == "exact") {
        mode = VarthetaMode::kExact;
    } else if (a.mode == "monte_carlo") {
        mode = VarthetaMode::kMonteCarlo;
    } else {
        throw ConfigError("--mode must be exact or monte_carlo");
    }
    std::vector<RoundContexts> ctx;
    const std::uint64_t key = c.shared_contexts ? 0 : static_cast<std::uint64_t>(a.task);
    for (int t = 1; t <= c.n; ++t) ctx.push_back(draw_contexts(c, static_cast<std::uint64_t>(a.run), key, t));
    const Eigen::MatrixXd b1 = spd_inverse(run_sigma_star(c, static_cast<std::uint64_t>(a.run)), "Σ_*");
    Rng rng = substream(c.root_seed, static_cast<std::uint64_t>(a.run), static_cast<std::uint64_t>(a.task), 0,
                        Purpose::kVerification);
    const AssumptionParams p = estimate_vartheta(ctx, c.n, window, b1, mode, &rng, a.samples);

    if (a.json) {
        const json j = {{"window", p.window},
                        {"rho_min", p.rho_min},
                        {"lambda_min_B1", p.lambda_min_b1},
                        {"vartheta", p.vartheta ? json(*p.vartheta) : json(nullptr)},
                        {"estimate", p.estimate}};
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    out << std::left << std::setw(16) << "window" << p.window << '\n'
        << std::setw(16) << "rho_min" << format_real(p.rho_min) << '\n'
        << std::setw(16) << "lambda_min_B1" << format_real(p.lambda_min_b1) << '\n'
        << std::setw(16) << "vartheta" << (p.vartheta ? format_real(*p.vartheta) : "undefined (rho_min = 0)")
        << (p.estimate ? " (Monte-Carlo estimate, an upper bound)" : "") << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& checks_arg, bool checks_given, const std::string& fault, std::uint64_t seed,
               bool as_json, std::ostream& out, std::ostream& err) {
    const std::vector<std::string> checks = checks_given ? split_list(checks_arg) : verification_checks();
    if (checks.empty()) {
        err << "verify: empty verification set, nothing was checked\n";
        return kExitInvalid;
    }
    std::optional<fault::ScopedSkipSymmetrize> injected;
    if (fault == "skip-symmetrize") {
        injected.emplace();
    } else if (!fault.empty()) {
        throw ConfigError("unknown fault '" + fault + "'");
    }
    const std::vector<CheckResult> results = run_verification(checks, seed);
    bool all = true;
    json j = json::array();
    for (const CheckResult& r : results) {
        all = all && r.passed;
        if (as_json) {
            j.push_back({{"check", r.name},
                         {"passed", r.passed},
                         {"worst_slack", r.worst_slack},
                         {"cases", r.cases},
                         {"detail", r.detail}});
        } else {
            out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(22) << r.name << " slack "
                << std::setw(12) << format_real(r.worst_slack) << ' ' << r.detail << '\n';
        }
    }
    if (as_json) out << json{{"checks", j}, {"passed", all}}.dump(2) << '\n';
    return all ? kExitOk : kExitInvariant;
}

// ---------------------------------------------------------------------------

int cmd_report(const std::string& trace_path, bool as_json, std::ostream& out) {
    std::ifstream f(trace_path);
    if (!f) throw ConfigError("cannot read trace file '" + trace_path + "'");
    const RegretTrace trace = read_trace(f);
    const std::vector<std::string> problems = validate_trace(trace);

    // Per-run totals over every task and round.
    std::map<AgentKind, std::map<int, double>> totals;
    for (const RegretRecord& r : trace.records) totals[r.agent][r.run] += r.instant_regret;

    json agents = json::array();
    std::map<AgentKind, std::vector<double>> per_run;
    for (const auto& [agent, runs] : totals) {
        std::vector<double> xs;
        for (const auto& [run, total] : runs) xs.push_back(total);
        per_run[agent] = xs;
        agents.push_back({{"agent", std::string(to_string(agent))},
                          {"runs", xs.size()},
                          {"mean_total_regret", mean(xs)},
                          {"stderr", standard_error(xs)}});
    }
    // Sign tests along the expected ordering, between consecutive agents present.
    json tests = json::array();
    const AgentKind order[] = {AgentKind::kOracleTs, AgentKind::kMetaTslb, AgentKind::kMetaTs, AgentKind::kMarginalTs};
    std::vector<AgentKind> present;
    for (AgentKind a : order) {
        if (per_run.count(a) != 0) present.push_back(a);
    }
    for (std::size_t i = 0; i + 1 < present.size(); ++i) {
        const auto& a = per_run[present[i]];
        const auto& b = per_run[present[i + 1]];
        if (a.size() != b.size()) continue;
        const SignTest st = paired_sign_test(a, b);
        tests.push_back({{"lower", std::string(to_string(present[i]))},
                         {"higher", std::string(to_string(present[i + 1]))},
                         {"wins", st.wins},
                         {"losses", st.losses},
                         {"ties", st.ties},
                         {"p_value", st.p_value}});
    }

    if (as_json) {
        out << json{{"rows", trace.records.size()}, {"agents", agents}, {"sign_tests", tests}, {"problems", problems}}.dump(2)
            << '\n';
    } else {
        out << trace.records.size() << " rows\n";
        for (const json& a : agents) {
            out << std::left << std::setw(14) << a["agent"].get<std::string>() << " runs " << std::setw(5)
                << a["runs"].get<std::size_t>() << " mean total regret " << std::setw(14)
                << format_real(a["mean_total_regret"].get<double>()) << " stderr "
                << format_real(a["stderr"].get<double>()) << '\n';
        }
        for (const json& t : tests) {
            out << "sign test " << t["lower"].get<std::string>() << " < " << t["higher"].get<std::string>() << ": "
                << t["wins"].get<int>() << " wins, " << t["losses"].get<int>() << " losses, " << t["ties"].get<int>()
                << " ties, one-sided p = " << format_real(t["p_value"].get<double>()) << '\n';
        }
        for (const std::string& p : problems) out << "problem: " << p << '\n';
    }
    return problems.empty() ? kExitOk : kExitInvariant;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Meta-learning Thompson sampling simulator for linear contextual bandits", "metats"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "run an experiment and write trace and summary CSVs");
    run->add_option("--config", run_args.config, "experiment JSON file")->required();
    run->add_option("--out", run_args.out, "output directory (created if missing)");
    run->add_option("--seed", run_args.seed, "override root_seed (64-bit unsigned)");
    run->add_flag("--normalize-contexts", run_args.normalize, "project contexts into the unit ball");
    run->add_flag("--shared-contexts", run_args.shared, "reuse one context sequence for every task");
    run->add_option("--agents", run_args.agents, "comma-separated subset of meta_tslb,meta_ts,oracle_ts,marginal_ts");
    run->add_option("--threads", run_args.threads, "worker threads (0 = all cores)");
    run->add_flag("--env-log", run_args.env_log, "also write per-round context hashes");

    BoundInputs bounds_in;
    bounds_in.m = 20;
    bounds_in.n = 200;
    bounds_in.k = 20;
    bounds_in.d = 5;
    bounds_in.v = 0.2;
    bounds_in.delta = 0.045;
    bool bounds_json = false;
    CLI::App* bounds = app.add_subcommand("bounds", "evaluate u1..u5 and both regret-bound right-hand sides");
    bounds->add_option("--m", bounds_in.m, "tasks")->capture_default_str();
    bounds->add_option("--n", bounds_in.n, "rounds per task")->capture_default_str();
    bounds->add_option("--k", bounds_in.k, "arms")->capture_default_str();
    bounds->add_option("--d", bounds_in.d, "dimension")->capture_default_str();
    bounds->add_option("--v", bounds_in.v, "reward noise scale")->capture_default_str();
    bounds->add_option("--delta", bounds_in.delta, "confidence parameter")->capture_default_str();
    bounds->add_option("--lambda-min", bounds_in.lambda_min, "smallest eigenvalue of inv(Sigma_*)")->required();
    bounds->add_option("--lambda-max", bounds_in.lambda_max, "largest eigenvalue of inv(Sigma_*)")->required();
    bounds->add_option("--lambda-max-sigma-q", bounds_in.lambda_max_sigma_q, "largest eigenvalue of Sigma_Q")->required();
    bounds->add_option("--mu-q-norm", bounds_in.mu_q_norm, "norm of mu_Q")->capture_default_str();
    bounds->add_option("--vartheta", bounds_in.vartheta, "context-richness constant")->required();
    bounds->add_flag("--json", bounds_json, "print JSON");

    VarthetaArgs vt;
    CLI::App* vartheta = app.add_subcommand("vartheta", "compute the context-richness constant for generated contexts");
    vartheta->add_option("--config", vt.config, "experiment JSON file")->required();
    vartheta->add_option("--run", vt.run, "run index")->capture_default_str();
    vartheta->add_option("--task", vt.task, "task index")->capture_default_str();
    vartheta->add_option("--window", vt.window, "window length (default d)");
    vartheta->add_option("--mode", vt.mode, "exact or monte_carlo")->capture_default_str();
    vartheta->add_option("--samples", vt.samples, "Monte-Carlo sequences (>= 10000)")->capture_default_str();
    vartheta->add_flag("--json", vt.json, "print JSON");

    std::string checks;
    std::string fault;
    std::uint64_t verify_seed = 1;
    bool verify_json = false;
    CLI::App* verify = app.add_subcommand("verify", "run the invariant checks");
    CLI::Option* checks_opt = verify->add_option(
        "--checks", checks, "comma-separated checks (default all)");
    verify->add_option("--fault", fault, "inject a fault: skip-symmetrize");
    verify->add_option("--seed", verify_seed, "seed for the simulated cases")->capture_default_str();
    verify->add_flag("--json", verify_json, "print JSON");

    std::string trace_path;
    bool report_json = false;
    CLI::App* report = app.add_subcommand("report", "summarize and validate a trace CSV");
    report->add_option("--trace", trace_path, "trace CSV")->required();
    report->add_flag("--json", report_json, "print JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (run->parsed()) return cmd_run(run_args, out);
        if (bounds->parsed()) return cmd_bounds(bounds_in, bounds_json, out);
        if (vartheta->parsed()) return cmd_vartheta(vt, out);
        if (verify->parsed()) {
            return cmd_verify(checks, checks_opt->count() > 0, fault, verify_seed, verify_json, out, err);
        }
        if (report->parsed()) return cmd_report(trace_path, report_json, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const PreconditionViolation& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "runtime failure: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitInvalid;
}

}  // namespace metats
