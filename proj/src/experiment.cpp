#include "metats/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "metats/errors.hpp"
#include "metats/linalg.hpp"
#include "metats/meta_engine.hpp"
#include "metats/stats.hpp"
#include "metats/ts_engine.hpp"
#include "metats/variants.hpp"

namespace metats {

using json = nlohmann::json;

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kExperimentNames[] = {
    {ExperimentKind::kLinear, "linear"},
    {ExperimentKind::kFinitePriors, "finite_priors"},
    {ExperimentKind::kInfiniteArms, "infinite_arms"},
    {ExperimentKind::kSequential, "sequential"},
    {ExperimentKind::kGeneralization, "generalization"},
};

}  // namespace

std::string_view to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kExperimentNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_experiment(std::string_view name) {
    for (const auto& [k, n] : kExperimentNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    need(m >= 1, "m must be >= 1");
    need(n >= 1, "n must be >= 1");
    need(k >= 1, "k must be >= 1");
    need(d >= 1, "d must be >= 1");
    need(runs >= 1, "runs must be >= 1");
    need(v > 0.0 && std::isfinite(v), "v must be positive");
    need(std::isfinite(context_low) && std::isfinite(context_high) && context_low <= context_high,
         "context_low must not exceed context_high");
    need(L >= 1, "L must be >= 1");
    need(finite_prior_mean_range > 0.0, "finite_prior_mean_range must be positive");
    need(finite_prior_min_separation >= 0.0, "finite_prior_min_separation must be >= 0");
    need(p >= 1, "p must be >= 1");
    need(static_cast<int>(arm_counts.size()) == p, "arm_counts must have p entries");
    for (int c : arm_counts) need(c >= 1, "every arm count must be >= 1");
    need(polytope_constraints >= 1, "polytope_constraints must be >= 1");
    need(box_bound > 0.0, "box_bound must be positive");
    need(!epsilon_norms.empty(), "epsilon_norms must not be empty");
    for (double e : epsilon_norms) need(e >= 0.0 && std::isfinite(e), "epsilon norms must be finite and >= 0");
    need(!agents.empty(), "at least one agent is required");
    need(std::set<AgentKind>(agents.begin(), agents.end()).size() == agents.size(), "agents must be distinct");
    need(threads >= 0, "threads must be >= 0");
    if (experiment == ExperimentKind::kGeneralization) {
        need(m >= 1, "generalization needs m >= 1");
    }
}

namespace {

template <class T>
T get_as(const json& j, const char* key) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

int get_int(const json& j, const char* key) {
    if (!j.is_number_integer()) throw ConfigError(std::string("config field '") + key + "' must be an integer");
    return j.get<int>();
}

double get_real(const json& j, const char* key) {
    if (!j.is_number()) throw ConfigError(std::string("config field '") + key + "' must be a number");
    return j.get<double>();
}

bool get_bool(const json& j, const char* key) {
    if (!j.is_boolean()) throw ConfigError(std::string("config field '") + key + "' must be true or false");
    return j.get<bool>();
}

std::uint64_t get_seed(const json& j) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        try {
            std::size_t used = 0;
            const unsigned long long x = std::stoull(s, &used, 0);
            if (used == s.size()) return x;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("config field 'root_seed' must be a 64-bit unsigned integer");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    ExperimentConfig c;
    for (const auto& [key, val] : j.items()) {
        const char* k = key.c_str();
        if (key == "experiment") {
            const auto kind = parse_experiment(get_as<std::string>(val, k));
            if (!kind) throw ConfigError("unknown experiment '" + val.dump() + "'");
            c.experiment = *kind;
        } else if (key == "m") {
            c.m = get_int(val, k);
        } else if (key == "n") {
            c.n = get_int(val, k);
        } else if (key == "k") {
            c.k = get_int(val, k);
        } else if (key == "d") {
            c.d = get_int(val, k);
        } else if (key == "runs") {
            c.runs = get_int(val, k);
        } else if (key == "v") {
            c.v = get_real(val, k);
        } else if (key == "context_low") {
            c.context_low = get_real(val, k);
        } else if (key == "context_high") {
            c.context_high = get_real(val, k);
        } else if (key == "L") {
            c.L = get_int(val, k);
        } else if (key == "finite_prior_mean_range") {
            c.finite_prior_mean_range = get_real(val, k);
        } else if (key == "finite_prior_min_separation") {
            c.finite_prior_min_separation = get_real(val, k);
        } else if (key == "p") {
            c.p = get_int(val, k);
        } else if (key == "arm_counts") {
            if (!val.is_array()) throw ConfigError("config field 'arm_counts' must be an array");
            c.arm_counts.clear();
            for (const json& x : val) c.arm_counts.push_back(get_int(x, k));
        } else if (key == "polytope_constraints") {
            c.polytope_constraints = get_int(val, k);
        } else if (key == "box_bound") {
            c.box_bound = get_real(val, k);
        } else if (key == "epsilon_norm") {
            c.epsilon_norms = {get_real(val, k)};
        } else if (key == "epsilon_norms") {
            if (!val.is_array()) throw ConfigError("config field 'epsilon_norms' must be an array");
            c.epsilon_norms.clear();
            for (const json& x : val) c.epsilon_norms.push_back(get_real(x, k));
        } else if (key == "flip_epsilon") {
            c.flip_epsilon = get_bool(val, k);
        } else if (key == "root_seed") {
            c.root_seed = get_seed(val);
        } else if (key == "agents") {
            if (!val.is_array()) throw ConfigError("config field 'agents' must be an array");
            c.agents.clear();
            for (const json& x : val) {
                const auto a = parse_agent(get_as<std::string>(x, k));
                if (!a) throw ConfigError("unknown agent " + x.dump());
                c.agents.push_back(*a);
            }
        } else if (key == "normalize_contexts") {
            c.normalize_contexts = get_bool(val, k);
        } else if (key == "shared_contexts") {
            c.shared_contexts = get_bool(val, k);
        } else if (key == "threads") {
            c.threads = get_int(val, k);
        } else if (key == "independent_agent_sampling") {
            c.independent_agent_sampling = get_bool(val, k);
        } else if (key == "record_env_log") {
            c.record_env_log = get_bool(val, k);
        } else {
            throw ConfigError("unknown config field '" + key + "'");
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string config_to_json(const ExperimentConfig& c) {
    json agents = json::array();
    for (AgentKind a : c.agents) agents.push_back(std::string(to_string(a)));
    const json j = {
        {"experiment", std::string(to_string(c.experiment))},
        {"m", c.m},
        {"n", c.n},
        {"k", c.k},
        {"d", c.d},
        {"runs", c.runs},
        {"v", c.v},
        {"context_low", c.context_low},
        {"context_high", c.context_high},
        {"L", c.L},
        {"finite_prior_mean_range", c.finite_prior_mean_range},
        {"finite_prior_min_separation", c.finite_prior_min_separation},
        {"p", c.p},
        {"arm_counts", c.arm_counts},
        {"polytope_constraints", c.polytope_constraints},
        {"box_bound", c.box_bound},
        {"epsilon_norms", c.epsilon_norms},
        {"flip_epsilon", c.flip_epsilon},
        {"root_seed", c.root_seed},
        {"agents", agents},
        {"normalize_contexts", c.normalize_contexts},
        {"shared_contexts", c.shared_contexts},
        {"threads", c.threads},
        {"independent_agent_sampling", c.independent_agent_sampling},
        {"record_env_log", c.record_env_log},
    };
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Environment generation
// ---------------------------------------------------------------------------

Eigen::MatrixXd generate_covariance(int d, double max_entry, Rng& rng) {
    if (d < 1) throw PreconditionViolation("generate_covariance: d must be >= 1");
    if (!(max_entry > 0.05)) throw PreconditionViolation("generate_covariance: max_entry must exceed 0.05");
    while (true) {
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) m(i, j) = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        }
        Eigen::MatrixXd s = m * m.transpose() / static_cast<double>(d);
        s.diagonal().array() += 0.05;
        symmetrize(s);
        const double biggest = s.cwiseAbs().maxCoeff();
        if (biggest >= max_entry) {
            s *= max_entry * 0.99 / biggest;
        }
        if (d >= 2) {
            const Eigen::MatrixXd off = s - Eigen::MatrixXd(s.diagonal().asDiagonal());
            if (off.cwiseAbs().maxCoeff() == 0.0) continue;
        }
        return s;
    }
}

namespace {

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double low, double high) {
    Eigen::MatrixXd out(rows, cols);
    std::uniform_real_distribution<double> u(low, high);
    // Row by row, so arm i's coordinates are consecutive draws.
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = low == high ? low : u(rng);
    }
    return out;
}

void normalize_rows(Eigen::MatrixXd& arms) {
    for (Eigen::Index i = 0; i < arms.rows(); ++i) {
        const double norm = arms.row(i).norm();
        if (norm > 1.0) arms.row(i) /= norm;
    }
}

std::uint64_t context_key(const ExperimentConfig& c, std::uint64_t task) { return c.shared_contexts ? 0 : task; }

}  // namespace

RoundContexts draw_contexts(const ExperimentConfig& config, std::uint64_t run, std::uint64_t task_key, int round) {
    Rng rng = substream(config.root_seed, run, task_key, static_cast<std::uint64_t>(round), Purpose::kContexts);
    RoundContexts ctx{uniform_matrix(rng, config.k, config.d, config.context_low, config.context_high), round};
    if (config.normalize_contexts) normalize_rows(ctx.arms);
    return ctx;
}

namespace {

SequentialRound draw_sequential_round(const ExperimentConfig& config, std::uint64_t run, std::uint64_t task_key,
                                      int round) {
    Rng rng = substream(config.root_seed, run, task_key, static_cast<std::uint64_t>(round), Purpose::kContexts);
    SequentialRound r;
    r.round = round;
    for (int count : config.arm_counts) {
        Eigen::MatrixXd arms = uniform_matrix(rng, count, config.d, config.context_low, config.context_high);
        if (config.normalize_contexts) normalize_rows(arms);
        r.arms.push_back(std::move(arms));
    }
    return r;
}

Polyhedron draw_polytope(const ExperimentConfig& config, std::uint64_t run, std::uint64_t task_key, int round) {
    Rng rng = substream(config.root_seed, run, task_key, static_cast<std::uint64_t>(round), Purpose::kPolytope);
    const Eigen::MatrixXd a = uniform_matrix(rng, config.polytope_constraints, config.d, -1.0, 1.0);
    const Eigen::VectorXd x0 = uniform_vector(rng, config.d, 0.0, 1.0);
    Eigen::VectorXd u(config.polytope_constraints);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = 1.0 - unit(rng);  // (0, 1]
    return Polyhedron::boxed(a, a * x0 + u, config.box_bound);
}

// Σ_Q, Σ_*, μ_Q = 0 and μ_* ~ Q for one run.
struct Hierarchy {
    Eigen::MatrixXd sigma_q;
    Eigen::MatrixXd sigma_star;
    GaussianBelief meta_prior;
    Eigen::VectorXd mu_star;
};

Hierarchy draw_hierarchy(const ExperimentConfig& c, std::uint64_t run) {
    Rng rq = substream(c.root_seed, run, 0, 0, Purpose::kCovariance, 0);
    Rng rs = substream(c.root_seed, run, 0, 0, Purpose::kCovariance, 1);
    Eigen::MatrixXd sigma_q = generate_covariance(c.d, 3.0, rq);
    Eigen::MatrixXd sigma_star = generate_covariance(c.d, 3.0, rs);
    GaussianBelief meta_prior(Eigen::VectorXd::Zero(c.d), sigma_q, c.v);
    Rng ri = substream(c.root_seed, run, 0, 0, Purpose::kInstancePrior);
    Eigen::VectorXd mu_star = sample_gaussian(meta_prior, ri);
    return {std::move(sigma_q), std::move(sigma_star), std::move(meta_prior), std::move(mu_star)};
}

}  // namespace

Eigen::MatrixXd run_sigma_star(const ExperimentConfig& config, std::uint64_t run) {
    return draw_hierarchy(config, run).sigma_star;
}

namespace {

void record_star_spectrum(RunRecord& rec, const Eigen::MatrixXd& sigma_star) {
    const Eigen::MatrixXd inv = spd_inverse(sigma_star, "instance covariance");
    rec.lambda_min = min_eigenvalue(inv);
    rec.lambda_max = max_eigenvalue(inv);
}

std::uint64_t agent_salt(const ExperimentConfig& c, AgentKind agent) {
    return c.independent_agent_sampling ? static_cast<std::uint64_t>(agent) + 1 : 0;
}

struct Cursor {
    int task = 0;
    int round = 0;
};

// Runs one agent over tasks first_task .. first_task + m − 1 (stream indices);
// tasks are reported as 1..m.
using TaskRunner = std::function<TaskOutcome(const GaussianBelief& prior, int task, const TaskStreams& streams,
                                             const TaskOptions& options, Cursor& cursor)>;

AgentTrack run_agent(const ExperimentConfig& c, int run, PriorPolicy& policy, int first_task,
                     const TaskRunner& runner, const std::function<void(int)>& after_task = {}) {
    AgentTrack track;
    track.agent = policy.kind();
    const RunStreams streams{c.root_seed, static_cast<std::uint64_t>(run), agent_salt(c, policy.kind())};
    TaskOptions options;
    options.record_context_hashes = c.record_env_log;
    Cursor cursor;
    for (int s = 0; s < c.m; ++s) {
        cursor = {s + 1, 0};
        try {
            const TaskStreams ts = streams.task(static_cast<std::uint64_t>(first_task + s));
            const GaussianBelief prior = policy.begin_task(s + 1, ts);
            TaskOutcome out = runner(prior, first_task + s, ts, options, cursor);
            policy.end_task(out.history);
            track.task_regret.push_back(out.total_regret());
            track.instant.push_back(std::move(out.instant_regret));
            if (c.record_env_log) track.context_hashes.push_back(std::move(out.context_hashes));
        } catch (const RunFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw RunFailure(run, cursor.task, cursor.round, std::string(to_string(policy.kind())) + ": " + e.what());
        }
        if (after_task) after_task(s + 1);
    }
    return track;
}

// Pre-drawn environment of one run: instances per task and, depending on the
// experiment, contexts, polytopes or sequential rounds per (task, round).
struct Environment {
    std::vector<BanditInstance> instances;           // index task − first_task
    std::vector<std::vector<RoundContexts>> contexts;
    std::vector<std::vector<PolyhedralRound>> polytopes;
    std::vector<std::vector<SequentialRound>> sequential;
};

Environment draw_environment(const ExperimentConfig& c, int run, const GaussianBelief& instance_prior,
                             int first_task) {
    Environment env;
    const RunStreams streams{c.root_seed, static_cast<std::uint64_t>(run), 0};
    for (int s = 0; s < c.m; ++s) {
        const auto task = static_cast<std::uint64_t>(first_task + s);
        env.instances.push_back(draw_instance(instance_prior, streams.task(task)));
        const std::uint64_t key = context_key(c, task);
        const Eigen::VectorXd& mu = env.instances.back().mu;
        if (c.experiment == ExperimentKind::kInfiniteArms) {
            std::vector<PolyhedralRound> rounds;
            for (int t = 1; t <= c.n; ++t) {
                Polyhedron poly = (c.shared_contexts && s > 0) ? env.polytopes.front()[static_cast<std::size_t>(t - 1)].region
                                                               : draw_polytope(c, static_cast<std::uint64_t>(run), key, t);
                rounds.push_back(make_polyhedral_round(std::move(poly), mu));
            }
            env.polytopes.push_back(std::move(rounds));
        } else if (c.experiment == ExperimentKind::kSequential) {
            SequentialSpec spec{c.p, c.arm_counts, ContextMap::hadamard(), std::vector<int>(static_cast<std::size_t>(c.p), 0), c.d};
            std::vector<SequentialRound> rounds;
            for (int t = 1; t <= c.n; ++t) {
                SequentialRound r = draw_sequential_round(c, static_cast<std::uint64_t>(run), key, t);
                r.optimal_value = sequential_optimum(spec, r, mu);
                rounds.push_back(std::move(r));
            }
            env.sequential.push_back(std::move(rounds));
        } else {
            std::vector<RoundContexts> rounds;
            if (c.shared_contexts && s > 0) {
                rounds = env.contexts.front();
            } else {
                for (int t = 1; t <= c.n; ++t) rounds.push_back(draw_contexts(c, static_cast<std::uint64_t>(run), key, t));
            }
            env.contexts.push_back(std::move(rounds));
        }
    }
    return env;
}

TaskRunner make_runner(const ExperimentConfig& c, const Environment& env, int first_task) {
    return [&c, &env, first_task](const GaussianBelief& prior, int task, const TaskStreams& streams,
                                  const TaskOptions& options, Cursor& cursor) -> TaskOutcome {
        const auto idx = static_cast<std::size_t>(task - first_task);
        const BanditInstance& instance = env.instances[idx];
        if (c.experiment == ExperimentKind::kInfiniteArms) {
            const auto& rounds = env.polytopes[idx];
            return run_polyhedral_ts_task(
                prior, instance,
                [&](int t) {
                    cursor.round = t;
                    return rounds[static_cast<std::size_t>(t - 1)];
                },
                c.n, streams, options);
        }
        if (c.experiment == ExperimentKind::kSequential) {
            const SequentialSpec spec{c.p, c.arm_counts, ContextMap::hadamard(),
                                      std::vector<int>(static_cast<std::size_t>(c.p), 0), c.d};
            const auto& rounds = env.sequential[idx];
            return run_sequential_ts(
                spec, prior, instance,
                [&](int t) {
                    cursor.round = t;
                    return rounds[static_cast<std::size_t>(t - 1)];
                },
                c.n, streams, options);
        }
        const auto& rounds = env.contexts[idx];
        return run_ts_task(
            prior, instance,
            [&](int t) {
                cursor.round = t;
                return rounds[static_cast<std::size_t>(t - 1)];
            },
            c.n, streams, options);
    };
}

std::unique_ptr<PriorPolicy> hierarchy_policy(AgentKind agent, const GaussianBelief& meta_prior,
                                              const Eigen::MatrixXd& sigma_star, const GaussianBelief& instance_prior,
                                              const GaussianBelief& marginal_meta_prior) {
    switch (agent) {
        case AgentKind::kMetaTslb:
            return std::make_unique<MetaTslbPolicy>(meta_prior, sigma_star);
        case AgentKind::kMetaTs:
            return std::make_unique<MetaTsPolicy>(meta_prior, sigma_star);
        case AgentKind::kOracleTs:
            return std::make_unique<FixedPriorPolicy>(AgentKind::kOracleTs, instance_prior);
        case AgentKind::kMarginalTs:
            return std::make_unique<FixedPriorPolicy>(AgentKind::kMarginalTs,
                                                      marginal_instance_prior(marginal_meta_prior, sigma_star));
    }
    throw PreconditionViolation("unknown agent");
}

// Tracks Meta-TSLB's meta-posterior spread and error after every task.
std::function<void(int)> meta_probe(RunRecord& rec, const PriorPolicy& policy, const Eigen::VectorXd& mu_star) {
    const auto* tslb = dynamic_cast<const MetaTslbPolicy*>(&policy);
    if (tslb == nullptr) return {};
    auto push = [&rec, tslb, mu_star]() {
        const GaussianBelief& q = tslb->meta_posterior().belief;
        rec.meta_lambda_max.push_back(max_eigenvalue(q.cov_core()));
        rec.meta_mean_error.push_back((q.mean() - mu_star).norm());
    };
    push();
    return [push](int) { push(); };
}

RunRecord run_hierarchical(const ExperimentConfig& c, int run) {
    RunRecord rec;
    rec.run = run;
    Hierarchy h = draw_hierarchy(c, static_cast<std::uint64_t>(run));
    const GaussianBelief instance_prior(h.mu_star, h.sigma_star, c.v);
    record_star_spectrum(rec, h.sigma_star);

    const Environment env = draw_environment(c, run, instance_prior, 1);
    const TaskRunner runner = make_runner(c, env, 1);
    for (AgentKind agent : c.agents) {
        auto policy = hierarchy_policy(agent, h.meta_prior, h.sigma_star, instance_prior, h.meta_prior);
        rec.agents.push_back(run_agent(c, run, *policy, 1, runner, meta_probe(rec, *policy, h.mu_star)));
    }
    rec.sigma_q = std::move(h.sigma_q);
    rec.sigma_star = std::move(h.sigma_star);
    rec.mu_star = std::move(h.mu_star);
    return rec;
}

PriorBank draw_prior_bank(const ExperimentConfig& c, std::uint64_t run, int& true_prior) {
    Rng rng = substream(c.root_seed, run, 0, 0, Purpose::kPriorBank);
    std::vector<Eigen::VectorXd> means;
    const double r = c.finite_prior_mean_range;
    for (int j = 0; j < c.L; ++j) {
        for (int attempt = 0;; ++attempt) {
            if (attempt == 100000) {
                throw ConfigError("cannot place " + std::to_string(c.L) + " prior means with separation " +
                                  std::to_string(c.finite_prior_min_separation));
            }
            Eigen::VectorXd mu = uniform_vector(rng, c.d, -r, r);
            bool ok = true;
            for (const Eigen::VectorXd& other : means) ok = ok && (mu - other).norm() >= c.finite_prior_min_separation;
            if (ok) {
                means.push_back(std::move(mu));
                break;
            }
        }
    }
    std::vector<GaussianBelief> priors;
    for (int j = 0; j < c.L; ++j) priors.emplace_back(means[static_cast<std::size_t>(j)], generate_covariance(c.d, 3.0, rng), c.v);
    true_prior = std::uniform_int_distribution<int>(0, c.L - 1)(rng);
    return PriorBank::uniform(std::move(priors));
}

RunRecord run_finite_priors(const ExperimentConfig& c, int run) {
    RunRecord rec;
    rec.run = run;
    const PriorBank bank = draw_prior_bank(c, static_cast<std::uint64_t>(run), rec.true_prior);
    const GaussianBelief& instance_prior = bank.prior(static_cast<std::size_t>(rec.true_prior));
    rec.mu_star = instance_prior.mean();
    rec.sigma_star = instance_prior.cov_core();
    record_star_spectrum(rec, rec.sigma_star);

    const Environment env = draw_environment(c, run, instance_prior, 1);
    const TaskRunner runner = make_runner(c, env, 1);
    for (AgentKind agent : c.agents) {
        std::unique_ptr<PriorPolicy> policy;
        switch (agent) {
            case AgentKind::kMetaTslb:
                policy = std::make_unique<FiniteBankPolicy>(bank, BankRule::kArgmax);
                break;
            case AgentKind::kMetaTs:
                policy = std::make_unique<FiniteBankPolicy>(bank, BankRule::kSample);
                break;
            case AgentKind::kOracleTs:
                policy = std::make_unique<FixedPriorPolicy>(AgentKind::kOracleTs, instance_prior);
                break;
            case AgentKind::kMarginalTs:
                policy = std::make_unique<FixedPriorPolicy>(AgentKind::kMarginalTs, mixture_moment_match(bank));
                break;
        }
        std::function<void(int)> probe;
        const auto* bp = dynamic_cast<const FiniteBankPolicy*>(policy.get());
        if (agent == AgentKind::kMetaTslb) {
            probe = [&rec, bp](int) { rec.selected_prior.push_back(static_cast<int>(bp->last_choice())); };
        }
        rec.agents.push_back(run_agent(c, run, *policy, 1, runner, probe));
        if (agent == AgentKind::kMetaTslb) rec.final_argmax_prior = static_cast<int>(finite_prior_select(bp->bank()));
    }
    return rec;
}

template <class Body>
void parallel_runs(int runs, int threads, Body&& body) {
    int workers = threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : threads;
    workers = std::min(workers, runs);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(runs));
    if (workers <= 1) {
        for (int r = 0; r < runs; ++r) body(r);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    auto work = [&]() {
        while (!failed.load()) {
            const int r = next.fetch_add(1);
            if (r >= runs) return;
            try {
                body(r);
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
                failed.store(true);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    // Report the lowest failing run so the error does not depend on scheduling.
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

double AgentTrack::total() const {
    double s = 0.0;
    for (double x : task_regret) s += x;
    return s;
}

const AgentTrack* RunRecord::track(AgentKind agent) const {
    for (const AgentTrack& t : agents) {
        if (t.agent == agent) return &t;
    }
    return nullptr;
}

namespace {

const AgentTrack& require_track(const RunRecord& r, AgentKind agent) {
    const AgentTrack* t = r.track(agent);
    if (t == nullptr) throw PreconditionViolation("agent " + std::string(to_string(agent)) + " was not simulated");
    return *t;
}

}  // namespace

std::vector<double> ExperimentResult::totals(AgentKind agent) const {
    std::vector<double> out;
    for (const RunRecord& r : runs) out.push_back(require_track(r, agent).total());
    return out;
}

std::vector<double> ExperimentResult::task_regrets(AgentKind agent, int task) const {
    std::vector<double> out;
    for (const RunRecord& r : runs) out.push_back(require_track(r, agent).task_regret.at(static_cast<std::size_t>(task - 1)));
    return out;
}

std::vector<SummaryRow> ExperimentResult::summary() const {
    std::vector<SummaryRow> rows;
    for (AgentKind agent : config.agents) {
        for (int s = 1; s <= config.m; ++s) {
            const std::vector<double> xs = task_regrets(agent, s);
            rows.push_back({agent, s, mean(xs), standard_error(xs)});
        }
    }
    return rows;
}

std::size_t ExperimentResult::trace_rows() const {
    std::size_t rows = 0;
    for (const RunRecord& r : runs) {
        for (const AgentTrack& t : r.agents) {
            for (const auto& task : t.instant) rows += task.size();
        }
    }
    return rows;
}

void ExperimentResult::write_trace(std::ostream& out) const {
    out << kTraceHeader << '\n';
    for (const RunRecord& r : runs) {
        for (const AgentTrack& t : r.agents) {
            for (std::size_t s = 0; s < t.instant.size(); ++s) {
                double cum = 0.0;
                for (std::size_t i = 0; i < t.instant[s].size(); ++i) {
                    cum += t.instant[s][i];
                    write_trace_row(out, {r.run, static_cast<int>(s) + 1, static_cast<int>(i) + 1, t.agent,
                                          t.instant[s][i], cum});
                }
            }
        }
    }
}

void ExperimentResult::write_summary(std::ostream& out) const { metats::write_summary(out, summary()); }

void ExperimentResult::write_env_log(std::ostream& out) const {
    out << "run,agent,task,round,context_hash\n";
    for (const RunRecord& r : runs) {
        for (const AgentTrack& t : r.agents) {
            for (std::size_t s = 0; s < t.context_hashes.size(); ++s) {
                for (std::size_t i = 0; i < t.context_hashes[s].size(); ++i) {
                    out << r.run << ',' << to_string(t.agent) << ',' << s + 1 << ',' << i + 1 << ',' << std::hex
                        << std::setw(16) << std::setfill('0') << t.context_hashes[s][i] << std::dec << '\n';
                }
            }
        }
    }
}

std::vector<std::string> check_pairing(const ExperimentResult& result) {
    std::vector<std::string> problems;
    for (const RunRecord& r : result.runs) {
        if (r.agents.empty()) continue;
        const AgentTrack& ref = r.agents.front();
        for (const AgentTrack& t : r.agents) {
            if (t.context_hashes != ref.context_hashes) {
                problems.push_back("run " + std::to_string(r.run) + ": " + std::string(to_string(t.agent)) +
                                   " saw different contexts than " + std::string(to_string(ref.agent)));
            }
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.experiment == ExperimentKind::kGeneralization) {
        throw ConfigError("generalization experiments go through run_generalization");
    }
    ExperimentResult result;
    result.config = config;
    result.runs.resize(static_cast<std::size_t>(config.runs));
    parallel_runs(config.runs, config.threads, [&](int r) {
        result.runs[static_cast<std::size_t>(r)] =
            config.experiment == ExperimentKind::kFinitePriors ? run_finite_priors(config, r) : run_hierarchical(config, r);
    });
    return result;
}

namespace {

Eigen::VectorXd draw_direction(const ExperimentConfig& c, std::uint64_t run) {
    Rng rng = substream(c.root_seed, run, 0, 0, Purpose::kEpsilon);
    while (true) {
        Eigen::VectorXd z = standard_normal_vector(rng, c.d);
        const double norm = z.norm();
        if (norm > 1e-300) return z / norm;
    }
}

std::vector<RunRecord> run_generalization_once(const ExperimentConfig& c, int run) {
    Hierarchy h = draw_hierarchy(c, static_cast<std::uint64_t>(run));
    const GaussianBelief phase1_prior(h.mu_star, h.sigma_star, c.v);

    // Phase 1: learn Q′ on tasks around μ_*.
    ExperimentConfig linear = c;
    linear.experiment = ExperimentKind::kLinear;
    const Environment env1 = draw_environment(linear, run, phase1_prior, 1);
    const TaskRunner runner1 = make_runner(linear, env1, 1);
    MetaTslbPolicy tslb(h.meta_prior, h.sigma_star);
    MetaTsPolicy ts(h.meta_prior, h.sigma_star);
    const bool want_tslb = std::find(c.agents.begin(), c.agents.end(), AgentKind::kMetaTslb) != c.agents.end();
    const bool want_ts = std::find(c.agents.begin(), c.agents.end(), AgentKind::kMetaTs) != c.agents.end();
    if (want_tslb) run_agent(linear, run, tslb, 1, runner1);
    if (want_ts) run_agent(linear, run, ts, 1, runner1);

    Eigen::VectorXd direction = draw_direction(c, static_cast<std::uint64_t>(run));
    if (c.flip_epsilon) direction = -direction;

    std::vector<RunRecord> out;
    for (double norm : c.epsilon_norms) {
        RunRecord rec;
        rec.run = run;
        rec.epsilon = norm * direction;
        rec.sigma_q = h.sigma_q;
        rec.sigma_star = h.sigma_star;
        rec.mu_star = h.mu_star + rec.epsilon;
        record_star_spectrum(rec, h.sigma_star);
        const GaussianBelief shifted(rec.mu_star, h.sigma_star, c.v);

        // Phase 2 uses task streams m+1 .. 2m so its tasks are fresh draws.
        const Environment env2 = draw_environment(linear, run, shifted, c.m + 1);
        const TaskRunner runner2 = make_runner(linear, env2, c.m + 1);
        for (AgentKind agent : c.agents) {
            std::unique_ptr<PriorPolicy> policy;
            if (agent == AgentKind::kMetaTslb) {
                policy = std::make_unique<MetaTslbPolicy>(tslb.meta_posterior().belief, h.sigma_star);
            } else if (agent == AgentKind::kMetaTs) {
                policy = std::make_unique<MetaTsPolicy>(ts.meta_posterior().belief, h.sigma_star);
            } else {
                policy = hierarchy_policy(agent, h.meta_prior, h.sigma_star, shifted, h.meta_prior);
            }
            rec.agents.push_back(run_agent(linear, run, *policy, c.m + 1, runner2, meta_probe(rec, *policy, rec.mu_star)));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

std::vector<ExperimentResult> run_generalization(const ExperimentConfig& config) {
    config.validate();
    if (config.experiment != ExperimentKind::kGeneralization) {
        throw ConfigError("run_generalization needs experiment = generalization");
    }
    std::vector<ExperimentResult> results(config.epsilon_norms.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].config = config;
        results[i].epsilon_norm = config.epsilon_norms[i];
        results[i].runs.resize(static_cast<std::size_t>(config.runs));
    }
    parallel_runs(config.runs, config.threads, [&](int r) {
        std::vector<RunRecord> recs = run_generalization_once(config, r);
        for (std::size_t i = 0; i < recs.size(); ++i) results[i].runs[static_cast<std::size_t>(r)] = std::move(recs[i]);
    });
    return results;
}

}  // namespace metats
