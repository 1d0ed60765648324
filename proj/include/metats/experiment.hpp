#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "metats/csv_io.hpp"
#include "metats/random.hpp"
#include "metats/types.hpp"

namespace metats {

enum class ExperimentKind { kLinear, kFinitePriors, kInfiniteArms, kSequential, kGeneralization };

std::string_view to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_experiment(std::string_view name);

/// Every knob of a simulation. Defaults reproduce the benchmark scale: 20
/// tasks of 200 rounds, 20 arms in 5 dimensions, 100 runs, contexts uniform
/// on [0, 50]^d.
struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::kLinear;
    int m = 20;
    int n = 200;
    int k = 20;
    int d = 5;
    int runs = 100;
    double v = 0.2;
    double context_low = 0.0;
    double context_high = 50.0;

    // finite_priors
    int L = 50;
    double finite_prior_mean_range = 1.0;     // means uniform on [−r, r]^d
    double finite_prior_min_separation = 0.0; // rejection-sample means until pairwise ≥ this

    // sequential
    int p = 3;
    std::vector<int> arm_counts{20, 15, 5};

    // infinite_arms
    int polytope_constraints = 5;
    double box_bound = 50.0;

    // generalization
    std::vector<double> epsilon_norms{0.0, 1.0, 3.0, 6.0};
    bool flip_epsilon = false;

    std::uint64_t root_seed = 20240601;
    std::vector<AgentKind> agents = all_agents();
    bool normalize_contexts = false;  // b ← b / max(1, ‖b‖)
    bool shared_contexts = false;     // every task sees the same context sequence
    int threads = 1;                  // 0 = hardware concurrency
    bool independent_agent_sampling = true;  // false: agents share posterior-sampling streams
    bool record_env_log = false;

    void validate() const;  // throws ConfigError
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

/// Random symmetric, non-diagonal PD matrix with every |entry| < max_entry:
/// M·Mᵀ/d + 0.05·I for M uniform on [−1, 1]^{d×d}, rescaled if needed.
Eigen::MatrixXd generate_covariance(int d, double max_entry, Rng& rng);

// Σ_* drawn for a run of a hierarchical experiment.
Eigen::MatrixXd run_sigma_star(const ExperimentConfig& config, std::uint64_t run);

// Environment draws shared by every agent of a run.
RoundContexts draw_contexts(const ExperimentConfig& config, std::uint64_t run, std::uint64_t task_key, int round);

struct AgentTrack {
    AgentKind agent = AgentKind::kMetaTslb;
    std::vector<std::vector<double>> instant;  // [task−1][round−1]
    std::vector<double> task_regret;           // n-round regret of each task
    std::vector<std::vector<std::uint64_t>> context_hashes;

    double total() const;
};

struct RunRecord {
    int run = 0;
    std::vector<AgentTrack> agents;  // configuration order

    Eigen::MatrixXd sigma_q;
    Eigen::MatrixXd sigma_star;
    Eigen::VectorXd mu_star;       // the mean tasks are drawn around (μ_* + ε in phase 2)
    double lambda_min = 0.0;       // of Σ_*⁻¹
    double lambda_max = 0.0;
    Eigen::VectorXd epsilon;

    // Meta-TSLB meta-posterior before each task and after the last (m + 1 entries).
    std::vector<double> meta_lambda_max;
    std::vector<double> meta_mean_error;  // ‖μ_{Q,s} − μ_*‖

    // finite_priors
    int true_prior = -1;
    std::vector<int> selected_prior;  // Meta-TSLB's choice per task
    int final_argmax_prior = -1;      // bank argmax after all m tasks

    const AgentTrack* track(AgentKind agent) const;
};

struct ExperimentResult {
    ExperimentConfig config;
    double epsilon_norm = 0.0;  // generalization only
    std::vector<RunRecord> runs;

    std::vector<double> totals(AgentKind agent) const;  // per run, summed over tasks
    std::vector<double> task_regrets(AgentKind agent, int task) const;
    std::vector<SummaryRow> summary() const;
    std::size_t trace_rows() const;
    void write_trace(std::ostream& out) const;
    void write_summary(std::ostream& out) const;
    void write_env_log(std::ostream& out) const;
};

/// linear, finite_priors, infinite_arms or sequential. Failures surface as
/// RunFailure carrying the (run, task, round) coordinate.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Phase 1 learns a meta-posterior on tasks around μ_*; phase 2 reuses it on
/// fresh tasks around μ_* + ε. One result per configured ‖ε‖, phase-2 only.
std::vector<ExperimentResult> run_generalization(const ExperimentConfig& config);

// Mismatched context hashes between agents of the same run, task and round.
std::vector<std::string> check_pairing(const ExperimentResult& result);

}  // namespace metats
