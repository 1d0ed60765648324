#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "metats/random.hpp"
#include "metats/types.hpp"

namespace metats {

/// Thompson sampling posterior N(μ̂(t), v²·B(t)⁻¹), kept in precision form.
///
/// B(t) = B(1) + Σ_{τ<t} b_τ b_τᵀ and μ̂(t) = B(t)⁻¹ [B(1)μ̂(1) + Σ_{τ<t} b_τ r_τ].
/// Both sums are stored, so the mean is always recomputed from the batch
/// quantities rather than propagated.
struct PosteriorState {
    Eigen::MatrixXd precision;        // B(t)
    Eigen::VectorXd mean;             // μ̂(t)
    int round = 1;
    Eigen::VectorXd info_accum;       // Σ b r
    Eigen::VectorXd prior_info;       // B(1) μ̂(1)
    double noise_scale = 1.0;
    Eigen::MatrixXd precision_factor; // lower Cholesky factor of B(t)

    Eigen::Index dim() const { return mean.size(); }
};

PosteriorState ts_init(const GaussianBelief& prior);

// One draw μ̃ ~ N(μ̂, v²B⁻¹), computed as μ̂ + v·L⁻ᵀz with B = LLᵀ.
Eigen::VectorXd posterior_sample(const PosteriorState& state, Rng& rng);

struct Selection {
    int arm = 0;
    Eigen::VectorXd sample;
};

Selection ts_select(const PosteriorState& state, const RoundContexts& contexts, Rng& rng);

PosteriorState ts_update(const PosteriorState& state, const Eigen::VectorXd& context, double reward);

/// Per-round quantities the regret analysis reasons about: λ_min(B(t)) and
/// s_i(t)² = b_i(t)ᵀB(t)⁻¹b_i(t) for every arm.
struct TrajectoryDiagnostics {
    std::vector<double> lambda_min;            // index t-1
    std::vector<Eigen::VectorXd> s_squared;    // per round, one entry per arm
    std::vector<Eigen::VectorXd> context_norm_sq;
};

using ContextSource = std::function<RoundContexts(int round)>;

struct TaskOptions {
    bool collect_diagnostics = false;
    bool record_context_hashes = false;
};

struct TaskOutcome {
    std::vector<HistoryEntry> history;
    std::vector<double> instant_regret;
    std::vector<double> cumulative_regret;
    PosteriorState final_state;
    std::vector<std::uint64_t> context_hashes;
    std::optional<TrajectoryDiagnostics> diagnostics;

    double total_regret() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
};

/// Runs n rounds of TS on one instance. Rewards are bᵀμ + v·z with z drawn
/// from the task's reward-noise environment stream for that round, so agents
/// sharing a task see the same noise sequence.
TaskOutcome run_ts_task(const GaussianBelief& prior, const BanditInstance& instance,
                        const ContextSource& contexts, int n, const TaskStreams& streams,
                        const TaskOptions& options = {});

// Shared by the variant runners.
double reward_noise(const TaskStreams& streams, int round);
void append_round(TaskOutcome& outcome, double regret);

}  // namespace metats
