#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "metats/random.hpp"
#include "metats/ts_engine.hpp"
#include "metats/types.hpp"

namespace metats {

/// Gaussian meta-posterior Q_s = N(μ_{Q,s}, v²Σ_{Q,s}) over the unknown
/// instance-prior mean, after s-1 completed tasks.
struct MetaPosterior {
    GaussianBelief belief;
    int task_index = 1;
};

/// Sufficient statistics of one task: S = Σ b bᵀ and Y = Σ r b.
struct TaskStatistics {
    Eigen::MatrixXd gram;
    Eigen::VectorXd reward_weighted;
};

TaskStatistics task_statistics(std::span<const HistoryEntry> history, Eigen::Index dim);

/// Closed-form meta-posterior after one task:
///   Σ_{Q,s+1} = [Σ_{Q,s}⁻¹ + Σ_*⁻¹ − (Σ_* S Σ_* + Σ_*)⁻¹]⁻¹
///   μ_{Q,s+1} = Σ_{Q,s+1} [Σ_{Q,s}⁻¹ μ_{Q,s} + (Σ_* S + I)⁻ᵀ Y]
/// An empty history returns Q_s unchanged (with the task index advanced).
MetaPosterior meta_posterior_update(const MetaPosterior& q, const Eigen::MatrixXd& sigma_star,
                                    std::span<const HistoryEntry> history);

/// Same update assembled from the marginal-likelihood intermediates
///   G = S + Σ_*⁻¹,  W = Σ_*⁻¹ + Σ_{Q,s}⁻¹ − Σ_*⁻¹G⁻¹Σ_*⁻¹,
///   η = W⁻¹(Σ_{Q,s}⁻¹μ_{Q,s} + Σ_*⁻¹G⁻¹Y).
/// Kept as an independent second route for cross-checking.
MetaPosterior meta_posterior_update_direct(const MetaPosterior& q, const Eigen::MatrixXd& sigma_star,
                                           std::span<const HistoryEntry> history);

/// What distinguishes the agents: which TS prior each task starts from and what
/// is learned when the task ends. The task-level TS loop is shared.
class PriorPolicy {
public:
    virtual ~PriorPolicy() = default;
    virtual AgentKind kind() const = 0;
    virtual GaussianBelief begin_task(int task, const TaskStreams& streams) = 0;
    virtual void end_task(std::span<const HistoryEntry> history) = 0;
};

/// TS prior N(μ_{Q,s}, v²Σ_*) for task s.
class MetaTslbPolicy final : public PriorPolicy {
public:
    MetaTslbPolicy(const GaussianBelief& meta_prior, Eigen::MatrixXd sigma_star);

    AgentKind kind() const override { return AgentKind::kMetaTslb; }
    GaussianBelief begin_task(int task, const TaskStreams& streams) override;
    void end_task(std::span<const HistoryEntry> history) override;

    const MetaPosterior& meta_posterior() const { return q_; }

private:
    MetaPosterior q_;
    Eigen::MatrixXd sigma_star_;
};

/// TS prior N(μ̂_s, v²Σ_*) with μ̂_s drawn from Q_s.
class MetaTsPolicy final : public PriorPolicy {
public:
    MetaTsPolicy(const GaussianBelief& meta_prior, Eigen::MatrixXd sigma_star);

    AgentKind kind() const override { return AgentKind::kMetaTs; }
    GaussianBelief begin_task(int task, const TaskStreams& streams) override;
    void end_task(std::span<const HistoryEntry> history) override;

    const MetaPosterior& meta_posterior() const { return q_; }
    const Eigen::VectorXd& last_sampled_mean() const { return last_sample_; }

private:
    MetaPosterior q_;
    Eigen::MatrixXd sigma_star_;
    Eigen::VectorXd last_sample_;
};

/// The same prior for every task; nothing is learned across tasks. Used for
/// OracleTS (the true instance prior) and the meta-marginal TS baseline.
class FixedPriorPolicy final : public PriorPolicy {
public:
    FixedPriorPolicy(AgentKind kind, GaussianBelief prior) : kind_(kind), prior_(std::move(prior)) {}

    AgentKind kind() const override { return kind_; }
    GaussianBelief begin_task(int, const TaskStreams&) override { return prior_; }
    void end_task(std::span<const HistoryEntry>) override {}

private:
    AgentKind kind_;
    GaussianBelief prior_;
};

// N(μ_Q, v²(Σ_Q + Σ_*)): the distribution of μ_s once μ_* is integrated out.
GaussianBelief marginal_instance_prior(const GaussianBelief& meta_prior, const Eigen::MatrixXd& sigma_star);

GaussianBelief instance_prior_from(const Eigen::VectorXd& mean, const Eigen::MatrixXd& sigma_star,
                                   double noise_scale);

BanditInstance draw_instance(const GaussianBelief& instance_prior, const TaskStreams& streams);

using TaskContextSource = std::function<RoundContexts(int task, int round)>;

struct MultiTaskOutcome {
    std::vector<TaskOutcome> tasks;
    std::vector<BanditInstance> instances;

    RegretTrace to_trace(int run, AgentKind agent) const;
};

/// m tasks of TS driven by `policy`; task s draws μ_s from `instance_prior`
/// through the environment stream of (run, s).
MultiTaskOutcome run_policy_tasks(PriorPolicy& policy, const GaussianBelief& instance_prior, int m,
                                  int n, const TaskContextSource& contexts, const RunStreams& streams,
                                  const TaskOptions& options = {});

RegretTrace run_meta_tslb(const GaussianBelief& meta_prior, const GaussianBelief& instance_prior,
                          int m, int n, const TaskContextSource& contexts, const RunStreams& streams);
RegretTrace run_meta_ts(const GaussianBelief& meta_prior, const GaussianBelief& instance_prior, int m,
                        int n, const TaskContextSource& contexts, const RunStreams& streams);
RegretTrace run_oracle_ts(const GaussianBelief& instance_prior, int m, int n,
                          const TaskContextSource& contexts, const RunStreams& streams);
RegretTrace run_marginal_ts(const GaussianBelief& meta_prior, const GaussianBelief& instance_prior,
                            int m, int n, const TaskContextSource& contexts, const RunStreams& streams);

}  // namespace metats
