#include "metats/meta_engine.hpp"

#include <string>

#include <Eigen/LU>

#include "metats/errors.hpp"
#include "metats/linalg.hpp"

namespace metats {

TaskStatistics task_statistics(std::span<const HistoryEntry> history, Eigen::Index dim) {
    TaskStatistics st{Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim)};
    for (const HistoryEntry& h : history) {
        if (h.context.size() != dim) {
            throw DimensionMismatch("history entry at round " + std::to_string(h.round) +
                                    " has context length " + std::to_string(h.context.size()));
        }
        st.gram.noalias() += h.context * h.context.transpose();
        st.reward_weighted += h.reward * h.context;
    }
    symmetrize(st.gram);
    return st;
}

namespace {

void check_sigma_star(const MetaPosterior& q, const Eigen::MatrixXd& sigma_star) {
    if (sigma_star.rows() != q.belief.dim() || sigma_star.cols() != q.belief.dim()) {
        throw DimensionMismatch("sigma_star must be " + std::to_string(q.belief.dim()) + "x" +
                                std::to_string(q.belief.dim()));
    }
}

MetaPosterior assemble(const MetaPosterior& q, Eigen::MatrixXd w, const Eigen::VectorXd& rhs) {
    symmetrize(w);
    const SpdFactor wf(w, "meta-posterior precision");
    Eigen::MatrixXd cov = wf.inverse();
    Eigen::VectorXd mean = cov * rhs;
    return {GaussianBelief(std::move(mean), std::move(cov), q.belief.noise_scale()), q.task_index + 1};
}

}  // namespace

MetaPosterior meta_posterior_update(const MetaPosterior& q, const Eigen::MatrixXd& sigma_star,
                                    std::span<const HistoryEntry> history) {
    check_sigma_star(q, sigma_star);
    if (history.empty()) return {q.belief, q.task_index + 1};

    const Eigen::Index d = q.belief.dim();
    const TaskStatistics st = task_statistics(history, d);
    const Eigen::MatrixXd sq_inv = spd_inverse(q.belief.cov_core(), "meta-posterior covariance");
    const Eigen::MatrixXd star_inv = spd_inverse(sigma_star, "instance covariance");

    Eigen::MatrixXd inner = sigma_star * st.gram * sigma_star + sigma_star;
    symmetrize(inner);
    const Eigen::MatrixXd inner_inv = spd_inverse(inner, "Σ_* S Σ_* + Σ_*");

    // (Σ_* S + I)⁻ᵀ Y = (S Σ_* + I)⁻¹ Y
    const Eigen::MatrixXd k_t = st.gram * sigma_star + Eigen::MatrixXd::Identity(d, d);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(k_t);
    const Eigen::VectorXd shrunk = lu.solve(st.reward_weighted);
    if (!shrunk.allFinite()) throw NumericalFailure("Σ_* S + I is singular");

    return assemble(q, sq_inv + star_inv - inner_inv, sq_inv * q.belief.mean() + shrunk);
}

MetaPosterior meta_posterior_update_direct(const MetaPosterior& q, const Eigen::MatrixXd& sigma_star,
                                           std::span<const HistoryEntry> history) {
    check_sigma_star(q, sigma_star);
    if (history.empty()) return {q.belief, q.task_index + 1};

    const Eigen::Index d = q.belief.dim();
    const TaskStatistics st = task_statistics(history, d);
    const Eigen::MatrixXd sq_inv = spd_inverse(q.belief.cov_core(), "meta-posterior covariance");
    const Eigen::MatrixXd star_inv = spd_inverse(sigma_star, "instance covariance");

    Eigen::MatrixXd g = st.gram + star_inv;
    symmetrize(g);
    const SpdFactor gf(g, "G");
    const Eigen::MatrixXd g_inv_star_inv = gf.solve(star_inv);  // G⁻¹Σ_*⁻¹
    const Eigen::MatrixXd w = star_inv + sq_inv - star_inv * g_inv_star_inv;
    const Eigen::VectorXd rhs = sq_inv * q.belief.mean() + star_inv * gf.solve(st.reward_weighted);
    return assemble(q, w, rhs);
}

GaussianBelief marginal_instance_prior(const GaussianBelief& meta_prior, const Eigen::MatrixXd& sigma_star) {
    Eigen::MatrixXd cov = meta_prior.cov_core() + sigma_star;
    return GaussianBelief(meta_prior.mean(), std::move(cov), meta_prior.noise_scale());
}

GaussianBelief instance_prior_from(const Eigen::VectorXd& mean, const Eigen::MatrixXd& sigma_star,
                                   double noise_scale) {
    return GaussianBelief(mean, sigma_star, noise_scale);
}

BanditInstance draw_instance(const GaussianBelief& instance_prior, const TaskStreams& streams) {
    Rng rng = streams.environment(Purpose::kInstance, 0);
    return {sample_gaussian(instance_prior, rng)};
}

MetaTslbPolicy::MetaTslbPolicy(const GaussianBelief& meta_prior, Eigen::MatrixXd sigma_star)
    : q_{meta_prior, 1}, sigma_star_(std::move(sigma_star)) {
    check_sigma_star(q_, sigma_star_);
}

GaussianBelief MetaTslbPolicy::begin_task(int, const TaskStreams&) {
    return GaussianBelief(q_.belief.mean(), sigma_star_, q_.belief.noise_scale());
}

void MetaTslbPolicy::end_task(std::span<const HistoryEntry> history) {
    q_ = meta_posterior_update(q_, sigma_star_, history);
}

MetaTsPolicy::MetaTsPolicy(const GaussianBelief& meta_prior, Eigen::MatrixXd sigma_star)
    : q_{meta_prior, 1}, sigma_star_(std::move(sigma_star)) {
    check_sigma_star(q_, sigma_star_);
}

GaussianBelief MetaTsPolicy::begin_task(int, const TaskStreams& streams) {
    Rng rng = streams.agent(Purpose::kMetaSample, 0);
    last_sample_ = sample_gaussian(q_.belief, rng);
    return GaussianBelief(last_sample_, sigma_star_, q_.belief.noise_scale());
}

void MetaTsPolicy::end_task(std::span<const HistoryEntry> history) {
    q_ = meta_posterior_update(q_, sigma_star_, history);
}

RegretTrace MultiTaskOutcome::to_trace(int run, AgentKind agent) const {
    RegretTrace trace;
    for (std::size_t s = 0; s < tasks.size(); ++s) {
        const TaskOutcome& task = tasks[s];
        for (std::size_t t = 0; t < task.instant_regret.size(); ++t) {
            trace.records.push_back({run, static_cast<int>(s) + 1, static_cast<int>(t) + 1, agent,
                                     task.instant_regret[t], task.cumulative_regret[t]});
        }
    }
    return trace;
}

MultiTaskOutcome run_policy_tasks(PriorPolicy& policy, const GaussianBelief& instance_prior, int m,
                                  int n, const TaskContextSource& contexts, const RunStreams& streams,
                                  const TaskOptions& options) {
    if (m < 1) throw PreconditionViolation("number of tasks must be >= 1");
    MultiTaskOutcome out;
    for (int s = 1; s <= m; ++s) {
        const TaskStreams ts = streams.task(static_cast<std::uint64_t>(s));
        BanditInstance instance = draw_instance(instance_prior, ts);
        const GaussianBelief prior = policy.begin_task(s, ts);
        TaskOutcome task = run_ts_task(
            prior, instance, [&](int t) { return contexts(s, t); }, n, ts, options);
        policy.end_task(task.history);
        out.tasks.push_back(std::move(task));
        out.instances.push_back(std::move(instance));
    }
    return out;
}

RegretTrace run_meta_tslb(const GaussianBelief& meta_prior, const GaussianBelief& instance_prior,
                          int m, int n, const TaskContextSource& contexts, const RunStreams& streams) {
    MetaTslbPolicy policy(meta_prior, instance_prior.cov_core());
    return run_policy_tasks(policy, instance_prior, m, n, contexts, streams)
        .to_trace(static_cast<int>(streams.run), policy.kind());
}

RegretTrace run_meta_ts(const GaussianBelief& meta_prior, const GaussianBelief& instance_prior, int m,
                        int n, const TaskContextSource& contexts, const RunStreams& streams) {
    MetaTsPolicy policy(meta_prior, instance_prior.cov_core());
    return run_policy_tasks(policy, instance_prior, m, n, contexts, streams)
        .to_trace(static_cast<int>(streams.run), policy.kind());
}

RegretTrace run_oracle_ts(const GaussianBelief& instance_prior, int m, int n,
                          const TaskContextSource& contexts, const RunStreams& streams) {
    FixedPriorPolicy policy(AgentKind::kOracleTs, instance_prior);
    return run_policy_tasks(policy, instance_prior, m, n, contexts, streams)
        .to_trace(static_cast<int>(streams.run), policy.kind());
}

RegretTrace run_marginal_ts(const GaussianBelief& meta_prior, const GaussianBelief& instance_prior,
                            int m, int n, const TaskContextSource& contexts, const RunStreams& streams) {
    FixedPriorPolicy policy(AgentKind::kMarginalTs,
                            marginal_instance_prior(meta_prior, instance_prior.cov_core()));
    return run_policy_tasks(policy, instance_prior, m, n, contexts, streams)
        .to_trace(static_cast<int>(streams.run), policy.kind());
}

}  // namespace metats
