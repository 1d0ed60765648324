#include "metats/ts_engine.hpp"

#include <string>

#include "metats/errors.hpp"
#include "metats/linalg.hpp"

namespace metats {

PosteriorState ts_init(const GaussianBelief& prior) {
    PosteriorState state;
    const SpdFactor cov(prior.cov_core(), "prior covariance");
    state.precision = cov.inverse();
    state.mean = prior.mean();
    state.round = 1;
    state.info_accum = Eigen::VectorXd::Zero(prior.dim());
    state.prior_info = state.precision * prior.mean();
    state.noise_scale = prior.noise_scale();
    state.precision_factor = SpdFactor(state.precision, "prior precision").lower();
    return state;
}

Eigen::VectorXd posterior_sample(const PosteriorState& state, Rng& rng) {
    const Eigen::VectorXd z = standard_normal_vector(rng, state.dim());
    const Eigen::VectorXd offset =
        state.precision_factor.transpose().triangularView<Eigen::Upper>().solve(z);
    return state.mean + state.noise_scale * offset;
}

Selection ts_select(const PosteriorState& state, const RoundContexts& contexts, Rng& rng) {
    if (contexts.dim() != state.dim()) {
        throw DimensionMismatch("ts_select: contexts have dimension " + std::to_string(contexts.dim()) +
                                ", posterior has " + std::to_string(state.dim()));
    }
    Selection sel;
    sel.sample = posterior_sample(state, rng);
    sel.arm = best_arm(contexts, sel.sample);
    return sel;
}

PosteriorState ts_update(const PosteriorState& state, const Eigen::VectorXd& context, double reward) {
    if (context.size() != state.dim()) {
        throw DimensionMismatch("ts_update: context has length " + std::to_string(context.size()) +
                                ", posterior has dimension " + std::to_string(state.dim()));
    }
    PosteriorState next = state;
    next.precision.noalias() += context * context.transpose();
    symmetrize(next.precision);
    next.info_accum += reward * context;
    const SpdFactor factor(next.precision, "posterior precision");
    next.precision_factor = factor.lower();
    next.mean = factor.solve((next.prior_info + next.info_accum).eval());
    next.round = state.round + 1;
    return next;
}

double reward_noise(const TaskStreams& streams, int round) {
    Rng rng = streams.environment(Purpose::kRewardNoise, static_cast<std::uint64_t>(round));
    return standard_normal(rng);
}

void append_round(TaskOutcome& outcome, double regret) {
    const double prev = outcome.cumulative_regret.empty() ? 0.0 : outcome.cumulative_regret.back();
    outcome.instant_regret.push_back(regret);
    outcome.cumulative_regret.push_back(prev + regret);
}

namespace {

void record_diagnostics(TrajectoryDiagnostics& diag, const PosteriorState& state,
                        const RoundContexts& contexts) {
    diag.lambda_min.push_back(min_eigenvalue(state.precision));
    // s_i² = ‖L⁻¹ b_i‖² with B = LLᵀ.
    const Eigen::MatrixXd w =
        state.precision_factor.triangularView<Eigen::Lower>().solve(contexts.arms.transpose());
    diag.s_squared.push_back(w.colwise().squaredNorm().transpose());
    diag.context_norm_sq.push_back(contexts.arms.rowwise().squaredNorm());
}

}  // namespace

TaskOutcome run_ts_task(const GaussianBelief& prior, const BanditInstance& instance,
                        const ContextSource& contexts, int n, const TaskStreams& streams,
                        const TaskOptions& options) {
    if (n < 1) throw PreconditionViolation("run_ts_task: n must be >= 1");
    if (instance.mu.size() != prior.dim()) throw DimensionMismatch("run_ts_task: instance dimension");

    TaskOutcome out;
    out.history.reserve(static_cast<std::size_t>(n));
    out.instant_regret.reserve(static_cast<std::size_t>(n));
    out.cumulative_regret.reserve(static_cast<std::size_t>(n));
    if (options.collect_diagnostics) out.diagnostics.emplace();

    PosteriorState state = ts_init(prior);
    const double v = prior.noise_scale();
    for (int t = 1; t <= n; ++t) {
        const RoundContexts ctx = contexts(t);
        if (ctx.dim() != prior.dim()) throw DimensionMismatch("run_ts_task: context dimension");
        if (options.collect_diagnostics) record_diagnostics(*out.diagnostics, state, ctx);
        if (options.record_context_hashes) out.context_hashes.push_back(context_hash(ctx.arms));

        Rng rng = streams.agent(Purpose::kPosteriorSample, static_cast<std::uint64_t>(t));
        const Selection sel = ts_select(state, ctx, rng);
        const Eigen::VectorXd b = ctx.arms.row(sel.arm).transpose();
        const double reward = b.dot(instance.mu) + v * reward_noise(streams, t);

        append_round(out, instant_regret(instance, ctx, sel.arm));
        out.history.push_back({t, sel.arm, b, reward});
        state = ts_update(state, b, reward);
    }
    out.final_state = std::move(state);
    return out;
}

}  // namespace metats
