#include "metats/variants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "metats/errors.hpp"
#include "metats/linalg.hpp"
#include "metats/simplex.hpp"

namespace metats {

// ---------------------------------------------------------------------------
// PriorBank
// ---------------------------------------------------------------------------

PriorBank::PriorBank(std::vector<GaussianBelief> priors, Eigen::VectorXd weights)
    : priors_(std::move(priors)), weights_(std::move(weights)) {
    if (priors_.empty()) throw PreconditionViolation("prior bank must hold at least one prior");
    if (weights_.size() != static_cast<Eigen::Index>(priors_.size())) {
        throw DimensionMismatch("prior bank: one weight per prior required");
    }
    if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
        throw PreconditionViolation("prior bank weights must be finite and nonnegative");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-12) {
        throw PreconditionViolation("prior bank weights must sum to 1");
    }
    for (const GaussianBelief& p : priors_) {
        if (p.dim() != priors_.front().dim()) throw DimensionMismatch("prior bank: mixed dimensions");
        if (p.noise_scale() != priors_.front().noise_scale()) {
            throw PreconditionViolation("prior bank: all priors must share the noise scale");
        }
    }
}

PriorBank PriorBank::uniform(std::vector<GaussianBelief> priors) {
    const auto l = static_cast<Eigen::Index>(priors.size());
    if (l == 0) throw PreconditionViolation("prior bank must hold at least one prior");
    return PriorBank(std::move(priors), Eigen::VectorXd::Constant(l, 1.0 / static_cast<double>(l)));
}

double log_marginal_likelihood(const GaussianBelief& prior, std::span<const HistoryEntry> history) {
    const TaskStatistics st = task_statistics(history, prior.dim());
    const SpdFactor sigma(prior.cov_core(), "bank prior covariance");
    const Eigen::MatrixXd sigma_inv = sigma.inverse();
    Eigen::MatrixXd g = st.gram + sigma_inv;
    symmetrize(g);
    const SpdFactor gf(g, "G");
    const Eigen::VectorXd prior_info = sigma_inv * prior.mean();
    const Eigen::VectorXd h = st.reward_weighted + prior_info;
    const Eigen::VectorXd xi = gf.solve(h);
    const double v2 = prior.noise_scale() * prior.noise_scale();
    const double quad = prior.mean().dot(prior_info) - h.dot(xi);
    return -0.5 * sigma.log_determinant() - 0.5 * gf.log_determinant() - quad / (2.0 * v2);
}

PriorBank finite_prior_update(const PriorBank& bank, std::span<const HistoryEntry> history) {
    const auto l = static_cast<Eigen::Index>(bank.size());
    Eigen::VectorXd logw(l);
    for (Eigen::Index j = 0; j < l; ++j) {
        const double w = bank.weights()[j];
        logw[j] = w > 0.0 ? std::log(w) + log_marginal_likelihood(bank.prior(static_cast<std::size_t>(j)), history)
                          : -std::numeric_limits<double>::infinity();
    }
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) throw NumericalFailure("finite_prior_update: all weights vanished");
    // Scalar exp: Eigen's vectorised exp clamps large negative arguments to a subnormal.
    Eigen::VectorXd w = logw.unaryExpr([top](double x) { return std::exp(x - top); });
    w /= w.sum();
    return PriorBank(bank.priors(), std::move(w));
}

std::size_t finite_prior_select(const PriorBank& bank) {
    return static_cast<std::size_t>(argmax_lowest(bank.weights()));
}

std::size_t finite_prior_sample(const PriorBank& bank, Rng& rng) {
    const Eigen::VectorXd& w = bank.weights();
    std::discrete_distribution<std::size_t> pick(w.data(), w.data() + w.size());
    return pick(rng);
}

GaussianBelief mixture_moment_match(const PriorBank& bank) {
    const Eigen::Index d = bank.prior(0).dim();
    const double v2 = std::pow(bank.prior(0).noise_scale(), 2);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < bank.size(); ++j) mean += bank.weights()[static_cast<Eigen::Index>(j)] * bank.prior(j).mean();
    // Core covariance, in units of v²: Σ_j w_j (Σ_j + (μ_j − m)(μ_j − m)ᵀ / v²).
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t j = 0; j < bank.size(); ++j) {
        const Eigen::VectorXd diff = bank.prior(j).mean() - mean;
        cov += bank.weights()[static_cast<Eigen::Index>(j)] * (bank.prior(j).cov_core() + diff * diff.transpose() / v2);
    }
    symmetrize(cov);
    return GaussianBelief(std::move(mean), std::move(cov), bank.prior(0).noise_scale());
}

GaussianBelief FiniteBankPolicy::begin_task(int, const TaskStreams& streams) {
    if (rule_ == BankRule::kArgmax) {
        last_choice_ = finite_prior_select(bank_);
    } else {
        Rng rng = streams.agent(Purpose::kMetaSample, 0);
        last_choice_ = finite_prior_sample(bank_, rng);
    }
    return bank_.prior(last_choice_);
}

void FiniteBankPolicy::end_task(std::span<const HistoryEntry> history) {
    bank_ = finite_prior_update(bank_, history);
}

// ---------------------------------------------------------------------------
// Polyhedron
// ---------------------------------------------------------------------------

namespace {

void check_shapes(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    if (a.rows() != b.size() || a.cols() == 0) throw DimensionMismatch("polyhedron: A is c x d, b has length c");
    if (!a.allFinite() || !b.allFinite()) throw PreconditionViolation("polyhedron: non-finite data");
}

void check_feasible(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const LpSolution sol = maximize_linear(a, b, Eigen::VectorXd::Zero(a.cols()));
    if (sol.status == LpStatus::kInfeasible) throw InfeasibleProblem("polyhedron is empty");
}

}  // namespace

Polyhedron::Polyhedron(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {
    check_shapes(a_, b_);
    check_feasible(a_, b_);
    for (Eigen::Index i = 0; i < a_.cols(); ++i) {
        for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd c = Eigen::VectorXd::Zero(a_.cols());
            c[i] = sign;
            if (maximize_linear(a_, b_, c).status == LpStatus::kUnbounded) {
                throw UnboundedProblem("polyhedron is unbounded along coordinate " + std::to_string(i));
            }
        }
    }
}

Polyhedron::Polyhedron(Eigen::MatrixXd a, Eigen::VectorXd b, Trusted) : a_(std::move(a)), b_(std::move(b)) {}

Polyhedron Polyhedron::boxed(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double half_width) {
    check_shapes(a, b);
    if (!(half_width > 0.0)) throw PreconditionViolation("polyhedron box half-width must be positive");
    const Eigen::Index c = a.rows(), d = a.cols();
    Eigen::MatrixXd aa(c + 2 * d, d);
    Eigen::VectorXd bb(c + 2 * d);
    aa.topRows(c) = a;
    aa.middleRows(c, d) = Eigen::MatrixXd::Identity(d, d);
    aa.bottomRows(d) = -Eigen::MatrixXd::Identity(d, d);
    bb.head(c) = b;
    bb.tail(2 * d).setConstant(half_width);
    check_feasible(aa, bb);
    return Polyhedron(std::move(aa), std::move(bb), Trusted{});
}

Eigen::VectorXd lp_argmax(const Polyhedron& poly, const Eigen::VectorXd& objective) {
    if (objective.size() != poly.dim()) throw DimensionMismatch("lp_argmax: objective dimension");
    LpSolution sol = maximize_linear(poly.a(), poly.b(), objective);
    if (sol.status != LpStatus::kOptimal) {
        throw NumericalFailure("lp_argmax: solver did not reach an optimum on a validated polyhedron");
    }
    return std::move(sol.x);
}

PolyhedralRound make_polyhedral_round(Polyhedron region, const Eigen::VectorXd& mu) {
    const double best = lp_argmax(region, mu).dot(mu);
    return {std::move(region), best};
}

TaskOutcome run_polyhedral_ts_task(const GaussianBelief& prior, const BanditInstance& instance,
                                   const PolyhedralSource& rounds, int n, const TaskStreams& streams,
                                   const TaskOptions& options) {
    if (n < 1) throw PreconditionViolation("run_polyhedral_ts_task: n must be >= 1");
    TaskOutcome out;
    PosteriorState state = ts_init(prior);
    const double v = prior.noise_scale();
    for (int t = 1; t <= n; ++t) {
        const PolyhedralRound round = rounds(t);
        if (options.record_context_hashes) {
            Eigen::MatrixXd packed(round.region.a().rows(), round.region.dim() + 1);
            packed << round.region.a(), round.region.b();
            out.context_hashes.push_back(context_hash(packed));
        }
        Rng rng = streams.agent(Purpose::kPosteriorSample, static_cast<std::uint64_t>(t));
        const Eigen::VectorXd sample = posterior_sample(state, rng);
        const Eigen::VectorXd b = lp_argmax(round.region, sample);
        const double mean_reward = b.dot(instance.mu);
        const double reward = mean_reward + v * reward_noise(streams, t);

        double gap = round.optimal_value - mean_reward;
        const double tol = 1e-7 * std::max(1.0, std::abs(round.optimal_value));
        if (gap < -tol) throw NumericalFailure("polyhedral round " + std::to_string(t) + ": chosen arm beats the optimum");
        append_round(out, std::max(gap, 0.0));
        out.history.push_back({t, -1, b, reward});
        state = ts_update(state, b, reward);
    }
    out.final_state = std::move(state);
    return out;
}

// ---------------------------------------------------------------------------
// Sequential bandits
// ---------------------------------------------------------------------------

ContextMap ContextMap::identity() { return ContextMap(Kind::kIdentity, nullptr); }
ContextMap ContextMap::hadamard() { return ContextMap(Kind::kHadamard, nullptr); }
ContextMap ContextMap::custom(Fn fn) {
    if (!fn) throw PreconditionViolation("custom context map needs a callable");
    return ContextMap(Kind::kCustom, std::move(fn));
}

Eigen::VectorXd ContextMap::operator()(std::span<const Eigen::VectorXd> parts) const {
    switch (kind_) {
        case Kind::kIdentity:
            if (parts.size() != 1) throw DimensionMismatch("identity context map takes exactly one part");
            return parts.front();
        case Kind::kHadamard: {
            if (parts.empty()) throw DimensionMismatch("hadamard context map needs at least one part");
            Eigen::VectorXd out = parts.front();
            for (std::size_t i = 1; i < parts.size(); ++i) {
                if (parts[i].size() != out.size()) throw DimensionMismatch("hadamard parts differ in length");
                out.array() *= parts[i].array();
            }
            return out;
        }
        case Kind::kCustom:
            return fn_(parts);
    }
    return {};
}

void SequentialSpec::validate() const {
    if (p < 1) throw PreconditionViolation("sequential bandit needs p >= 1");
    if (static_cast<int>(arm_counts.size()) != p) throw DimensionMismatch("arm_counts must have p entries");
    if (static_cast<int>(initial_arms.size()) != p) throw DimensionMismatch("initial_arms must have p entries");
    for (int i = 0; i < p; ++i) {
        if (arm_counts[static_cast<std::size_t>(i)] < 1) throw PreconditionViolation("every sub-bandit needs an arm");
        const int a0 = initial_arms[static_cast<std::size_t>(i)];
        if (a0 < 0 || a0 >= arm_counts[static_cast<std::size_t>(i)]) throw ArmIndexError("initial arm out of range");
    }
    if (gamma.kind() == ContextMap::Kind::kIdentity && p != 1) {
        throw PreconditionViolation("identity context map requires p = 1");
    }
}

int SequentialSpec::encode(const std::vector<int>& arms) const {
    int code = 0, radix = 1;
    for (int i = 0; i < p; ++i) {
        code += arms[static_cast<std::size_t>(i)] * radix;
        radix *= arm_counts[static_cast<std::size_t>(i)];
    }
    return code;
}

namespace {

void check_round(const SequentialSpec& spec, const SequentialRound& round) {
    if (static_cast<int>(round.arms.size()) != spec.p) throw DimensionMismatch("sequential round: p arm sets expected");
    for (int i = 0; i < spec.p; ++i) {
        if (round.arms[static_cast<std::size_t>(i)].rows() != spec.arm_counts[static_cast<std::size_t>(i)]) {
            throw DimensionMismatch("sequential round: wrong arm count for sub-bandit " + std::to_string(i));
        }
    }
}

std::vector<Eigen::VectorXd> gather(const SequentialRound& round, const std::vector<int>& arms) {
    std::vector<Eigen::VectorXd> parts;
    parts.reserve(arms.size());
    for (std::size_t i = 0; i < arms.size(); ++i) parts.emplace_back(round.arms[i].row(arms[i]).transpose());
    return parts;
}

Eigen::VectorXd combine(const SequentialSpec& spec, const SequentialRound& round, const std::vector<int>& arms) {
    const std::vector<Eigen::VectorXd> parts = gather(round, arms);
    Eigen::VectorXd b = spec.gamma(parts);
    if (b.size() != spec.dim) throw DimensionMismatch("context map output has the wrong length");
    return b;
}

void hadamard_best(const SequentialRound& round, std::size_t level, const Eigen::VectorXd& partial, double& best) {
    const Eigen::MatrixXd& arms = round.arms[level];
    if (level + 1 == round.arms.size()) {
        const double v = (arms * partial).maxCoeff();
        if (v > best) best = v;
        return;
    }
    Eigen::VectorXd next(partial.size());
    for (Eigen::Index a = 0; a < arms.rows(); ++a) {
        next = partial.cwiseProduct(arms.row(a).transpose());
        hadamard_best(round, level + 1, next, best);
    }
}

}  // namespace

double sequential_value(const SequentialSpec& spec, const SequentialRound& round,
                        const std::vector<int>& arms, const Eigen::VectorXd& theta) {
    return combine(spec, round, arms).dot(theta);
}

double sequential_optimum(const SequentialSpec& spec, const SequentialRound& round, const Eigen::VectorXd& mu) {
    check_round(spec, round);
    double best = -std::numeric_limits<double>::infinity();
    if (spec.gamma.kind() == ContextMap::Kind::kHadamard) {
        hadamard_best(round, 0, mu, best);
        return best;
    }
    std::vector<int> arms(static_cast<std::size_t>(spec.p), 0);
    while (true) {
        best = std::max(best, sequential_value(spec, round, arms, mu));
        std::size_t i = 0;
        while (i < arms.size() && ++arms[i] == spec.arm_counts[i]) arms[i++] = 0;
        if (i == arms.size()) break;
    }
    return best;
}

std::vector<int> sequential_choose(const SequentialSpec& spec, const SequentialRound& round,
                                   const Eigen::VectorXd& theta, const std::vector<int>& previous) {
    check_round(spec, round);
    std::vector<int> current = previous;
    for (int i = 0; i < spec.p; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (spec.gamma.kind() == ContextMap::Kind::kHadamard) {
            Eigen::VectorXd w = theta;
            for (int j = 0; j < spec.p; ++j) {
                if (j != i) w.array() *= round.arms[static_cast<std::size_t>(j)].row(current[static_cast<std::size_t>(j)]).transpose().array();
            }
            current[ui] = argmax_lowest(round.arms[ui] * w);
            continue;
        }
        int best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < spec.arm_counts[ui]; ++a) {
            current[ui] = a;
            const double v = sequential_value(spec, round, current, theta);
            if (v > best_value) {
                best_value = v;
                best = a;
            }
        }
        current[ui] = best;
    }
    return current;
}

TaskOutcome run_sequential_ts(const SequentialSpec& spec, const GaussianBelief& prior,
                              const BanditInstance& instance, const SequentialSource& rounds, int n,
                              const TaskStreams& streams, const TaskOptions& options,
                              std::vector<std::vector<int>>* chosen_arms) {
    spec.validate();
    if (n < 1) throw PreconditionViolation("run_sequential_ts: n must be >= 1");
    if (prior.dim() != spec.dim || instance.mu.size() != spec.dim) throw DimensionMismatch("run_sequential_ts: dimension");

    TaskOutcome out;
    PosteriorState state = ts_init(prior);
    const double v = prior.noise_scale();
    std::vector<int> previous = spec.initial_arms;
    for (int t = 1; t <= n; ++t) {
        const SequentialRound round = rounds(t);
        if (options.record_context_hashes) {
            std::uint64_t h = 0;
            for (const Eigen::MatrixXd& arms : round.arms) h = splitmix64(h ^ context_hash(arms));
            out.context_hashes.push_back(h);
        }
        Rng rng = streams.agent(Purpose::kPosteriorSample, static_cast<std::uint64_t>(t));
        const Eigen::VectorXd sample = posterior_sample(state, rng);
        std::vector<int> arms = sequential_choose(spec, round, sample, previous);
        const Eigen::VectorXd b = combine(spec, round, arms);
        const double mean_reward = b.dot(instance.mu);
        const double reward = mean_reward + v * reward_noise(streams, t);
        const double optimum = round.optimal_value ? *round.optimal_value : sequential_optimum(spec, round, instance.mu);

        double gap = optimum - mean_reward;
        const double tol = 1e-9 * std::max(1.0, std::abs(optimum));
        if (gap < -tol) throw NumericalFailure("sequential round " + std::to_string(t) + ": chosen arms beat the optimum");
        append_round(out, std::max(gap, 0.0));
        out.history.push_back({t, spec.encode(arms), b, reward});
        if (chosen_arms) chosen_arms->push_back(arms);
        state = ts_update(state, b, reward);
        previous = std::move(arms);
    }
    out.final_state = std::move(state);
    return out;
}

}  // namespace metats
