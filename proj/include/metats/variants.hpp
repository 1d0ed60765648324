#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "metats/meta_engine.hpp"
#include "metats/random.hpp"
#include "metats/ts_engine.hpp"
#include "metats/types.hpp"

namespace metats {

// ---------------------------------------------------------------------------
// Finite set of candidate instance priors
// ---------------------------------------------------------------------------

/// L candidate instance priors P⁽ʲ⁾ = N(μ⁽ʲ⁾, v²Σ⁽ʲ⁾) and the belief w over
/// which one generated the tasks. All priors share the dimension and v.
class PriorBank {
public:
    PriorBank(std::vector<GaussianBelief> priors, Eigen::VectorXd weights);
    static PriorBank uniform(std::vector<GaussianBelief> priors);

    std::size_t size() const { return priors_.size(); }
    const std::vector<GaussianBelief>& priors() const { return priors_; }
    const GaussianBelief& prior(std::size_t j) const { return priors_.at(j); }
    const Eigen::VectorXd& weights() const { return weights_; }

private:
    std::vector<GaussianBelief> priors_;
    Eigen::VectorXd weights_;
};

/// log P(rewards | P⁽ʲ⁾) up to a constant shared by all priors with the same
/// noise scale:
///   −½log|Σ| − ½log|G| − (1/2v²)[μᵀΣ⁻¹μ − ξᵀGξ],
///   G = S + Σ⁻¹,  ξ = G⁻¹(Y + Σ⁻¹μ).
double log_marginal_likelihood(const GaussianBelief& prior, std::span<const HistoryEntry> history);

/// w_{s+1}(j) ∝ f(j)·w_s(j), evaluated in the log domain.
PriorBank finite_prior_update(const PriorBank& bank, std::span<const HistoryEntry> history);

// Index of the largest weight (lowest index on ties).
std::size_t finite_prior_select(const PriorBank& bank);

// Draw j ~ w.
std::size_t finite_prior_sample(const PriorBank& bank, Rng& rng);

/// Moment-matched Gaussian of the bank mixture under its current weights.
GaussianBelief mixture_moment_match(const PriorBank& bank);

enum class BankRule { kArgmax, kSample };

/// Meta-learning over a prior bank: each task uses the bank prior with the
/// largest weight (kArgmax, reported as meta_tslb) or a sampled one (kSample,
/// reported as meta_ts), then reweights the bank with the task history.
class FiniteBankPolicy final : public PriorPolicy {
public:
    FiniteBankPolicy(PriorBank bank, BankRule rule) : bank_(std::move(bank)), rule_(rule) {}

    AgentKind kind() const override {
        return rule_ == BankRule::kArgmax ? AgentKind::kMetaTslb : AgentKind::kMetaTs;
    }
    GaussianBelief begin_task(int task, const TaskStreams& streams) override;
    void end_task(std::span<const HistoryEntry> history) override;

    const PriorBank& bank() const { return bank_; }
    std::size_t last_choice() const { return last_choice_; }

private:
    PriorBank bank_;
    BankRule rule_;
    std::size_t last_choice_ = 0;
};

// ---------------------------------------------------------------------------
// Polyhedral (infinite) arm sets
// ---------------------------------------------------------------------------

/// {x : A x ≤ b}, checked nonempty and bounded at construction.
class Polyhedron {
public:
    Polyhedron(Eigen::MatrixXd a, Eigen::VectorXd b);

    /// Appends the box −h ≤ x_i ≤ h, which makes the region bounded; only
    /// feasibility is then checked.
    static Polyhedron boxed(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double half_width);

    Eigen::Index dim() const { return a_.cols(); }
    const Eigen::MatrixXd& a() const { return a_; }
    const Eigen::VectorXd& b() const { return b_; }

private:
    struct Trusted {};
    Polyhedron(Eigen::MatrixXd a, Eigen::VectorXd b, Trusted);

    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
};

// A maximizing vertex of objectiveᵀx over the polyhedron.
Eigen::VectorXd lp_argmax(const Polyhedron& poly, const Eigen::VectorXd& objective);

struct PolyhedralRound {
    Polyhedron region;
    double optimal_value = 0.0;  // max over the region of xᵀμ for the task instance
};

PolyhedralRound make_polyhedral_round(Polyhedron region, const Eigen::VectorXd& mu);

using PolyhedralSource = std::function<PolyhedralRound(int round)>;

/// TS where each round's arm set is a polyhedron: the pulled arm is the LP
/// argmax under the posterior sample.
TaskOutcome run_polyhedral_ts_task(const GaussianBelief& prior, const BanditInstance& instance,
                                   const PolyhedralSource& rounds, int n, const TaskStreams& streams,
                                   const TaskOptions& options = {});

// ---------------------------------------------------------------------------
// Sequential linear bandits
// ---------------------------------------------------------------------------

/// Γ: combines the p chosen sub-bandit contexts into the reward-bearing vector.
class ContextMap {
public:
    enum class Kind { kIdentity, kHadamard, kCustom };
    using Fn = std::function<Eigen::VectorXd(std::span<const Eigen::VectorXd>)>;

    static ContextMap identity();
    static ContextMap hadamard();
    static ContextMap custom(Fn fn);

    Kind kind() const { return kind_; }
    Eigen::VectorXd operator()(std::span<const Eigen::VectorXd> parts) const;

private:
    ContextMap(Kind kind, Fn fn) : kind_(kind), fn_(std::move(fn)) {}
    Kind kind_;
    Fn fn_;
};

struct SequentialSpec {
    int p = 1;
    std::vector<int> arm_counts;
    ContextMap gamma = ContextMap::identity();
    std::vector<int> initial_arms;  // arms assumed pulled in round 0
    int dim = 1;

    void validate() const;
    int encode(const std::vector<int>& arms) const;  // mixed radix, sub-bandit 0 fastest
};

struct SequentialRound {
    std::vector<Eigen::MatrixXd> arms;  // per sub-bandit: arm_counts[i] rows
    int round = 1;
    std::optional<double> optimal_value;
};

double sequential_value(const SequentialSpec& spec, const SequentialRound& round,
                        const std::vector<int>& arms, const Eigen::VectorXd& theta);

// Max of Γ(...)ᵀμ over the full product of arm choices.
double sequential_optimum(const SequentialSpec& spec, const SequentialRound& round, const Eigen::VectorXd& mu);

/// One pass over the sub-bandits in order; sub-bandit i maximizes ψ with the
/// arms of j < i from this round and j > i from `previous`.
std::vector<int> sequential_choose(const SequentialSpec& spec, const SequentialRound& round,
                                   const Eigen::VectorXd& theta, const std::vector<int>& previous);

using SequentialSource = std::function<SequentialRound(int round)>;

TaskOutcome run_sequential_ts(const SequentialSpec& spec, const GaussianBelief& prior,
                              const BanditInstance& instance, const SequentialSource& rounds, int n,
                              const TaskStreams& streams, const TaskOptions& options = {},
                              std::vector<std::vector<int>>* chosen_arms = nullptr);

}  // namespace metats
