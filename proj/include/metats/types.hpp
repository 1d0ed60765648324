#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "metats/random.hpp"

namespace metats {

/// Multivariate Gaussian N(mean, v²·Σ). Only the core Σ is stored; the noise
/// scale v is applied implicitly. Construction symmetrizes Σ, checks it is
/// positive definite, and caches its Cholesky factor.
class GaussianBelief {
public:
    GaussianBelief(Eigen::VectorXd mean, Eigen::MatrixXd cov_core, double noise_scale);

    Eigen::Index dim() const { return mean_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& cov_core() const { return cov_core_; }
    double noise_scale() const { return noise_scale_; }
    const Eigen::MatrixXd& cov_factor() const { return cov_factor_; }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_core_;
    double noise_scale_;
    Eigen::MatrixXd cov_factor_;
};

// mean + v·L·z with L the Cholesky factor of the core covariance.
Eigen::VectorXd sample_gaussian(const GaussianBelief& belief, Rng& rng);

struct BanditInstance {
    Eigen::VectorXd mu;
};

/// The k context vectors of one round, one row per arm.
struct RoundContexts {
    Eigen::MatrixXd arms;  // k x d
    int round = 1;

    Eigen::Index num_arms() const { return arms.rows(); }
    Eigen::Index dim() const { return arms.cols(); }
};

struct HistoryEntry {
    int round = 1;
    // Arm index for finite-arm tasks; -1 when the arm is a chosen vector
    // (polyhedral arms). Sequential tasks store the mixed-radix combination.
    int arm = 0;
    Eigen::VectorXd context;
    double reward = 0.0;
};

enum class AgentKind { kMetaTslb, kMetaTs, kOracleTs, kMarginalTs };

std::string_view to_string(AgentKind kind);
std::optional<AgentKind> parse_agent(std::string_view name);
const std::vector<AgentKind>& all_agents();

struct RegretRecord {
    int run = 0;
    int task = 1;
    int round = 1;
    AgentKind agent = AgentKind::kMetaTslb;
    double instant_regret = 0.0;
    double cumulative_regret = 0.0;
};

struct RegretTrace {
    std::vector<RegretRecord> records;
};

// Index of the largest score; the lowest index wins ties.
int argmax_lowest(const Eigen::VectorXd& scores);

int best_arm(const RoundContexts& contexts, const Eigen::VectorXd& theta);

/// max_i b_iᵀμ − b_pulledᵀμ, clamped at 0 (the max includes the pulled arm).
double instant_regret(const BanditInstance& instance, const RoundContexts& contexts, int pulled);

// FNV-1a over the raw bytes of the context matrix; used for pairing logs.
std::uint64_t context_hash(const Eigen::MatrixXd& arms);

}  // namespace metats
