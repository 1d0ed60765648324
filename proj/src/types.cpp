#include "metats/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "metats/errors.hpp"
#include "metats/linalg.hpp"

namespace metats {

GaussianBelief::GaussianBelief(Eigen::VectorXd mean, Eigen::MatrixXd cov_core, double noise_scale)
    : mean_(std::move(mean)), cov_core_(std::move(cov_core)), noise_scale_(noise_scale) {
    if (!(noise_scale_ > 0.0) || !std::isfinite(noise_scale_)) {
        throw InvalidBelief("noise scale must be positive and finite");
    }
    if (cov_core_.rows() != mean_.size() || cov_core_.cols() != mean_.size() || mean_.size() == 0) {
        throw InvalidBelief("covariance must be " + std::to_string(mean_.size()) + "x" +
                            std::to_string(mean_.size()));
    }
    if (!mean_.allFinite()) throw InvalidBelief("mean has non-finite entries");
    if (!cov_core_.allFinite()) throw InvalidBelief("covariance has non-finite entries");
    const double scale = std::max(1.0, cov_core_.cwiseAbs().maxCoeff());
    if (max_asymmetry(cov_core_) > 1e-8 * scale) throw InvalidBelief("covariance is not symmetric");
    symmetrize(cov_core_);
    try {
        cov_factor_ = SpdFactor(cov_core_, "belief covariance").lower();
    } catch (const NumericalFailure& e) {
        throw InvalidBelief(e.what());
    }
}

Eigen::VectorXd sample_gaussian(const GaussianBelief& belief, Rng& rng) {
    const Eigen::VectorXd z = standard_normal_vector(rng, belief.dim());
    return belief.mean() + belief.noise_scale() * (belief.cov_factor() * z);
}

std::string_view to_string(AgentKind kind) {
    switch (kind) {
        case AgentKind::kMetaTslb: return "meta_tslb";
        case AgentKind::kMetaTs: return "meta_ts";
        case AgentKind::kOracleTs: return "oracle_ts";
        case AgentKind::kMarginalTs: return "marginal_ts";
    }
    return "unknown";
}

std::optional<AgentKind> parse_agent(std::string_view name) {
    for (AgentKind k : all_agents()) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

const std::vector<AgentKind>& all_agents() {
    static const std::vector<AgentKind> kinds{AgentKind::kMetaTslb, AgentKind::kMetaTs,
                                              AgentKind::kOracleTs, AgentKind::kMarginalTs};
    return kinds;
}

int argmax_lowest(const Eigen::VectorXd& scores) {
    int best = 0;
    for (Eigen::Index i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = static_cast<int>(i);
    }
    return best;
}

int best_arm(const RoundContexts& contexts, const Eigen::VectorXd& theta) {
    if (contexts.dim() != theta.size()) {
        throw DimensionMismatch("context dimension " + std::to_string(contexts.dim()) +
                                " does not match parameter dimension " +
                                std::to_string(theta.size()));
    }
    if (contexts.num_arms() < 1) throw ArmIndexError("round has no arms");
    return argmax_lowest(contexts.arms * theta);
}

double instant_regret(const BanditInstance& instance, const RoundContexts& contexts, int pulled) {
    if (pulled < 0 || pulled >= contexts.num_arms()) {
        throw ArmIndexError("arm " + std::to_string(pulled) + " out of range [0, " +
                            std::to_string(contexts.num_arms()) + ")");
    }
    if (contexts.dim() != instance.mu.size()) throw DimensionMismatch("instant_regret: dimension");
    const Eigen::VectorXd values = contexts.arms * instance.mu;
    const double gap = values.maxCoeff() - values[pulled];
    return gap > 0.0 ? gap : 0.0;
}

std::uint64_t context_hash(const Eigen::MatrixXd& arms) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::int64_t rows = arms.rows(), cols = arms.cols();
    feed(&rows, sizeof rows);
    feed(&cols, sizeof cols);
    feed(arms.data(), sizeof(double) * static_cast<std::size_t>(arms.size()));
    return h;
}

}  // namespace metats
