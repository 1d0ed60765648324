#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "metats/random.hpp"
#include "metats/ts_engine.hpp"
#include "metats/types.hpp"

namespace metats {

// ---------------------------------------------------------------------------
// Context-richness constant ϑ
// ---------------------------------------------------------------------------

struct AssumptionParams {
    int window = 0;               // Δ
    double rho_min = 0.0;
    double lambda_min_b1 = 0.0;   // λ_min(B(1))
    std::optional<double> vartheta;  // min(ρ_min, λ_min(B(1)))/(4Δ); empty when ρ_min = 0
    bool estimate = false;        // true for Monte-Carlo results (an over-estimate)

    static AssumptionParams from(int window, double rho_min, double lambda_min_b1, bool estimate = false);
};

enum class VarthetaMode { kExact, kMonteCarlo };

inline constexpr double kExactVarthetaBudget = 1e6;
inline constexpr int kMinMonteCarloSamples = 10000;

/// ρ_min over windows t₀ ∈ [1, n−Δ] (rounds t₀+1..t₀+Δ) and every arm sequence
/// in the window. `contexts[t−1]` holds round t. Monte-Carlo mode draws
/// `samples` random (window, sequence) pairs from `rng`.
AssumptionParams estimate_vartheta(const std::vector<RoundContexts>& contexts, int n, int window,
                                   const Eigen::MatrixXd& b1, VarthetaMode mode, Rng* rng = nullptr,
                                   int samples = kMinMonteCarloSamples);

// ---------------------------------------------------------------------------
// Regret-bound constants
// ---------------------------------------------------------------------------

struct BoundInputs {
    int m = 1, n = 1, k = 1, d = 1;
    double v = 1.0;
    double delta = 0.05;
    double lambda_min = 1.0;        // λ_min(Σ_*⁻¹)
    double lambda_max = 1.0;        // λ_max(Σ_*⁻¹)
    double lambda_max_sigma_q = 1.0;  // λ_max(Σ_Q)
    double mu_q_norm = 0.0;
    double vartheta = 1.0;

    // λ_max(Σ_Q) ≥ 2/(175·λ_min)
    bool eigenvalue_condition() const;
    double floor_term() const { return 2.0 / (175.0 * lambda_min); }
};

struct BoundConstants {
    double u1 = 0, u2 = 0, u3 = 0, u4 = 0, u5 = 0;
};

enum class BoundKind { kMetaTslb, kMetaTs };

BoundConstants bound_constants(const BoundInputs& in);
double theorem_rhs(const BoundInputs& in, BoundKind which);

// ‖ε‖ threshold v(4 log(m)/m − (7/8)^{m/2})·u₂(δ); requires m ≥ 2.
double check_generalization_threshold(const BoundInputs& in);

// Radius r_s with ‖μ_{Q,s} − μ_*‖ ≤ r_s jointly over s ∈ [m] w.p. ≥ 1 − mδ (Meta-TSLB).
double meta_mean_radius(const BoundInputs& in, int s);

// ---------------------------------------------------------------------------
// Trajectory inequalities
// ---------------------------------------------------------------------------

struct SumBoundReport {
    double lhs = 0.0;  // Σ_t √(1/λ_min(B(t)))
    double rhs = 0.0;  // √(1/λ_min(B(1))) + √((n−1)/ϑ)
    bool holds = false;
    bool n1_edge = false;  // n = 1: compared with ≤ rather than <
    double slack() const { return rhs - lhs; }
};

/// Requires λ_min(B(t)) ≥ 4ϑ(t−1) on every round of the trajectory.
SumBoundReport check_lemma10(const TrajectoryDiagnostics& diag, double vartheta);

struct SBoundReport {
    bool holds = true;
    double worst_ratio = 0.0;  // max over rounds of s²·λ_min(B(t))/‖b‖²
    int violations = 0;
};

// s_i(t)² ≤ ‖b_i(t)‖²/λ_min(B(t)) for every recorded arm and round.
SBoundReport check_s_bound(const TrajectoryDiagnostics& diag, double rel_tol = 1e-9);

}  // namespace metats
