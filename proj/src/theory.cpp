#include "metats/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "metats/errors.hpp"
#include "metats/linalg.hpp"

namespace metats {

AssumptionParams AssumptionParams::from(int window, double rho_min, double lambda_min_b1, bool estimate) {
    AssumptionParams p;
    p.window = window;
    p.rho_min = rho_min;
    p.lambda_min_b1 = lambda_min_b1;
    p.estimate = estimate;
    const double floor = std::min(rho_min, lambda_min_b1);
    if (floor > 0.0 && window > 0) p.vartheta = floor / (4.0 * window);
    return p;
}

namespace {

// λ_min of a window sum, with numerically rank-deficient sums reported as 0.
double window_lambda_min(const Eigen::MatrixXd& sum) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sum, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()[0];
    const double hi = es.eigenvalues()[sum.rows() - 1];
    if (lo <= 1e-12 * std::max(hi, 0.0)) return 0.0;
    return lo;
}

struct WindowSearch {
    const std::vector<RoundContexts>& contexts;
    int window;
    double best = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> partial;  // partial[j]: sum over the first j rounds

    void leaf(const Eigen::MatrixXd& sum) {
        if (std::isfinite(best)) {
            // Cheap rejection: a successful Cholesky of sum − best·I means λ_min > best.
            Eigen::MatrixXd shifted = sum;
            shifted.diagonal().array() -= best;
            if (Eigen::LLT<Eigen::MatrixXd>(shifted).info() == Eigen::Success) return;
        }
        best = std::min(best, window_lambda_min(sum));
    }

    void descend(int t0, int depth) {
        if (best == 0.0) return;
        const Eigen::MatrixXd& arms = contexts[static_cast<std::size_t>(t0 + depth)].arms;  // round t0+1+depth
        for (Eigen::Index a = 0; a < arms.rows(); ++a) {
            Eigen::MatrixXd& next = partial[static_cast<std::size_t>(depth + 1)];
            next = partial[static_cast<std::size_t>(depth)];
            next.noalias() += arms.row(a).transpose() * arms.row(a);
            if (depth + 1 == window) {
                leaf(next);
            } else {
                descend(t0, depth + 1);
            }
            if (best == 0.0) return;
        }
    }
};

}  // namespace

AssumptionParams estimate_vartheta(const std::vector<RoundContexts>& contexts, int n, int window,
                                   const Eigen::MatrixXd& b1, VarthetaMode mode, Rng* rng, int samples) {
    if (window < 1) throw PreconditionViolation("window Δ must be >= 1");
    if (n <= window) throw PreconditionViolation("need n > Δ so that at least one window exists");
    if (static_cast<int>(contexts.size()) < n) throw DimensionMismatch("fewer context rounds than n");
    const Eigen::Index d = b1.rows();
    if (b1.cols() != d) throw DimensionMismatch("B(1) must be square");
    for (int t = 0; t < n; ++t) {
        const auto& arms = contexts[static_cast<std::size_t>(t)].arms;
        if (arms.cols() != d || arms.rows() < 1) {
            throw DimensionMismatch("round " + std::to_string(t + 1) + " contexts do not match B(1)");
        }
    }
    const double lambda_b1 = min_eigenvalue(b1);

    if (mode == VarthetaMode::kExact) {
        double work = 0.0;
        for (int t0 = 1; t0 <= n - window; ++t0) {
            double seqs = 1.0;
            for (int j = 0; j < window; ++j) seqs *= static_cast<double>(contexts[static_cast<std::size_t>(t0 + j)].arms.rows());
            work += seqs;
        }
        if (work > kExactVarthetaBudget) {
            throw PreconditionViolation("exact ϑ needs " + std::to_string(work) +
                                        " sequence evaluations, above the 1e6 budget; use monte_carlo");
        }
        WindowSearch search{contexts, window, std::numeric_limits<double>::infinity(),
                            std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(window) + 1,
                                                         Eigen::MatrixXd::Zero(d, d))};
        for (int t0 = 1; t0 <= n - window && search.best > 0.0; ++t0) search.descend(t0, 0);
        return AssumptionParams::from(window, search.best, lambda_b1, false);
    }

    if (rng == nullptr) throw PreconditionViolation("monte_carlo ϑ needs a random stream");
    if (samples < kMinMonteCarloSamples) throw PreconditionViolation("monte_carlo ϑ needs at least 1e4 samples");
    std::uniform_int_distribution<int> pick_t0(1, n - window);
    double best = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd sum(d, d);
    for (int i = 0; i < samples && best > 0.0; ++i) {
        const int t0 = pick_t0(*rng);
        sum.setZero();
        for (int j = 0; j < window; ++j) {
            const Eigen::MatrixXd& arms = contexts[static_cast<std::size_t>(t0 + j)].arms;
            std::uniform_int_distribution<Eigen::Index> pick_arm(0, arms.rows() - 1);
            const Eigen::Index a = pick_arm(*rng);
            sum.noalias() += arms.row(a).transpose() * arms.row(a);
        }
        best = std::min(best, window_lambda_min(sum));
    }
    return AssumptionParams::from(window, best, lambda_b1, true);
}

// ---------------------------------------------------------------------------

bool BoundInputs::eigenvalue_condition() const { return lambda_max_sigma_q >= floor_term(); }

namespace {

void validate(const BoundInputs& in) {
    if (in.m < 1 || in.n < 1 || in.k < 1 || in.d < 1) throw PreconditionViolation("m, n, k, d must all be >= 1");
    if (!(in.v > 0.0)) throw PreconditionViolation("v must be positive");
    if (!(in.delta > 0.0)) throw PreconditionViolation("δ must be positive");
    if (!(in.lambda_min > 0.0)) throw PreconditionViolation("λ_min(Σ_*⁻¹) must be positive");
    if (!(in.lambda_max >= in.lambda_min)) throw PreconditionViolation("λ_max(Σ_*⁻¹) must be >= λ_min(Σ_*⁻¹)");
    if (!(in.lambda_max_sigma_q > 0.0)) throw PreconditionViolation("λ_max(Σ_Q) must be positive");
    if (!(in.mu_q_norm >= 0.0)) throw PreconditionViolation("‖μ_Q‖ must be nonnegative");
}

double log_ratio(double numerator, double delta) {
    const double l = std::log(numerator / delta);
    if (l < 0.0) {
        throw PreconditionViolation("log(" + std::to_string(numerator) + "/δ) is negative: δ must not exceed " +
                                    std::to_string(numerator));
    }
    return l;
}

// λ_max(Σ_Q) − 2/(175·λ_min), tolerating roundoff at the boundary.
double excess(const BoundInputs& in) {
    const double e = in.lambda_max_sigma_q - in.floor_term();
    if (e >= 0.0) return e;
    if (e >= -1e-12 * std::max(in.lambda_max_sigma_q, in.floor_term())) return 0.0;
    throw PreconditionViolation("eigenvalue condition λ_max(Σ_Q) >= 2/(175·λ_min) fails: " +
                                std::to_string(in.lambda_max_sigma_q) + " < " + std::to_string(in.floor_term()));
}

}  // namespace

BoundConstants bound_constants(const BoundInputs& in) {
    validate(in);
    const double d = in.d;
    const double l2 = log_ratio(2.0 * d, in.delta);
    const double l4 = log_ratio(4.0 * d, in.delta);
    const double e = excess(in);
    BoundConstants u;
    u.u1 = in.mu_q_norm + in.v * std::sqrt(d * in.lambda_max_sigma_q * l2);
    u.u2 = std::sqrt(d * e * l2);
    u.u3 = std::sqrt(d * in.floor_term() * l2);
    u.u4 = std::sqrt(d * e * l4);
    u.u5 = std::sqrt(d * in.floor_term() * l4);
    return u;
}

double theorem_rhs(const BoundInputs& in, BoundKind which) {
    if (!(in.vartheta > 0.0)) throw PreconditionViolation("ϑ must be positive");
    const BoundConstants u = bound_constants(in);
    const double m = in.m, n = in.n, k = in.k, v = in.v;
    const double pi = std::numbers::pi;
    const double lmin = in.lambda_min;

    const double spread = std::sqrt(1.0 / lmin) + std::sqrt((n - 1.0) / in.vartheta);
    const double t1 = 2.0 * m * v * spread * std::sqrt(2.0 * std::log(n));
    const double t2 = m * k * v * std::sqrt(2.0 / (pi * lmin));
    const double coef = which == BoundKind::kMetaTslb ? 2.0 : 4.0;
    const double ua = which == BoundKind::kMetaTslb ? u.u2 : u.u4;
    const double ub = which == BoundKind::kMetaTslb ? u.u3 : u.u5;
    const double t3 = coef * k * (4.0 * std::log(m) * ua + m * ub) *
                      (u.u1 + v * std::sqrt(2.0 * std::log(n) / lmin)) * spread *
                      std::sqrt(2.0 * in.lambda_max / pi);
    const double t4 = 4.0 * m * k * v * (std::sqrt(1.0 / (2.0 * pi * lmin)) + u.u1);
    return t1 + t2 + t3 + t4;
}

double check_generalization_threshold(const BoundInputs& in) {
    if (in.m < 2) throw PreconditionViolation("generalization threshold needs m >= 2");
    const BoundConstants u = bound_constants(in);
    const double m = in.m;
    return in.v * (4.0 * std::log(m) / m - std::pow(7.0 / 8.0, m / 2.0)) * u.u2;
}

double meta_mean_radius(const BoundInputs& in, int s) {
    validate(in);
    if (s < 1) throw PreconditionViolation("task index must be >= 1");
    const double e = excess(in);
    const double shrink = e * std::pow(7.0 / 8.0, s - 1) + in.floor_term();
    return in.v * std::sqrt(in.d * shrink * log_ratio(2.0 * in.d, in.delta));
}

// ---------------------------------------------------------------------------

SumBoundReport check_lemma10(const TrajectoryDiagnostics& diag, double vartheta) {
    const auto& lam = diag.lambda_min;
    if (lam.empty()) throw PreconditionViolation("sum-bound check needs at least one round");
    if (!(vartheta > 0.0)) throw PreconditionViolation("ϑ must be positive");
    for (std::size_t i = 0; i < lam.size(); ++i) {
        const double need = 4.0 * vartheta * static_cast<double>(i);
        if (!(lam[i] > 0.0) || lam[i] < need * (1.0 - 1e-12)) {
            throw PreconditionViolation("assumption violated at round " + std::to_string(i + 1) + ": λ_min(B(t)) = " +
                                        std::to_string(lam[i]) + " < 4ϑ(t−1) = " + std::to_string(need));
        }
    }
    SumBoundReport r;
    for (double l : lam) r.lhs += std::sqrt(1.0 / l);
    const double n = static_cast<double>(lam.size());
    r.rhs = std::sqrt(1.0 / lam.front()) + std::sqrt((n - 1.0) / vartheta);
    r.n1_edge = lam.size() == 1;
    r.holds = r.n1_edge ? r.lhs <= r.rhs : r.lhs < r.rhs;
    return r;
}

SBoundReport check_s_bound(const TrajectoryDiagnostics& diag, double rel_tol) {
    SBoundReport r;
    for (std::size_t t = 0; t < diag.lambda_min.size(); ++t) {
        const Eigen::VectorXd& s2 = diag.s_squared[t];
        const Eigen::VectorXd& norm2 = diag.context_norm_sq[t];
        for (Eigen::Index i = 0; i < s2.size(); ++i) {
            const double bound = norm2[i] / diag.lambda_min[t];
            if (norm2[i] > 0.0) r.worst_ratio = std::max(r.worst_ratio, s2[i] / bound);
            if (s2[i] > bound * (1.0 + rel_tol) + 1e-300) {
                ++r.violations;
                r.holds = false;
            }
        }
    }
    return r;
}

}  // namespace metats
