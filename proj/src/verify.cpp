#include "metats/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/LU>

#include "metats/errors.hpp"
#include "metats/experiment.hpp"
#include "metats/linalg.hpp"
#include "metats/meta_engine.hpp"
#include "metats/theory.hpp"
#include "metats/ts_engine.hpp"

namespace metats {

namespace {

Rng case_rng(std::uint64_t seed, int check, int c) {
    return substream(seed, static_cast<std::uint64_t>(check), static_cast<std::uint64_t>(c), 0, Purpose::kVerification);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

GaussianBelief random_belief(Rng& rng, int d, double v) {
    return GaussianBelief(standard_normal_vector(rng, d), generate_covariance(d, 3.0, rng), v);
}

std::vector<HistoryEntry> random_history(Rng& rng, int d, int len) {
    std::vector<HistoryEntry> h;
    for (int t = 1; t <= len; ++t) h.push_back({t, 0, standard_normal_vector(rng, d), standard_normal(rng)});
    return h;
}

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

CheckResult recursion_batch(std::uint64_t seed) {
    CheckResult r{"recursion-batch", true, std::numeric_limits<double>::infinity(), 0, ""};
    double worst = 0.0;
    for (int c = 0; c < 20; ++c) {
        Rng rng = case_rng(seed, 1, c);
        const int d = uniform_int(rng, 1, 5), n = uniform_int(rng, 1, 200);
        const GaussianBelief prior = random_belief(rng, d, 0.5);
        PosteriorState state = ts_init(prior);
        const Eigen::MatrixXd b1 = state.precision;
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
        Eigen::VectorXd info = Eigen::VectorXd::Zero(d);
        for (int t = 0; t < n; ++t) {
            const Eigen::VectorXd b = standard_normal_vector(rng, d);
            const double reward = standard_normal(rng);
            state = ts_update(state, b, reward);
            gram += b * b.transpose();
            info += reward * b;
        }
        const Eigen::MatrixXd batch_b = b1 + gram;
        const Eigen::VectorXd batch_mu = batch_b.partialPivLu().solve(b1 * prior.mean() + info);
        worst = std::max({worst, (state.precision - batch_b).cwiseAbs().maxCoeff(),
                          (state.mean - batch_mu).cwiseAbs().maxCoeff()});
        ++r.cases;
    }
    r.worst_slack = 1e-9 - worst;
    r.passed = worst <= 1e-9;
    r.detail = "max abs difference " + fmt(worst) + " (limit 1e-9)";
    return r;
}

CheckResult lambda_min_monotone(std::uint64_t seed) {
    CheckResult r{"lambda-min-monotone", true, std::numeric_limits<double>::infinity(), 0, ""};
    for (int c = 0; c < 20; ++c) {
        Rng rng = case_rng(seed, 2, c);
        const int d = uniform_int(rng, 1, 5), n = uniform_int(rng, 1, 100);
        PosteriorState state = ts_init(random_belief(rng, d, 0.5));
        double prev = min_eigenvalue(state.precision);
        for (int t = 0; t < n; ++t) {
            state = ts_update(state, standard_normal_vector(rng, d), standard_normal(rng));
            const double now = min_eigenvalue(state.precision);
            const double tol = 1e-10 * max_eigenvalue(state.precision);
            r.worst_slack = std::min(r.worst_slack, now - prev + tol);
            prev = now;
        }
        ++r.cases;
    }
    r.passed = r.worst_slack >= 0.0;
    r.detail = "λ_min(B(t+1)) − λ_min(B(t)) never below −1e-10·λ_max";
    return r;
}

CheckResult s_bound(std::uint64_t seed) {
    CheckResult r{"s-bound", true, 0.0, 0, ""};
    double worst_ratio = 0.0;
    for (int c = 0; c < 20; ++c) {
        Rng rng = case_rng(seed, 3, c);
        const int d = uniform_int(rng, 1, 5), k = uniform_int(rng, 1, 10);
        const GaussianBelief prior = random_belief(rng, d, 0.3);
        const BanditInstance inst{sample_gaussian(prior, rng)};
        const std::uint64_t ctx_seed = rng();
        auto contexts = [&](int t) {
            Rng cr = substream(ctx_seed, 0, 0, static_cast<std::uint64_t>(t), Purpose::kContexts);
            Eigen::MatrixXd arms(k, d);
            for (int i = 0; i < k; ++i) arms.row(i) = standard_normal_vector(cr, d).transpose();
            return RoundContexts{arms, t};
        };
        TaskOptions opts;
        opts.collect_diagnostics = true;
        const TaskOutcome out = run_ts_task(prior, inst, contexts, 100, TaskStreams{seed, 3, static_cast<std::uint64_t>(c), 0}, opts);
        const SBoundReport rep = check_s_bound(*out.diagnostics);
        worst_ratio = std::max(worst_ratio, rep.worst_ratio);
        r.passed = r.passed && rep.holds;
        ++r.cases;
    }
    r.worst_slack = 1.0 - worst_ratio;
    r.detail = "max s²·λ_min/‖b‖² = " + fmt(worst_ratio) + " (must be ≤ 1)";
    return r;
}

CheckResult two_route_update(std::uint64_t seed) {
    CheckResult r{"two-route-update", true, 0.0, 0, ""};
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        Rng rng = case_rng(seed, 4, c);
        const int d = uniform_int(rng, 1, 5), len = uniform_int(rng, 0, 30);
        const MetaPosterior q{random_belief(rng, d, 0.4), 1};
        const Eigen::MatrixXd sigma_star = generate_covariance(d, 3.0, rng);
        const auto history = random_history(rng, d, len);
        const MetaPosterior a = meta_posterior_update(q, sigma_star, history);
        const MetaPosterior b = meta_posterior_update_direct(q, sigma_star, history);
        worst = std::max({worst, rel_diff(a.belief.cov_core(), b.belief.cov_core()),
                          rel_diff(a.belief.mean(), b.belief.mean())});
        ++r.cases;
    }
    r.worst_slack = 1e-10 - worst;
    r.passed = worst <= 1e-10;
    r.detail = "max relative difference " + fmt(worst) + " (limit 1e-10)";
    return r;
}

// Every covariance or precision produced by an update must be exactly symmetric.
CheckResult symmetry(std::uint64_t seed) {
    CheckResult r{"symmetry", true, 0.0, 0, ""};
    double worst = 0.0;
    for (int c = 0; c < 30; ++c) {
        Rng rng = case_rng(seed, 5, c);
        const int d = uniform_int(rng, 2, 5);
        MetaPosterior q{random_belief(rng, d, 0.4), 1};
        const Eigen::MatrixXd sigma_star = generate_covariance(d, 3.0, rng);
        for (int task = 0; task < 5; ++task) {
            q = meta_posterior_update(q, sigma_star, random_history(rng, d, uniform_int(rng, 1, 20)));
            worst = std::max(worst, max_asymmetry(q.belief.cov_core()));
        }
        PosteriorState state = ts_init(random_belief(rng, d, 0.4));
        worst = std::max(worst, max_asymmetry(state.precision));
        for (int t = 0; t < 20; ++t) {
            state = ts_update(state, standard_normal_vector(rng, d), standard_normal(rng));
            worst = std::max(worst, max_asymmetry(state.precision));
        }
        ++r.cases;
    }
    r.worst_slack = -worst;
    r.passed = worst == 0.0;
    r.detail = "max |Σ − Σᵀ| = " + fmt(worst) + " (must be exactly 0 after symmetrization)";
    return r;
}

CheckResult contraction(std::uint64_t seed) {
    CheckResult r{"contraction", true, std::numeric_limits<double>::infinity(), 0, ""};
    ExperimentConfig c;
    c.runs = 4;
    c.m = 20;
    c.n = 30;
    c.k = 10;
    c.root_seed = seed;
    c.agents = {AgentKind::kMetaTslb};
    const ExperimentResult res = run_experiment(c);
    int skipped = 0;
    for (const RunRecord& run : res.runs) {
        if (max_eigenvalue(run.sigma_q) < 2.0 / (175.0 * run.lambda_min)) {
            ++skipped;
            continue;
        }
        const auto& lam = run.meta_lambda_max;
        for (std::size_t s = 0; s + 1 < lam.size(); ++s) {
            const double bound = 0.875 * lam[s] + 1.0 / (100.0 * run.lambda_min);
            r.worst_slack = std::min(r.worst_slack, bound - lam[s + 1]);
            if (!(lam[s + 1] < lam[s])) r.passed = false;  // strict decrease after a non-empty task
            ++r.cases;
        }
    }
    r.passed = r.passed && r.worst_slack >= -1e-12;
    r.detail = std::to_string(r.cases) + " task transitions, " + std::to_string(skipped) + " runs outside the precondition";
    return r;
}

CheckResult sum_bound(std::uint64_t seed) {
    CheckResult r{"sum-bound", true, std::numeric_limits<double>::infinity(), 0, ""};
    ExperimentConfig c;
    c.k = 3;
    c.d = 3;
    c.n = 60;
    c.normalize_contexts = true;
    c.root_seed = seed;
    for (int i = 0; i < 10; ++i) {
        Rng rng = case_rng(seed, 7, i);
        const GaussianBelief prior(Eigen::VectorXd::Zero(c.d), generate_covariance(c.d, 3.0, rng), c.v);
        const BanditInstance inst{sample_gaussian(prior, rng)};
        std::vector<RoundContexts> ctx;
        for (int t = 1; t <= c.n; ++t) ctx.push_back(draw_contexts(c, static_cast<std::uint64_t>(i), 7, t));
        TaskOptions opts;
        opts.collect_diagnostics = true;
        const TaskOutcome out = run_ts_task(
            prior, inst, [&](int t) { return ctx[static_cast<std::size_t>(t - 1)]; }, c.n,
            TaskStreams{seed, 7, static_cast<std::uint64_t>(i), 0}, opts);
        const AssumptionParams ap = estimate_vartheta(ctx, c.n, c.d, ts_init(prior).precision, VarthetaMode::kExact);
        if (!ap.vartheta) {
            r.passed = false;
            r.detail = "a trajectory had ρ_min = 0";
            continue;
        }
        const SumBoundReport rep = check_lemma10(*out.diagnostics, *ap.vartheta);
        r.worst_slack = std::min(r.worst_slack, rep.slack());
        r.passed = r.passed && rep.holds;
        ++r.cases;
    }
    if (r.detail.empty()) r.detail = "Σ√(1/λ_min(B(t))) against √(1/λ_min(B(1))) + √((n−1)/ϑ), exact ϑ";
    return r;
}

struct Entry {
    const char* name;
    CheckResult (*fn)(std::uint64_t);
};

const Entry kChecks[] = {
    {"recursion-batch", &recursion_batch}, {"lambda-min-monotone", &lambda_min_monotone},
    {"s-bound", &s_bound},                 {"two-route-update", &two_route_update},
    {"symmetry", &symmetry},               {"contraction", &contraction},
    {"sum-bound", &sum_bound},
};

}  // namespace

const std::vector<std::string>& verification_checks() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const Entry& e : kChecks) out.emplace_back(e.name);
        return out;
    }();
    return names;
}

std::vector<CheckResult> run_verification(const std::vector<std::string>& checks, std::uint64_t seed) {
    for (const std::string& name : checks) {
        const auto& all = verification_checks();
        if (std::find(all.begin(), all.end(), name) == all.end()) {
            throw ConfigError("unknown verification check '" + name + "'");
        }
    }
    std::vector<CheckResult> out;
    for (const Entry& e : kChecks) {
        if (std::find(checks.begin(), checks.end(), e.name) == checks.end()) continue;
        try {
            out.push_back(e.fn(seed));
        } catch (const Error& ex) {
            out.push_back({e.name, false, -std::numeric_limits<double>::infinity(), 0, std::string("error: ") + ex.what()});
        }
    }
    return out;
}

}  // namespace metats
