// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "metats/errors.hpp"
#include "metats/experiment.hpp"
#include "metats/linalg.hpp"
#include "metats/meta_engine.hpp"
#include "metats/stats.hpp"
#include "metats/theory.hpp"
#include "metats/ts_engine.hpp"
#include "metats/variants.hpp"
#include "oracles.hpp"

using namespace metats;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Default benchmark, shared by criteria 3 and 4.
const ExperimentResult& linear_benchmark() {
    static const ExperimentResult r = [] {
        ExperimentConfig c;
        c.threads = 0;
        return run_experiment(c);
    }();
    return r;
}
double linear_benchmark_seconds = 0.0;

// ---------------------------------------------------------------------------

Verdict recursion_vs_batch() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int d = 1 + i % 5;
        Rng rng = substream(101, static_cast<std::uint64_t>(i), 0, 0, Purpose::kVerification);
        const Eigen::VectorXd mu0 = uniform_vector(rng, d, -1.0, 1.0);
        const Eigen::MatrixXd sigma0 = generate_covariance(d, 3.0, rng);
        const GaussianBelief prior(mu0, sigma0, 0.2);
        const BanditInstance inst{sample_gaussian(prior, rng)};
        std::vector<RoundContexts> rounds;
        for (int t = 1; t <= 200; ++t) {
            RoundContexts c;
            c.round = t;
            c.arms.resize(20, d);
            for (int a = 0; a < 20; ++a) c.arms.row(a) = uniform_vector(rng, d, 0.0, 50.0).transpose();
            rounds.push_back(std::move(c));
        }
        const TaskOutcome out = run_ts_task(
            prior, inst, [&](int t) { return rounds[static_cast<std::size_t>(t - 1)]; }, 200,
            TaskStreams{101, static_cast<std::uint64_t>(i), 1, 0});
        PosteriorState s = ts_init(prior);
        for (std::size_t t = 0; t < out.history.size(); ++t) {
            s = ts_update(s, out.history[t].context, out.history[t].reward);
            const auto batch = oracle::batch_posterior(mu0, sigma0, std::span(out.history).first(t + 1));
            worst = std::max(worst, (s.precision - batch.precision).cwiseAbs().maxCoeff());
            worst = std::max(worst, (s.mean - batch.mean).cwiseAbs().maxCoeff());
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 10.0,
            fmt("100 trajectories, d 1..5, n 200: max abs difference %.3g (limit 1e-9), %.2f s (limit 10 s)", worst, secs)};
}

Verdict update_vs_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 g(202);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    double scalar_worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double var_q = u(g), var_star = u(g), v = u(g) / 3.0, mu_q = u(g) - 1.5;
        std::vector<HistoryEntry> h;
        std::normal_distribution<double> z;
        const double theta = z(g);
        for (int t = 1; t <= 1 + i; ++t) {
            const double b = 3.0 * (u(g) - 1.5);
            h.push_back({t, 0, Eigen::VectorXd::Constant(1, b), b * theta + v * z(g)});
        }
        const MetaPosterior next = meta_posterior_update(
            MetaPosterior{GaussianBelief(Eigen::VectorXd::Constant(1, mu_q), Eigen::MatrixXd::Constant(1, 1, var_q), v), 1},
            Eigen::MatrixXd::Constant(1, 1, var_star), h);
        const auto [m, var] = oracle::scalar_meta_posterior(mu_q, var_q, var_star, h);
        scalar_worst = std::max({scalar_worst, std::abs(next.belief.mean()[0] - m), std::abs(next.belief.cov_core()(0, 0) - var)});
    }
    double grid_worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const Eigen::Vector2d mu_q(u(g) - 1.5, u(g) - 1.5);
        const Eigen::Matrix2d sigma_q = oracle::random_spd(2, 0.3, 2.0, g);
        const Eigen::Matrix2d sigma_star = oracle::random_spd(2, 0.3, 2.0, g);
        const double v = 0.5 + 0.05 * i;
        std::normal_distribution<double> z;
        const Eigen::Vector2d theta(z(g), z(g));
        std::vector<HistoryEntry> h;
        for (int t = 1; t <= 10; ++t) {
            const Eigen::Vector2d b(u(g) - 1.5, u(g) - 1.5);
            h.push_back({t, 0, b, b.dot(theta) + v * z(g)});
        }
        const MetaPosterior next = meta_posterior_update(MetaPosterior{GaussianBelief(mu_q, sigma_q, v), 1}, sigma_star, h);
        const auto grid = oracle::grid_meta_posterior(mu_q, sigma_q, sigma_star, v, h);
        grid_worst = std::max({grid_worst, (next.belief.mean() - grid.mean).cwiseAbs().maxCoeff(),
                               (next.belief.cov_core() - grid.cov_core).cwiseAbs().maxCoeff()});
    }
    const double secs = seconds_since(t0);
    return {scalar_worst <= 1e-8 && grid_worst <= 1e-4 && secs < 60.0,
            fmt("scalar oracle max diff %.3g (limit 1e-8, 50 cases); 2-D grid max diff %.3g (limit 1e-4, 10 cases); %.1f s",
                scalar_worst, grid_worst, secs)};
}

Verdict contraction() {
    const ExperimentResult& r = linear_benchmark();
    int checked = 0, violations = 0, skipped_runs = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (const RunRecord& rec : r.runs) {
        const double lmin = rec.lambda_min;
        if (max_eigenvalue(rec.sigma_q) < 2.0 / (175.0 * lmin)) {
            ++skipped_runs;
            continue;
        }
        for (std::size_t s = 0; s + 1 < rec.meta_lambda_max.size(); ++s) {
            const double bound = 7.0 / 8.0 * rec.meta_lambda_max[s] + 1.0 / (100.0 * lmin);
            worst = std::min(worst, bound - rec.meta_lambda_max[s + 1]);
            ++checked;
            if (rec.meta_lambda_max[s + 1] > bound) ++violations;
        }
    }
    return {violations == 0 && checked > 0,
            fmt("%d task transitions checked over %d runs (%d outside the precondition), %d violations, min slack %.3g",
                checked, static_cast<int>(r.runs.size()) - skipped_runs, skipped_runs, violations, worst)};
}

Verdict benchmark_ordering() {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult& r = linear_benchmark();
    const double secs = seconds_since(t0) + linear_benchmark_seconds;
    const double oracle_ts = mean(r.totals(AgentKind::kOracleTs));
    const double tslb = mean(r.totals(AgentKind::kMetaTslb));
    const double ts = mean(r.totals(AgentKind::kMetaTs));
    const double marginal = mean(r.totals(AgentKind::kMarginalTs));
    const SignTest st = paired_sign_test(r.totals(AgentKind::kMetaTslb), r.totals(AgentKind::kMetaTs));
    const bool ordered = oracle_ts <= tslb && tslb <= ts && ts <= marginal;
    return {ordered && st.p_value < 0.05 && secs < 600.0,
            fmt("mean final regret oracle %.2f, meta_tslb %.2f, meta_ts %.2f, marginal %.2f; sign test meta_tslb < meta_ts "
                "%d/%d, p = %.3g; %.0f s",
                oracle_ts, tslb, ts, marginal, st.wins, st.wins + st.losses, st.p_value, secs)};
}

Verdict variant_orderings() {
    std::string detail;
    bool pass = true;
    for (ExperimentKind kind : {ExperimentKind::kFinitePriors, ExperimentKind::kInfiniteArms, ExperimentKind::kSequential}) {
        ExperimentConfig c;
        c.experiment = kind;
        c.threads = 0;
        c.agents = {AgentKind::kOracleTs, AgentKind::kMetaTslb, AgentKind::kMetaTs};
        const ExperimentResult r = run_experiment(c);
        const double o = mean(r.totals(AgentKind::kOracleTs));
        const double a = mean(r.totals(AgentKind::kMetaTslb));
        const double b = mean(r.totals(AgentKind::kMetaTs));
        const bool ok = o <= a && a <= b;
        pass = pass && ok;
        detail += fmt("%s%s %.6g <= %.6g <= %.6g%s", detail.empty() ? "" : "; ", std::string(to_string(kind)).c_str(), o, a,
                      b, ok ? "" : " (violated)");
    }
    return {pass, detail};
}

Verdict generalization() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::kGeneralization;
    c.threads = 0;
    c.agents = {AgentKind::kMetaTslb, AgentKind::kOracleTs};
    const std::vector<ExperimentResult> results = run_generalization(c);
    bool monotone = true;
    double prev = -1.0;
    std::string series;
    for (const ExperimentResult& r : results) {
        const double m = mean(r.totals(AgentKind::kMetaTslb));
        monotone = monotone && m >= prev;
        prev = m;
        series += fmt("%s|eps|=%g: %.2f", series.empty() ? "" : ", ", r.epsilon_norm, m);
    }
    const ExperimentResult& zero = results.front();
    const double tslb_last = mean(zero.task_regrets(AgentKind::kMetaTslb, c.m));
    const double oracle_last = mean(zero.task_regrets(AgentKind::kOracleTs, c.m));
    const double gap = std::abs(tslb_last - oracle_last) / oracle_last;
    return {zero.epsilon_norm == 0.0 && monotone && gap <= 0.10,
            fmt("phase-2 meta_tslb mean regret %s%s; final task at |eps|=0: meta_tslb %.3f vs oracle %.3f (%.1f%%, limit 10%%)",
                series.c_str(), monotone ? " (nondecreasing)" : " (NOT monotone)", tslb_last, oracle_last, 100 * gap)};
}

// Trajectories in unit-ball mode with small k and d so ϑ can be computed exactly.
ExperimentConfig unit_ball_config() {
    ExperimentConfig c;
    c.k = 3;
    c.d = 3;
    c.n = 200;
    c.normalize_contexts = true;
    return c;
}

std::vector<RoundContexts> task_contexts(const ExperimentConfig& c, int run, int task) {
    std::vector<RoundContexts> out;
    for (int t = 1; t <= c.n; ++t) out.push_back(draw_contexts(c, static_cast<std::uint64_t>(run), static_cast<std::uint64_t>(task), t));
    return out;
}

Verdict trajectory_inequalities() {
    const ExperimentConfig c = unit_ball_config();
    int trajectories = 0, sum_fail = 0, s_fail = 0, assumption_fail = 0, no_vartheta = 0;
    double worst_slack = std::numeric_limits<double>::infinity(), worst_ratio = 0.0;
    // Draw runs until 100 trajectories satisfy the assumption; the sum bound assumes it.
    for (int run = 0; run < 200 && trajectories < 100; ++run) {
        const Eigen::MatrixXd sigma_star = run_sigma_star(c, static_cast<std::uint64_t>(run));
        const Eigen::MatrixXd b1 = spd_inverse(sigma_star);
        const std::vector<RoundContexts> ctx = task_contexts(c, run, 1);
        const AssumptionParams p = estimate_vartheta(ctx, c.n, c.d, b1, VarthetaMode::kExact);
        if (!p.vartheta) {
            ++no_vartheta;
            continue;
        }
        const GaussianBelief prior(Eigen::VectorXd::Zero(c.d), sigma_star, c.v);
        const TaskStreams ts{c.root_seed, static_cast<std::uint64_t>(run), 1, 0};
        const TaskOutcome out = run_ts_task(
            prior, draw_instance(prior, ts), [&](int t) { return ctx[static_cast<std::size_t>(t - 1)]; }, c.n, ts,
            TaskOptions{true, false});
        ++trajectories;
        try {
            const SumBoundReport l = check_lemma10(*out.diagnostics, *p.vartheta);
            worst_slack = std::min(worst_slack, l.slack());
            if (!l.holds) ++sum_fail;
        } catch (const PreconditionViolation&) {
            ++assumption_fail;
        }
        const SBoundReport s = check_s_bound(*out.diagnostics);
        worst_ratio = std::max(worst_ratio, s.worst_ratio);
        if (!s.holds) ++s_fail;
    }
    return {trajectories >= 100 && sum_fail == 0 && s_fail == 0 && assumption_fail == 0,
            fmt("%d trajectories (n 200, k 3, d 3, exact vartheta); assumption failures %d, sum-bound failures %d (min slack "
                "%.3g), s^2 bound failures %d (max s^2 lambda_min/|b|^2 = %.12g); %d runs skipped with rho_min = 0",
                trajectories, assumption_fail, sum_fail, worst_slack, s_fail, worst_ratio, no_vartheta)};
}

Verdict bound_validity() {
    ExperimentConfig c = unit_ball_config();
    c.runs = 20;
    c.threads = 0;
    c.agents = {AgentKind::kMetaTslb};
    const ExperimentResult r = run_experiment(c);
    int tested = 0, exceed = 0, skipped = 0, order_fail = 0;
    double worst_ratio = 0.0;
    for (const RunRecord& rec : r.runs) {
        const Eigen::MatrixXd b1 = spd_inverse(rec.sigma_star);
        double vartheta = std::numeric_limits<double>::infinity();
        for (int s = 1; s <= c.m; ++s) {
            const AssumptionParams p = estimate_vartheta(task_contexts(c, rec.run, s), c.n, c.d, b1, VarthetaMode::kExact);
            vartheta = std::min(vartheta, p.vartheta.value_or(0.0));
        }
        BoundInputs in;
        in.m = c.m;
        in.n = c.n;
        in.k = c.k;
        in.d = c.d;
        in.v = c.v;
        in.delta = 1.0 / (c.m + 2);
        in.lambda_min = rec.lambda_min;
        in.lambda_max = rec.lambda_max;
        in.lambda_max_sigma_q = max_eigenvalue(rec.sigma_q);
        in.mu_q_norm = 0.0;
        in.vartheta = vartheta;
        if (!in.eigenvalue_condition() || !(vartheta > 0.0)) {
            ++skipped;
            continue;
        }
        ++tested;
        const double rhs = theorem_rhs(in, BoundKind::kMetaTslb);
        const double regret = rec.track(AgentKind::kMetaTslb)->total();
        worst_ratio = std::max(worst_ratio, regret / rhs);
        if (regret > rhs) ++exceed;
        if (theorem_rhs(in, BoundKind::kMetaTs) < rhs) ++order_fail;
    }
    return {tested > 0 && exceed == 0 && order_fail == 0,
            fmt("%d runs tested (%d skipped), delta = 1/(m+2); regret above meta_tslb bound in %d (max regret/bound %.3g); "
                "meta_ts bound below meta_tslb bound in %d",
                tested, skipped, exceed, worst_ratio, order_fail)};
}

Verdict lp_vs_vertices() {
    std::mt19937_64 g(909);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(1e-3, 1.0), cube(0.0, 1.0);
    std::normal_distribution<double> z;
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const int d = 2 + i % 2;
        Eigen::MatrixXd a(5, d);
        Eigen::VectorXd x0(d), slack(5), c(d);
        for (int r = 0; r < 5; ++r)
            for (int j = 0; j < d; ++j) a(r, j) = u(g);
        for (int j = 0; j < d; ++j) {
            x0[j] = cube(g);
            c[j] = z(g);
        }
        for (int r = 0; r < 5; ++r) slack[r] = pos(g);
        const Polyhedron poly = Polyhedron::boxed(a, a * x0 + slack, 50.0);
        const double got = c.dot(lp_argmax(poly, c));
        worst = std::max(worst, std::abs(got - oracle::vertex_enumeration_max(poly.a(), poly.b(), c)));
    }
    return {worst <= 1e-8, fmt("500 polytopes, d in {2,3}: max objective difference %.3g (limit 1e-8)", worst)};
}

Verdict finite_identification() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::kFinitePriors;
    c.L = 5;
    c.finite_prior_mean_range = 5.0;
    c.finite_prior_min_separation = 5.0;
    c.threads = 0;
    c.agents = {AgentKind::kMetaTslb};
    const ExperimentResult r = run_experiment(c);
    int hits = 0;
    for (const RunRecord& rec : r.runs) hits += rec.final_argmax_prior == rec.true_prior;
    const double rate = static_cast<double>(hits) / static_cast<double>(r.runs.size());
    return {rate >= 0.8, fmt("argmax weight equals true prior in %d/%d runs (%.0f%%, limit 80%%); L 5, pairwise distance >= 5",
                             hits, static_cast<int>(r.runs.size()), 100 * rate)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"posterior recursion equals batch closed form", recursion_vs_batch},
        {"meta-posterior update matches independent oracles", update_vs_oracles},
        {"meta-posterior contraction on the benchmark", contraction},
        {"benchmark regret ordering and sign test", benchmark_ordering},
        {"variant orderings", variant_orderings},
        {"generalization across |eps|", generalization},
        {"trajectory inequalities (sum bound, s-bound)", trajectory_inequalities},
        {"regret bound validity", bound_validity},
        {"LP argmax vs vertex enumeration", lp_vs_vertices},
        {"finite-prior identification", finite_identification},
    };
    // Time the shared benchmark once so criterion 4 reports its full cost.
    {
        const auto t0 = std::chrono::steady_clock::now();
        linear_benchmark();
        linear_benchmark_seconds = seconds_since(t0);
    }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("%s criterion %zu: %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
