#include "metats/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "metats/errors.hpp"

namespace metats {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;

// Canonical-form tableau: `rows` x (cols + 1), last column is the right-hand side.
struct Tableau {
    Eigen::MatrixXd t;
    std::vector<int> basis;
    int cols = 0;

    double& rhs(Eigen::Index i) { return t(i, cols); }

    void pivot(Eigen::Index row, Eigen::Index col) {
        t.row(row) /= t(row, col);
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            if (i == row) continue;
            const double f = t(i, col);
            if (f != 0.0) t.row(i) -= f * t.row(row);
        }
        t(row, col) = 1.0;
        basis[static_cast<std::size_t>(row)] = static_cast<int>(col);
    }
};

enum class PhaseResult { kOptimal, kUnbounded };

// Maximizes costᵀz over the tableau's feasible set, columns >= `allowed` excluded from entering.
PhaseResult optimize(Tableau& tab, const Eigen::VectorXd& cost, int allowed, int& pivots) {
    const Eigen::Index m = tab.t.rows();
    const int max_pivots = 50000;
    while (true) {
        Eigen::VectorXd cb(m);
        for (Eigen::Index i = 0; i < m; ++i) cb[i] = cost[tab.basis[static_cast<std::size_t>(i)]];

        // Bland: lowest-index column with positive reduced cost enters.
        int enter = -1;
        for (int j = 0; j < allowed; ++j) {
            const double reduced = cost[j] - cb.dot(tab.t.col(j));
            if (reduced > kCostTol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) return PhaseResult::kOptimal;

        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double a = tab.t(i, enter);
            if (a <= kPivotTol) continue;
            const double ratio = tab.rhs(i) / a;
            if (ratio < best_ratio - 1e-12 ||
                (std::abs(ratio - best_ratio) <= 1e-12 &&
                 tab.basis[static_cast<std::size_t>(i)] < tab.basis[static_cast<std::size_t>(leave)])) {
                best_ratio = ratio;
                leave = static_cast<int>(i);
            }
        }
        if (leave < 0) return PhaseResult::kUnbounded;
        tab.pivot(leave, enter);
        if (++pivots > max_pivots) throw NumericalFailure("simplex: pivot limit exceeded");
    }
}

}  // namespace

LpSolution maximize_linear(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    if (a.rows() != b.size() || a.cols() != c.size()) throw DimensionMismatch("maximize_linear: shapes");
    const int m = static_cast<int>(a.rows());
    const int d = static_cast<int>(a.cols());

    // Columns: x⁺ [0,d), x⁻ [d,2d), slack [2d,2d+m), artificial [2d+m, 2d+m+na).
    std::vector<int> negative_rows;
    for (int i = 0; i < m; ++i) {
        if (b[i] < 0.0) negative_rows.push_back(i);
    }
    const int n_struct = 2 * d + m;
    const int n_art = static_cast<int>(negative_rows.size());

    Tableau tab;
    tab.cols = n_struct + n_art;
    tab.t = Eigen::MatrixXd::Zero(m, tab.cols + 1);
    tab.basis.assign(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) {
        tab.t.row(i).segment(0, d) = a.row(i);
        tab.t.row(i).segment(d, d) = -a.row(i);
        tab.t(i, 2 * d + i) = 1.0;
        tab.rhs(i) = b[i];
        tab.basis[static_cast<std::size_t>(i)] = 2 * d + i;
    }
    for (int k = 0; k < n_art; ++k) {
        const int i = negative_rows[static_cast<std::size_t>(k)];
        tab.t.row(i) *= -1.0;
        tab.t(i, n_struct + k) = 1.0;
        tab.basis[static_cast<std::size_t>(i)] = n_struct + k;
    }

    LpSolution sol;
    if (n_art > 0) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(tab.cols);
        phase1.tail(n_art).setConstant(-1.0);
        optimize(tab, phase1, tab.cols, sol.pivots);
        double infeasibility = 0.0;
        for (int i = 0; i < m; ++i) {
            if (tab.basis[static_cast<std::size_t>(i)] >= n_struct) infeasibility += tab.rhs(i);
        }
        const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
        if (infeasibility > 1e-9 * scale) {
            sol.status = LpStatus::kInfeasible;
            return sol;
        }
        // Drive zero-level artificials out of the basis; rows with no usable
        // pivot are redundant and are dropped.
        std::vector<int> keep;
        for (int i = 0; i < m; ++i) {
            if (tab.basis[static_cast<std::size_t>(i)] < n_struct) {
                keep.push_back(i);
                continue;
            }
            int col = -1;
            for (int j = 0; j < n_struct; ++j) {
                if (std::abs(tab.t(i, j)) > 1e-9) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) {
                tab.pivot(i, col);
                keep.push_back(i);
            }
        }
        if (static_cast<int>(keep.size()) < m) {
            Tableau reduced;
            reduced.cols = tab.cols;
            reduced.t.resize(static_cast<Eigen::Index>(keep.size()), tab.cols + 1);
            for (std::size_t r = 0; r < keep.size(); ++r) {
                reduced.t.row(static_cast<Eigen::Index>(r)) = tab.t.row(keep[r]);
                reduced.basis.push_back(tab.basis[static_cast<std::size_t>(keep[r])]);
            }
            tab = std::move(reduced);
        }
    }

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(tab.cols);
    cost.head(d) = c;
    cost.segment(d, d) = -c;
    if (optimize(tab, cost, n_struct, sol.pivots) == PhaseResult::kUnbounded) {
        sol.status = LpStatus::kUnbounded;
        return sol;
    }

    Eigen::VectorXd z = Eigen::VectorXd::Zero(tab.cols);
    for (Eigen::Index i = 0; i < tab.t.rows(); ++i) z[tab.basis[static_cast<std::size_t>(i)]] = tab.rhs(i);
    sol.x = z.head(d) - z.segment(d, d);
    sol.objective = c.dot(sol.x);
    sol.status = LpStatus::kOptimal;
    return sol;
}

}  // namespace metats
