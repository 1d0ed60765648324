#pragma once

#include <Eigen/Core>

namespace metats {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpSolution {
    LpStatus status = LpStatus::kInfeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    int pivots = 0;
};

/// maximize cᵀx subject to A x ≤ b, x free.
///
/// Dense two-phase tableau simplex with Bland's rule, meant for the tiny LPs
/// of the polyhedral-arm bandit (a handful of variables, a few dozen rows).
/// Free variables are split as x = x⁺ − x⁻; a basic solution of the split
/// problem maps to a vertex of {x : Ax ≤ b}.
LpSolution maximize_linear(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace metats
