#pragma once

#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace metats {

// In-place (A + Aᵀ)/2. The result is bitwise symmetric.
void symmetrize(Eigen::MatrixXd& a);

double max_asymmetry(const Eigen::MatrixXd& a);

/// Cholesky factor of a symmetric positive-definite matrix. If the first
/// attempt fails, 1e-12·(trace/d)·I is added once and the factorization is
/// retried; a second failure throws NumericalFailure naming `what`.
class SpdFactor {
public:
    explicit SpdFactor(const Eigen::MatrixXd& a, std::string_view what = "matrix");

    Eigen::Index dim() const { return lower_.rows(); }
    const Eigen::MatrixXd& lower() const { return lower_; }
    bool jittered() const { return jittered_; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    Eigen::MatrixXd inverse() const;  // symmetrized
    double log_determinant() const;

private:
    Eigen::MatrixXd lower_;
    bool jittered_ = false;
};

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, std::string_view what = "matrix");

// Eigenvalues of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);
double max_eigenvalue(const Eigen::MatrixXd& sym);

namespace fault {

// Test hook for the verification suite: when set, symmetrize() is a no-op.
void set_skip_symmetrize(bool on);
bool skip_symmetrize();

class ScopedSkipSymmetrize {
public:
    ScopedSkipSymmetrize() { set_skip_symmetrize(true); }
    ~ScopedSkipSymmetrize() { set_skip_symmetrize(false); }
    ScopedSkipSymmetrize(const ScopedSkipSymmetrize&) = delete;
    ScopedSkipSymmetrize& operator=(const ScopedSkipSymmetrize&) = delete;
};

}  // namespace fault

}  // namespace metats
