#include "metats/linalg.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "metats/errors.hpp"

namespace metats {

namespace fault {
namespace {
std::atomic<bool> g_skip_symmetrize{false};
}
void set_skip_symmetrize(bool on) { g_skip_symmetrize.store(on); }
bool skip_symmetrize() { return g_skip_symmetrize.load(std::memory_order_relaxed); }
}  // namespace fault

void symmetrize(Eigen::MatrixXd& a) {
    if (fault::skip_symmetrize()) return;
    const Eigen::Index n = a.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = avg;
            a(j, i) = avg;
        }
    }
}

double max_asymmetry(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) return INFINITY;
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

namespace {

bool try_factor(const Eigen::MatrixXd& a, Eigen::MatrixXd& lower) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    lower = llt.matrixL();
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        const double d = lower(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
    }
    return true;
}

}  // namespace

SpdFactor::SpdFactor(const Eigen::MatrixXd& a, std::string_view what) {
    if (a.rows() != a.cols() || a.rows() == 0) {
        throw DimensionMismatch(std::string(what) + ": expected a non-empty square matrix");
    }
    if (!a.allFinite()) {
        throw NumericalFailure(std::string(what) + ": non-finite entries");
    }
    if (try_factor(a, lower_)) return;

    const double scale = a.trace() / static_cast<double>(a.rows());
    Eigen::MatrixXd jittered = a;
    jittered.diagonal().array() += 1e-12 * std::abs(scale);
    if (!try_factor(jittered, lower_)) {
        throw NumericalFailure(std::string(what) + ": not positive definite after jitter retry");
    }
    jittered_ = true;
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& rhs) const {
    if (rhs.size() != dim()) throw DimensionMismatch("SpdFactor::solve: size mismatch");
    Eigen::VectorXd y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdFactor::solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != dim()) throw DimensionMismatch("SpdFactor::solve: size mismatch");
    Eigen::MatrixXd y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Eigen::MatrixXd SpdFactor::inverse() const {
    Eigen::MatrixXd inv = solve(Eigen::MatrixXd::Identity(dim(), dim()).eval());
    symmetrize(inv);
    return inv;
}

double SpdFactor::log_determinant() const {
    return 2.0 * lower_.diagonal().array().log().sum();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, std::string_view what) {
    return SpdFactor(a, what).inverse();
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

}  // namespace metats
