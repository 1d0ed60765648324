#pragma once

#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "metats/types.hpp"

namespace testing_support {

inline Eigen::VectorXd uniform(std::mt19937_64& rng, int d, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = u(rng);
    return x;
}

inline Eigen::VectorXd gaussian(std::mt19937_64& rng, int d, double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = z(rng);
    return x;
}

// Rounds 1..n of (context, reward) with uniform contexts on [lo, hi]^d and
// rewards bᵀθ + v·z.
inline std::vector<metats::HistoryEntry> random_history(std::mt19937_64& rng, int n, const Eigen::VectorXd& theta,
                                                        double v, double lo = -1.0, double hi = 1.0) {
    std::normal_distribution<double> z;
    std::vector<metats::HistoryEntry> h;
    for (int t = 1; t <= n; ++t) {
        metats::HistoryEntry e;
        e.round = t;
        e.arm = 0;
        e.context = uniform(rng, static_cast<int>(theta.size()), lo, hi);
        e.reward = e.context.dot(theta) + v * z(rng);
        h.push_back(std::move(e));
    }
    return h;
}

}  // namespace testing_support
