#pragma once

#include <span>

namespace metats {

double mean(std::span<const double> xs);

// Sample standard deviation over √N; 0 for fewer than two values.
double standard_error(std::span<const double> xs);

struct PairedDifference {
    double mean = 0.0;    // mean of a − b
    double stderr_ = 0.0;
};

PairedDifference paired_difference(std::span<const double> a, std::span<const double> b);

/// One-sided sign test of "a tends to be smaller than b". Ties are dropped;
/// p_value = P(X ≥ wins) for X ~ Binomial(wins + losses, 1/2).
struct SignTest {
    int wins = 0;    // a < b
    int losses = 0;  // a > b
    int ties = 0;
    double p_value = 1.0;
};

SignTest paired_sign_test(std::span<const double> a, std::span<const double> b);

}  // namespace metats
