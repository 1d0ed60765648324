#include "metats/stats.hpp"

#include <cmath>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "metats/errors.hpp"

namespace metats {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw PreconditionViolation("mean of an empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - mu) * (x - mu);
    const double n = static_cast<double>(xs.size());
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

PairedDifference paired_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("paired samples differ in length");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    return {mean(diff), standard_error(diff)};
}

SignTest paired_sign_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("paired samples differ in length");
    SignTest r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) {
            ++r.wins;
        } else if (a[i] > b[i]) {
            ++r.losses;
        } else {
            ++r.ties;
        }
    }
    const int trials = r.wins + r.losses;
    if (trials == 0 || r.wins == 0) return r;
    const boost::math::binomial_distribution<double> dist(trials, 0.5);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.wins - 1));
    return r;
}

}  // namespace metats
