#include "metats/random.hpp"

namespace metats {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng substream(std::uint64_t root, std::uint64_t run, std::uint64_t task, std::uint64_t round,
              Purpose purpose, std::uint64_t salt) {
    std::uint64_t h = splitmix64(root);
    for (std::uint64_t part : {run, task, round, static_cast<std::uint64_t>(purpose), salt}) {
        h = splitmix64(h ^ splitmix64(part + 0x632be59bd9b4e019ULL));
    }
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

double standard_normal(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    return normal(rng);
}

Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index size) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(size);
    for (Eigen::Index i = 0; i < size; ++i) z[i] = normal(rng);
    return z;
}

Eigen::VectorXd uniform_vector(Rng& rng, Eigen::Index size, double low, double high) {
    std::uniform_real_distribution<double> unif(low, high);
    Eigen::VectorXd x(size);
    for (Eigen::Index i = 0; i < size; ++i) x[i] = unif(rng);
    return x;
}

}  // namespace metats
