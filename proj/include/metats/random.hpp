#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace metats {

using Rng = std::mt19937_64;

// Every random draw in the simulator is tagged with what it is for. The tag is
// part of the substream key, so adding a new draw never shifts existing ones.
enum class Purpose : std::uint64_t {
    kCovariance = 1,
    kInstancePrior = 2,
    kInstance = 3,
    kContexts = 4,
    kRewardNoise = 5,
    kPosteriorSample = 6,
    kMetaSample = 7,
    kPriorBank = 8,
    kEpsilon = 9,
    kPolytope = 10,
    kVerification = 11,
};

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based stream derivation: the returned engine depends only on the key,
// never on how many draws other streams have made.
Rng substream(std::uint64_t root, std::uint64_t run, std::uint64_t task, std::uint64_t round,
              Purpose purpose, std::uint64_t salt = 0);

double standard_normal(Rng& rng);
Eigen::VectorXd standard_normal_vector(Rng& rng, Eigen::Index size);
Eigen::VectorXd uniform_vector(Rng& rng, Eigen::Index size, double low, double high);

/// Streams for one task of one run. Environment draws (instances, contexts,
/// reward noise) ignore the agent salt so every agent in a run faces the same
/// environment; agent-internal draws mix the salt in.
struct TaskStreams {
    std::uint64_t root = 0;
    std::uint64_t run = 0;
    std::uint64_t task = 0;
    std::uint64_t agent_salt = 0;

    Rng environment(Purpose purpose, std::uint64_t round) const {
        return substream(root, run, task, round, purpose, 0);
    }
    Rng agent(Purpose purpose, std::uint64_t round) const {
        return substream(root, run, task, round, purpose, agent_salt);
    }
};

struct RunStreams {
    std::uint64_t root = 0;
    std::uint64_t run = 0;
    std::uint64_t agent_salt = 0;

    TaskStreams task(std::uint64_t s) const { return {root, run, s, agent_salt}; }
};

}  // namespace metats
