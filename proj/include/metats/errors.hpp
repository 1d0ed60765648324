#pragma once

#include <stdexcept>
#include <string>

namespace metats {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Covariance not symmetric positive definite, or non-positive noise scale.
class InvalidBelief : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ArmIndexError : public Error {
public:
    using Error::Error;
};

// A factorization or solve failed even after the jitter retry.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InfeasibleProblem : public Error {
public:
    using Error::Error;
};

class UnboundedProblem : public Error {
public:
    using Error::Error;
};

// Malformed trace or summary file.
class FormatError : public Error {
public:
    using Error::Error;
};

// A simulation failure tagged with where it happened (0 when unknown).
class RunFailure : public Error {
public:
    RunFailure(int run, int task, int round, const std::string& what)
        : Error("run " + std::to_string(run) + ", task " + std::to_string(task) + ", round " +
                std::to_string(round) + ": " + what),
          run_(run), task_(task), round_(round) {}

    int run() const { return run_; }
    int task() const { return task_; }
    int round() const { return round_; }

private:
    int run_, task_, round_;
};

}  // namespace metats
