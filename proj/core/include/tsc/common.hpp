#pragma once

#include <random>
#include <stdexcept>
#include <string>

namespace tsc {

/// Shape or rank mismatch between tensors and the operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (files, tables, labels).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: divergence, degenerate statistics, non-finite values.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All randomness flows through one explicit engine so runs are replayable.
using Rng = std::mt19937_64;

enum class Mode { train, infer };

/// Shortest round-trippable decimal form of a double (17 significant digits).
std::string format_g17(double v);

}  // namespace tsc
