#pragma once

#include <stdexcept>

// Exception hierarchy shared by the whole library.  Every throwing function
// documents which of these it may raise; all of them derive from latb::Error
// so callers can catch the library as a whole.

namespace latb {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Market parameters admit a riskless profit (a one-step gross return outside
// the open interval between the down and up ratios).
struct ArbitrageViolation : Error {
    using Error::Error;
};

// Asset count or step count outside the supported range.
struct DimensionError : Error {
    using Error::Error;
};

// An initial price (or other quantity that must be strictly positive) is not.
struct NonpositivePrice : Error {
    using Error::Error;
};

// A column, scenario, or node index outside its valid range.
struct IndexOutOfRange : Error {
    using Error::Error;
};

// A lattice level outside [0, num_steps].
struct LevelOverflow : Error {
    using Error::Error;
};

// Vector or matrix sizes disagree with the market dimensions.
struct DimensionMismatch : Error {
    using Error::Error;
};

// A conditional distribution was requested given an event of probability zero.
struct ZeroMassEvent : Error {
    using Error::Error;
};

// A path prefix is longer than the market's step count.
struct PrefixLevelMismatch : Error {
    using Error::Error;
};

// The lower product vertex measure needs the up weights to sum to at most one.
struct MassOverflow : Error {
    using Error::Error;
};

// A weight vector that must be non-increasing is not.
struct NotSorted : Error {
    using Error::Error;
};

// A scalar argument outside its admissible interval.
struct OutOfRange : Error {
    using Error::Error;
};

// An exhaustive computation would exceed its configured size budget.
struct BudgetExceeded : Error {
    using Error::Error;
};

// A set-function or measure argument has the wrong number of entries.
struct WrongDimension : Error {
    using Error::Error;
};

// Payoff weights are malformed (wrong length, non-finite, or all zero).
struct WeightError : Error {
    using Error::Error;
};

// A payoff of the wrong flavour was passed (e.g. a path-dependent payoff to a
// routine that evaluates on terminal lattice nodes).
struct KindMismatch : Error {
    using Error::Error;
};

// The linear program (or polytope) has no feasible point.
struct Infeasible : Error {
    using Error::Error;
};

// The linear program's objective is unbounded over the feasible region.
struct Unbounded : Error {
    using Error::Error;
};

// Malformed run configuration (CLI / JSON layer).
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace latb
