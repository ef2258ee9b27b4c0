#pragma once

#include <stdexcept>
#include <string>

namespace qtraj {

/// Base class for all engine errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Polar decomposition of an identically zero field.
struct AllNodesError : Error {
    using Error::Error;
};

/// Fields that must share a grid or time stamp do not.
struct GridMismatchError : Error {
    using Error::Error;
};

/// An operation needs more stored snapshots than the history holds.
struct InsufficientHistoryError : Error {
    using Error::Error;
};

/// The implicit solve did not converge within the iteration cap.
struct SolverDivergedError : Error {
    using Error::Error;
};

/// Interpolation stencil touches cells outside the defined region.
struct UndefinedRegionError : Error {
    using Error::Error;
};

/// Trajectory seed lies in an undefined region at the initial time.
struct SeedUndefinedError : Error {
    using Error::Error;
};

/// An along-curve quantity hit the node threshold.
struct NodeCrossingError : Error {
    using Error::Error;
};

/// Malformed scenario document.
struct ParseError : Error {
    using Error::Error;
};

/// Well-formed scenario document violating an invariant; carries the rule name.
struct ValidationError : Error {
    ValidationError(const std::string& rule, const std::string& what)
        : Error(what), rule(rule) {}
    std::string rule;
};

/// Filesystem failure while writing or reading artifacts.
struct IoError : Error {
    using Error::Error;
};

} // namespace qtraj
