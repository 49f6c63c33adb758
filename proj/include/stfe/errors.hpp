#pragma once

#include <stdexcept>
#include <string>

namespace stfe {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two grid functions or an operator and a grid function live on different grids.
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// A requested noise mode is outside {-K..K} or not resolvable on the grid.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// The periodic banded solve did not reach the required residual.
class SolverFailure : public Error {
public:
    SolverFailure(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Adaptive stepping gave up (step size fell below the configured minimum).
class StepFailure : public Error {
public:
    using Error::Error;
};

/// A NaN or infinity appeared in the state.
class NumericalBlowup : public Error {
public:
    using Error::Error;
};

/// Logarithmic entropy requested on a state with a nonpositive node.
class InfiniteEntropy : public Error {
public:
    using Error::Error;
};

/// Invalid functional parameters (e.g. entropy reference level too small).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Time outside [0, T) or not present in a recorded series.
class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be read or written; the message names the path.
class IoError : public Error {
public:
    using Error::Error;
};

class EnsembleFailure : public Error {
public:
    using Error::Error;
};

}  // namespace stfe
