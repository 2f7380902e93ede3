#pragma once

#include <stdexcept>
#include <string>

namespace evtrig {

// Raised when an experiment configuration cannot be turned into a problem.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The discretization can no longer be trusted (cost went up, mass leaked, ...).
class NumericalInconsistency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Probability mass left the grid: the support half-width is too small.
class GridOverflow : public NumericalInconsistency {
 public:
  using NumericalInconsistency::NumericalInconsistency;
};

// A density has (numerically) no mass on the grid.
class DegenerateGrid : public NumericalInconsistency {
 public:
  using NumericalInconsistency::NumericalInconsistency;
};

}  // namespace evtrig
