#pragma once

#include <stdexcept>
#include <string>

namespace qpkr {

// Exit codes used by the command line tool. Library code throws the typed
// exceptions below; the tool maps them to these codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNoConvergence = 3,
  kExitGridOverflow = 4,
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: invalid configuration, malformed files, violated
// preconditions that a caller can fix.
struct ConfigError : Error {
  using Error::Error;
};

// Input data that cannot be analyzed (zero probabilities, empty series).
struct DegenerateDataError : Error {
  using Error::Error;
};

// An iterative fit did not converge. Carries a human-readable diagnostic;
// callers that need the last iterate use the typed variants in scaling/crit.
struct ConvergenceError : Error {
  using Error::Error;
};

// The wavepacket reached the edge of the momentum lattice.
struct GridOverflowError : Error {
  GridOverflowError(double K, double eps, int kick, double edge_population)
      : Error("grid overflow at control point (K=" + std::to_string(K) +
              ", eps=" + std::to_string(eps) + ") after kick " +
              std::to_string(kick) +
              ": edge population = " + std::to_string(edge_population) +
              "; increase the lattice size"),
        K(K), eps(eps), kick(kick), edge_population(edge_population) {}
  double K;
  double eps;
  int kick;
  double edge_population;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const GridOverflowError*>(&e)) return kExitGridOverflow;
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitNoConvergence;
  return kExitConfig;
}

}  // namespace qpkr
