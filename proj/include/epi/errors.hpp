#pragma once
#include <stdexcept>
#include <string>

namespace epi {

// Invalid user input: bad parameters, malformed config, unknown keys.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: non-convergence, bound violation, factorization failure.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace epi
