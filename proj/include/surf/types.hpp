#pragma once

#include <stdexcept>
#include <string>

namespace surf {

/// Thrown on malformed user input (bad dimensions, unparseable files,
/// invalid configuration). The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown on numerical failure (non-nested deviances, degenerate folds,
/// unattainable calibration targets). The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Family { gaussian, binomial, poisson };

/// Exponential family plus its canonical link. The link is implied by the
/// family (identity, logit, log) and is never configurable separately.
struct GlmSpec {
  Family family = Family::gaussian;
};

const char* family_name(Family f);
const char* link_name(Family f);
Family family_from_name(const std::string& name);

}  // namespace surf
