#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coopseg::acceptance {

struct OpError {
  std::string op;
  double worst_rel_error = 0;
};

/// The finite-difference suite of the double-precision build.
std::vector<OpError> gradient_suite_f64(std::uint64_t seed);

}  // namespace coopseg::acceptance
