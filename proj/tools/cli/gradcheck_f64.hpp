#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace coopseg::cli {

struct OpResult {
  std::string op;
  double worst_rel_error = 0;
  double tolerance = 0;
  std::size_t coordinates = 0;
  bool pass = false;
};

/// The finite-difference suite run against the double-precision build.
std::vector<OpResult> run_gradient_suite_f64(std::uint64_t seed, const std::string& corrupt_op);

}  // namespace coopseg::cli
