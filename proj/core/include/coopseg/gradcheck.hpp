#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coopseg/config.hpp"

COOPSEG_NAMESPACE_BEGIN

// Finite-difference verification of every differentiable op, and the
// gradient-isolation properties of the cooperative schemes.
//
// Each op output y is reduced to L = sum_i r_i y_i with fixed random r (or L = y
// for scalar ops). The analytic gradient of every input is compared with the
// central difference (L(x + eps) - L(x - eps)) / (2 eps), evaluated in double.
// The error of one input is ||analytic - numeric||_2 / max(||analytic||_2,
// ||numeric||_2); the op's score is the worst over its inputs and cases.

struct GradcheckOptions {
  double eps = 0;
  double tolerance = 0;
  std::uint64_t seed = 1234;
  /// Test fixture: scales the analytic gradient of this op by 1.1.
  std::optional<std::string> corrupt_op;
};

/// eps 1e-3 / tolerance 1e-2 in the float build, 1e-5 / 1e-5 in double.
GradcheckOptions default_gradcheck_options();

struct OpCheck {
  std::string op;
  double worst_rel_error = 0;
  double tolerance = 0;
  std::size_t coordinates = 0;
  bool pass = false;
};

std::vector<OpCheck> run_gradient_suite(const GradcheckOptions& opts);

struct IsolationCheck {
  std::string scheme;  // single | ensemble | same | multi
  bool detach = false;
  /// ||d loss1 / d bottom params||_2
  double loss1_bottom_norm = 0;
  /// ||d loss2 / d top params||_2 (0 for single)
  double loss2_top_norm = 0;
  std::string expectation;
  bool pass = false;
};

/// Runs every scheme (and the detached variants of same/multi) on seeded
/// random data and checks which parameter sets each loss reaches.
std::vector<IsolationCheck> run_isolation_suite(std::uint64_t seed);

COOPSEG_NAMESPACE_END
