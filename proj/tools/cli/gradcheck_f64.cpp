// Compiled against coopseg_core_f64 only.
#include "gradcheck_f64.hpp"

#include "coopseg/gradcheck.hpp"

namespace coopseg::cli {

std::vector<OpResult> run_gradient_suite_f64(std::uint64_t seed, const std::string& corrupt_op) {
  auto opts = coopseg::f64::default_gradcheck_options();
  opts.seed = seed;
  if (!corrupt_op.empty()) opts.corrupt_op = corrupt_op;
  std::vector<OpResult> out;
  for (const auto& o : coopseg::f64::run_gradient_suite(opts)) {
    out.push_back({o.op, o.worst_rel_error, o.tolerance, o.coordinates, o.pass});
  }
  return out;
}

}  // namespace coopseg::cli
