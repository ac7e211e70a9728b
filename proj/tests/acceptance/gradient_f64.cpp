// Compiled against coopseg_core_f64 only; the float and double builds cannot
// share a translation unit.
#include "gradient_f64.hpp"

#include "coopseg/gradcheck.hpp"

namespace coopseg::acceptance {

std::vector<OpError> gradient_suite_f64(std::uint64_t seed) {
  auto opts = coopseg::f64::default_gradcheck_options();
  opts.seed = seed;
  std::vector<OpError> out;
  for (const auto& o : coopseg::f64::run_gradient_suite(opts)) out.push_back({o.op, o.worst_rel_error});
  return out;
}

}  // namespace coopseg::acceptance
