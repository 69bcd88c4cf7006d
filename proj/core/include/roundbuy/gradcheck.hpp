#pragma once

#include <functional>
#include <string>
#include <vector>

#include "roundbuy/autodiff.hpp"

namespace roundbuy::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Builds a scalar from parameters looked up through the graph.
using ScalarFn = std::function<Var(Graph&)>;

// Compares reverse-mode gradients with central finite differences
// (f(x + h) - f(x - h)) / 2h at every coordinate of the selected parameters
// (all parameters when `names` is empty). Error per coordinate is
// |g_a - g_f| / max(1, |g_a|, |g_f|). Always runs with non-finite checks on,
// so a bad intermediate throws Error(NonFinite) naming the op.
GradCheckResult grad_check(const ScalarFn& f, const ParamStore& point,
                           const std::vector<std::string>& names = {}, double step = 1e-5);

}  // namespace roundbuy::ad
