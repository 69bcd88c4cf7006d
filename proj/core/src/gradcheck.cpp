#include "roundbuy/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "roundbuy/error.hpp"

namespace roundbuy::ad {

GradCheckResult grad_check(const ScalarFn& f, const ParamStore& point, const std::vector<std::string>& names,
                           double step) {
  GraphOptions opts;
  opts.check_finite = true;

  ParamStore analytic;
  {
    Graph g(point, opts);
    Var loss = f(g);
    g.backward(loss);
    analytic = g.gradients();
  }

  std::vector<std::string> selected = names.empty() ? point.names() : names;
  ParamStore probe = point;
  auto eval = [&]() {
    Graph g(probe, opts);
    return f(g).scalar();
  };

  GradCheckResult result;
  for (const auto& name : selected) {
    Tensor& p = probe.at(name);
    const Tensor* ga = analytic.find(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + step;
      const double up = eval();
      p[i] = orig - step;
      const double down = eval();
      p[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double an = ga ? (*ga)[i] : 0.0;
      const double err = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = err;
        result.worst_param = name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace roundbuy::ad
