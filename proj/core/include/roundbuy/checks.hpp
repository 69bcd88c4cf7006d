#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roundbuy/gradcheck.hpp"

namespace roundbuy {

struct NamedGradCheck {
  std::string name;
  ad::GradCheckResult result;
};

// Finite-difference checks of every differentiable primitive and of the
// composed encoder -> SCST / gate / teacher-forcing losses on a small model
// with frozen rollouts.
std::vector<NamedGradCheck> gradcheck_suite(std::uint64_t seed = 5);

}  // namespace roundbuy
