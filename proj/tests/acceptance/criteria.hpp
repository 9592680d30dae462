#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace acceptance {

struct Result {
  bool pass = false;
  std::string detail;
};

using CriterionFn = std::function<Result()>;

Result criterion1_geometry_oracles();
Result criterion2_gradient_suite();
Result criterion3_reward_formulas();
Result criterion4_representation_ablation();
Result criterion5_ego_disentanglement();
Result criterion6_sample_efficiency();
Result criterion7_social_run();
Result criterion8_determinism();
Result criterion9_accounting();

// Runs jobs on up to two worker threads (independent seeded runs).
void run_parallel(std::vector<std::function<void()>> jobs);

}  // namespace acceptance
