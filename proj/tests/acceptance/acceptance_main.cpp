#include <cstdio>
#include <cstring>
#include <thread>
#include <vector>

#include "criteria.hpp"

namespace acceptance {

void run_parallel(std::vector<std::function<void()>> jobs) {
  const size_t workers = 2;
  std::vector<std::thread> pool;
  size_t next = 0;
  std::mutex mu;
  for (size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        size_t mine;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= jobs.size()) return;
          mine = next++;
        }
        jobs[mine]();
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace acceptance

int main(int argc, char** argv) {
  using namespace acceptance;
  struct Entry {
    int id;
    const char* name;
    CriterionFn fn;
  };
  const std::vector<Entry> entries = {
      {1, "geometry oracles", criterion1_geometry_oracles},
      {2, "gradient suite", criterion2_gradient_suite},
      {3, "reward formulas", criterion3_reward_formulas},
      {4, "representation ablation vs persistence", criterion4_representation_ablation},
      {5, "ego-motion disentanglement", criterion5_ego_disentanglement},
      {6, "sample-efficiency trend", criterion6_sample_efficiency},
      {7, "end-to-end social run", criterion7_social_run},
      {8, "determinism", criterion8_determinism},
      {9, "loop accounting", criterion9_accounting},
  };

  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--criterion") && i + 1 < argc)
      only = std::atoi(argv[++i]);
  }

  bool all_pass = true;
  for (const auto& e : entries) {
    if (only != 0 && e.id != only) continue;
    Result r;
    try {
      r = e.fn();
    } catch (const std::exception& ex) {
      r.pass = false;
      r.detail = std::string("exception: ") + ex.what();
    }
    std::printf("[%s] criterion %d (%s): %s\n", r.pass ? "PASS" : "FAIL", e.id,
                e.name, r.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}
