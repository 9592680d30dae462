#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "socnav/reward.hpp"

using namespace socnav;

namespace {

AgentSnapshot snap(double x, double y, Vec2 goal,
                   AgentStatus st = AgentStatus::active) {
  return {Pose2(x, y, 0), goal, st};
}

Clearances clear_far() { return {6.0, std::numeric_limits<double>::infinity()}; }

}  // namespace

TEST_CASE("progress term matches the printed formula") {
  RewardConfig cfg;
  // prev dist 3.0, cur dist 2.9 -> R = -2.5 * (2.9 - 3.0) = +0.25
  StepOutcome out = compute_reward(snap(-3.0, 0, {0, 0}), snap(-2.9, 0, {0, 0}),
                                   clear_far(), cfg);
  CHECK(out.reward == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(out.kind == OutcomeKind::running);
  CHECK(!out.terminal);
}

TEST_CASE("collision dominates and terminates") {
  RewardConfig cfg;
  StepOutcome out =
      compute_reward(snap(-3.0, 0, {0, 0}),
                     snap(-2.9, 0, {0, 0}, AgentStatus::collided),
                     Clearances{0.0, 0.2}, cfg);
  CHECK(out.kind == OutcomeKind::collided);
  CHECK(out.terminal);
  // R includes r_collision plus the shaped terms evaluated as printed.
  double rg = cfg.w1 * (2.9 - 3.0);
  double rs = cfg.w3 * (1.0 - 0.2 / (cfg.r + 1.25));
  CHECK(out.reward == doctest::Approx(cfg.r_collision + rg + rs).epsilon(1e-9));
}

TEST_CASE("arrival pays r_arrival") {
  RewardConfig cfg;
  StepOutcome out = compute_reward(snap(-0.5, 0, {0, 0}),
                                   snap(-0.2, 0, {0, 0}, AgentStatus::arrived),
                                   clear_far(), cfg);
  CHECK(out.kind == OutcomeKind::arrived);
  CHECK(out.terminal);
  CHECK(out.reward == doctest::Approx(cfg.r_arrival).epsilon(1e-9));
}

TEST_CASE("proximity terms evaluate the printed formulas") {
  RewardConfig cfg;
  // d = 0.8, d_ped = 1.0, r = 0.3
  StepOutcome out = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                   Clearances{0.8, 1.0}, cfg);
  const double rc = -0.2 * (1.0 - 0.8 / 1.3);
  const double rs = -0.3 * (1.0 - 1.0 / 1.55);
  CHECK(rc == doctest::Approx(-0.07692).epsilon(1e-4));
  CHECK(rs == doctest::Approx(-0.10645).epsilon(1e-4));
  CHECK(out.reward == doctest::Approx(rc + rs).epsilon(1e-9));
}

TEST_CASE("penalties are continuous at their thresholds") {
  RewardConfig cfg;
  const double d_edge = cfg.r + 1.0;
  const double dped_edge = cfg.r + 1.25;

  StepOutcome at_edge = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                       Clearances{d_edge, dped_edge}, cfg);
  CHECK(at_edge.reward == doctest::Approx(0.0).epsilon(1e-12));

  StepOutcome inside = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                      Clearances{d_edge - 1e-9, dped_edge - 1e-9}, cfg);
  CHECK(std::abs(inside.reward) < 1e-8);
  StepOutcome outside = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                       Clearances{d_edge + 1e-9, dped_edge + 1e-9}, cfg);
  CHECK(outside.reward == 0.0);
}

TEST_CASE("social penalty is monotone as d_ped shrinks") {
  RewardConfig cfg;
  double last = 1.0;
  for (double dped = cfg.r + 1.25; dped >= 0.0; dped -= 0.05) {
    StepOutcome out = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                     Clearances{6.0, dped}, cfg);
    CHECK(out.reward <= last + 1e-12);
    last = out.reward;
  }
}

TEST_CASE("terminal rewards dominate one-step shaped terms") {
  RewardConfig cfg;
  const double dt = 0.1, v_max = 1.0;
  const double max_progress = std::abs(cfg.w1) * v_max * dt;
  const double max_rc = std::abs(cfg.w2);
  const double max_rs = std::abs(cfg.w3);
  CHECK(cfg.r_arrival > max_progress + max_rc + max_rs);
  CHECK(-cfg.r_collision > max_progress + max_rc + max_rs);
}

TEST_CASE("timeout is terminal without terminal reward") {
  RewardConfig cfg;
  StepOutcome out = compute_reward(snap(0, 0, {3, 0}),
                                   snap(0, 0, {3, 0}, AgentStatus::timed_out),
                                   clear_far(), cfg);
  CHECK(out.kind == OutcomeKind::timed_out);
  CHECK(out.terminal);
  CHECK(std::abs(out.reward) < 1.0);
}

TEST_CASE("non-finite inputs are rejected") {
  RewardConfig cfg;
  Clearances bad{std::numeric_limits<double>::quiet_NaN(), 1.0};
  CHECK_THROWS_AS(
      compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}), bad, cfg),
      std::invalid_argument);
}

TEST_CASE("infinite d_ped disables the social term") {
  RewardConfig cfg;
  StepOutcome out = compute_reward(snap(0, 0, {3, 0}), snap(0, 0, {3, 0}),
                                   clear_far(), cfg);
  CHECK(out.reward == 0.0);
}
