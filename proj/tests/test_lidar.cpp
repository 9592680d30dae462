#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "socnav/lidar.hpp"

using namespace socnav;

TEST_CASE("ray-circle intersection against quadratic roots") {
  SUBCASE("head-on hit") {
    auto t = intersect_ray_circle({0, 0}, {1, 0}, {2, 0}, 0.5);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("tangent ray: discriminant zero") {
    auto t = intersect_ray_circle({0, 0.5}, {1, 0}, {2, 0}, 0.5);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("pointing away misses") {
    auto t = intersect_ray_circle({0, 0}, {-1, 0}, {2, 0}, 0.5);
    CHECK(!t);
  }
  SUBCASE("origin inside the circle returns the exit") {
    auto t = intersect_ray_circle({2, 0}, {1, 0}, {2, 0}, 0.5);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("ray-segment intersection") {
  SUBCASE("perpendicular wall") {
    auto t = intersect_ray_segment({0, 0}, {1, 0}, {3, -5}, {3, 5});
    REQUIRE(t);
    CHECK(*t == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("45 degree beam against x=3 wall") {
    double c = std::cos(kPi / 4), s = std::sin(kPi / 4);
    auto t = intersect_ray_segment({0, 0}, {c, s}, {3, -5}, {3, 5});
    REQUIRE(t);
    CHECK(*t == doctest::Approx(4.242640687119285).epsilon(1e-9));
  }
  SUBCASE("beyond the endpoint misses") {
    auto t = intersect_ray_segment({0, 0}, {1, 0}, {3, 1}, {3, 5});
    CHECK(!t);
  }
  SUBCASE("parallel ray misses") {
    auto t = intersect_ray_segment({0, 0}, {1, 0}, {3, 1}, {5, 1});
    CHECK(!t);
  }
}

TEST_CASE("ray-rectangle intersection") {
  Obstacle rect{RectShape{{3, 0}, {0.5, 1.0}, 0.0}};
  auto t = intersect_ray({0, 0}, {1, 0}, rect);
  REQUIRE(t);
  CHECK(*t == doctest::Approx(2.5).epsilon(1e-12));

  Obstacle rot{RectShape{{3, 0}, {0.5, 1.0}, kPi / 2}};
  auto t2 = intersect_ray({0, 0}, {1, 0}, rot);
  REQUIRE(t2);
  CHECK(*t2 == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("scan basics") {
  LidarConfig cfg;
  WorldState world;
  AgentState agent;
  agent.pose = Pose2(0, 0, 0);
  world.agents.push_back(agent);

  SUBCASE("empty world gives max range everywhere") {
    LaserScan s = scan(world, 0, cfg);
    REQUIRE(static_cast<int>(s.ranges.size()) == cfg.n_beams);
    for (float r : s.ranges) CHECK(r == doctest::Approx(6.0));
  }

  SUBCASE("center beam hits a circle dead ahead") {
    world.obstacles.push_back({CircleShape{{2, 0}, 0.5}});
    LaserScan s = scan(world, 0, cfg);
    // 180 beams over [-pi/2, +pi/2]: no exact 0 beam; check the two middle
    // beams straddle the analytic value closely.
    int mid = cfg.n_beams / 2;
    CHECK(s.ranges[mid] == doctest::Approx(1.5).epsilon(1e-3));
  }

  SUBCASE("odd beam count puts a beam exactly forward") {
    LidarConfig c5 = cfg;
    c5.n_beams = 181;
    world.obstacles.push_back({CircleShape{{2, 0}, 0.5}});
    LaserScan s = scan(world, 0, c5);
    CHECK(s.ranges[90] == doctest::Approx(1.5).epsilon(1e-12));
  }

  SUBCASE("wall at 45 degrees") {
    LidarConfig c5 = cfg;
    c5.n_beams = 181;  // beam 135 sits at exactly +45 degrees
    world.obstacles.push_back({SegmentShape{{3, -5}, {3, 5}}});
    LaserScan s = scan(world, 0, c5);
    CHECK(s.ranges[135] == doctest::Approx(4.24264).epsilon(1e-5));
  }

  SUBCASE("peers are visible, self is not") {
    AgentState peer;
    peer.pose = Pose2(1.0, 0, 0);
    peer.radius = 0.3;
    world.agents.push_back(peer);
    LidarConfig c5 = cfg;
    c5.n_beams = 181;
    LaserScan s = scan(world, 0, c5);
    CHECK(s.ranges[90] == doctest::Approx(0.7).epsilon(1e-6));
  }

  SUBCASE("ranges clamp to min_range") {
    world.obstacles.push_back({CircleShape{{0.02, 0}, 0.01}});
    LaserScan s = scan(world, 0, cfg);
    for (float r : s.ranges) CHECK(r >= cfg.min_range);
  }
}

TEST_CASE("scan is rotation covariant") {
  LidarConfig cfg;
  cfg.n_beams = 64;
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    double phi = rng.uniform(-3, 3);
    WorldState world;
    AgentState agent;
    agent.pose = Pose2(0.3, -0.2, 0.4);
    world.agents.push_back(agent);
    world.obstacles.push_back(
        {CircleShape{{rng.uniform(-3, 3), rng.uniform(-3, 3)}, 0.4}});
    world.obstacles.push_back(
        {SegmentShape{{rng.uniform(-4, 0), rng.uniform(-4, 4)},
                      {rng.uniform(0, 4), rng.uniform(-4, 4)}}});
    LaserScan base = scan(world, 0, cfg);

    // Rotate the whole world (obstacles and sensor) by phi about the origin.
    WorldState rot;
    auto rotate = [&](const Vec2& p) -> Vec2 {
      double c = std::cos(phi), s = std::sin(phi);
      return {c * p.x - s * p.y, s * p.x + c * p.y};
    };
    AgentState ragent;
    Vec2 rp = rotate({0.3, -0.2});
    ragent.pose = Pose2(rp.x, rp.y, 0.4 + phi);
    rot.agents.push_back(ragent);
    for (const auto& o : world.obstacles) {
      if (const auto* c = std::get_if<CircleShape>(&o.shape)) {
        rot.obstacles.push_back({CircleShape{rotate(c->center), c->radius}});
      } else if (const auto* s = std::get_if<SegmentShape>(&o.shape)) {
        rot.obstacles.push_back({SegmentShape{rotate(s->a), rotate(s->b)}});
      }
    }
    LaserScan turned = scan(rot, 0, cfg);
    for (int i = 0; i < cfg.n_beams; ++i)
      CHECK(std::abs(base.ranges[i] - turned.ranges[i]) < 1e-9);
  }
}

TEST_CASE("adding an obstacle never increases any range") {
  LidarConfig cfg;
  cfg.n_beams = 90;
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    WorldState world;
    AgentState agent;
    agent.pose = Pose2(0, 0, rng.uniform(-3, 3));
    world.agents.push_back(agent);
    for (int k = 0; k < 3; ++k)
      world.obstacles.push_back(
          {CircleShape{{rng.uniform(-4, 4), rng.uniform(-4, 4)},
                       rng.uniform(0.2, 0.6)}});
    LaserScan before = scan(world, 0, cfg);
    world.obstacles.push_back(
        {CircleShape{{rng.uniform(-4, 4), rng.uniform(-4, 4)}, 0.5}});
    LaserScan after = scan(world, 0, cfg);
    for (int i = 0; i < cfg.n_beams; ++i) CHECK(after.ranges[i] <= before.ranges[i] + 1e-12);
  }
}

TEST_CASE("noise model perturbs ranges only when enabled") {
  LidarConfig cfg;
  cfg.n_beams = 32;
  WorldState world;
  AgentState agent;
  world.agents.push_back(agent);
  world.obstacles.push_back({CircleShape{{2, 0}, 0.5}});

  Rng rng(5);
  LaserScan clean = scan(world, 0, cfg, &rng);
  cfg.noise_sigma = 0.05;
  Rng rng2(5);
  LaserScan noisy = scan(world, 0, cfg, &rng2);
  bool any_diff = false;
  for (int i = 0; i < cfg.n_beams; ++i) {
    if (clean.ranges[i] < 6.0 && clean.ranges[i] != noisy.ranges[i]) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("scan csv row shape") {
  LidarConfig cfg;
  cfg.n_beams = 4;
  WorldState world;
  AgentState agent;
  world.agents.push_back(agent);
  LaserScan s = scan(world, 0, cfg);
  std::string row = scan_to_csv_row(s, 3);
  int commas = 0;
  for (char c : row)
    if (c == ',') ++commas;
  CHECK(commas == 3 + cfg.n_beams);
  CHECK(row.substr(0, 2) == "3,");
}
