#include "socnav/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "socnav/lidar.hpp"

namespace socnav {

EpisodeTrace run_episode(const Scenario& scenario, const EpisodeConfig& cfg,
                         const PolicyFn& policy, uint64_t episode_seed) {
  Scenario spec = scenario;
  spec.seed = episode_seed;
  WorldState world = generate_scenario(spec, cfg.sim);
  world.dt = cfg.sim.dt;

  const int n = static_cast<int>(world.agents.size());
  std::vector<ObservationBuilder> builders(n, ObservationBuilder(cfg.grid));
  std::vector<Action> last(n);
  Rng rng = Rng(episode_seed).fork("episode");

  EpisodeTrace trace;
  const int main = world.main_agent;
  for (;;) {
    std::vector<Action> actions;
    for (int i = 0; i < n; ++i) {
      if (!world.agents[i].active()) continue;
      LaserScan s = scan(world, i, cfg.lidar);
      builders[i].push(s, world.agents[i].pose);
      Observation obs = builders[i].build(world.agents[i].goal, last[i]);
      actions.push_back(policy(obs, rng));
    }
    // Remember which action went to which agent for the vel bookkeeping.
    {
      size_t ai = 0;
      for (int i = 0; i < n; ++i)
        if (world.agents[i].active()) last[i] = actions[ai++];
    }

    AgentSnapshot prev{world.agents[main].pose, world.agents[main].goal,
                       world.agents[main].status};
    step_world(world, actions, cfg.sim);
    Clearances cl = min_clearances(world, main, cfg.lidar.max_range);
    AgentSnapshot cur{world.agents[main].pose, world.agents[main].goal,
                      world.agents[main].status};
    StepOutcome outcome = compute_reward(prev, cur, cl, cfg.reward);

    trace.ticks.push_back(
        {world.agents[main].pose, last[main], cl.d, cl.d_ped, outcome.reward});
    if (outcome.terminal) {
      trace.outcome = outcome.kind;
      break;
    }
  }
  trace.duration = static_cast<double>(trace.ticks.size()) * cfg.sim.dt;
  return trace;
}

MetricsReport evaluate(const PolicyFn& policy, const Scenario& base, int episodes,
                       uint64_t seed_base, const EpisodeConfig& cfg,
                       std::vector<EpisodeTrace>* traces) {
  MetricsReport rep;
  rep.episodes = episodes;
  int successes = 0;
  double time_sum = 0.0;
  double ego_sum = 0.0, social_sum = 0.0;
  for (int i = 0; i < episodes; ++i) {
    EpisodeTrace tr = run_episode(base, cfg, policy, seed_base + static_cast<uint64_t>(i));
    if (tr.outcome == OutcomeKind::arrived) {
      ++successes;
      time_sum += tr.duration;
    }
    ego_sum += ego_score(tr, cfg.reward.r);
    social_sum += social_score(tr, cfg.reward.r, cfg.comfort_margin);
    if (traces) traces->push_back(std::move(tr));
  }
  rep.success_rate = 100.0 * successes / episodes;
  rep.arriving_time = successes > 0 ? time_sum / successes
                                    : std::numeric_limits<double>::quiet_NaN();
  rep.ego_score = ego_sum / episodes;
  rep.social_score = social_sum / episodes;
  return rep;
}

double ego_score(const EpisodeTrace& trace, double safety_radius) {
  if (trace.ticks.empty()) return 0.0;
  int64_t m = 0;
  for (const auto& t : trace.ticks)
    if (t.d > safety_radius) ++m;
  return 100.0 * static_cast<double>(m) / static_cast<double>(trace.ticks.size());
}

double social_score(const EpisodeTrace& trace, double safety_radius,
                    double comfort_margin) {
  if (trace.ticks.empty()) return 0.0;
  int64_t n = 0;
  for (const auto& t : trace.ticks)
    if (t.d_ped > safety_radius + comfort_margin) ++n;
  return 100.0 * static_cast<double>(n) / static_cast<double>(trace.ticks.size());
}

namespace {

std::string fmt_full(double v) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

double parse_field(const std::string& s) {
  if (s == "-") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string export_csv(const std::vector<LabeledReport>& reports) {
  std::ostringstream os;
  os << "policy,scenario,success_rate,arriving_time,ego_score,social_score,episodes\n";
  for (const auto& r : reports) {
    os << r.policy << ',' << r.scenario << ',' << fmt_full(r.report.success_rate)
       << ',' << fmt_full(r.report.arriving_time) << ','
       << fmt_full(r.report.ego_score) << ',' << fmt_full(r.report.social_score)
       << ',' << r.report.episodes << '\n';
  }
  return os.str();
}

std::vector<LabeledReport> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<LabeledReport> out;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("report csv: bad row: " + line);
    LabeledReport r;
    r.policy = f[0];
    r.scenario = f[1];
    r.report.success_rate = parse_field(f[2]);
    r.report.arriving_time = parse_field(f[3]);
    r.report.ego_score = parse_field(f[4]);
    r.report.social_score = parse_field(f[5]);
    r.report.episodes = std::stoi(f[6]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string export_table(const std::vector<LabeledReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "Policy" << std::setw(16) << "Scenario"
     << std::right << std::setw(14) << "Success Rate" << std::setw(15)
     << "Arriving Time" << std::setw(11) << "Ego Score" << std::setw(14)
     << "Social Score" << '\n';
  for (const auto& r : reports) {
    os << std::left << std::setw(18) << r.policy << std::setw(16) << r.scenario
       << std::right;
    {
      std::ostringstream f;
      f << std::fixed << std::setprecision(0) << r.report.success_rate << " %";
      os << std::setw(14) << f.str();
    }
    {
      std::ostringstream f;
      if (std::isnan(r.report.arriving_time))
        f << "-";
      else
        f << std::fixed << std::setprecision(1) << r.report.arriving_time << " s";
      os << std::setw(15) << f.str();
    }
    {
      std::ostringstream f;
      f << std::fixed << std::setprecision(0) << r.report.ego_score;
      os << std::setw(11) << f.str();
    }
    {
      std::ostringstream f;
      f << std::fixed << std::setprecision(0) << r.report.social_score;
      os << std::setw(14) << f.str();
    }
    os << '\n';
  }
  return os.str();
}

void dump_trace_csv(const EpisodeTrace& trace, double dt, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("trace csv: cannot open " + path);
  os << "tick,time,x,y,theta,v,w,d,d_ped,reward,outcome\n";
  for (size_t i = 0; i < trace.ticks.size(); ++i) {
    const auto& t = trace.ticks[i];
    os << i << ',' << std::setprecision(12) << (static_cast<double>(i) + 1.0) * dt
       << ',' << t.pose.x << ',' << t.pose.y << ',' << t.pose.theta << ','
       << t.action.v << ',' << t.action.w << ',' << t.d << ',' << t.d_ped << ','
       << t.reward << ',';
    if (i + 1 == trace.ticks.size()) {
      switch (trace.outcome) {
        case OutcomeKind::arrived: os << "arrived"; break;
        case OutcomeKind::collided: os << "collided"; break;
        case OutcomeKind::timed_out: os << "timed_out"; break;
        default: os << "running"; break;
      }
    } else {
      os << "running";
    }
    os << '\n';
  }
}

PolicyFn go_straight_policy(double gain) {
  return [gain](const Observation& obs, Rng&) {
    return Action(1.0, gain * obs.goal_bearing);
  };
}

PolicyFn uniform_random_policy() {
  return [](const Observation&, Rng& rng) {
    return Action(rng.uniform(kVMin, kVMax), rng.uniform(kWMin, kWMax));
  };
}

}  // namespace socnav
