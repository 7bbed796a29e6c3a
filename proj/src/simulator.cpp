#include "seqchicken/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "seqchicken/error.hpp"

namespace seqchicken {

namespace {

double checked_probability(double p, const char* who, GameState s) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(std::string(who) + " policy returned P(SLOW) = " +
                          std::to_string(p) + " at " + to_string(s));
  }
  return p;
}

Action draw(Rng& rng, double p_slow) {
  return rng.bernoulli(p_slow) ? Action::kSlow : Action::kFast;
}

int advance_position(int pos, Action a) {
  return std::max(kMinPosition, pos - displacement(a));
}

// Running mean and variance.
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double se() const {
    if (n < 2) return 0.0;
    return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  }
};

double proportion_se(double p, std::size_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

StagePolicy optimal_vehicle_policy(const Game& game) {
  return [&game](GameState s) { return game.policy(s).p_vehicle_slow; };
}

StagePolicy optimal_pedestrian_policy(const Game& game) {
  return [&game](GameState s) { return game.policy(s).p_pedestrian_slow; };
}

StagePolicy constant_policy(double p_slow) {
  return [p_slow](GameState) { return p_slow; };
}

Episode play_discrete_episode(const Game& game, GameState start,
                              const StagePolicy& vehicle_policy,
                              const StagePolicy& pedestrian_policy, Rng& rng) {
  const GameParams& params = game.params();
  game.terminal_value(start);  // bounds check

  Episode ep;
  GameState s = start;
  // Turn at which each agent passed; -1 if it started passed.
  std::optional<int> vehicle_passed = has_passed(s.y) ? std::optional<int>(-1) : std::nullopt;
  std::optional<int> ped_passed = has_passed(s.x) ? std::optional<int>(-1) : std::nullopt;

  for (int t = 0;; ++t) {
    if (in_crash_region(s)) {
      ep.realized.vehicle -= params.crash_cost;
      ep.realized.pedestrian -= params.crash_cost;
      ep.outcome = Outcome::kCrash;
      break;
    }
    if (vehicle_passed && ped_passed) {
      if (*vehicle_passed != *ped_passed) {
        ep.outcome = *vehicle_passed < *ped_passed ? Outcome::kVehicleFirst
                                                   : Outcome::kPedestrianFirst;
      } else {
        // Only reachable from a start where both have passed.
        ep.outcome = s.x < s.y ? Outcome::kPedestrianFirst : Outcome::kVehicleFirst;
      }
      break;
    }
    const double pv = checked_probability(vehicle_policy(s), "vehicle", s);
    const double pp = checked_probability(pedestrian_policy(s), "pedestrian", s);
    const Action av = draw(rng, pv);
    const Action ap = draw(rng, pp);
    ep.turns.push_back({t, s, av, ap});
    if (!vehicle_passed) ep.realized.vehicle -= params.turn_cost;
    if (!ped_passed) ep.realized.pedestrian -= params.turn_cost;
    s = {advance_position(s.y, av), advance_position(s.x, ap)};
    if (!vehicle_passed && has_passed(s.y)) vehicle_passed = t;
    if (!ped_passed && has_passed(s.x)) ped_passed = t;
  }
  ep.final_state = s;
  return ep;
}

OutcomeStats monte_carlo_stats(const Game& game, GameState start, std::size_t n, Rng& rng) {
  if (n < 1) throw ValidationError("monte_carlo_stats needs n >= 1");
  const StagePolicy vp = optimal_vehicle_policy(game);
  const StagePolicy pp = optimal_pedestrian_policy(game);

  OutcomeStats st;
  st.n = n;
  Moments uv, up;
  std::size_t crashes = 0, vehicle_wins = 0, ped_wins = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Episode ep = play_discrete_episode(game, start, vp, pp, rng);
    uv.add(ep.realized.vehicle);
    up.add(ep.realized.pedestrian);
    switch (ep.outcome) {
      case Outcome::kCrash: ++crashes; break;
      case Outcome::kVehicleFirst: ++vehicle_wins; break;
      case Outcome::kPedestrianFirst: ++ped_wins; break;
      case Outcome::kPending: break;
    }
    for (const auto& turn : ep.turns) {
      if (turn.state.y != turn.state.x) continue;
      auto& c = st.symmetric[turn.state.y];
      ++c.visits;
      c.vehicle_slow += turn.vehicle == Action::kSlow;
      c.pedestrian_slow += turn.pedestrian == Action::kSlow;
    }
  }
  const double dn = static_cast<double>(n);
  st.crash_rate = static_cast<double>(crashes) / dn;
  st.vehicle_win_rate = static_cast<double>(vehicle_wins) / dn;
  st.pedestrian_win_rate = static_cast<double>(ped_wins) / dn;
  st.crash_rate_se = proportion_se(st.crash_rate, n);
  st.pedestrian_win_rate_se = proportion_se(st.pedestrian_win_rate, n);
  st.mean_utilities = {uv.mean, up.mean};
  st.se_utilities = {uv.se(), up.se()};
  return st;
}

SymmetryBreakingStats symmetry_breaking_check(const Game& game,
                                              std::span<const Episode> episodes) {
  SymmetryBreakingStats out;
  for (const auto& ep : episodes) {
    const auto it = std::find_if(ep.turns.begin(), ep.turns.end(), [](const EpisodeTurn& t) {
      return t.state.y == t.state.x && t.vehicle != t.pedestrian;
    });
    if (it == ep.turns.end()) continue;
    ++out.applicable;
    bool all_fast = true;
    bool all_pure = true;
    for (auto t = std::next(it); t != ep.turns.end(); ++t) {
      const Equilibrium eq = game.policy(t->state);
      all_fast = all_fast && eq.p_vehicle_slow == 0.0 && eq.p_pedestrian_slow == 0.0;
      all_pure = all_pure && (eq.p_vehicle_slow == 0.0 || eq.p_vehicle_slow == 1.0) &&
                 (eq.p_pedestrian_slow == 0.0 || eq.p_pedestrian_slow == 1.0);
    }
    out.passed += all_fast;
    out.pure += all_pure;
  }
  return out;
}

// ---- continuous crossings ----------------------------------------------

PedestrianPolicy scripted_pedestrian(ScriptedPedestrian kind, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ValidationError("noise epsilon must be in [0, 1]");
  }
  auto optimal = [](const PedestrianView& v, Rng& rng) {
    if (v.info && v.info->interesting && v.info->equilibrium) {
      return draw(rng, v.info->equilibrium->p_pedestrian_slow);
    }
    return Action::kFast;
  };
  switch (kind) {
    case ScriptedPedestrian::kAlwaysFast:
      return [](const PedestrianView&, Rng&) { return Action::kFast; };
    case ScriptedPedestrian::kSlowWhenInteresting:
      return [](const PedestrianView& v, Rng&) {
        return v.info && v.info->interesting ? Action::kSlow : Action::kFast;
      };
    case ScriptedPedestrian::kOptimal:
      return optimal;
    case ScriptedPedestrian::kNoisyOptimal:
      return [optimal, epsilon](const PedestrianView& v, Rng& rng) {
        if (rng.bernoulli(epsilon)) return draw(rng, 0.5);
        return optimal(v, rng);
      };
  }
  throw ValidationError("unknown scripted pedestrian");
}

ScriptedPedestrian parse_scripted_pedestrian(std::string_view name) {
  if (name == "always-fast") return ScriptedPedestrian::kAlwaysFast;
  if (name == "slow-when-interesting") return ScriptedPedestrian::kSlowWhenInteresting;
  if (name == "optimal") return ScriptedPedestrian::kOptimal;
  if (name == "noisy-optimal") return ScriptedPedestrian::kNoisyOptimal;
  throw ValidationError("unknown pedestrian policy '" + std::string(name) +
                        "' (expected always-fast, slow-when-interesting, optimal, noisy-optimal)");
}

Crossing::Crossing(const ScenarioConfig& config, const Game& game, CrossingStarts starts,
                   std::string session_id, int crossing_id)
    : config_(config),
      layout_(config.geometry),
      game_(game),
      session_id_(std::move(session_id)),
      crossing_id_(crossing_id),
      ped_d_(starts.ped_m),
      car_d_(starts.car_m) {
  config_.geometry.validate();
  config_.crossing.validate();
  if (!(starts.ped_m > 0.0)) throw ValidationError("pedestrian start must be positive");
  if (car_d_ && !(*car_d_ > 0.0)) throw ValidationError("vehicle start must be positive");

  const double extent = std::max(ped_d_, car_d_.value_or(0.0)) + 100.0;
  layout_.vehicle_path = {{-extent, 0.0}, {extent, 0.0}};
  // A sample one step in the past lets the velocity fit run from the start.
  const double dt = config_.crossing.step_period;
  ped_track_.push_back({-dt, {0.0, -(ped_d_ + layout_.pedestrian_fast_speed * dt)}});
  ped_track_.push_back({0.0, {0.0, -ped_d_}});
}

int Crossing::ped_box() const { return quantize_distance(ped_d_, layout_.ped_box); }

std::optional<int> Crossing::car_box() const {
  if (!car_d_) return std::nullopt;
  return quantize_distance(*car_d_, layout_.car_box);
}

ControllerSnapshot Crossing::snapshot() const {
  ControllerSnapshot s;
  s.t = t_;
  s.pedestrians = {ped_track_};
  s.vehicle_position = {-*car_d_, 0.0};
  s.commanded_speed = layout_.vehicle_fast_speed;
  return s;
}

const GameInfo& Crossing::decide(Rng& rng) {
  if (finished()) throw Error("crossing already finished");
  if (!decision_) {
    if (car_d_) {
      decision_ = controller_step(snapshot(), layout_, game_, rng,
                                  config_.crossing.fit_window).info;
    } else {
      GameInfo none;
      none.t = t_;
      decision_ = none;
    }
  }
  return *decision_;
}

CrossingRecord Crossing::advance(Action ped_action, bool auto_played) {
  if (finished()) throw Error("crossing already finished");
  if (!decision_) throw Error("no committed vehicle decision for this step");
  const GameInfo& info = *decision_;

  CrossingRecord r;
  r.session_id = session_id_;
  r.crossing_id = crossing_id_;
  r.t = t_;
  r.ped_pos_m = ped_d_;
  r.car_pos_m = car_d_;
  r.ped_box = ped_box();
  r.car_box = car_box();
  r.interesting = info.interesting;
  r.ped_action = ped_action;
  r.car_action = info.vehicle_action;
  r.speed_multiplier = car_d_ ? info.speed_multiplier : 1.0;
  r.auto_played = auto_played;

  const double dt = config_.crossing.step_period;
  const double ped_mult = ped_action == Action::kSlow ? kSlowMultiplier : 1.0;
  ped_d_ -= layout_.pedestrian_fast_speed * ped_mult * dt;
  if (car_d_) *car_d_ -= layout_.vehicle_fast_speed * r.speed_multiplier * dt;
  t_ += dt;
  ped_track_.push_back({t_, {0.0, -ped_d_}});
  decision_.reset();

  auto in_window = [](double d, double box) { return d >= -box && d < 2.0 * box; };
  if (car_d_ && in_window(ped_d_, layout_.ped_box) && in_window(*car_d_, layout_.car_box)) {
    outcome_ = Outcome::kCrash;
  } else {
    if (!ped_cleared_at_ && ped_d_ < -layout_.ped_box) ped_cleared_at_ = t_;
    if (car_d_ && !car_cleared_at_ && *car_d_ < -layout_.car_box) car_cleared_at_ = t_;
    if (ped_cleared_at_ && (!car_d_ || car_cleared_at_)) {
      if (!car_d_ || *ped_cleared_at_ < *car_cleared_at_) {
        outcome_ = Outcome::kPedestrianFirst;
      } else if (*car_cleared_at_ < *ped_cleared_at_) {
        outcome_ = Outcome::kVehicleFirst;
      } else {
        // Cleared on the same step: whoever is further past, in boxes.
        outcome_ = ped_d_ / layout_.ped_box < *car_d_ / layout_.car_box
                       ? Outcome::kPedestrianFirst
                       : Outcome::kVehicleFirst;
      }
    }
  }
  r.winner = outcome_;
  return r;
}

std::vector<CrossingRecord> run_crossing(const ScenarioConfig& config, const Game& game,
                                         const PedestrianPolicy& policy,
                                         CrossingStarts starts, Rng& rng,
                                         const std::string& session_id, int crossing_id) {
  Crossing c(config, game, starts, session_id, crossing_id);
  std::vector<CrossingRecord> records;
  while (!c.finished()) {
    if (c.t() > config.crossing.max_crossing_time) {
      throw Error("crossing exceeded the maximum crossing time");
    }
    const GameInfo& info = c.decide(rng);
    const PedestrianView view{c.t(), c.ped_pos(), c.car_pos(), &info};
    records.push_back(c.advance(policy(view, rng)));
  }
  return records;
}

double experimenter_feedback_update(double current_start, Outcome outcome, double delta,
                                    double lo, double hi) {
  if (!(delta > 0.0)) throw ValidationError("feedback delta must be positive");
  if (!(lo <= hi)) throw ValidationError("feedback bounds must satisfy lo <= hi");
  double next = current_start;
  if (outcome == Outcome::kPedestrianFirst) next -= delta;
  if (outcome == Outcome::kVehicleFirst) next += delta;
  return std::clamp(next, lo, hi);
}

SessionRun run_self_play_session(const ScenarioConfig& config, const Game& game,
                                 const PedestrianPolicy& policy, std::uint64_t seed,
                                 const std::string& session_id) {
  const CrossingSettings& cs = config.crossing;
  cs.validate();
  SessionRun run;
  double car_start = cs.car_start;
  for (int i = 0; i < cs.crossings_total; ++i) {
    const auto id = static_cast<std::uint64_t>(i);
    Rng start_rng = Rng::derive(seed, {id, 0});
    const double ped = cs.ped_start_min + (cs.ped_start_max - cs.ped_start_min) * start_rng.uniform();
    Rng rng = Rng::derive(seed, {id, 1});
    auto recs = run_crossing(config, game, policy, {ped, car_start}, rng, session_id, i + 1);

    const auto interesting = std::count_if(recs.begin(), recs.end(),
                                           [](const CrossingRecord& r) { return r.interesting; });
    run.interesting_fraction.push_back(static_cast<double>(interesting) /
                                       static_cast<double>(recs.size()));
    run.car_starts.push_back(car_start);
    const Outcome outcome = recs.back().winner;
    run.outcomes.push_back(outcome);
    car_start = experimenter_feedback_update(car_start, outcome, cs.feedback_delta,
                                             cs.feedback_min, cs.feedback_max);
    run.records.insert(run.records.end(), recs.begin(), recs.end());
  }
  return run;
}

double index_slope(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const double x_mean = static_cast<double>(n - 1) / 2.0;
  double y_mean = 0.0;
  for (double v : y) y_mean += v;
  y_mean /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - x_mean;
    sxy += dx * (y[i] - y_mean);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace seqchicken
