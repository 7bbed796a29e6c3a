#include "seqchicken/game.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace seqchicken {

std::string_view to_string(Action a) {
  return a == Action::kSlow ? "SLOW" : "FAST";
}

Action parse_action(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  if (upper == "SLOW") return Action::kSlow;
  if (upper == "FAST") return Action::kFast;
  throw ValidationError("unknown action '" + std::string(text) +
                        "' (expected SLOW or FAST)");
}

std::string to_string(const GameState& s) {
  std::ostringstream os;
  os << "(" << s.y << ", " << s.x << ")";
  return os.str();
}

void GameParams::validate() const {
  if (!(crash_cost > 0.0) || !std::isfinite(crash_cost)) {
    throw ValidationError("crash_cost must be positive and finite");
  }
  if (!(turn_cost > 0.0) || !std::isfinite(turn_cost)) {
    throw ValidationError("turn_cost must be positive and finite");
  }
  if (max_y < 2 || max_x < 2) {
    throw ValidationError("board bounds must be at least 2");
  }
}

namespace {

std::string describe_indifference(bool vehicle, bool pedestrian,
                                  const std::optional<GameState>& state) {
  std::string who;
  if (vehicle && pedestrian) {
    who = "vehicle and pedestrian";
  } else if (vehicle) {
    who = "vehicle";
  } else {
    who = "pedestrian";
  }
  std::string msg = "degenerate stage game: " + who +
                    " payoff independent of own action";
  if (state) msg += " at state " + to_string(*state);
  return msg;
}

enum class Stance { kSlowDominant, kFastDominant, kIndifferent, kReversing };

// Own SLOW payoff minus own FAST payoff, against each opponent action.
struct Incentive {
  double vs_slow = 0.0;
  double vs_fast = 0.0;
  Stance stance = Stance::kReversing;
};

Incentive classify(double vs_slow, double vs_fast, double tol) {
  Incentive inc{vs_slow, vs_fast, Stance::kReversing};
  const bool zero_s = std::abs(vs_slow) <= tol;
  const bool zero_f = std::abs(vs_fast) <= tol;
  if (zero_s && zero_f) {
    inc.stance = Stance::kIndifferent;
  } else if (vs_slow >= -tol && vs_fast >= -tol) {
    inc.stance = Stance::kSlowDominant;
  } else if (vs_slow <= tol && vs_fast <= tol) {
    inc.stance = Stance::kFastDominant;
  }
  return inc;
}

// P(own SLOW) best-responding to an opponent that plays SLOW with prob r.
double best_response(const Incentive& inc, double r, double tol) {
  const double gain = r * inc.vs_slow + (1.0 - r) * inc.vs_fast;
  if (gain > tol) return 1.0;
  if (gain < -tol) return 0.0;
  return 0.5;
}

// Opponent P(SLOW) that leaves this player indifferent.
double indifference_point(const Incentive& inc) {
  return inc.vs_fast / (inc.vs_fast - inc.vs_slow);
}

}  // namespace

DegenerateGameError::DegenerateGameError(bool vehicle_indifferent,
                                         bool pedestrian_indifferent,
                                         std::optional<GameState> state)
    : Error(describe_indifference(vehicle_indifferent, pedestrian_indifferent,
                                  state)),
      vehicle_indifferent_(vehicle_indifferent),
      pedestrian_indifferent_(pedestrian_indifferent),
      state_(state) {}

UtilityPair expected_payoff(const PayoffMatrix& m, double p_vehicle_slow,
                            double p_pedestrian_slow) {
  const std::array<double, 2> pv = {p_vehicle_slow, 1.0 - p_vehicle_slow};
  const std::array<double, 2> pp = {p_pedestrian_slow,
                                    1.0 - p_pedestrian_slow};
  UtilityPair out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double w = pv[i] * pp[j];
      if (w == 0.0) continue;
      out.vehicle += w * m.entries[i][j].vehicle;
      out.pedestrian += w * m.entries[i][j].pedestrian;
    }
  }
  return out;
}

Equilibrium solve_stage_game(const PayoffMatrix& m,
                             IndifferencePolicy policy) {
  double scale = 1.0;
  for (const auto& row : m.entries) {
    for (const auto& u : row) {
      if (!std::isfinite(u.vehicle) || !std::isfinite(u.pedestrian)) {
        throw ValidationError("payoff matrix has a non-finite entry");
      }
      scale = std::max({scale, std::abs(u.vehicle), std::abs(u.pedestrian)});
    }
  }
  const double tol = 1e-12 * scale;

  const auto S = Action::kSlow;
  const auto F = Action::kFast;
  const Incentive veh = classify(m.at(S, S).vehicle - m.at(F, S).vehicle,
                                 m.at(S, F).vehicle - m.at(F, F).vehicle, tol);
  const Incentive ped =
      classify(m.at(S, S).pedestrian - m.at(S, F).pedestrian,
               m.at(F, S).pedestrian - m.at(F, F).pedestrian, tol);

  const bool veh_indiff = veh.stance == Stance::kIndifferent;
  const bool ped_indiff = ped.stance == Stance::kIndifferent;
  if ((veh_indiff || ped_indiff) && policy == IndifferencePolicy::kReject) {
    throw DegenerateGameError(veh_indiff, ped_indiff);
  }

  auto fixed_choice = [](const Incentive& inc) -> std::optional<double> {
    switch (inc.stance) {
      case Stance::kSlowDominant: return 1.0;
      case Stance::kFastDominant: return 0.0;
      case Stance::kIndifferent: return 0.5;
      case Stance::kReversing: return std::nullopt;
    }
    return std::nullopt;
  };

  std::optional<double> p = fixed_choice(veh);
  std::optional<double> q = fixed_choice(ped);
  if (!p && !q) {
    p = indifference_point(ped);
    q = indifference_point(veh);
  } else if (!p) {
    p = best_response(veh, *q, tol);
  } else if (!q) {
    q = best_response(ped, *p, tol);
  }

  Equilibrium eq;
  eq.p_vehicle_slow = *p;
  eq.p_pedestrian_slow = *q;
  eq.value = expected_payoff(m, *p, *q);
  const auto is_pure = [](double v) { return v == 0.0 || v == 1.0; };
  eq.kind = is_pure(*p) && is_pure(*q) ? EquilibriumKind::kPure
                                       : EquilibriumKind::kMixed;
  return eq;
}

Game::Game(GameParams params) : params_(params) {
  params_.validate();
  const auto rows = static_cast<std::size_t>(params_.max_y - kMinPosition + 1);
  const auto cols = static_cast<std::size_t>(params_.max_x - kMinPosition + 1);
  memo_.resize(rows * cols);
}

void Game::check_bounds(GameState s) const {
  if (s.y < kMinPosition || s.x < kMinPosition || s.y > params_.max_y ||
      s.x > params_.max_x) {
    throw OutOfRangeError("state " + to_string(s) + " outside board bounds [" +
                          std::to_string(kMinPosition) + ", " +
                          std::to_string(params_.max_y) + "] x [" +
                          std::to_string(kMinPosition) + ", " +
                          std::to_string(params_.max_x) + "]");
  }
}

std::size_t Game::index(GameState s) const {
  const auto cols = static_cast<std::size_t>(params_.max_x - kMinPosition + 1);
  return static_cast<std::size_t>(s.y - kMinPosition) * cols +
         static_cast<std::size_t>(s.x - kMinPosition);
}

std::optional<UtilityPair> Game::terminal_value(GameState s) const {
  check_bounds(s);
  const double c = params_.crash_cost;
  const double t = params_.turn_cost;
  // Turns a lone agent needs at FAST to get from `pos` to <= -1.
  auto remaining = [t](int pos) { return -t * ((pos + 2) / 2); };
  if (in_crash_region(s)) return UtilityPair{-c, -c};
  const bool y_done = has_passed(s.y);
  const bool x_done = has_passed(s.x);
  if (y_done && x_done) return UtilityPair{0.0, 0.0};
  if (y_done) return UtilityPair{0.0, remaining(s.x)};
  if (x_done) return UtilityPair{remaining(s.y), 0.0};
  return std::nullopt;
}

PayoffMatrix Game::stage_matrix_locked(GameState s) const {
  if (is_terminal(s)) {
    throw ValidationError("state " + to_string(s) +
                          " is terminal and has no stage game");
  }
  PayoffMatrix m;
  for (Action av : kActions) {
    for (Action ap : kActions) {
      const GameState next{s.y - displacement(av), s.x - displacement(ap)};
      const UtilityPair cont = value_locked(next);
      // Both agents are still on the board here, so both pay for the turn.
      m.at(av, ap) = {cont.vehicle - params_.turn_cost,
                      cont.pedestrian - params_.turn_cost};
    }
  }
  return m;
}

const Equilibrium& Game::solve_locked(GameState s) const {
  auto& slot = memo_[index(s)];
  if (slot) return *slot;
  const PayoffMatrix m = stage_matrix_locked(s);
  try {
    slot = solve_stage_game(m, params_.indifference);
  } catch (const DegenerateGameError& e) {
    throw DegenerateGameError(e.vehicle_indifferent(),
                              e.pedestrian_indifferent(), s);
  }
  return *slot;
}

UtilityPair Game::value_locked(GameState s) const {
  if (auto tv = terminal_value(s)) return *tv;
  return solve_locked(s).value;
}

PayoffMatrix Game::stage_matrix(GameState s) const {
  std::lock_guard lock(mu_);
  return stage_matrix_locked(s);
}

UtilityPair Game::value(GameState s) const {
  std::lock_guard lock(mu_);
  return value_locked(s);
}

Equilibrium Game::policy(GameState s) const {
  std::lock_guard lock(mu_);
  if (auto tv = terminal_value(s)) {
    return Equilibrium{0.0, 0.0, *tv, EquilibriumKind::kPure};
  }
  return solve_locked(s);
}

PayoffMatrix build_stage_matrix(GameState s, const GameParams& p) {
  return Game(p).stage_matrix(s);
}

UtilityPair game_value(GameState s, const GameParams& p) {
  return Game(p).value(s);
}

Equilibrium policy(GameState s, const GameParams& p) {
  return Game(p).policy(s);
}

std::vector<YieldPoint> yield_curve_model(const Game& game, int k_max) {
  if (k_max < 2) throw ValidationError("k_max must be at least 2");
  std::vector<YieldPoint> curve;
  curve.reserve(static_cast<std::size_t>(k_max - 1));
  for (int k = 2; k <= k_max; ++k) {
    curve.push_back({k, game.policy({k, k}).p_pedestrian_slow});
  }
  return curve;
}

std::vector<YieldPoint> yield_curve_model(const GameParams& p, int k_max) {
  return yield_curve_model(Game(p), k_max);
}

std::vector<SurvivalPoint> cumulative_no_yield(
    const std::vector<YieldPoint>& curve_descending) {
  for (std::size_t i = 0; i < curve_descending.size(); ++i) {
    const auto& pt = curve_descending[i];
    if (!(pt.p_yield >= 0.0 && pt.p_yield <= 1.0)) {
      throw ValidationError("yield probability out of [0, 1] at k=" +
                            std::to_string(pt.k));
    }
    if (i > 0 && !(pt.k < curve_descending[i - 1].k)) {
      throw ValidationError("curve must be strictly descending in k");
    }
  }
  std::vector<SurvivalPoint> out;
  out.reserve(curve_descending.size());
  double survival = 1.0;
  for (std::size_t i = 0; i < curve_descending.size(); ++i) {
    if (i > 0) survival *= 1.0 - curve_descending[i - 1].p_yield;
    out.push_back({curve_descending[i].k, survival});
  }
  return out;
}

}  // namespace seqchicken
