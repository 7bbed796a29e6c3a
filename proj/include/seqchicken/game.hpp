#pragma once

// Sequential Chicken: two agents approach a shared collision point on
// separate paths, choosing SLOW (1 box) or FAST (2 boxes) each turn. The
// value of a state is the Nash value of the 2x2 game over successor values.
//
// Conventions used throughout:
//   * positions count down to the collision point; box 0 is the collision box
//   * crash region: both agents in boxes {0, 1}
//   * an agent at position <= -1 has passed and accrues nothing further
//   * each turn charges -turn_cost to every agent that has not passed
//   * a crash is terminal and worth -crash_cost to both

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seqchicken/error.hpp"

namespace seqchicken {

enum class Action : std::uint8_t { kSlow = 0, kFast = 1 };

inline constexpr std::array<Action, 2> kActions = {Action::kSlow,
                                                   Action::kFast};

/// Boxes covered in one turn.
constexpr int displacement(Action a) { return a == Action::kSlow ? 1 : 2; }

std::string_view to_string(Action a);
/// Accepts "SLOW" / "FAST" (case-insensitive).
Action parse_action(std::string_view text);

struct GameState {
  int y = 0;  // vehicle boxes to collision
  int x = 0;  // pedestrian boxes to collision

  friend bool operator==(const GameState&, const GameState&) = default;
};

std::string to_string(const GameState& s);

constexpr bool in_crash_region(GameState s) {
  return (s.y == 0 || s.y == 1) && (s.x == 0 || s.x == 1);
}
constexpr bool has_passed(int position) { return position <= -1; }

/// Lowest representable position (a FAST move from 0).
inline constexpr int kMinPosition = -2;

/// How the 2x2 solver treats a player whose own payoff does not depend on
/// its own action.
enum class IndifferencePolicy : std::uint8_t {
  kReject,   // raise DegenerateGameError
  kUniform,  // the indifferent player mixes 1/2 : 1/2
};

struct GameParams {
  double crash_cost = 3.0;  // magnitude C; the applied utility is -C
  double turn_cost = 1.0;   // seconds charged per turn
  int max_y = 64;
  int max_x = 64;
  IndifferencePolicy indifference = IndifferencePolicy::kUniform;

  void validate() const;
};

struct UtilityPair {
  double vehicle = 0.0;
  double pedestrian = 0.0;

  friend bool operator==(const UtilityPair&, const UtilityPair&) = default;
};

inline UtilityPair swapped(const UtilityPair& u) {
  return {u.pedestrian, u.vehicle};
}

/// entries[vehicle action][pedestrian action].
struct PayoffMatrix {
  std::array<std::array<UtilityPair, 2>, 2> entries{};

  UtilityPair& at(Action vehicle, Action pedestrian) {
    return entries[static_cast<int>(vehicle)][static_cast<int>(pedestrian)];
  }
  const UtilityPair& at(Action vehicle, Action pedestrian) const {
    return entries[static_cast<int>(vehicle)][static_cast<int>(pedestrian)];
  }
};

enum class EquilibriumKind : std::uint8_t { kMixed, kPure };

struct Equilibrium {
  double p_vehicle_slow = 0.0;
  double p_pedestrian_slow = 0.0;
  UtilityPair value;
  EquilibriumKind kind = EquilibriumKind::kPure;
};

/// Raised when a stage game has a continuum of equilibria that the active
/// IndifferencePolicy does not resolve.
class DegenerateGameError : public Error {
 public:
  DegenerateGameError(bool vehicle_indifferent, bool pedestrian_indifferent,
                      std::optional<GameState> state = std::nullopt);

  bool vehicle_indifferent() const { return vehicle_indifferent_; }
  bool pedestrian_indifferent() const { return pedestrian_indifferent_; }
  const std::optional<GameState>& state() const { return state_; }

 private:
  bool vehicle_indifferent_;
  bool pedestrian_indifferent_;
  std::optional<GameState> state_;
};

/// Expected payoffs of the strategy pair (each given as P(SLOW)).
UtilityPair expected_payoff(const PayoffMatrix& m, double p_vehicle_slow,
                            double p_pedestrian_slow);

/// Selects one equilibrium of a 2x2 bimatrix game.
///
/// Selection: a weakly dominant action is played; when both players' best
/// responses reverse across the opponent's actions the interior mixed
/// equilibrium is returned (this is the chicken case with two pure and one
/// mixed equilibrium); a player whose payoff ignores its own action is
/// handled per `policy`.
Equilibrium solve_stage_game(
    const PayoffMatrix& m,
    IndifferencePolicy policy = IndifferencePolicy::kReject);

/// Memoized evaluator for one parameter set. Thread-safe.
class Game {
 public:
  explicit Game(GameParams params);

  const GameParams& params() const { return params_; }

  /// Value of a terminal state, or nullopt when a stage game is played.
  std::optional<UtilityPair> terminal_value(GameState s) const;
  bool is_terminal(GameState s) const { return terminal_value(s).has_value(); }

  PayoffMatrix stage_matrix(GameState s) const;
  UtilityPair value(GameState s) const;
  /// Stage equilibrium at s; PURE with both P(SLOW) = 0 for terminal states.
  Equilibrium policy(GameState s) const;

 private:
  void check_bounds(GameState s) const;
  std::size_t index(GameState s) const;
  // Callers hold mu_.
  const Equilibrium& solve_locked(GameState s) const;
  UtilityPair value_locked(GameState s) const;
  PayoffMatrix stage_matrix_locked(GameState s) const;

  GameParams params_;
  mutable std::mutex mu_;
  mutable std::vector<std::optional<Equilibrium>> memo_;
};

PayoffMatrix build_stage_matrix(GameState s, const GameParams& p);
UtilityPair game_value(GameState s, const GameParams& p);
Equilibrium policy(GameState s, const GameParams& p);

struct YieldPoint {
  int k = 0;
  double p_yield = 0.0;
};

struct SurvivalPoint {
  int k = 0;
  double survival = 0.0;
};

/// Pedestrian P(SLOW) at the symmetric state (k, k) for k = 2..k_max,
/// ascending in k.
std::vector<YieldPoint> yield_curve_model(const GameParams& p, int k_max);
std::vector<YieldPoint> yield_curve_model(const Game& game, int k_max);

/// Probability of reaching each bin without having yielded. Input must be
/// strictly descending in k; S at the first (largest) bin is 1.
std::vector<SurvivalPoint> cumulative_no_yield(
    const std::vector<YieldPoint>& curve_descending);

}  // namespace seqchicken
