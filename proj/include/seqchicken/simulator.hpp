#pragma once

// Discrete-turn episodes, Monte Carlo statistics, continuous crossings under
// the controller, and the experimenter start-point feedback protocol.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqchicken/controller.hpp"
#include "seqchicken/crossing_log.hpp"
#include "seqchicken/game.hpp"
#include "seqchicken/rng.hpp"
#include "seqchicken/scenario.hpp"

namespace seqchicken {

// ---- discrete episodes -------------------------------------------------

/// Probability of SLOW at a state. Values outside [0,1] are rejected.
using StagePolicy = std::function<double(GameState)>;

StagePolicy optimal_vehicle_policy(const Game& game);
StagePolicy optimal_pedestrian_policy(const Game& game);
StagePolicy constant_policy(double p_slow);

struct EpisodeTurn {
  int t = 0;
  GameState state;
  Action vehicle = Action::kFast;
  Action pedestrian = Action::kFast;
};

struct Episode {
  std::vector<EpisodeTurn> turns;
  GameState final_state;
  Outcome outcome = Outcome::kCrash;
  UtilityPair realized;
};

/// Plays until a crash or until both agents have passed. An agent that has
/// already passed keeps being charged nothing; positions below -2 are held
/// at -2.
Episode play_discrete_episode(const Game& game, GameState start,
                              const StagePolicy& vehicle_policy,
                              const StagePolicy& pedestrian_policy, Rng& rng);

struct SlowCounts {
  std::size_t visits = 0;
  std::size_t vehicle_slow = 0;
  std::size_t pedestrian_slow = 0;
};

struct OutcomeStats {
  std::size_t n = 0;
  double crash_rate = 0.0;
  double vehicle_win_rate = 0.0;
  double pedestrian_win_rate = 0.0;
  double crash_rate_se = 0.0;
  double pedestrian_win_rate_se = 0.0;
  UtilityPair mean_utilities;
  UtilityPair se_utilities;
  /// Per symmetric state (k,k) visited: how often each agent chose SLOW.
  std::map<int, SlowCounts> symmetric;
};

/// n optimal-policy episodes from `start`.
OutcomeStats monte_carlo_stats(const Game& game, GameState start, std::size_t n, Rng& rng);

struct SymmetryBreakingStats {
  std::size_t applicable = 0;  // episodes with a one-sided SLOW at (k,k)
  std::size_t passed = 0;      // ... followed only by FAST/FAST equilibria
  std::size_t pure = 0;        // ... followed only by pure equilibria of any kind
  double rate() const { return ratio(passed); }
  double pure_rate() const { return ratio(pure); }

 private:
  double ratio(std::size_t k) const {
    return applicable == 0 ? 1.0 : static_cast<double>(k) / static_cast<double>(applicable);
  }
};

SymmetryBreakingStats symmetry_breaking_check(const Game& game,
                                              std::span<const Episode> episodes);

// ---- continuous crossings ----------------------------------------------

struct CrossingStarts {
  double ped_m = 6.0;
  std::optional<double> car_m;  // nullopt: no vehicle takes part
};

/// What a pedestrian policy sees before choosing its action for a step.
struct PedestrianView {
  double t = 0.0;
  double ped_pos_m = 0.0;
  std::optional<double> car_pos_m;
  const GameInfo* info = nullptr;  // the controller's view of this step
};

using PedestrianPolicy = std::function<Action(const PedestrianView&, Rng&)>;

enum class ScriptedPedestrian : std::uint8_t {
  kAlwaysFast,
  kSlowWhenInteresting,
  kOptimal,
  kNoisyOptimal,  // uniform random action with probability epsilon
};

PedestrianPolicy scripted_pedestrian(ScriptedPedestrian kind, double epsilon = 0.1);
ScriptedPedestrian parse_scripted_pedestrian(std::string_view name);

/// One crossing on a straight orthogonal layout: the vehicle drives along +x
/// through the origin and the pedestrian walks along +y towards it. The
/// geometry's own vehicle_path is not used here; speeds, boxes and footprints
/// are. Each step is split into decide() (controller commits the vehicle
/// action) and advance() (both actions applied, record produced).
class Crossing {
 public:
  Crossing(const ScenarioConfig& config, const Game& game, CrossingStarts starts,
           std::string session_id, int crossing_id);

  /// Controller decision for the current step. Idempotent until advance().
  const GameInfo& decide(Rng& rng);
  bool has_decision() const { return decision_.has_value(); }
  const std::optional<GameInfo>& decision() const { return decision_; }

  /// Applies the committed decision and the pedestrian action.
  CrossingRecord advance(Action ped_action, bool auto_played = false);

  bool finished() const { return outcome_ != Outcome::kPending; }
  Outcome outcome() const { return outcome_; }
  double t() const { return t_; }
  double ped_pos() const { return ped_d_; }
  std::optional<double> car_pos() const { return car_d_; }
  int ped_box() const;
  std::optional<int> car_box() const;
  int crossing_id() const { return crossing_id_; }

 private:
  ControllerSnapshot snapshot() const;

  ScenarioConfig config_;
  ScenarioGeometry layout_;
  const Game& game_;
  std::string session_id_;
  int crossing_id_;
  double t_ = 0.0;
  double ped_d_;
  std::optional<double> car_d_;
  std::vector<TrackPoint> ped_track_;
  std::optional<GameInfo> decision_;
  std::optional<double> ped_cleared_at_;
  std::optional<double> car_cleared_at_;
  Outcome outcome_ = Outcome::kPending;
};

/// Runs a crossing to completion. Throws Error if it exceeds the configured
/// maximum crossing time.
std::vector<CrossingRecord> run_crossing(const ScenarioConfig& config, const Game& game,
                                         const PedestrianPolicy& policy,
                                         CrossingStarts starts, Rng& rng,
                                         const std::string& session_id = "sim",
                                         int crossing_id = 0);

/// Pedestrian win: start - delta. Loss: start + delta. Crash: unchanged.
/// Clamped to [lo, hi].
double experimenter_feedback_update(double current_start, Outcome outcome, double delta,
                                    double lo, double hi);

struct SessionRun {
  std::vector<CrossingRecord> records;
  std::vector<Outcome> outcomes;     // per crossing
  std::vector<double> car_starts;    // per crossing, before feedback
  std::vector<double> interesting_fraction;  // per crossing
};

/// Self-play of config.crossing.crossings_total crossings with experimenter
/// feedback. Pedestrian starts are drawn uniformly from the configured range.
SessionRun run_self_play_session(const ScenarioConfig& config, const Game& game,
                                 const PedestrianPolicy& policy, std::uint64_t seed,
                                 const std::string& session_id);

/// Ordinary least-squares slope of y against its index.
double index_slope(std::span<const double> y);

}  // namespace seqchicken
