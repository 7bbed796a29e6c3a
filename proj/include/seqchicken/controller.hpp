#pragma once

// Vehicle-side game controller: predicts the pedestrian's straight-line
// motion, finds where the two paths cross, decides whether a game has to be
// played, and if so samples the vehicle's SLOW/FAST action from the stage
// equilibrium. Only the speed is modulated; the planned path never changes.

#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqchicken/error.hpp"
#include "seqchicken/game.hpp"
#include "seqchicken/rng.hpp"
#include "seqchicken/scenario.hpp"

namespace seqchicken {

struct TrackPoint {
  double t = 0.0;
  Vec2 position;
};

struct ConstantVelocityModel {
  Vec2 origin;    // fitted position at t0
  Vec2 velocity;  // m/s
  double t0 = 0.0;

  Vec2 position_at(double t) const { return origin + (t - t0) * velocity; }
  double speed() const { return norm(velocity); }
};

/// Least-squares line through the last `window` samples. `t0` is the time of
/// the newest sample.
ConstantVelocityModel fit_constant_velocity(std::span<const TrackPoint> track,
                                            std::size_t window = 10);

class NoUniqueIntersectionError : public Error {
 public:
  using Error::Error;
};

struct PathIntersection {
  Vec2 point;
  double pedestrian_distance = 0.0;  // along the pedestrian ray from origin
  double vehicle_arc = 0.0;          // along the vehicle path from its start
};

/// First crossing (smallest pedestrian travel) of the pedestrian's forward ray
/// with the vehicle polyline. Throws NoUniqueIntersectionError when the ray
/// runs along a path segment.
std::optional<PathIntersection> intersect_paths(const ConstantVelocityModel& ped,
                                                const ScenarioGeometry& geom);

/// Arc length of the closest point on the vehicle path to `p`.
double project_onto_path(Vec2 p, const ScenarioGeometry& geom);

double time_to_point(double distance, double fast_speed);

/// True iff the FAST arrival times differ by less than the passing time.
bool is_interesting(double t_vehicle, double t_ped, double t_pass);

/// floor(d / box), never below -2.
int quantize_distance(double d, double box);

struct GameInfo {
  double t = 0.0;
  bool interesting = false;
  GameState state;
  std::optional<double> vehicle_distance;  // m to the intersection
  std::optional<double> pedestrian_distance;
  std::optional<Equilibrium> equilibrium;
  std::optional<Action> vehicle_action;
  double speed_multiplier = 1.0;
  std::string warning;
};

struct ControllerSnapshot {
  double t = 0.0;
  /// Pedestrian tracks; only the first is used.
  std::vector<std::vector<TrackPoint>> pedestrians;
  Vec2 vehicle_position;
  double commanded_speed = 0.0;
};

struct ControllerStep {
  double speed_command = 0.0;
  GameInfo info;
};

inline constexpr double kSlowMultiplier = 0.5;

/// One controller update. Never throws for solver or geometry trouble: a
/// solver failure falls back to the SLOW multiplier and records a warning.
ControllerStep controller_step(const ControllerSnapshot& snapshot,
                               const ScenarioGeometry& geom, const Game& game,
                               Rng& rng, std::size_t fit_window = 10);

/// Latest-message cache plus the step loop, appending every GameInfo to its
/// log. Inputs may be fed from another thread.
class Controller {
 public:
  Controller(ScenarioGeometry geom, const Game& game, Rng rng,
             std::size_t fit_window = 10);

  void update_pedestrians(std::vector<std::vector<TrackPoint>> tracks);
  void update_vehicle(Vec2 position, double commanded_speed);
  ControllerStep step(double t);

  const std::vector<GameInfo>& log() const { return log_; }

 private:
  ScenarioGeometry geom_;
  const Game& game_;
  Rng rng_;
  std::size_t fit_window_;
  mutable std::mutex mu_;
  ControllerSnapshot latest_;
  std::vector<GameInfo> log_;
};

}  // namespace seqchicken
