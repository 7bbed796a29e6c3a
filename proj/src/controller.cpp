#include "seqchicken/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqchicken {

ConstantVelocityModel fit_constant_velocity(std::span<const TrackPoint> track,
                                            std::size_t window) {
  if (window < 2 || track.size() < 2) {
    throw InsufficientDataError("velocity fit needs at least 2 track points");
  }
  const auto pts = track.last(std::min(window, track.size()));
  const double span = pts.back().t - pts.front().t;
  if (span == 0.0) throw DegenerateTrackError("track has zero time span");
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].t > pts[i - 1].t)) {
      throw ValidationError("track timestamps must be strictly increasing");
    }
  }

  const double n = static_cast<double>(pts.size());
  double t_mean = 0.0;
  Vec2 p_mean;
  for (const auto& p : pts) {
    t_mean += p.t;
    p_mean = p_mean + p.position;
  }
  t_mean /= n;
  p_mean = (1.0 / n) * p_mean;

  double stt = 0.0;
  Vec2 stp;
  for (const auto& p : pts) {
    const double dt = p.t - t_mean;
    stt += dt * dt;
    stp = stp + dt * (p.position - p_mean);
  }
  ConstantVelocityModel m;
  m.velocity = (1.0 / stt) * stp;
  m.t0 = pts.back().t;
  m.origin = p_mean + (m.t0 - t_mean) * m.velocity;
  return m;
}

std::optional<PathIntersection> intersect_paths(const ConstantVelocityModel& ped,
                                                const ScenarioGeometry& geom) {
  const double speed = ped.speed();
  if (!(speed > 0.0)) {
    throw ValidationError("pedestrian speed must be positive to intersect paths");
  }
  const Vec2 dir = (1.0 / speed) * ped.velocity;
  const Vec2 origin = ped.origin;
  constexpr double kEps = 1e-12;

  std::optional<PathIntersection> best;
  double arc_start = 0.0;
  for (std::size_t i = 1; i < geom.vehicle_path.size(); ++i) {
    const Vec2 a = geom.vehicle_path[i - 1];
    const Vec2 b = geom.vehicle_path[i];
    const Vec2 seg = b - a;
    const double seg_len = norm(seg);
    const double denom = cross(dir, seg);
    const Vec2 ao = a - origin;
    if (std::abs(denom) <= kEps * std::max(1.0, seg_len)) {
      // Parallel: collinear overlap ahead of the pedestrian has no unique point.
      if (std::abs(cross(ao, dir)) <= 1e-9 * std::max(1.0, norm(ao))) {
        const double s_a = dot(a - origin, dir);
        const double s_b = dot(b - origin, dir);
        if (std::max(s_a, s_b) >= 0.0) {
          throw NoUniqueIntersectionError("pedestrian ray runs along the vehicle path");
        }
      }
      arc_start += seg_len;
      continue;
    }
    const double s = cross(ao, seg) / denom;  // along the ray
    const double r = cross(ao, dir) / denom;  // along the segment, 0..1
    if (s >= 0.0 && r >= -kEps && r <= 1.0 + kEps) {
      if (!best || s < best->pedestrian_distance) {
        const double rc = std::clamp(r, 0.0, 1.0);
        best = PathIntersection{a + rc * seg, s, arc_start + rc * seg_len};
      }
    }
    arc_start += seg_len;
  }
  return best;
}

double project_onto_path(Vec2 p, const ScenarioGeometry& geom) {
  double best_dist = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double arc_start = 0.0;
  for (std::size_t i = 1; i < geom.vehicle_path.size(); ++i) {
    const Vec2 a = geom.vehicle_path[i - 1];
    const Vec2 seg = geom.vehicle_path[i] - a;
    const double len2 = dot(seg, seg);
    const double len = std::sqrt(len2);
    const double r = len2 > 0.0 ? std::clamp(dot(p - a, seg) / len2, 0.0, 1.0) : 0.0;
    const double d = norm(p - (a + r * seg));
    if (d < best_dist) {
      best_dist = d;
      best_arc = arc_start + r * len;
    }
    arc_start += len;
  }
  return best_arc;
}

double time_to_point(double distance, double fast_speed) {
  if (!(fast_speed > 0.0)) throw ValidationError("speed must be positive");
  if (distance < 0.0) throw ValidationError("distance must be non-negative");
  return distance / fast_speed;
}

bool is_interesting(double t_vehicle, double t_ped, double t_pass) {
  return std::abs(t_vehicle - t_ped) < t_pass;
}

int quantize_distance(double d, double box) {
  if (!(box > 0.0)) throw ValidationError("box size must be positive");
  const double q = std::floor(d / box);
  if (q < kMinPosition) return kMinPosition;
  if (q > static_cast<double>(std::numeric_limits<int>::max())) {
    return std::numeric_limits<int>::max();
  }
  return static_cast<int>(q);
}

ControllerStep controller_step(const ControllerSnapshot& snapshot,
                               const ScenarioGeometry& geom, const Game& game,
                               Rng& rng, std::size_t fit_window) {
  ControllerStep out;
  out.speed_command = snapshot.commanded_speed;
  GameInfo& info = out.info;
  info.t = snapshot.t;

  auto warn = [&info](const std::string& msg) {
    if (!info.warning.empty()) info.warning += "; ";
    info.warning += msg;
  };

  if (snapshot.pedestrians.empty()) return out;
  if (snapshot.pedestrians.size() > 1) {
    warn("ignoring " + std::to_string(snapshot.pedestrians.size() - 1) +
         " extra pedestrian track(s)");
  }

  std::optional<PathIntersection> hit;
  double ped_distance = 0.0;
  try {
    const auto model = fit_constant_velocity(snapshot.pedestrians.front(), fit_window);
    if (!(model.speed() > 1e-9)) {
      warn("pedestrian is stationary");
      return out;
    }
    hit = intersect_paths(model, geom);
    if (hit) {
      // Distance from the pedestrian's predicted position now.
      const Vec2 now = model.position_at(snapshot.t);
      ped_distance = dot(hit->point - now, (1.0 / model.speed()) * model.velocity);
    }
  } catch (const Error& e) {
    warn(e.what());
    return out;
  }
  if (!hit) return out;

  const double vehicle_distance =
      hit->vehicle_arc - project_onto_path(snapshot.vehicle_position, geom);
  info.vehicle_distance = vehicle_distance;
  info.pedestrian_distance = ped_distance;
  if (vehicle_distance < 0.0 || ped_distance < 0.0) return out;

  const double tv = time_to_point(vehicle_distance, geom.vehicle_fast_speed);
  const double tp = time_to_point(ped_distance, geom.pedestrian_fast_speed);
  if (!is_interesting(tv, tp, geom.pass_time())) return out;

  info.interesting = true;
  info.state = {quantize_distance(vehicle_distance, geom.car_box),
                quantize_distance(ped_distance, geom.ped_box)};
  try {
    const Equilibrium eq = game.policy(info.state);
    info.equilibrium = eq;
    info.vehicle_action = rng.bernoulli(eq.p_vehicle_slow) ? Action::kSlow : Action::kFast;
    info.speed_multiplier = *info.vehicle_action == Action::kSlow ? kSlowMultiplier : 1.0;
  } catch (const Error& e) {
    warn(std::string("solver failure, falling back to SLOW: ") + e.what());
    info.speed_multiplier = kSlowMultiplier;
  }
  out.speed_command = snapshot.commanded_speed * info.speed_multiplier;
  return out;
}

Controller::Controller(ScenarioGeometry geom, const Game& game, Rng rng,
                       std::size_t fit_window)
    : geom_(std::move(geom)), game_(game), rng_(rng), fit_window_(fit_window) {
  geom_.validate();
}

void Controller::update_pedestrians(std::vector<std::vector<TrackPoint>> tracks) {
  std::lock_guard lock(mu_);
  latest_.pedestrians = std::move(tracks);
}

void Controller::update_vehicle(Vec2 position, double commanded_speed) {
  std::lock_guard lock(mu_);
  latest_.vehicle_position = position;
  latest_.commanded_speed = commanded_speed;
}

ControllerStep Controller::step(double t) {
  ControllerSnapshot snap;
  {
    std::lock_guard lock(mu_);
    snap = latest_;
  }
  snap.t = t;
  ControllerStep result = controller_step(snap, geom_, game_, rng_, fit_window_);
  log_.push_back(result.info);
  return result;
}

}  // namespace seqchicken
