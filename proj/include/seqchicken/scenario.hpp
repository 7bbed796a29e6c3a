#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqchicken {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

double dot(Vec2 a, Vec2 b);
double cross(Vec2 a, Vec2 b);
double norm(Vec2 a);

/// Static layout and agent parameters shared by the controller, simulator
/// and session service.
struct ScenarioGeometry {
  std::vector<Vec2> vehicle_path = {{-10.0, 0.0}, {10.0, 0.0}};
  double vehicle_fast_speed = 0.2;     // m/s, firmware limit
  double pedestrian_fast_speed = 0.4;  // m/s
  double ped_box = 0.2;                // m
  double car_box = 0.08;               // m
  double vehicle_length = 1.6;         // m
  double pedestrian_diameter = 0.5;    // m
  /// Time for one agent to completely pass the other. When unset it is
  /// derived from the footprints and the slower FAST speed.
  std::optional<double> pass_clearance_time;

  double pass_time() const;
  double path_length() const;
  void validate() const;
};

/// (vehicle footprint + pedestrian footprint) / min(FAST speeds).
double default_pass_clearance_time(double vehicle_length,
                                   double pedestrian_diameter,
                                   double vehicle_fast_speed,
                                   double pedestrian_fast_speed);

/// Settings for simulated and live crossings.
struct CrossingSettings {
  double step_period = 0.5;      // s between controller updates
  double turn_duration = 1.0;    // s per model turn (documentation only)
  std::size_t fit_window = 10;   // track samples used for the velocity fit
  double ped_start_min = 6.0;    // m from the collision point
  double ped_start_max = 8.0;
  double car_start = 4.3;        // m from the collision point
  double feedback_delta = 0.25;  // m
  double feedback_min = 2.0;
  double feedback_max = 8.0;
  int crossings_total = 20;
  double max_crossing_time = 300.0;  // s, safety cap on a single crossing

  void validate() const;
};

struct ScenarioConfig {
  ScenarioGeometry geometry;
  CrossingSettings crossing;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are an
/// error. `vehicle_path` is written as `x,y; x,y; ...`.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string to_config_text(const ScenarioConfig& config);

}  // namespace seqchicken
