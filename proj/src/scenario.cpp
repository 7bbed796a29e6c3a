#include "seqchicken/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "seqchicken/error.hpp"

namespace seqchicken {

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

double default_pass_clearance_time(double vehicle_length,
                                   double pedestrian_diameter,
                                   double vehicle_fast_speed,
                                   double pedestrian_fast_speed) {
  return (vehicle_length + pedestrian_diameter) /
         std::min(vehicle_fast_speed, pedestrian_fast_speed);
}

double ScenarioGeometry::pass_time() const {
  if (pass_clearance_time) return *pass_clearance_time;
  return default_pass_clearance_time(vehicle_length, pedestrian_diameter,
                                     vehicle_fast_speed,
                                     pedestrian_fast_speed);
}

double ScenarioGeometry::path_length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < vehicle_path.size(); ++i) {
    total += norm(vehicle_path[i] - vehicle_path[i - 1]);
  }
  return total;
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(std::string(name) + " must be positive");
  }
}

}  // namespace

void ScenarioGeometry::validate() const {
  if (vehicle_path.size() < 2) {
    throw ValidationError("vehicle_path needs at least 2 vertices");
  }
  for (const auto& v : vehicle_path) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw ValidationError("vehicle_path has a non-finite vertex");
    }
  }
  require_positive(vehicle_fast_speed, "vehicle_fast_speed");
  require_positive(pedestrian_fast_speed, "pedestrian_fast_speed");
  require_positive(ped_box, "ped_box");
  require_positive(car_box, "car_box");
  if (vehicle_length < 0.0 || pedestrian_diameter < 0.0) {
    throw ValidationError("footprints must be non-negative");
  }
  if (pass_clearance_time) require_positive(*pass_clearance_time, "pass_clearance_time");
}

void CrossingSettings::validate() const {
  require_positive(step_period, "step_period");
  require_positive(turn_duration, "turn_duration");
  if (fit_window < 2) throw ValidationError("fit_window must be at least 2");
  require_positive(ped_start_min, "ped_start_min");
  if (ped_start_max < ped_start_min) {
    throw ValidationError("ped_start_max must be >= ped_start_min");
  }
  require_positive(car_start, "car_start");
  require_positive(feedback_delta, "feedback_delta");
  require_positive(feedback_min, "feedback_min");
  if (feedback_max < feedback_min) {
    throw ValidationError("feedback_max must be >= feedback_min");
  }
  if (crossings_total < 1) throw ValidationError("crossings_total must be >= 1");
  require_positive(max_crossing_time, "max_crossing_time");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ParseError("scenario key '" + key + "': not a number: " + value);
  }
  if (used != value.size()) {
    throw ParseError("scenario key '" + key + "': trailing characters: " + value);
  }
  return out;
}

std::vector<Vec2> parse_path(const std::string& value) {
  std::vector<Vec2> path;
  std::stringstream ss(value);
  std::string vertex;
  while (std::getline(ss, vertex, ';')) {
    vertex = trim(vertex);
    if (vertex.empty()) continue;
    const auto comma = vertex.find(',');
    if (comma == std::string::npos) {
      throw ParseError("vehicle_path vertex must be 'x,y': " + vertex);
    }
    path.push_back({parse_double("vehicle_path", trim(vertex.substr(0, comma))),
                    parse_double("vehicle_path", trim(vertex.substr(comma + 1)))});
  }
  return path;
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  ScenarioConfig cfg;
  auto& g = cfg.geometry;
  auto& c = cfg.crossing;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto num = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = parse_double(k, v); };
  };
  const std::map<std::string, Setter> setters = {
      {"vehicle_path", [&g](const std::string&, const std::string& v) { g.vehicle_path = parse_path(v); }},
      {"vehicle_fast_speed", num(g.vehicle_fast_speed)},
      {"pedestrian_fast_speed", num(g.pedestrian_fast_speed)},
      {"ped_box", num(g.ped_box)},
      {"car_box", num(g.car_box)},
      {"vehicle_length", num(g.vehicle_length)},
      {"pedestrian_diameter", num(g.pedestrian_diameter)},
      {"pass_clearance_time",
       [&g](const std::string& k, const std::string& v) { g.pass_clearance_time = parse_double(k, v); }},
      {"step_period", num(c.step_period)},
      {"turn_duration", num(c.turn_duration)},
      {"fit_window",
       [&c](const std::string& k, const std::string& v) {
         c.fit_window = static_cast<std::size_t>(parse_double(k, v));
       }},
      {"ped_start_min", num(c.ped_start_min)},
      {"ped_start_max", num(c.ped_start_max)},
      {"car_start", num(c.car_start)},
      {"feedback_delta", num(c.feedback_delta)},
      {"feedback_min", num(c.feedback_min)},
      {"feedback_max", num(c.feedback_max)},
      {"crossings_total",
       [&c](const std::string& k, const std::string& v) {
         c.crossings_total = static_cast<int>(parse_double(k, v));
       }},
      {"max_crossing_time", num(c.max_crossing_time)},
  };

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError("scenario line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ParseError("scenario line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(key, value);
  }
  g.validate();
  c.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string to_config_text(const ScenarioConfig& config) {
  const auto& g = config.geometry;
  const auto& c = config.crossing;
  std::ostringstream os;
  os << std::setprecision(17);
  os << "vehicle_path = ";
  for (std::size_t i = 0; i < g.vehicle_path.size(); ++i) {
    if (i) os << "; ";
    os << g.vehicle_path[i].x << "," << g.vehicle_path[i].y;
  }
  os << "\n";
  os << "vehicle_fast_speed = " << g.vehicle_fast_speed << "\n";
  os << "pedestrian_fast_speed = " << g.pedestrian_fast_speed << "\n";
  os << "ped_box = " << g.ped_box << "\n";
  os << "car_box = " << g.car_box << "\n";
  os << "vehicle_length = " << g.vehicle_length << "\n";
  os << "pedestrian_diameter = " << g.pedestrian_diameter << "\n";
  if (g.pass_clearance_time) os << "pass_clearance_time = " << *g.pass_clearance_time << "\n";
  os << "step_period = " << c.step_period << "\n";
  os << "turn_duration = " << c.turn_duration << "\n";
  os << "fit_window = " << c.fit_window << "\n";
  os << "ped_start_min = " << c.ped_start_min << "\n";
  os << "ped_start_max = " << c.ped_start_max << "\n";
  os << "car_start = " << c.car_start << "\n";
  os << "feedback_delta = " << c.feedback_delta << "\n";
  os << "feedback_min = " << c.feedback_min << "\n";
  os << "feedback_max = " << c.feedback_max << "\n";
  os << "crossings_total = " << c.crossings_total << "\n";
  os << "max_crossing_time = " << c.max_crossing_time << "\n";
  return os.str();
}

}  // namespace seqchicken
