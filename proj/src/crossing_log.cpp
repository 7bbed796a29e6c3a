#include "seqchicken/crossing_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "seqchicken/error.hpp"

namespace seqchicken {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kPending: return "PENDING";
    case Outcome::kCrash: return "CRASH";
    case Outcome::kVehicleFirst: return "VEHICLE_FIRST";
    case Outcome::kPedestrianFirst: return "PEDESTRIAN_FIRST";
  }
  return "PENDING";
}

Outcome parse_outcome(std::string_view text) {
  if (text == "PENDING") return Outcome::kPending;
  if (text == "CRASH") return Outcome::kCrash;
  if (text == "VEHICLE_FIRST") return Outcome::kVehicleFirst;
  if (text == "PEDESTRIAN_FIRST") return Outcome::kPedestrianFirst;
  throw ParseError("unknown outcome '" + std::string(text) + "'");
}

namespace {

template <typename T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

ojson action_json(const std::optional<Action>& a) {
  return a ? ojson(std::string(to_string(*a))) : ojson(nullptr);
}

const ojson& field(const ojson& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
  return *it;
}

std::optional<Action> parse_optional_action(const ojson& j, const char* name) {
  const auto& v = field(j, name);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw ParseError(std::string("field '") + name + "' must be a string or null");
  try {
    return parse_action(v.get<std::string>());
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
}

double number(const ojson& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number()) throw ParseError(std::string("field '") + name + "' must be a number");
  return v.get<double>();
}

int integer(const ojson& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw ParseError(std::string("field '") + name + "' must be an integer");
  return v.get<int>();
}

}  // namespace

std::string to_json_line(const CrossingRecord& r) {
  ojson j;
  j["session_id"] = r.session_id;
  j["crossing_id"] = r.crossing_id;
  j["t"] = r.t;
  j["ped_pos_m"] = r.ped_pos_m;
  j["car_pos_m"] = optional_json(r.car_pos_m);
  j["ped_box"] = r.ped_box;
  j["car_box"] = optional_json(r.car_box);
  j["interesting"] = r.interesting;
  j["ped_action"] = action_json(r.ped_action);
  j["car_action"] = action_json(r.car_action);
  j["speed_multiplier"] = r.speed_multiplier;
  j["winner"] = std::string(to_string(r.winner));
  if (r.auto_played) j["auto_played"] = true;
  return j.dump();
}

CrossingRecord parse_record(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record must be a JSON object");
  CrossingRecord r;
  const auto& sid = field(j, "session_id");
  if (!sid.is_string()) throw ParseError("field 'session_id' must be a string");
  r.session_id = sid.get<std::string>();
  r.crossing_id = integer(j, "crossing_id");
  r.t = number(j, "t");
  r.ped_pos_m = number(j, "ped_pos_m");
  if (!field(j, "car_pos_m").is_null()) r.car_pos_m = number(j, "car_pos_m");
  r.ped_box = integer(j, "ped_box");
  if (!field(j, "car_box").is_null()) r.car_box = integer(j, "car_box");
  const auto& interesting = field(j, "interesting");
  if (!interesting.is_boolean()) throw ParseError("field 'interesting' must be a boolean");
  r.interesting = interesting.get<bool>();
  r.ped_action = parse_optional_action(j, "ped_action");
  r.car_action = parse_optional_action(j, "car_action");
  r.speed_multiplier = number(j, "speed_multiplier");
  const auto& winner = field(j, "winner");
  if (!winner.is_string()) throw ParseError("field 'winner' must be a string");
  r.winner = parse_outcome(winner.get<std::string>());
  if (const auto it = j.find("auto_played"); it != j.end()) {
    if (!it->is_boolean()) throw ParseError("field 'auto_played' must be a boolean");
    r.auto_played = it->get<bool>();
  }
  return r;
}

LogReadResult read_crossing_log(std::istream& in) {
  LogReadResult out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.records.push_back(parse_record(line));
    } catch (const ParseError& e) {
      ++out.skipped;
      out.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

LogReadResult read_crossing_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open crossing log " + path);
  return read_crossing_log(in);
}

void write_crossing_log(std::ostream& out, std::span<const CrossingRecord> records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

}  // namespace seqchicken
