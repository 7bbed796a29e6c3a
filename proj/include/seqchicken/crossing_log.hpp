#pragma once

// Crossing-log records: one JSON object per line with the fields
//   session_id, crossing_id, t, ped_pos_m, car_pos_m, ped_box, car_box,
//   interesting, ped_action, car_action, speed_multiplier, winner
// in that order. Actions are "SLOW", "FAST" or null; car fields are null
// when no vehicle takes part; winner is "PENDING" until the record that
// ends the crossing. A record auto-played after a turn timeout carries an
// extra trailing `"auto_played": true`.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqchicken/game.hpp"

namespace seqchicken {

enum class Outcome : std::uint8_t {
  kPending,
  kCrash,
  kVehicleFirst,
  kPedestrianFirst,
};

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view text);

struct CrossingRecord {
  std::string session_id;
  int crossing_id = 0;
  double t = 0.0;
  double ped_pos_m = 0.0;  // distance to the collision point
  std::optional<double> car_pos_m;
  int ped_box = 0;
  std::optional<int> car_box;
  bool interesting = false;
  std::optional<Action> ped_action;
  std::optional<Action> car_action;
  double speed_multiplier = 1.0;
  Outcome winner = Outcome::kPending;
  bool auto_played = false;

  friend bool operator==(const CrossingRecord&, const CrossingRecord&) = default;
};

std::string to_json_line(const CrossingRecord& r);
/// Throws ParseError on malformed input.
CrossingRecord parse_record(std::string_view line);

struct LogReadResult {
  std::vector<CrossingRecord> records;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Reads every line; malformed lines are skipped and counted.
LogReadResult read_crossing_log(std::istream& in);
LogReadResult read_crossing_log_file(const std::string& path);
void write_crossing_log(std::ostream& out, std::span<const CrossingRecord> records);

}  // namespace seqchicken
