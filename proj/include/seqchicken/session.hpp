#pragma once

// Live crossing sessions with simultaneous-move fairness: the vehicle's action
// for a turn is drawn and stored before the client's pedestrian action for
// that turn is accepted, and is only revealed in the turn result.
//
// Storage layout under the store directory:
//   index.json            session ids, seeds and configs
//   sessions/<id>.jsonl   append-only crossing records
// Live state is rebuilt on load by replaying the recorded pedestrian actions.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqchicken/crossing_log.hpp"
#include "seqchicken/error.hpp"
#include "seqchicken/game.hpp"
#include "seqchicken/scenario.hpp"
#include "seqchicken/simulator.hpp"

namespace seqchicken {

class UnknownSessionError : public Error {
 public:
  using Error::Error;
};
/// Wrong turn number, or no pending turn.
class SequencingError : public Error {
 public:
  using Error::Error;
};
class SessionFinishedError : public Error {
 public:
  using Error::Error;
};
/// Another submit for the same session is in flight.
class ConcurrentSubmitError : public Error {
 public:
  using Error::Error;
};

struct SessionConfig {
  GameParams game;
  ScenarioConfig scenario;  // crossings_total lives in scenario.crossing
  std::optional<std::uint64_t> seed;
  std::optional<double> turn_timeout_s;  // untimed when unset

  void validate() const;
};

/// Accepts {"crash_cost", "turn_cost", "crossings_total", "seed",
/// "turn_timeout_s", "scenario": {<scenario config keys>}}; every field is
/// optional. Throws ValidationError naming the offending field.
SessionConfig session_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json session_config_to_json(const SessionConfig& c);

struct Tally {
  int pedestrian_first = 0;
  int vehicle_first = 0;
  int crash = 0;

  int completed() const { return pedestrian_first + vehicle_first + crash; }
};

/// Client-visible state. Never carries the committed vehicle action.
struct SessionView {
  std::string id;
  bool finished = false;
  int crossing = 1;  // 1-based
  int crossings_total = 0;
  int turn = 0;      // turns played in this session
  double t = 0.0;    // time within the crossing
  double ped_pos_m = 0.0;
  std::optional<double> car_pos_m;
  int ped_box = 0;
  std::optional<int> car_box;
  bool interesting = false;  // a game is being played this turn
  double car_start_m = 0.0;
  Tally tally;
  std::optional<Outcome> last_outcome;
};

nlohmann::ordered_json to_json(const SessionView& v);

struct TurnResult {
  std::optional<Action> vehicle_action;  // null when no game was played
  double speed_multiplier = 1.0;
  Action pedestrian_action = Action::kFast;
  CrossingRecord record;
  Outcome crossing_outcome = Outcome::kPending;
  std::optional<double> next_car_start_m;  // set when the crossing ended
  SessionView state;
};

nlohmann::ordered_json to_json(const TurnResult& r);

class SessionStore {
 public:
  using Clock = std::function<double()>;  // seconds, monotone

  /// An empty directory keeps everything in memory.
  explicit SessionStore(std::filesystem::path dir = {}, std::uint64_t base_seed = 0,
                        Clock clock = {});
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  std::string create_session(const SessionConfig& config);
  /// `turn`, when given, must equal the session's current turn number.
  TurnResult submit_action(const std::string& id, Action action,
                           std::optional<int> turn = std::nullopt);
  SessionView session_state(const std::string& id);
  /// Records of the given sessions (all when empty), grouped by session in
  /// creation order, one line each.
  std::string export_sessions(const std::vector<std::string>& ids = {});
  std::vector<std::string> session_ids() const;

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id) const;
  const Game& game_for(const GameParams& p);
  void start_crossing(Session& s);
  TurnResult play_turn(Session& s, Action action, bool auto_played);
  void apply_timeouts(Session& s);
  SessionView view_of(const Session& s) const;
  void persist_record(const Session& s, const CrossingRecord& r);
  void write_index();
  void load();

  std::filesystem::path dir_;
  std::uint64_t base_seed_;
  Clock clock_;
  mutable std::shared_mutex mu_;  // guards sessions_, order_, next_id_
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::vector<std::string> order_;
  std::uint64_t next_id_ = 1;
  std::mutex games_mu_;
  std::vector<std::pair<GameParams, std::unique_ptr<Game>>> games_;
  std::mutex index_mu_;
};

}  // namespace seqchicken
