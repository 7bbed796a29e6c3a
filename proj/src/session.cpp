#include "seqchicken/session.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace seqchicken {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- config ----------------------------------------------------------------

void SessionConfig::validate() const {
  game.validate();
  scenario.geometry.validate();
  scenario.crossing.validate();
  if (turn_timeout_s && !(*turn_timeout_s > 0.0)) {
    throw ValidationError("turn_timeout_s must be positive");
  }
}

namespace {

double json_number(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number()) throw ValidationError("field '" + field + "' must be a number");
  return v.get<double>();
}

std::string scalar_text(const nlohmann::json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw ValidationError("field 'scenario." + field + "' must be a number or string");
}

bool same_params(const GameParams& a, const GameParams& b) {
  return a.crash_cost == b.crash_cost && a.turn_cost == b.turn_cost && a.max_y == b.max_y &&
         a.max_x == b.max_x && a.indifference == b.indifference;
}

}  // namespace

SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ValidationError("session config must be a JSON object");

  // Scenario first so top-level fields can override it.
  if (const auto it = j.find("scenario"); it != j.end()) {
    if (!it->is_object()) throw ValidationError("field 'scenario' must be an object");
    std::string text;
    for (const auto& [key, value] : it->items()) text += key + " = " + scalar_text(value, key) + "\n";
    try {
      c.scenario = parse_scenario(text);
    } catch (const ParseError& e) {
      throw ValidationError(std::string("scenario: ") + e.what());
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "scenario") continue;
    if (key == "crash_cost") {
      c.game.crash_cost = json_number(value, key);
    } else if (key == "turn_cost") {
      c.game.turn_cost = json_number(value, key);
    } else if (key == "max_y" || key == "max_x" || key == "crossings_total") {
      if (!value.is_number_integer()) throw ValidationError("field '" + key + "' must be an integer");
      const int v = value.get<int>();
      (key == "max_y" ? c.game.max_y : key == "max_x" ? c.game.max_x
                                                      : c.scenario.crossing.crossings_total) = v;
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ValidationError("field 'seed' must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else if (key == "turn_timeout_s") {
      if (!value.is_null()) c.turn_timeout_s = json_number(value, key);
    } else {
      throw ValidationError("unknown field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ojson session_config_to_json(const SessionConfig& c) {
  ojson j;
  j["crash_cost"] = c.game.crash_cost;
  j["turn_cost"] = c.game.turn_cost;
  j["max_y"] = c.game.max_y;
  j["max_x"] = c.game.max_x;
  if (c.seed) j["seed"] = *c.seed;
  j["turn_timeout_s"] = c.turn_timeout_s ? ojson(*c.turn_timeout_s) : ojson(nullptr);
  ojson scenario = ojson::object();
  std::istringstream lines(to_config_text(c.scenario));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    scenario[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["scenario"] = scenario;
  return j;
}

ojson to_json(const SessionView& v) {
  ojson j;
  j["id"] = v.id;
  j["status"] = v.finished ? "finished" : "active";
  j["crossing"] = v.crossing;
  j["crossings_total"] = v.crossings_total;
  j["turn"] = v.turn;
  j["t"] = v.t;
  j["ped_pos_m"] = v.ped_pos_m;
  j["car_pos_m"] = v.car_pos_m ? ojson(*v.car_pos_m) : ojson(nullptr);
  j["ped_box"] = v.ped_box;
  j["car_box"] = v.car_box ? ojson(*v.car_box) : ojson(nullptr);
  j["interesting"] = v.interesting;
  j["car_start_m"] = v.car_start_m;
  j["tally"] = {{"PEDESTRIAN_FIRST", v.tally.pedestrian_first},
                {"VEHICLE_FIRST", v.tally.vehicle_first},
                {"CRASH", v.tally.crash},
                {"completed", v.tally.completed()}};
  j["last_outcome"] = v.last_outcome ? ojson(std::string(to_string(*v.last_outcome))) : ojson(nullptr);
  return j;
}

ojson to_json(const TurnResult& r) {
  ojson j;
  j["vehicle_action"] = r.vehicle_action ? ojson(std::string(to_string(*r.vehicle_action))) : ojson(nullptr);
  j["speed_multiplier"] = r.speed_multiplier;
  j["pedestrian_action"] = std::string(to_string(r.pedestrian_action));
  j["crossing_outcome"] = std::string(to_string(r.crossing_outcome));
  j["next_car_start_m"] = r.next_car_start_m ? ojson(*r.next_car_start_m) : ojson(nullptr);
  j["record"] = ojson::parse(to_json_line(r.record));
  j["state"] = to_json(r.state);
  return j;
}

// ---- store -----------------------------------------------------------------

struct SessionStore::Session {
  std::string id;
  SessionConfig config;
  std::uint64_t seed = 0;
  const Game* game = nullptr;

  std::mutex mu;  // one turn at a time
  std::unique_ptr<Crossing> crossing;
  int crossing_index = 1;
  int step = 0;  // within the crossing
  int turn = 0;  // within the session
  double car_start = 0.0;
  double committed_at = 0.0;
  Tally tally;
  std::optional<Outcome> last;
  bool finished = false;
  bool replaying = false;
  std::vector<CrossingRecord> records;
};

SessionStore::SessionStore(fs::path dir, std::uint64_t base_seed, Clock clock)
    : dir_(std::move(dir)), base_seed_(base_seed), clock_(std::move(clock)) {
  if (!clock_) {
    clock_ = [] {
      using namespace std::chrono;
      return duration<double>(steady_clock::now().time_since_epoch()).count();
    };
  }
  if (!dir_.empty()) {
    fs::create_directories(dir_ / "sessions");
    load();
  }
}

SessionStore::~SessionStore() = default;

const Game& SessionStore::game_for(const GameParams& p) {
  std::lock_guard lock(games_mu_);
  for (const auto& [params, game] : games_) {
    if (same_params(params, p)) return *game;
  }
  games_.emplace_back(p, std::make_unique<Game>(p));
  return *games_.back().second;
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSessionError("unknown session '" + id + "'");
  return it->second;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::shared_lock lock(mu_);
  return order_;
}

void SessionStore::start_crossing(Session& s) {
  const auto& cs = s.config.scenario.crossing;
  const auto idx = static_cast<std::uint64_t>(s.crossing_index);
  Rng start_rng = Rng::derive(s.seed, {idx, 0});
  const double ped = cs.ped_start_min + (cs.ped_start_max - cs.ped_start_min) * start_rng.uniform();
  s.crossing = std::make_unique<Crossing>(s.config.scenario, *s.game, CrossingStarts{ped, s.car_start},
                                          s.id, s.crossing_index);
  s.step = 0;
  Rng rng = Rng::derive(s.seed, {idx, 1, 0});
  s.crossing->decide(rng);
  s.committed_at = clock_();
}

std::string SessionStore::create_session(const SessionConfig& config) {
  config.validate();
  auto s = std::make_shared<Session>();
  s->config = config;
  s->game = &game_for(config.game);
  s->car_start = config.scenario.crossing.car_start;
  {
    std::unique_lock lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%04llu", static_cast<unsigned long long>(next_id_));
    s->id = buf;
    s->seed = config.seed.value_or(Rng::derive(base_seed_, {next_id_}).next_u64());
    s->config.seed = s->seed;
    ++next_id_;
    start_crossing(*s);
    sessions_[s->id] = s;
    order_.push_back(s->id);
  }
  write_index();
  return s->id;
}

TurnResult SessionStore::play_turn(Session& s, Action action, bool auto_played) {
  TurnResult res;
  res.pedestrian_action = action;
  res.record = s.crossing->advance(action, auto_played);
  res.vehicle_action = res.record.car_action;
  res.speed_multiplier = res.record.speed_multiplier;
  s.records.push_back(res.record);
  if (!s.replaying) persist_record(s, res.record);
  ++s.turn;
  ++s.step;

  if (s.crossing->finished()) {
    const Outcome o = s.crossing->outcome();
    res.crossing_outcome = o;
    s.last = o;
    if (o == Outcome::kPedestrianFirst) ++s.tally.pedestrian_first;
    if (o == Outcome::kVehicleFirst) ++s.tally.vehicle_first;
    if (o == Outcome::kCrash) ++s.tally.crash;
    const auto& cs = s.config.scenario.crossing;
    s.car_start = experimenter_feedback_update(s.car_start, o, cs.feedback_delta, cs.feedback_min,
                                               cs.feedback_max);
    res.next_car_start_m = s.car_start;
    if (s.crossing_index >= cs.crossings_total) {
      s.finished = true;
    } else {
      ++s.crossing_index;
      start_crossing(s);
    }
  } else {
    Rng rng = Rng::derive(s.seed, {static_cast<std::uint64_t>(s.crossing_index), 1,
                                   static_cast<std::uint64_t>(s.step)});
    s.crossing->decide(rng);
    s.committed_at = clock_();
  }
  res.state = view_of(s);
  return res;
}

void SessionStore::apply_timeouts(Session& s) {
  if (!s.config.turn_timeout_s) return;
  const double timeout = *s.config.turn_timeout_s;
  const double now = clock_();
  while (!s.finished && now - s.committed_at >= timeout) {
    const double due = s.committed_at + timeout;
    play_turn(s, Action::kFast, true);
    s.committed_at = due;
  }
}

TurnResult SessionStore::submit_action(const std::string& id, Action action, std::optional<int> turn) {
  const auto sp = find(id);
  std::unique_lock lock(sp->mu, std::try_to_lock);
  if (!lock.owns_lock()) {
    throw ConcurrentSubmitError("another action for session '" + id + "' is in progress");
  }
  apply_timeouts(*sp);
  if (sp->finished) throw SessionFinishedError("session '" + id + "' is finished");
  if (turn && *turn != sp->turn) {
    throw SequencingError("turn " + std::to_string(*turn) + " is not pending; current turn is " +
                          std::to_string(sp->turn));
  }
  if (!sp->crossing->has_decision()) throw SequencingError("no pending turn");
  return play_turn(*sp, action, false);
}

SessionView SessionStore::view_of(const Session& s) const {
  SessionView v;
  v.id = s.id;
  v.finished = s.finished;
  v.crossing = s.crossing_index;
  v.crossings_total = s.config.scenario.crossing.crossings_total;
  v.turn = s.turn;
  v.t = s.crossing->t();
  v.ped_pos_m = s.crossing->ped_pos();
  v.car_pos_m = s.crossing->car_pos();
  v.ped_box = s.crossing->ped_box();
  v.car_box = s.crossing->car_box();
  v.interesting = s.crossing->decision() && s.crossing->decision()->interesting;
  v.car_start_m = s.car_start;
  v.tally = s.tally;
  v.last_outcome = s.last;
  return v;
}

SessionView SessionStore::session_state(const std::string& id) {
  const auto sp = find(id);
  std::lock_guard lock(sp->mu);
  apply_timeouts(*sp);
  return view_of(*sp);
}

std::string SessionStore::export_sessions(const std::vector<std::string>& ids) {
  std::vector<std::shared_ptr<Session>> selected;
  if (ids.empty()) {
    std::shared_lock lock(mu_);
    for (const auto& id : order_) selected.push_back(sessions_.at(id));
  } else {
    for (const auto& id : ids) selected.push_back(find(id));
  }
  std::ostringstream out;
  for (const auto& sp : selected) {
    std::lock_guard lock(sp->mu);
    write_crossing_log(out, sp->records);
  }
  return out.str();
}

// ---- persistence -----------------------------------------------------------

void SessionStore::persist_record(const Session& s, const CrossingRecord& r) {
  if (dir_.empty()) return;
  std::ofstream out(dir_ / "sessions" / (s.id + ".jsonl"), std::ios::app);
  out << to_json_line(r) << '\n';
  if (!out) throw Error("failed to append to the log of session " + s.id);
}

void SessionStore::write_index() {
  if (dir_.empty()) return;
  std::lock_guard guard(index_mu_);
  ojson j;
  ojson list = ojson::array();
  {
    std::shared_lock lock(mu_);
    j["next_id"] = next_id_;
    for (const auto& id : order_) {
      const auto& s = *sessions_.at(id);
      list.push_back({{"id", s.id}, {"config", session_config_to_json(s.config)}});
    }
  }
  j["sessions"] = list;
  const fs::path tmp = dir_ / "index.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed to write the session index");
  }
  fs::rename(tmp, dir_ / "index.json");
}

void SessionStore::load() {
  const fs::path index = dir_ / "index.json";
  if (!fs::exists(index)) return;
  std::ifstream in(index);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt session index: ") + e.what());
  }
  next_id_ = j.at("next_id").get<std::uint64_t>();
  for (const auto& entry : j.at("sessions")) {
    auto s = std::make_shared<Session>();
    s->id = entry.at("id").get<std::string>();
    s->config = session_config_from_json(entry.at("config"));
    s->seed = s->config.seed.value_or(0);
    s->game = &game_for(s->config.game);
    s->car_start = s->config.scenario.crossing.car_start;
    s->replaying = true;
    start_crossing(*s);

    const fs::path log = dir_ / "sessions" / (s->id + ".jsonl");
    if (fs::exists(log)) {
      const LogReadResult recs = read_crossing_log_file(log.string());
      if (recs.skipped > 0) throw ParseError("corrupt record log for session " + s->id);
      for (const auto& r : recs.records) {
        if (s->finished || !r.ped_action) throw ParseError("record log of session " + s->id + " does not replay");
        play_turn(*s, *r.ped_action, r.auto_played);
        if (to_json_line(s->records.back()) != to_json_line(r)) {
          throw ParseError("record log of session " + s->id + " diverges on replay at turn " +
                           std::to_string(s->turn));
        }
      }
    }
    s->replaying = false;
    s->committed_at = clock_();
    sessions_[s->id] = s;
    order_.push_back(s->id);
  }
}

}  // namespace seqchicken
