// seqchicken command-line tool: solver tables, model curves, seeded
// simulation, log fitting and the live session server.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "seqchicken/fitting.hpp"
#include "seqchicken/server.hpp"
#include "seqchicken/simulator.hpp"

using namespace seqchicken;

namespace {

struct Options {
  std::vector<double> ucrash;
  double turn_cost = 1.0;
  int y = 12;
  int x = 12;
  int kmax = 15;
  std::uint64_t seed = 1;
  std::size_t n = 100000;
  std::string in;
  std::string out;
  std::string config;
  std::string cumulative_out;
  std::string mode = "discrete";
  std::string policy = "optimal";
  double epsilon = 0.1;
  bool include_auto = false;
  double first_distance = 2.0;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir;
};

const std::vector<double> kSolveDefault = {3.0};

std::string fmt(double v) { return format_number(v); }

GameParams params_for(double c, const Options& o) {
  GameParams p;
  p.crash_cost = c;
  p.turn_cost = o.turn_cost;
  p.max_y = std::max(p.max_y, o.y + 2);
  p.max_x = std::max(p.max_x, o.x + 2);
  p.validate();
  return p;
}

ScenarioConfig scenario_for(const Options& o) {
  return o.config.empty() ? ScenarioConfig{} : load_scenario(o.config);
}

// Writes to the --out file when given, otherwise to stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw Error("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void close() {
    if (file_) {
      file_->close();
      if (!*file_) throw Error("write failed");
    }
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string_view kind_name(EquilibriumKind k) { return k == EquilibriumKind::kMixed ? "mixed" : "pure"; }

void run_solve(const Options& o) {
  if (o.y < 0 || o.x < 0) throw ValidationError("--y and --x must be non-negative");
  Output out(o.out);
  auto& os = out.stream();
  for (double c : o.ucrash) {
    const Game game(params_for(c, o));
    const GameState start{o.y, o.x};
    const UtilityPair v = game.value(start);
    const Equilibrium e = game.policy(start);
    os << "# C=" << format_crash_cost(c) << " turn_cost=" << fmt(o.turn_cost) << " start=" << to_string(start) << "\n";
    os << "# value vehicle=" << fmt(v.vehicle) << " pedestrian=" << fmt(v.pedestrian) << "\n";
    os << "# policy p_vehicle_slow=" << fmt(e.p_vehicle_slow)
       << " p_pedestrian_slow=" << fmt(e.p_pedestrian_slow) << " kind=" << kind_name(e.kind) << "\n";
    os << "y,x,p_vehicle_slow,p_pedestrian_slow,kind,value_vehicle,value_pedestrian\n";
    for (int y = 0; y <= o.y; ++y) {
      for (int x = 0; x <= o.x; ++x) {
        const GameState s{y, x};
        if (game.is_terminal(s)) continue;
        const Equilibrium eq = game.policy(s);
        const UtilityPair u = game.value(s);
        os << y << "," << x << "," << fmt(eq.p_vehicle_slow) << "," << fmt(eq.p_pedestrian_slow) << ","
           << kind_name(eq.kind) << "," << fmt(u.vehicle) << "," << fmt(u.pedestrian) << "\n";
      }
    }
  }
  out.close();
}

void run_curve(const Options& o) {
  if (o.kmax < 2) throw ValidationError("--kmax must be at least 2");
  std::vector<std::vector<YieldPoint>> curves;
  for (double c : o.ucrash) curves.push_back(yield_curve_model(params_for(c, o), o.kmax));

  Output out(o.out);
  auto& os = out.stream();
  os << "k";
  for (double c : o.ucrash) os << ",C_" << format_crash_cost(c);
  os << "\n";
  for (std::size_t i = 0; i < curves.front().size(); ++i) {
    os << curves.front()[i].k;
    for (const auto& curve : curves) os << "," << fmt(curve[i].p_yield);
    os << "\n";
  }
  out.close();

  if (o.cumulative_out.empty()) return;
  Output cum(o.cumulative_out);
  auto& cs = cum.stream();
  std::vector<std::vector<SurvivalPoint>> survival;
  for (const auto& curve : curves) survival.push_back(cumulative_no_yield({curve.rbegin(), curve.rend()}));
  cs << "k";
  for (double c : o.ucrash) cs << ",C_" << format_crash_cost(c);
  cs << "\n";
  for (std::size_t i = 0; i < survival.front().size(); ++i) {
    cs << survival.front()[i].k;
    for (const auto& s : survival) cs << "," << fmt(s[i].survival);
    cs << "\n";
  }
  cum.close();
}

void run_simulate_discrete(const Options& o) {
  if (o.ucrash.size() != 1) throw ValidationError("simulate takes a single --ucrash value");
  if (o.n < 1) throw ValidationError("--n must be at least 1");
  const Game game(params_for(o.ucrash.front(), o));
  const GameState start{o.y, o.x};
  Rng rng(o.seed);
  const OutcomeStats st = monte_carlo_stats(game, start, o.n, rng);
  const UtilityPair v = game.value(start);
  std::cout << "episodes " << st.n << "\n"
            << "crash_rate " << fmt(st.crash_rate) << " se " << fmt(st.crash_rate_se) << "\n"
            << "vehicle_first_rate " << fmt(st.vehicle_win_rate) << "\n"
            << "pedestrian_first_rate " << fmt(st.pedestrian_win_rate) << " se "
            << fmt(st.pedestrian_win_rate_se) << "\n"
            << "mean_utility vehicle " << fmt(st.mean_utilities.vehicle) << " se "
            << fmt(st.se_utilities.vehicle) << " pedestrian " << fmt(st.mean_utilities.pedestrian)
            << " se " << fmt(st.se_utilities.pedestrian) << "\n"
            << "game_value vehicle " << fmt(v.vehicle) << " pedestrian " << fmt(v.pedestrian) << "\n";

  if (o.out.empty()) return;
  // Same seed and draw order as the summary above.
  Output out(o.out);
  auto& os = out.stream();
  Rng replay(o.seed);
  const StagePolicy vp = optimal_vehicle_policy(game);
  const StagePolicy pp = optimal_pedestrian_policy(game);
  os << "episode,t,y,x,vehicle_action,pedestrian_action,outcome\n";
  for (std::size_t i = 0; i < o.n; ++i) {
    const Episode ep = play_discrete_episode(game, start, vp, pp, replay);
    for (const auto& t : ep.turns) {
      os << i << "," << t.t << "," << t.state.y << "," << t.state.x << "," << to_string(t.vehicle) << ","
         << to_string(t.pedestrian) << "," << to_string(ep.outcome) << "\n";
    }
  }
  out.close();
}

void run_simulate_crossings(const Options& o) {
  if (o.ucrash.size() != 1) throw ValidationError("simulate takes a single --ucrash value");
  if (o.n < 1) throw ValidationError("--n must be at least 1");
  const ScenarioConfig config = scenario_for(o);
  const Game game(params_for(o.ucrash.front(), o));
  const PedestrianPolicy policy = scripted_pedestrian(parse_scripted_pedestrian(o.policy), o.epsilon);

  Output out(o.out);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < o.n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "sim%04zu", i + 1);
    const SessionRun run =
        run_self_play_session(config, game, policy, Rng::derive(o.seed, {i}).next_u64(), id);
    for (Outcome oc : run.outcomes) ++counts[static_cast<int>(oc)];
    if (!o.out.empty()) write_crossing_log(out.stream(), run.records);
  }
  out.close();
  std::cout << "sessions " << o.n << "\n"
            << "crossings " << o.n * static_cast<std::size_t>(config.crossing.crossings_total) << "\n"
            << "PEDESTRIAN_FIRST " << counts[static_cast<int>(Outcome::kPedestrianFirst)] << "\n"
            << "VEHICLE_FIRST " << counts[static_cast<int>(Outcome::kVehicleFirst)] << "\n"
            << "CRASH " << counts[static_cast<int>(Outcome::kCrash)] << "\n";
}

void run_fit(const Options& o) {
  if (o.in.empty()) throw ValidationError("--in is required");
  const ScenarioConfig config = scenario_for(o);
  GameParams params;
  params.turn_cost = o.turn_cost;
  FilterOptions filter;
  filter.first_distance_m = o.first_distance;
  filter.include_auto_played = o.include_auto;
  const Analysis a = analyze_records(read_crossing_log_file(o.in), config.geometry, o.ucrash, params,
                                     filter, o.kmax);
  for (const auto& w : a.log.warnings) std::cerr << "warning: " << w << "\n";

  Output out(o.out);
  out.stream() << summary_json(a);
  out.close();
  if (!o.cumulative_out.empty()) {
    Output cum(o.cumulative_out);
    write_cumulative_csv(cum.stream(), a.fit, config.geometry.ped_box);
    cum.close();
  }
}

HttpServer* g_server = nullptr;

void run_serve(const Options& o) {
  if (o.port < 0 || o.port > 65535) throw ValidationError("--port must be in 0..65535");
  SessionStore store(o.data_dir, o.seed);
  HttpServer server(store);
  const int port = server.bind(o.host, o.port);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "listening on http://" << o.host << ":" << port << std::endl;
  server.listen();
  g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Sequential Chicken pedestrian-vehicle interaction model"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // --ucrash defaults differ between subcommands.
  std::vector<double> grid_ucrash = kDefaultCrashGrid;
  std::vector<double> solve_ucrash = kSolveDefault;
  std::vector<double> sim_ucrash = kSolveDefault;
  auto ucrash_opt = [&](CLI::App* sub, std::vector<double>& target) {
    sub->add_option("--ucrash", target, "crash cost C in seconds (comma-separated list ok)")
        ->delimiter(',')
        ->default_str(CLI::detail::join(target, [](double v) { return format_crash_cost(v); }, ","));
    sub->add_option("--turn-cost", o.turn_cost, "seconds charged per turn");
  };

  auto* solve = app.add_subcommand("solve", "game value and equilibrium policy table");
  solve->add_option("--y", o.y, "vehicle boxes to the collision point");
  solve->add_option("--x", o.x, "pedestrian boxes to the collision point");
  solve->add_option("--out", o.out, "output file (stdout when empty)");

  auto* curve = app.add_subcommand("curve", "model yield curves P(SLOW) at symmetric states");
  curve->add_option("--kmax", o.kmax, "largest bin k");
  curve->add_option("--out", o.out, "yield curve CSV (stdout when empty)");
  curve->add_option("--cumulative-out", o.cumulative_out, "cumulative no-yield CSV");

  auto* sim = app.add_subcommand("simulate", "seeded discrete episodes or continuous self-play crossings");
  sim->add_option("--mode", o.mode, "discrete | crossings")
      ->check(CLI::IsMember({"discrete", "crossings"}));
  sim->add_option("--y", o.y, "vehicle start box (discrete)");
  sim->add_option("--x", o.x, "pedestrian start box (discrete)");
  auto* n_opt = sim->add_option("--n", o.n, "episodes (discrete); self-play sessions in crossings mode, where it defaults to 1");
  sim->add_option("--seed", o.seed, "random seed");
  sim->add_option("--policy", o.policy,
                  "pedestrian policy for crossings: always-fast | slow-when-interesting | optimal | noisy-optimal");
  sim->add_option("--epsilon", o.epsilon, "action flip probability of noisy-optimal");
  sim->add_option("--config", o.config, "scenario config file (crossings)");
  sim->add_option("--out", o.out, "per-turn CSV (discrete) or crossing log JSONL (crossings)");

  auto* fit = app.add_subcommand("fit", "fit the crash cost to a crossing log");
  fit->add_option("--in", o.in, "crossing log, one JSON record per line")->required();
  fit->add_option("--kmax", o.kmax, "largest bin k in curves");
  fit->add_option("--config", o.config, "scenario config file (for ped_box)");
  fit->add_option("--first-distance", o.first_distance, "meters dropped from the start of each crossing");
  fit->add_flag("--include-auto-played", o.include_auto, "keep auto-played (timed-out) turns");
  fit->add_option("--out", o.out, "summary JSON (stdout when empty)");
  fit->add_option("--cumulative-out", o.cumulative_out, "empirical and model cumulative no-yield CSV");

  auto* serve = app.add_subcommand("serve", "run the live session server");
  serve->add_option("--host", o.host, "bind address");
  serve->add_option("--port", o.port, "TCP port (0 picks a free port)");
  serve->add_option("--seed", o.seed, "base seed for sessions created without one");
  serve->add_option("--data", o.data_dir, "directory for session logs (in-memory when empty)");

  ucrash_opt(solve, solve_ucrash);
  ucrash_opt(curve, grid_ucrash);
  ucrash_opt(sim, sim_ucrash);
  ucrash_opt(fit, grid_ucrash);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "seqchicken: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*solve) {
      o.ucrash = solve_ucrash;
      run_solve(o);
    } else if (*curve) {
      o.ucrash = grid_ucrash;
      run_curve(o);
    } else if (*sim) {
      o.ucrash = sim_ucrash;
      if (o.mode == "discrete") {
        run_simulate_discrete(o);
      } else {
        if (n_opt->count() == 0) o.n = 1;
        run_simulate_crossings(o);
      }
    } else if (*fit) {
      o.ucrash = grid_ucrash;
      run_fit(o);
    } else if (*serve) {
      run_serve(o);
    }
  } catch (const std::exception& e) {
    std::cerr << "seqchicken: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
