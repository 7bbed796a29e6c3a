#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "seqchicken/fitting.hpp"
#include "seqchicken/session.hpp"
#include "seqchicken/simulator.hpp"

namespace py = pybind11;
using namespace seqchicken;

namespace {

LogReadResult read_text(const std::string& text) {
  std::istringstream in(text);
  return read_crossing_log(in);
}

std::vector<DecisionPoint> to_points(const std::vector<std::pair<int, Action>>& raw) {
  std::vector<DecisionPoint> points;
  points.reserve(raw.size());
  for (const auto& [k, a] : raw) points.push_back({k, a});
  return points;
}

GameParams make_params(double crash_cost, double turn_cost, int max_y, int max_x) {
  GameParams p;
  p.crash_cost = crash_cost;
  p.turn_cost = turn_cost;
  p.max_y = max_y;
  p.max_x = max_x;
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sequential Chicken game solver, simulator, fitter and session store";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<OutOfRangeError>(m, "OutOfRangeError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<FitFailure>(m, "FitFailure", error.ptr());
  py::register_exception<UnknownSessionError>(m, "UnknownSessionError", PyExc_KeyError);
  py::register_exception<SequencingError>(m, "SequencingError", error.ptr());
  py::register_exception<SessionFinishedError>(m, "SessionFinishedError", error.ptr());
  py::register_exception<ConcurrentSubmitError>(m, "ConcurrentSubmitError", error.ptr());

  py::enum_<Action>(m, "Action").value("SLOW", Action::kSlow).value("FAST", Action::kFast);
  py::enum_<Outcome>(m, "Outcome")
      .value("PENDING", Outcome::kPending)
      .value("CRASH", Outcome::kCrash)
      .value("VEHICLE_FIRST", Outcome::kVehicleFirst)
      .value("PEDESTRIAN_FIRST", Outcome::kPedestrianFirst);
  py::enum_<EquilibriumKind>(m, "EquilibriumKind")
      .value("MIXED", EquilibriumKind::kMixed)
      .value("PURE", EquilibriumKind::kPure);

  py::class_<GameParams>(m, "GameParams")
      .def(py::init(&make_params), py::arg("crash_cost") = 3.0, py::arg("turn_cost") = 1.0,
           py::arg("max_y") = 64, py::arg("max_x") = 64)
      .def_readonly("crash_cost", &GameParams::crash_cost)
      .def_readonly("turn_cost", &GameParams::turn_cost)
      .def_readonly("max_y", &GameParams::max_y)
      .def_readonly("max_x", &GameParams::max_x);

  py::class_<Equilibrium>(m, "Equilibrium")
      .def_readonly("p_vehicle_slow", &Equilibrium::p_vehicle_slow)
      .def_readonly("p_pedestrian_slow", &Equilibrium::p_pedestrian_slow)
      .def_property_readonly("value",
                             [](const Equilibrium& e) { return py::make_tuple(e.value.vehicle, e.value.pedestrian); })
      .def_readonly("kind", &Equilibrium::kind);

  py::class_<Game>(m, "Game")
      .def(py::init<GameParams>(), py::arg("params") = GameParams{})
      .def_property_readonly("params", &Game::params)
      .def(
          "value",
          [](const Game& g, int y, int x) {
            const UtilityPair u = g.value({y, x});
            return py::make_tuple(u.vehicle, u.pedestrian);
          },
          py::arg("y"), py::arg("x"), "(vehicle, pedestrian) expected utilities")
      .def(
          "policy", [](const Game& g, int y, int x) { return g.policy({y, x}); }, py::arg("y"), py::arg("x"))
      .def(
          "yield_curve",
          [](const Game& g, int k_max) {
            std::vector<std::pair<int, double>> out;
            for (const auto& p : yield_curve_model(g, k_max)) out.emplace_back(p.k, p.p_yield);
            return out;
          },
          py::arg("k_max") = 15, "[(k, P(SLOW) at (k, k))] for k = 2..k_max")
      .def(
          "cumulative_no_yield",
          [](const Game& g, int k_max) {
            auto curve = yield_curve_model(g, k_max);
            std::vector<std::pair<int, double>> out;
            for (const auto& s : cumulative_no_yield({curve.rbegin(), curve.rend()})) out.emplace_back(s.k, s.survival);
            return out;
          },
          py::arg("k_max") = 15, "[(k, survival)] in descending k");

  m.def(
      "monte_carlo",
      [](const Game& g, int y, int x, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        OutcomeStats st;
        {
          py::gil_scoped_release release;
          st = monte_carlo_stats(g, {y, x}, n, rng);
        }
        py::dict d;
        d["n"] = st.n;
        d["crash_rate"] = st.crash_rate;
        d["vehicle_first_rate"] = st.vehicle_win_rate;
        d["pedestrian_first_rate"] = st.pedestrian_win_rate;
        d["mean_utilities"] = py::make_tuple(st.mean_utilities.vehicle, st.mean_utilities.pedestrian);
        d["se_utilities"] = py::make_tuple(st.se_utilities.vehicle, st.se_utilities.pedestrian);
        return d;
      },
      py::arg("game"), py::arg("y"), py::arg("x"), py::arg("n"), py::arg("seed") = 1);

  m.def(
      "sample_decisions",
      [](const Game& g, int k_lo, int k_hi, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::pair<int, Action>> out;
        for (const auto& p : sample_model_decisions(g, k_lo, k_hi, n, rng)) out.emplace_back(p.k, p.action);
        return out;
      },
      py::arg("game"), py::arg("k_lo"), py::arg("k_hi"), py::arg("n"), py::arg("seed") = 1);

  m.def(
      "fit_ucrash",
      [](const std::vector<std::pair<int, Action>>& points, std::vector<double> grid, double turn_cost) {
        GameParams params;
        params.turn_cost = turn_cost;
        const FitResult fit = fit_ucrash(to_points(points), grid, params);
        py::dict lls;
        for (const auto& c : fit.candidates) {
          lls[py::float_(c.crash_cost)] = c.log_likelihood ? py::cast(*c.log_likelihood) : py::none();
        }
        py::dict d;
        d["best_C"] = fit.best_crash_cost;
        d["tied_with_best"] = fit.tied_with_best;
        d["log_likelihood"] = lls;
        d["points_used"] = fit.points_used;
        return d;
      },
      py::arg("points"), py::arg("grid") = kDefaultCrashGrid, py::arg("turn_cost") = 1.0,
      "points: [(k, Action)]");

  m.def(
      "analyze_log",
      [](const std::string& text, std::vector<double> grid, double ped_box) {
        ScenarioGeometry geom;
        geom.ped_box = ped_box;
        return summary_json(analyze_records(read_text(text), geom, grid));
      },
      py::arg("text"), py::arg("grid") = kDefaultCrashGrid, py::arg("ped_box") = 0.2,
      "Fit summary (JSON text) for a crossing log given as JSON-lines text");

  m.def(
      "self_play_log",
      [](double crash_cost, std::uint64_t seed, int crossings, const std::string& policy) {
        ScenarioConfig config;
        config.crossing.crossings_total = crossings;
        config.crossing.validate();
        GameParams p;
        p.crash_cost = crash_cost;
        p.validate();
        const Game game(p);
        const SessionRun run =
            run_self_play_session(config, game, scripted_pedestrian(parse_scripted_pedestrian(policy)), seed, "sim");
        std::ostringstream out;
        write_crossing_log(out, run.records);
        return out.str();
      },
      py::arg("crash_cost") = 3.0, py::arg("seed") = 1, py::arg("crossings") = 20,
      py::arg("policy") = "optimal", "Crossing log (JSON-lines text) of one self-play session");

  py::class_<SessionStore>(m, "SessionStore")
      .def(py::init([](const std::string& dir, std::uint64_t base_seed) {
             return std::make_unique<SessionStore>(dir, base_seed);
           }),
           py::arg("directory") = "", py::arg("base_seed") = 0)
      .def(
          "create_session",
          [](SessionStore& s, const std::string& config_json) {
            return s.create_session(session_config_from_json(nlohmann::json::parse(config_json)));
          },
          py::arg("config_json") = "{}")
      .def(
          "submit_action",
          [](SessionStore& s, const std::string& id, Action a, std::optional<int> turn) {
            return to_json(s.submit_action(id, a, turn)).dump();
          },
          py::arg("session_id"), py::arg("action"), py::arg("turn") = py::none(),
          "Turn result as JSON text")
      .def(
          "state", [](SessionStore& s, const std::string& id) { return to_json(s.session_state(id)).dump(); },
          py::arg("session_id"), "Session state as JSON text")
      .def("export", &SessionStore::export_sessions, py::arg("session_ids") = std::vector<std::string>{})
      .def("session_ids", &SessionStore::session_ids);
}
