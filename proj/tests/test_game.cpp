#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "seqchicken/game.hpp"

using namespace seqchicken;

namespace {

GameParams params_with(double c) {
  GameParams p;
  p.crash_cost = c;
  return p;
}

// The one-shot Chicken game: mutual SLOW 0, yielder -1 / winner +1, mutual
// FAST -1000.
PayoffMatrix one_shot_chicken() {
  PayoffMatrix m;
  m.at(Action::kSlow, Action::kSlow) = {0.0, 0.0};
  m.at(Action::kSlow, Action::kFast) = {-1.0, 1.0};
  m.at(Action::kFast, Action::kSlow) = {1.0, -1.0};
  m.at(Action::kFast, Action::kFast) = {-1000.0, -1000.0};
  return m;
}

void check_no_profitable_deviation(const PayoffMatrix& m, const Equilibrium& e) {
  const auto g = oracle::from_matrix(m);
  CHECK(oracle::max_deviation_gain(g, {e.p_vehicle_slow, e.p_pedestrian_slow}) <=
        1e-9 * std::max(1.0, std::abs(m.at(Action::kFast, Action::kFast).vehicle)));
}

}  // namespace

TEST_CASE("actions and displacement") {
  CHECK(displacement(Action::kSlow) == 1);
  CHECK(displacement(Action::kFast) == 2);
  CHECK(parse_action("slow") == Action::kSlow);
  CHECK(parse_action("FAST") == Action::kFast);
  CHECK_THROWS_AS(parse_action("STOP"), ValidationError);
}

TEST_CASE("crash region") {
  CHECK(in_crash_region({0, 0}));
  CHECK(in_crash_region({1, 0}));
  CHECK(in_crash_region({1, 1}));
  CHECK_FALSE(in_crash_region({2, 1}));
  CHECK_FALSE(in_crash_region({-1, 0}));
}

TEST_CASE("params validation") {
  GameParams p;
  p.crash_cost = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = GameParams{};
  p.turn_cost = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = GameParams{};
  p.max_x = 1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_SUITE("solve_stage_game") {
  TEST_CASE("one-shot chicken has the 0.001 mixed equilibrium") {
    const auto e = solve_stage_game(one_shot_chicken());
    CHECK(e.kind == EquilibriumKind::kMixed);
    CHECK(1.0 - e.p_vehicle_slow == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(1.0 - e.p_pedestrian_slow == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(std::abs(e.value.vehicle + 0.001) < 1e-9);
    CHECK(std::abs(e.value.pedestrian + 0.001) < 1e-9);
  }

  TEST_CASE("strict dominance gives a pure FAST/FAST equilibrium") {
    PayoffMatrix m;
    // FAST adds +1 for whoever moves FAST.
    for (Action v : kActions)
      for (Action p : kActions)
        m.at(v, p) = {v == Action::kFast ? 1.0 : 0.0,
                      p == Action::kFast ? 1.0 : 0.0};
    const auto e = solve_stage_game(m);
    CHECK(e.kind == EquilibriumKind::kPure);
    CHECK(e.p_vehicle_slow == 0.0);
    CHECK(e.p_pedestrian_slow == 0.0);
    CHECK(e.value == UtilityPair{1.0, 1.0});
  }

  TEST_CASE("total indifference is rejected and names both players") {
    PayoffMatrix m;  // all (0, 0)
    try {
      solve_stage_game(m);
      FAIL("expected DegenerateGameError");
    } catch (const DegenerateGameError& e) {
      CHECK(e.vehicle_indifferent());
      CHECK(e.pedestrian_indifferent());
      CHECK_FALSE(e.state().has_value());
    }
  }

  TEST_CASE("one indifferent player is named") {
    PayoffMatrix m;
    m.at(Action::kSlow, Action::kSlow) = {-1.0, -3.0};
    m.at(Action::kSlow, Action::kFast) = {-1.0, -2.0};
    m.at(Action::kFast, Action::kSlow) = {-1.0, -3.0};
    m.at(Action::kFast, Action::kFast) = {-1.0, -2.0};
    try {
      solve_stage_game(m);
      FAIL("expected DegenerateGameError");
    } catch (const DegenerateGameError& e) {
      CHECK(e.vehicle_indifferent());
      CHECK_FALSE(e.pedestrian_indifferent());
    }
    const auto e = solve_stage_game(m, IndifferencePolicy::kUniform);
    CHECK(e.p_vehicle_slow == 0.5);
    CHECK(e.p_pedestrian_slow == 0.0);
    CHECK(e.value == UtilityPair{-1.0, -2.0});
  }

  TEST_CASE("weak dominance resolves a one-column tie") {
    // Pedestrian ties against vehicle FAST but strictly prefers FAST against
    // vehicle SLOW; vehicle strictly prefers FAST.
    PayoffMatrix m;
    m.at(Action::kSlow, Action::kSlow) = {-5.0, -4.0};
    m.at(Action::kSlow, Action::kFast) = {-4.0, -2.0};
    m.at(Action::kFast, Action::kSlow) = {-2.0, -3.0};
    m.at(Action::kFast, Action::kFast) = {-3.0, -3.0};
    const auto e = solve_stage_game(m);
    CHECK(e.p_vehicle_slow == 0.0);
    CHECK(e.p_pedestrian_slow == 0.0);
  }

  TEST_CASE("non-finite entries are rejected") {
    PayoffMatrix m = one_shot_chicken();
    m.at(Action::kSlow, Action::kSlow).vehicle = NAN;
    CHECK_THROWS_AS(solve_stage_game(m), ValidationError);
  }

  TEST_CASE("matching pennies has the unique 1/2 mixed equilibrium") {
    PayoffMatrix m;
    m.at(Action::kSlow, Action::kSlow) = {1.0, -1.0};
    m.at(Action::kSlow, Action::kFast) = {-1.0, 1.0};
    m.at(Action::kFast, Action::kSlow) = {-1.0, 1.0};
    m.at(Action::kFast, Action::kFast) = {1.0, -1.0};
    const auto e = solve_stage_game(m);
    CHECK(e.p_vehicle_slow == doctest::Approx(0.5));
    CHECK(e.p_pedestrian_slow == doctest::Approx(0.5));
  }

  TEST_CASE("property: random games satisfy the equilibrium conditions") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
      const auto m = oracle::random_matrix(rng);
      const auto e = solve_stage_game(m);
      CHECK(e.p_vehicle_slow >= 0.0);
      CHECK(e.p_vehicle_slow <= 1.0);
      CHECK(e.p_pedestrian_slow >= 0.0);
      CHECK(e.p_pedestrian_slow <= 1.0);
      check_no_profitable_deviation(m, e);
      const auto v = expected_payoff(m, e.p_vehicle_slow, e.p_pedestrian_slow);
      CHECK(v.vehicle == doctest::Approx(e.value.vehicle));
      CHECK(v.pedestrian == doctest::Approx(e.value.pedestrian));
      if (e.kind == EquilibriumKind::kPure) {
        CHECK((e.p_vehicle_slow == 0.0 || e.p_vehicle_slow == 1.0));
        CHECK((e.p_pedestrian_slow == 0.0 || e.p_pedestrian_slow == 1.0));
      }
    }
  }
}

TEST_SUITE("build_stage_matrix") {
  TEST_CASE("(2,2) only has crash successors") {
    GameParams p = params_with(3.0);
    const auto m = build_stage_matrix({2, 2}, p);
    CHECK(m.at(Action::kFast, Action::kFast) == UtilityPair{-4.0, -4.0});
    for (Action v : kActions)
      for (Action a : kActions) CHECK(m.at(v, a) == UtilityPair{-4.0, -4.0});
  }

  TEST_CASE("(3,2) FAST/FAST lands in the crash region") {
    GameParams p = params_with(3.0);
    const auto m = build_stage_matrix({3, 2}, p);
    CHECK(m.at(Action::kFast, Action::kFast) == UtilityPair{-4.0, -4.0});
  }

  TEST_CASE("(5,5) matches the exhaustive tree oracle") {
    GameParams p = params_with(3.0);
    const auto m = build_stage_matrix({5, 5}, p);
    const oracle::BruteForceGame brute(3.0, 1.0);
    const auto g = brute.matrix(5, 5);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        CHECK(m.entries[i][j].vehicle == doctest::Approx(g.a[i][j]).epsilon(1e-12));
        CHECK(m.entries[i][j].pedestrian == doctest::Approx(g.b[i][j]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("bounds and terminal states are rejected") {
    GameParams p = params_with(3.0);
    p.max_y = 10;
    p.max_x = 10;
    CHECK_THROWS_AS(build_stage_matrix({11, 5}, p), OutOfRangeError);
    CHECK_THROWS_AS(build_stage_matrix({5, -3}, p), OutOfRangeError);
    CHECK_THROWS_AS(build_stage_matrix({1, 1}, p), ValidationError);
  }
}

TEST_SUITE("game_value") {
  TEST_CASE("crash terminal") {
    CHECK(game_value({1, 1}, params_with(3.0)) == UtilityPair{-3.0, -3.0});
  }

  TEST_CASE("deterministic continuation after one agent passed") {
    CHECK(game_value({-1, 3}, params_with(3.0)) == UtilityPair{0.0, -2.0});
    CHECK(game_value({4, -2}, params_with(3.0)) == UtilityPair{-3.0, 0.0});
    CHECK(game_value({-1, -2}, params_with(3.0)) == UtilityPair{0.0, 0.0});
  }

  TEST_CASE("(5,5) equals the un-memoized oracle") {
    const auto v = game_value({5, 5}, params_with(3.0));
    const auto [ov, op] = oracle::BruteForceGame(3.0, 1.0).value(5, 5);
    CHECK(std::abs(v.vehicle - ov) <= 1e-12);
    CHECK(std::abs(v.pedestrian - op) <= 1e-12);
  }

  TEST_CASE("(3,3) closed form: q = (C - 2) / (2C - 2)") {
    for (double c : {3.0, 10.0, 1000.0}) {
      const auto e = policy({3, 3}, params_with(c));
      CHECK(e.p_pedestrian_slow == doctest::Approx((c - 2.0) / (2.0 * c - 2.0)));
    }
  }

  TEST_CASE("reject policy propagates degeneracy with the state attached") {
    GameParams p = params_with(3.0);
    p.indifference = IndifferencePolicy::kReject;
    try {
      game_value({0, 2}, p);
      FAIL("expected DegenerateGameError");
    } catch (const DegenerateGameError& e) {
      REQUIRE(e.state().has_value());
      CHECK(*e.state() == GameState{0, 2});
    }
  }

  TEST_CASE("property: symmetry of values") {
    for (double c : {3.0, 10.0, 100.0}) {
      Game g(params_with(c));
      for (int a = -2; a <= 20; ++a) {
        for (int b = -2; b <= 20; ++b) {
          const auto v = g.value({a, b});
          const auto w = g.value({b, a});
          CHECK(v.vehicle == doctest::Approx(w.pedestrian).epsilon(1e-12));
          CHECK(v.pedestrian == doctest::Approx(w.vehicle).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("property: crash jump impossible") {
    for (int y = 2; y <= 30; ++y) {
      for (int x = 2; x <= 30; ++x) {
        for (Action av : kActions) {
          for (Action ap : kActions) {
            const GameState n{y - displacement(av), x - displacement(ap)};
            if (n.y <= 1 && n.x <= 1) CHECK(in_crash_region(n));
          }
        }
      }
    }
  }

  TEST_CASE("property: turn index does not change values") {
    const int max_pos = 10;
    const auto tables = oracle::turn_indexed_values(10.0, 1.0, max_pos, 2 * max_pos + 4);
    Game g(params_with(10.0));
    for (int y = -2; y <= max_pos; ++y) {
      for (int x = -2; x <= max_pos; ++x) {
        // Any turn whose remaining horizon still covers the state agrees.
        for (int t : {0, 1, 3}) {
          const auto& table = tables[static_cast<std::size_t>(t)];
          auto it = table.find({y, x});
          REQUIRE(it != table.end());
          const auto v = g.value({y, x});
          CHECK(std::abs(it->second.first - v.vehicle) <= 1e-12);
          CHECK(std::abs(it->second.second - v.pedestrian) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("property: every reachable stage equilibrium up to 15x15") {
    for (double c : {2.0, 3.0, 10.0, 1000.0}) {
      GameParams p = params_with(c);
      Game g(p);
      for (int y = 0; y <= 15; ++y) {
        for (int x = 0; x <= 15; ++x) {
          if (g.is_terminal({y, x})) continue;
          const auto m = g.stage_matrix({y, x});
          const auto e = g.policy({y, x});
          const auto dev = oracle::max_deviation_gain(
              oracle::from_matrix(m), {e.p_vehicle_slow, e.p_pedestrian_slow});
          CHECK(dev <= 1e-9);
          CHECK(e.p_vehicle_slow + (1.0 - e.p_vehicle_slow) == 1.0);
        }
      }
    }
  }

  TEST_CASE("concurrent queries agree with a serial evaluation") {
    GameParams p = params_with(10.0);
    Game shared(p);
    std::vector<std::thread> threads;
    std::vector<std::vector<UtilityPair>> results(4);
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (int k = 40; k >= 0; --k) results[t].push_back(shared.value({k, 40 - k + t}));
      });
    }
    for (auto& th : threads) th.join();
    Game serial(p);
    for (int t = 0; t < 4; ++t) {
      for (int k = 40, i = 0; k >= 0; --k, ++i) {
        CHECK(results[t][i] == serial.value({k, 40 - k + t}));
      }
    }
  }
}

TEST_SUITE("policy") {
  TEST_CASE("symmetric states give equal SLOW probabilities") {
    Game g(params_with(3.0));
    for (int k = 2; k <= 30; ++k) {
      const auto e = g.policy({k, k});
      CHECK(e.p_vehicle_slow == doctest::Approx(e.p_pedestrian_slow).epsilon(1e-12));
    }
  }

  TEST_CASE("resolved conflict is pure FAST") {
    const auto e = policy({-1, 5}, params_with(3.0));
    CHECK(e.kind == EquilibriumKind::kPure);
    CHECK(e.p_pedestrian_slow == 0.0);
    CHECK(e.p_vehicle_slow == 0.0);
  }

  TEST_CASE("(2,2) at C=1000 is near 1/2") {
    const auto e = policy({2, 2}, params_with(1000.0));
    CHECK(std::abs(e.p_pedestrian_slow - 0.5) <= 0.05);
    const oracle::BruteForceGame brute(1000.0, 1.0);
    CHECK(brute.policy(2, 2).q == doctest::Approx(e.p_pedestrian_slow));
  }

  TEST_CASE("matches the brute-force policy on small boards") {
    for (double c : {3.0, 10.0}) {
      Game g(params_with(c));
      const oracle::BruteForceGame brute(c, 1.0);
      for (int y = 0; y <= 7; ++y) {
        for (int x = 0; x <= 7; ++x) {
          if (g.is_terminal({y, x})) continue;
          const auto e = g.policy({y, x});
          const auto o = brute.policy(y, x);
          CHECK(e.p_vehicle_slow == doctest::Approx(o.p).epsilon(1e-12));
          CHECK(e.p_pedestrian_slow == doctest::Approx(o.q).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_SUITE("yield curves") {
  TEST_CASE("model curve is a probability and starts at k=2") {
    for (double c : {2.0, 3.0, 1e6}) {
      const auto curve = yield_curve_model(params_with(c), 20);
      REQUIRE(curve.size() == 19);
      CHECK(curve.front().k == 2);
      CHECK(curve.back().k == 20);
      for (const auto& pt : curve) {
        CHECK(pt.p_yield >= 0.0);
        CHECK(pt.p_yield <= 1.0);
      }
    }
  }

  TEST_CASE("C=3 curve rises toward 1/2 as the pedestrian gets closer") {
    const auto curve = yield_curve_model(params_with(3.0), 12);
    // Frozen from the brute-force oracle.
    const oracle::BruteForceGame brute(3.0, 1.0);
    for (const auto& pt : curve) {
      CHECK(pt.p_yield == doctest::Approx(brute.policy(pt.k, pt.k).q).epsilon(1e-12));
    }
    CHECK(curve[0].p_yield == 0.5);                    // k = 2
    CHECK(curve[1].p_yield == doctest::Approx(0.25));  // k = 3
    CHECK(curve[2].p_yield == doctest::Approx(0.4));   // k = 4
    // Averages over the far half sit below the near half.
    double near = 0.0, far = 0.0;
    for (int i = 0; i < 5; ++i) near += curve[static_cast<std::size_t>(i)].p_yield;
    for (int i = 5; i < 10; ++i) far += curve[static_cast<std::size_t>(i)].p_yield;
    CHECK(near > far);
  }

  TEST_CASE("yield is non-decreasing in C") {
    const std::vector<double> grid = {2, 3, 10, 100, 1e3, 1e4, 1e6};
    std::vector<std::vector<YieldPoint>> curves;
    for (double c : grid) curves.push_back(yield_curve_model(params_with(c), 15));
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      for (std::size_t k = 0; k < curves[i].size(); ++k) {
        CHECK(curves[i][k].p_yield <= curves[i + 1][k].p_yield + 1e-12);
      }
    }
  }

  TEST_CASE("k_max below 2 is rejected") {
    CHECK_THROWS_AS(yield_curve_model(params_with(3.0), 1), ValidationError);
  }

  TEST_CASE("cumulative no-yield") {
    const auto never = cumulative_no_yield({{5, 0.0}, {4, 0.0}, {3, 0.0}});
    for (const auto& s : never) CHECK(s.survival == 1.0);

    const auto half = cumulative_no_yield({{3, 0.5}, {2, 0.5}, {1, 0.5}});
    REQUIRE(half.size() == 3);
    CHECK(half[0].survival == 1.0);
    CHECK(half[1].survival == 0.5);
    CHECK(half[2].survival == 0.25);

    CHECK_THROWS_AS(cumulative_no_yield({{2, 0.1}, {3, 0.1}}), ValidationError);
    CHECK_THROWS_AS(cumulative_no_yield({{3, 1.5}}), ValidationError);
  }

  TEST_CASE("property: cumulative transform is monotone from 1") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<YieldPoint> curve;
      for (int k = 30; k >= 0; --k) curve.push_back({k, u(rng)});
      const auto s = cumulative_no_yield(curve);
      CHECK(s.front().survival == 1.0);
      for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i].survival <= s[i - 1].survival);
    }
  }
}
