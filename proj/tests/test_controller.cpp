#include <doctest.h>

#include <cmath>
#include <random>

#include "seqchicken/controller.hpp"

using namespace seqchicken;

namespace {

std::vector<TrackPoint> walking_track(Vec2 start, Vec2 velocity, double t_end,
                                      double dt = 0.5) {
  std::vector<TrackPoint> track;
  for (double t = 0.0; t <= t_end + 1e-9; t += dt) {
    track.push_back({t, start + t * velocity});
  }
  return track;
}

// Pedestrian walking up the y axis toward the vehicle path along the x axis.
ControllerSnapshot crossing_snapshot(double ped_distance, double car_distance,
                                     double t = 2.0) {
  const Vec2 v{0.0, 0.4};
  const Vec2 ped_now{0.0, -ped_distance};
  ControllerSnapshot snap;
  snap.t = t;
  snap.pedestrians = {walking_track(ped_now - t * v, v, t)};
  snap.vehicle_position = {-car_distance, 0.0};
  snap.commanded_speed = 0.2;
  return snap;
}

}  // namespace

TEST_SUITE("fit_constant_velocity") {
  TEST_CASE("two points") {
    const std::vector<TrackPoint> track = {{0.0, {0.0, 0.0}}, {1.0, {0.4, 0.0}}};
    const auto m = fit_constant_velocity(track);
    CHECK(m.velocity.x == doctest::Approx(0.4));
    CHECK(m.velocity.y == doctest::Approx(0.0));
    CHECK(m.t0 == 1.0);
    CHECK(m.origin.x == doctest::Approx(0.4));
  }

  TEST_CASE("insufficient and degenerate tracks") {
    const std::vector<TrackPoint> one = {{0.0, {0.0, 0.0}}};
    CHECK_THROWS_AS(fit_constant_velocity(one), InsufficientDataError);
    const std::vector<TrackPoint> same_t = {{1.0, {0.0, 0.0}}, {1.0, {1.0, 0.0}}};
    CHECK_THROWS_AS(fit_constant_velocity(same_t), DegenerateTrackError);
    const std::vector<TrackPoint> backwards = {{0.0, {0.0, 0.0}}, {2.0, {1.0, 0.0}}, {1.0, {2.0, 0.0}}};
    CHECK_THROWS_AS(fit_constant_velocity(backwards), ValidationError);
  }

  TEST_CASE("noisy line matches the closed-form least-squares slope") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<TrackPoint> track;
    for (int i = 0; i < 10; ++i) {
      const double t = 0.5 * i;
      track.push_back({t, {1.0 + 0.3 * t + noise(rng), -2.0 + 0.4 * t + noise(rng)}});
    }
    // slope = (n*Sum(tx) - Sum(t)Sum(x)) / (n*Sum(t^2) - Sum(t)^2)
    double st = 0, sx = 0, sy = 0, stt = 0, stx = 0, sty = 0;
    for (const auto& p : track) {
      st += p.t;
      sx += p.position.x;
      sy += p.position.y;
      stt += p.t * p.t;
      stx += p.t * p.position.x;
      sty += p.t * p.position.y;
    }
    const double n = 10.0;
    const double den = n * stt - st * st;
    const double vx = (n * stx - st * sx) / den;
    const double vy = (n * sty - st * sy) / den;
    const double x_at_t0 = (sx - vx * st) / n + vx * track.back().t;
    const auto m = fit_constant_velocity(track);
    CHECK(m.velocity.x == doctest::Approx(vx).epsilon(1e-10));
    CHECK(m.velocity.y == doctest::Approx(vy).epsilon(1e-10));
    CHECK(m.origin.x == doctest::Approx(x_at_t0).epsilon(1e-10));
  }

  TEST_CASE("window keeps only the newest samples") {
    std::vector<TrackPoint> track = walking_track({0, 0}, {1.0, 0.0}, 4.0);
    // Change direction for the last three samples.
    const double t_last = track.back().t;
    for (int i = 1; i <= 3; ++i) track.push_back({t_last + i, {4.0, static_cast<double>(i)}});
    const auto m = fit_constant_velocity(track, 3);
    CHECK(m.velocity.x == doctest::Approx(0.0));
    CHECK(m.velocity.y == doctest::Approx(1.0));
  }
}

TEST_SUITE("intersect_paths") {
  ScenarioGeometry straight() {
    ScenarioGeometry g;
    g.vehicle_path = {{-5.0, 0.0}, {5.0, 0.0}};
    return g;
  }

  TEST_CASE("perpendicular crossing") {
    const ConstantVelocityModel ped{{0.0, 5.0}, {0.0, -1.0}, 0.0};
    const auto hit = intersect_paths(ped, straight());
    REQUIRE(hit);
    CHECK(hit->point.x == doctest::Approx(0.0));
    CHECK(hit->point.y == doctest::Approx(0.0));
    CHECK(hit->pedestrian_distance == doctest::Approx(5.0));
    CHECK(hit->vehicle_arc == doctest::Approx(5.0));
  }

  TEST_CASE("parallel paths do not intersect") {
    const ConstantVelocityModel ped{{0.0, 5.0}, {1.0, 0.0}, 0.0};
    CHECK_FALSE(intersect_paths(ped, straight()).has_value());
  }

  TEST_CASE("walking away from the path") {
    const ConstantVelocityModel ped{{0.0, 5.0}, {0.0, 1.0}, 0.0};
    CHECK_FALSE(intersect_paths(ped, straight()).has_value());
  }

  TEST_CASE("collinear overlap has no unique intersection") {
    const ConstantVelocityModel ped{{-8.0, 0.0}, {1.0, 0.0}, 0.0};
    CHECK_THROWS_AS(intersect_paths(ped, straight()), NoUniqueIntersectionError);
  }

  TEST_CASE("second segment of a bent path") {
    ScenarioGeometry g;
    g.vehicle_path = {{0.0, 0.0}, {3.0, 0.0}, {3.0, 4.0}};
    // Ray from (6, 2) heading -x hits the vertical segment at (3, 2).
    const ConstantVelocityModel ped{{6.0, 2.0}, {-0.5, 0.0}, 0.0};
    const auto hit = intersect_paths(ped, g);
    REQUIRE(hit);
    CHECK(hit->point.x == doctest::Approx(3.0));
    CHECK(hit->point.y == doctest::Approx(2.0));
    CHECK(hit->pedestrian_distance == doctest::Approx(3.0));
    CHECK(hit->vehicle_arc == doctest::Approx(3.0 + 2.0));
  }

  TEST_CASE("first crossing wins on a zig-zag") {
    ScenarioGeometry g;
    g.vehicle_path = {{-5.0, 0.0}, {5.0, 0.0}, {5.0, 3.0}, {-5.0, 3.0}};
    const ConstantVelocityModel ped{{0.0, -2.0}, {0.0, 1.0}, 0.0};
    const auto hit = intersect_paths(ped, g);
    REQUIRE(hit);
    CHECK(hit->pedestrian_distance == doctest::Approx(2.0));
    CHECK(hit->vehicle_arc == doctest::Approx(5.0));
  }

  TEST_CASE("zero speed is rejected") {
    const ConstantVelocityModel ped{{0.0, 5.0}, {0.0, 0.0}, 0.0};
    CHECK_THROWS_AS(intersect_paths(ped, straight()), ValidationError);
  }

  TEST_CASE("projection onto the path") {
    ScenarioGeometry g;
    g.vehicle_path = {{0.0, 0.0}, {3.0, 0.0}, {3.0, 4.0}};
    CHECK(project_onto_path({1.0, 0.2}, g) == doctest::Approx(1.0));
    CHECK(project_onto_path({3.5, 1.0}, g) == doctest::Approx(4.0));
    CHECK(project_onto_path({-2.0, 0.0}, g) == doctest::Approx(0.0));
  }
}

TEST_CASE("time_to_point") {
  CHECK(time_to_point(4.0, 0.4) == doctest::Approx(10.0));
  CHECK(time_to_point(4.3, 0.2) == doctest::Approx(21.5));
  CHECK(time_to_point(0.0, 0.2) == 0.0);
  CHECK_THROWS_AS(time_to_point(1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(time_to_point(-1.0, 0.2), ValidationError);
}

TEST_CASE("is_interesting") {
  CHECK_FALSE(is_interesting(10.0, 12.0, 2.0));
  CHECK(is_interesting(10.0, 10.0, 2.0));
  CHECK(is_interesting(10.0, 11.5, 2.0));
  for (double t_pass : {1e-9, 0.1, 5.0}) CHECK(is_interesting(7.0, 7.0, t_pass));
}

TEST_CASE("quantize_distance") {
  CHECK(quantize_distance(0.99, 0.2) == 4);
  CHECK(quantize_distance(4.3, 0.08) == 53);
  CHECK(quantize_distance(-0.3, 0.2) == -2);
  CHECK(quantize_distance(-5.0, 0.2) == -2);
  CHECK(quantize_distance(0.0, 0.2) == 0);
  CHECK_THROWS_AS(quantize_distance(1.0, 0.0), ValidationError);

  SUBCASE("monotone") {
    int prev = quantize_distance(-1.0, 0.08);
    for (double d = -1.0; d < 6.0; d += 0.0137) {
      const int q = quantize_distance(d, 0.08);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_SUITE("controller_step") {
  GameParams params_c(double c) {
    GameParams p;
    p.crash_cost = c;
    return p;
  }

  TEST_CASE("no pedestrian leaves the speed unchanged") {
    const Game game(params_c(3.0));
    Rng rng(1);
    ControllerSnapshot snap;
    snap.commanded_speed = 0.2;
    const auto step = controller_step(snap, ScenarioGeometry{}, game, rng);
    CHECK_FALSE(step.info.interesting);
    CHECK(step.info.speed_multiplier == 1.0);
    CHECK(step.speed_command == 0.2);
    CHECK_FALSE(step.info.vehicle_action.has_value());
  }

  TEST_CASE("arrival times far apart are not interesting") {
    const Game game(params_c(3.0));
    Rng rng(1);
    ScenarioGeometry geom;
    geom.pass_clearance_time = 2.0;
    // Pedestrian 1 m away (2.5 s), vehicle 4 m away (20 s).
    const auto step = controller_step(crossing_snapshot(1.0, 4.0), geom, game, rng);
    CHECK_FALSE(step.info.interesting);
    CHECK(step.info.speed_multiplier == 1.0);
    CHECK(step.speed_command == 0.2);
  }

  TEST_CASE("interesting state quantizes both distances") {
    const Game game(params_c(3.0));
    Rng rng(1);
    const auto step = controller_step(crossing_snapshot(6.05, 4.3), ScenarioGeometry{}, game, rng);
    REQUIRE(step.info.interesting);
    CHECK(step.info.state.y == 53);
    CHECK(step.info.state.x == 30);
    CHECK(step.info.pedestrian_distance.value() == doctest::Approx(6.05));
    CHECK(step.info.vehicle_distance.value() == doctest::Approx(4.3));
    REQUIRE(step.info.equilibrium.has_value());
    REQUIRE(step.info.vehicle_action.has_value());
  }

  TEST_CASE("sampled SLOW halves the speed") {
    // (3,3) at C = 1000 has P(SLOW) close to 1/2, so both actions show up.
    const Game game(params_c(1000.0));
    ScenarioGeometry geom;
    bool saw_slow = false, saw_fast = false;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
      Rng rng(seed);
      // 3 car boxes and 3 pedestrian boxes from the collision point.
      const auto step = controller_step(crossing_snapshot(0.65, 0.25), geom, game, rng);
      REQUIRE(step.info.interesting);
      CHECK(step.info.state == GameState{3, 3});
      if (step.info.vehicle_action == Action::kSlow) {
        saw_slow = true;
        CHECK(step.info.speed_multiplier == 0.5);
        CHECK(step.speed_command == doctest::Approx(0.1));
      } else {
        saw_fast = true;
        CHECK(step.info.speed_multiplier == 1.0);
        CHECK(step.speed_command == doctest::Approx(0.2));
      }
    }
    CHECK(saw_slow);
    CHECK(saw_fast);
  }

  TEST_CASE("solver failure falls back to SLOW with a warning") {
    GameParams p = params_c(3.0);
    p.indifference = IndifferencePolicy::kReject;
    const Game game(p);
    Rng rng(1);
    // (2,2) is degenerate for every C.
    const auto step = controller_step(crossing_snapshot(0.45, 0.17), ScenarioGeometry{}, game, rng);
    REQUIRE(step.info.interesting);
    CHECK(step.info.state == GameState{2, 2});
    CHECK(step.info.speed_multiplier == 0.5);
    CHECK_FALSE(step.info.vehicle_action.has_value());
    CHECK(step.info.warning.find("solver failure") != std::string::npos);
  }

  TEST_CASE("out-of-board state also falls back") {
    GameParams p = params_c(3.0);
    p.max_y = 20;
    const Game game(p);
    Rng rng(1);
    const auto step = controller_step(crossing_snapshot(6.0, 4.3), ScenarioGeometry{}, game, rng);
    CHECK(step.info.speed_multiplier == 0.5);
    CHECK_FALSE(step.info.warning.empty());
  }

  TEST_CASE("extra tracks are ignored with a warning") {
    const Game game(params_c(3.0));
    Rng rng(1);
    auto snap = crossing_snapshot(6.0, 4.3);
    snap.pedestrians.push_back(snap.pedestrians.front());
    const auto step = controller_step(snap, ScenarioGeometry{}, game, rng);
    CHECK(step.info.interesting);
    CHECK(step.info.warning.find("extra pedestrian") != std::string::npos);
  }

  TEST_CASE("collinear pedestrian is not interesting") {
    const Game game(params_c(3.0));
    Rng rng(1);
    ControllerSnapshot snap;
    snap.commanded_speed = 0.2;
    snap.pedestrians = {walking_track({-9.0, 0.0}, {0.4, 0.0}, 2.0)};
    snap.t = 2.0;
    const auto step = controller_step(snap, ScenarioGeometry{}, game, rng);
    CHECK_FALSE(step.info.interesting);
    CHECK(step.info.speed_multiplier == 1.0);
    CHECK_FALSE(step.info.warning.empty());
  }

  TEST_CASE("property: determinism and multiplier range") {
    const Game game(params_c(10.0));
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(0.1, 8.0);
    for (int trial = 0; trial < 200; ++trial) {
      const auto snap = crossing_snapshot(dist(gen), dist(gen) * 0.6);
      Rng a(static_cast<std::uint64_t>(trial)), b(static_cast<std::uint64_t>(trial));
      const auto s1 = controller_step(snap, ScenarioGeometry{}, game, a);
      const auto s2 = controller_step(snap, ScenarioGeometry{}, game, b);
      CHECK(s1.speed_command == s2.speed_command);
      CHECK(s1.info.interesting == s2.info.interesting);
      CHECK(s1.info.state == s2.info.state);
      CHECK(s1.info.vehicle_action == s2.info.vehicle_action);
      CHECK((s1.info.speed_multiplier == 0.5 || s1.info.speed_multiplier == 1.0));
      CHECK(s1.speed_command == doctest::Approx(snap.commanded_speed * s1.info.speed_multiplier));
      if (!s1.info.interesting) {
        CHECK(s1.info.speed_multiplier == 1.0);
        CHECK_FALSE(s1.info.vehicle_action.has_value());
      }
    }
  }
}

TEST_CASE("Controller caches the latest inputs and logs every step") {
  GameParams p;
  const Game game(p);
  Controller ctl(ScenarioGeometry{}, game, Rng(3));
  ctl.update_vehicle({-4.3, 0.0}, 0.2);
  auto first = ctl.step(0.0);
  CHECK_FALSE(first.info.interesting);
  const auto snap = crossing_snapshot(6.0, 4.3);
  ctl.update_pedestrians(snap.pedestrians);
  auto second = ctl.step(snap.t);
  CHECK(second.info.interesting);
  CHECK(ctl.log().size() == 2);
}

TEST_SUITE("scenario config") {
  TEST_CASE("default passing time") {
    ScenarioGeometry g;
    CHECK(g.pass_time() == doctest::Approx((1.6 + 0.5) / 0.2));
    g.pass_clearance_time = 3.0;
    CHECK(g.pass_time() == 3.0);
  }

  TEST_CASE("parse and round-trip") {
    const auto cfg = parse_scenario(
        "# experiment layout\n"
        "vehicle_path = -6,0; 0,0; 6,1\n"
        "vehicle_fast_speed = 0.25\n"
        "ped_box = 0.25  # m\n"
        "pass_clearance_time = 4\n"
        "crossings_total = 5\n");
    CHECK(cfg.geometry.vehicle_path.size() == 3);
    CHECK(cfg.geometry.vehicle_path[2] == Vec2{6.0, 1.0});
    CHECK(cfg.geometry.vehicle_fast_speed == 0.25);
    CHECK(cfg.geometry.ped_box == 0.25);
    CHECK(cfg.geometry.pass_time() == 4.0);
    CHECK(cfg.crossing.crossings_total == 5);
    CHECK(cfg.geometry.car_box == 0.08);
    const auto again = parse_scenario(to_config_text(cfg));
    CHECK(to_config_text(again) == to_config_text(cfg));
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(parse_scenario("nonsense = 1\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario("ped_box = abc\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario("ped_box 0.2\n"), ParseError);
    CHECK_THROWS_AS(parse_scenario("ped_box = -0.2\n"), ValidationError);
    CHECK_THROWS_AS(parse_scenario("vehicle_path = 1,1\n"), ValidationError);
  }
}
