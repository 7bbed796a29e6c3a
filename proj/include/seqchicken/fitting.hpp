#pragma once

// Behavioral-data pipeline: crossing logs -> interesting pedestrian decisions
// -> Beta-posterior yield curves -> likelihood scan over crash costs.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqchicken/crossing_log.hpp"
#include "seqchicken/game.hpp"
#include "seqchicken/rng.hpp"
#include "seqchicken/scenario.hpp"

namespace seqchicken {

struct DecisionPoint {
  int k = 0;  // pedestrian boxes to the collision point
  Action action = Action::kFast;

  friend bool operator==(const DecisionPoint&, const DecisionPoint&) = default;
};

struct FilterOptions {
  double first_distance_m = 2.0;   // dropped from the start of every crossing
  bool include_auto_played = false;
};

struct FilterFunnel {
  std::size_t input = 0;
  std::size_t after_first_distance = 0;
  std::size_t after_final_box = 0;
  std::size_t after_interesting = 0;
  std::size_t auto_played_excluded = 0;  // part of the last stage's drop
};

struct CrossingOutcome {
  std::string session_id;
  int crossing_id = 0;
  Outcome outcome = Outcome::kPending;
};

struct FilterResult {
  std::vector<DecisionPoint> points;
  std::vector<CrossingRecord> kept;  // kept[i] produced points[i]
  FilterFunnel funnel;
  std::vector<CrossingOutcome> crossings;  // in order of first appearance
};

// Individual stages. Each works per (session_id, crossing_id) group and keeps
// input order.
std::vector<CrossingRecord> drop_first_distance(std::span<const CrossingRecord> records,
                                                double distance_m);
/// Keeps only the first record seen in each crossing's smallest pedestrian box.
std::vector<CrossingRecord> dedup_final_box(std::span<const CrossingRecord> records);
/// Interesting records with a pedestrian action and a non-negative box.
std::vector<CrossingRecord> keep_interesting(std::span<const CrossingRecord> records,
                                             bool include_auto_played,
                                             std::size_t* auto_played_excluded = nullptr);

/// All three stages in order. The decision bin is recomputed from ped_pos_m
/// with the geometry's pedestrian box.
FilterResult filter_records(std::span<const CrossingRecord> records, const ScenarioGeometry& geom,
                            const FilterOptions& options = {});

struct BetaBin {
  int k = 0;
  double alpha = 1.0;
  double beta = 1.0;

  std::size_t count() const { return static_cast<std::size_t>(alpha + beta - 2.0); }
  double mean() const { return alpha / (alpha + beta); }
  double sd() const;
};

struct YieldCurve {
  std::vector<BetaBin> bins;  // ascending k

  const BetaBin* find(int k) const;
};

/// Flat-prior Beta posterior per bin. Bins k_lo..k_hi are always present;
/// bins holding data outside that range are added.
YieldCurve empirical_yield_curve(std::span<const DecisionPoint> points, int k_lo = 0,
                                 int k_hi = 15);

inline constexpr double kProbabilityClamp = 1e-9;

/// Bernoulli log-likelihood of the points under the model's symmetric-state
/// yield probabilities. Every point must have k >= 2.
double log_likelihood(std::span<const DecisionPoint> points, const Game& game);
double log_likelihood(std::span<const DecisionPoint> points, double crash_cost,
                      GameParams params = {});

inline const std::vector<double> kDefaultCrashGrid = {2, 3, 10, 100, 1e3, 1e4, 1e6};

struct CandidateFit {
  double crash_cost = 0.0;
  std::optional<double> log_likelihood;  // nullopt: evaluation failed
  std::string error;
  std::vector<YieldPoint> model_curve;        // ascending k
  std::vector<SurvivalPoint> model_cumulative;  // descending k
  std::optional<double> cumulative_rmse;      // diagnostic only
};

struct FitResult {
  std::vector<CandidateFit> candidates;  // grid order
  double best_crash_cost = 0.0;
  std::vector<double> tied_with_best;  // other candidates with equal LL
  YieldCurve empirical;
  std::vector<SurvivalPoint> empirical_cumulative;  // descending k
  std::size_t points_used = 0;
  std::size_t points_below_k2 = 0;
  int k_max = 15;
};

/// Scans the grid. Points with k < 2 are excluded from the likelihood. Ties
/// go to the smallest C. Throws FitFailure when no candidate is valid.
FitResult fit_ucrash(std::span<const DecisionPoint> points,
                     const std::vector<double>& grid = kDefaultCrashGrid,
                     GameParams params = {}, int k_max = 15);

/// n decisions from the model's yield curve, cycling through bins k_lo..k_hi.
std::vector<DecisionPoint> sample_model_decisions(const Game& game, int k_lo, int k_hi,
                                                  std::size_t n, Rng& rng);

/// Win statistics over sessions. "Decision" fractions weight each crossing by
/// its number of surviving decision points.
struct WinSummary {
  std::size_t crossings = 0;
  std::size_t pedestrian_first = 0;
  std::size_t vehicle_first = 0;
  std::size_t crash = 0;
  std::size_t pending = 0;
  double decision_win_fraction = 0.0;
  std::size_t sessions = 0;
  double per_session_mean = 0.0;
  double per_session_sd = 0.0;
  double per_session_se = 0.0;
  std::size_t immediate_slow = 0;  // crossings whose first decision was SLOW
};

WinSummary summarize_wins(const FilterResult& filtered);

struct Analysis {
  LogReadResult log;  // records plus malformed-line diagnostics
  FilterResult filtered;
  FitResult fit;
  WinSummary wins;
};

Analysis analyze_records(LogReadResult log, const ScenarioGeometry& geom,
                         const std::vector<double>& grid = kDefaultCrashGrid,
                         GameParams params = {}, const FilterOptions& options = {},
                         int k_max = 15);

/// Columns: k, distance_m, empirical_mean, empirical_sd, C_<c>...
void write_curves_csv(std::ostream& out, const FitResult& fit, double ped_box);
/// Columns: k, distance_m, empirical, C_<c>... (descending k)
void write_cumulative_csv(std::ostream& out, const FitResult& fit, double ped_box);
std::string summary_json(const Analysis& analysis);

/// Shortest round-trip decimal for a double.
std::string format_number(double v);
/// Whole crash costs print without an exponent (1000000, not 1e+06).
std::string format_crash_cost(double c);

}  // namespace seqchicken
