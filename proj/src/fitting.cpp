#include "seqchicken/fitting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

#include <json.hpp>

#include "seqchicken/controller.hpp"
#include "seqchicken/error.hpp"

namespace seqchicken {

namespace {

using CrossingKey = std::pair<std::string, int>;

CrossingKey key_of(const CrossingRecord& r) { return {r.session_id, r.crossing_id}; }

std::string column_label(double c) { return "C_" + format_crash_cost(c); }

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---- filters -------------------------------------------------------------

std::vector<CrossingRecord> drop_first_distance(std::span<const CrossingRecord> records,
                                                double distance_m) {
  std::map<CrossingKey, double> start;
  std::vector<CrossingRecord> out;
  for (const auto& r : records) {
    const double s = start.try_emplace(key_of(r), r.ped_pos_m).first->second;
    if (s - r.ped_pos_m >= distance_m) out.push_back(r);
  }
  return out;
}

std::vector<CrossingRecord> dedup_final_box(std::span<const CrossingRecord> records) {
  std::map<CrossingKey, int> final_box;
  for (const auto& r : records) {
    auto [it, inserted] = final_box.try_emplace(key_of(r), r.ped_box);
    if (!inserted) it->second = std::min(it->second, r.ped_box);
  }
  std::map<CrossingKey, bool> seen;
  std::vector<CrossingRecord> out;
  for (const auto& r : records) {
    const auto key = key_of(r);
    if (r.ped_box == final_box[key]) {
      if (seen[key]) continue;
      seen[key] = true;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<CrossingRecord> keep_interesting(std::span<const CrossingRecord> records,
                                             bool include_auto_played,
                                             std::size_t* auto_played_excluded) {
  std::vector<CrossingRecord> out;
  std::size_t excluded = 0;
  for (const auto& r : records) {
    if (!r.interesting || !r.ped_action || r.ped_pos_m < 0.0) continue;
    if (r.auto_played && !include_auto_played) {
      ++excluded;
      continue;
    }
    out.push_back(r);
  }
  if (auto_played_excluded) *auto_played_excluded = excluded;
  return out;
}

FilterResult filter_records(std::span<const CrossingRecord> records, const ScenarioGeometry& geom,
                            const FilterOptions& options) {
  if (!(geom.ped_box > 0.0)) throw ValidationError("pedestrian box must be positive");
  FilterResult res;
  res.funnel.input = records.size();

  std::map<CrossingKey, std::size_t> index;
  for (const auto& r : records) {
    const auto [it, inserted] = index.try_emplace(key_of(r), res.crossings.size());
    if (inserted) res.crossings.push_back({r.session_id, r.crossing_id, Outcome::kPending});
    if (r.winner != Outcome::kPending) res.crossings[it->second].outcome = r.winner;
  }

  const auto stage1 = drop_first_distance(records, options.first_distance_m);
  res.funnel.after_first_distance = stage1.size();
  const auto stage2 = dedup_final_box(stage1);
  res.funnel.after_final_box = stage2.size();
  res.kept = keep_interesting(stage2, options.include_auto_played, &res.funnel.auto_played_excluded);
  res.funnel.after_interesting = res.kept.size();

  res.points.reserve(res.kept.size());
  for (const auto& r : res.kept) {
    res.points.push_back({quantize_distance(r.ped_pos_m, geom.ped_box), *r.ped_action});
  }
  return res;
}

// ---- curves --------------------------------------------------------------

double BetaBin::sd() const {
  const double s = alpha + beta;
  return std::sqrt(alpha * beta / (s * s * (s + 1.0)));
}

const BetaBin* YieldCurve::find(int k) const {
  const auto it = std::find_if(bins.begin(), bins.end(), [k](const BetaBin& b) { return b.k == k; });
  return it == bins.end() ? nullptr : &*it;
}

YieldCurve empirical_yield_curve(std::span<const DecisionPoint> points, int k_lo, int k_hi) {
  std::map<int, BetaBin> bins;
  for (int k = k_lo; k <= k_hi; ++k) bins[k] = BetaBin{k};
  for (const auto& p : points) {
    auto& b = bins.try_emplace(p.k, BetaBin{p.k}).first->second;
    (p.action == Action::kSlow ? b.alpha : b.beta) += 1.0;
  }
  YieldCurve c;
  for (const auto& [k, b] : bins) c.bins.push_back(b);
  return c;
}

// ---- likelihood ------------------------------------------------------------

double log_likelihood(std::span<const DecisionPoint> points, const Game& game) {
  // Aggregate per bin first so the sum does not depend on point order.
  std::map<int, std::pair<double, double>> counts;  // k -> (SLOW, FAST)
  for (const auto& p : points) {
    if (p.k < 2) {
      throw ValidationError("decision at k=" + std::to_string(p.k) +
                            " is inside or next to the crash region");
    }
    auto& c = counts[p.k];
    (p.action == Action::kSlow ? c.first : c.second) += 1.0;
  }
  double ll = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = std::clamp(game.policy({k, k}).p_pedestrian_slow, kProbabilityClamp,
                                1.0 - kProbabilityClamp);
    ll += c.first * std::log(p) + c.second * std::log(1.0 - p);
  }
  return ll;
}

double log_likelihood(std::span<const DecisionPoint> points, double crash_cost, GameParams params) {
  params.crash_cost = crash_cost;
  return log_likelihood(points, Game(params));
}

FitResult fit_ucrash(std::span<const DecisionPoint> points, const std::vector<double>& grid,
                     GameParams params, int k_max) {
  if (grid.empty()) throw ValidationError("candidate grid is empty");
  if (k_max < 2) throw ValidationError("k_max must be at least 2");

  FitResult fit;
  std::vector<DecisionPoint> usable;
  for (const auto& p : points) {
    if (p.k >= 2) usable.push_back(p);
  }
  fit.points_used = usable.size();
  fit.points_below_k2 = points.size() - usable.size();
  for (const auto& p : usable) k_max = std::max(k_max, p.k);
  fit.k_max = k_max;

  fit.empirical = empirical_yield_curve(points, 0, k_max);
  std::vector<YieldPoint> emp_desc;
  for (int k = k_max; k >= 2; --k) emp_desc.push_back({k, fit.empirical.find(k)->mean()});
  fit.empirical_cumulative = cumulative_no_yield(emp_desc);

  for (double c : grid) {
    CandidateFit cand;
    cand.crash_cost = c;
    try {
      GameParams p = params;
      p.crash_cost = c;
      p.validate();
      const Game game(p);
      cand.log_likelihood = log_likelihood(usable, game);
      cand.model_curve = yield_curve_model(game, k_max);
      std::vector<YieldPoint> desc(cand.model_curve.rbegin(), cand.model_curve.rend());
      cand.model_cumulative = cumulative_no_yield(desc);
      double sq = 0.0;
      for (std::size_t i = 0; i < desc.size(); ++i) {
        const double d = cand.model_cumulative[i].survival - fit.empirical_cumulative[i].survival;
        sq += d * d;
      }
      cand.cumulative_rmse = std::sqrt(sq / static_cast<double>(desc.size()));
    } catch (const Error& e) {
      cand.log_likelihood.reset();
      cand.error = e.what();
    }
    fit.candidates.push_back(std::move(cand));
  }

  const CandidateFit* best = nullptr;
  for (const auto& cand : fit.candidates) {
    if (!cand.log_likelihood) continue;
    if (!best || *cand.log_likelihood > *best->log_likelihood ||
        (*cand.log_likelihood == *best->log_likelihood && cand.crash_cost < best->crash_cost)) {
      best = &cand;
    }
  }
  if (!best) throw FitFailure("no valid candidate in the crash-cost grid");
  fit.best_crash_cost = best->crash_cost;
  for (const auto& cand : fit.candidates) {
    if (&cand != best && cand.log_likelihood && *cand.log_likelihood == *best->log_likelihood) {
      fit.tied_with_best.push_back(cand.crash_cost);
    }
  }
  return fit;
}

std::vector<DecisionPoint> sample_model_decisions(const Game& game, int k_lo, int k_hi,
                                                  std::size_t n, Rng& rng) {
  if (k_lo < 2 || k_hi < k_lo) throw ValidationError("need 2 <= k_lo <= k_hi");
  std::vector<double> p;
  for (int k = k_lo; k <= k_hi; ++k) p.push_back(game.policy({k, k}).p_pedestrian_slow);
  std::vector<DecisionPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bin = i % p.size();
    out.push_back({k_lo + static_cast<int>(bin),
                   rng.bernoulli(p[bin]) ? Action::kSlow : Action::kFast});
  }
  return out;
}

// ---- summaries -------------------------------------------------------------

WinSummary summarize_wins(const FilterResult& filtered) {
  WinSummary w;
  std::map<CrossingKey, Outcome> outcome;
  for (const auto& c : filtered.crossings) {
    outcome[{c.session_id, c.crossing_id}] = c.outcome;
    ++w.crossings;
    switch (c.outcome) {
      case Outcome::kPedestrianFirst: ++w.pedestrian_first; break;
      case Outcome::kVehicleFirst: ++w.vehicle_first; break;
      case Outcome::kCrash: ++w.crash; break;
      case Outcome::kPending: ++w.pending; break;
    }
  }

  std::map<std::string, std::pair<double, double>> per_session;  // wins, decisions
  std::map<CrossingKey, bool> first_seen;
  double wins = 0.0;
  for (std::size_t i = 0; i < filtered.kept.size(); ++i) {
    const auto& r = filtered.kept[i];
    const bool won = outcome[key_of(r)] == Outcome::kPedestrianFirst;
    wins += won;
    auto& s = per_session[r.session_id];
    s.first += won;
    s.second += 1.0;
    if (!first_seen[key_of(r)]) {
      first_seen[key_of(r)] = true;
      w.immediate_slow += filtered.points[i].action == Action::kSlow;
    }
  }
  if (!filtered.kept.empty()) w.decision_win_fraction = wins / static_cast<double>(filtered.kept.size());

  w.sessions = per_session.size();
  if (w.sessions > 0) {
    std::vector<double> f;
    for (const auto& [id, s] : per_session) f.push_back(s.first / s.second);
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double ss = 0.0;
    for (double v : f) ss += (v - mean) * (v - mean);
    w.per_session_mean = mean;
    if (f.size() > 1) {
      w.per_session_sd = std::sqrt(ss / static_cast<double>(f.size() - 1));
      w.per_session_se = w.per_session_sd / std::sqrt(static_cast<double>(f.size()));
    }
  }
  return w;
}

Analysis analyze_records(LogReadResult log, const ScenarioGeometry& geom,
                         const std::vector<double>& grid, GameParams params,
                         const FilterOptions& options, int k_max) {
  Analysis a;
  a.log = std::move(log);
  a.filtered = filter_records(a.log.records, geom, options);
  a.fit = fit_ucrash(a.filtered.points, grid, params, k_max);
  a.wins = summarize_wins(a.filtered);
  return a;
}

void write_curves_csv(std::ostream& out, const FitResult& fit, double ped_box) {
  out << "k,distance_m,empirical_mean,empirical_sd";
  for (const auto& c : fit.candidates) out << ',' << column_label(c.crash_cost);
  out << '\n';
  for (const auto& b : fit.empirical.bins) {
    out << b.k << ',' << format_number(b.k * ped_box) << ',' << format_number(b.mean()) << ','
        << format_number(b.sd());
    for (const auto& c : fit.candidates) {
      out << ',';
      const auto it = std::find_if(c.model_curve.begin(), c.model_curve.end(),
                                   [&](const YieldPoint& y) { return y.k == b.k; });
      if (it != c.model_curve.end()) out << format_number(it->p_yield);
    }
    out << '\n';
  }
}

void write_cumulative_csv(std::ostream& out, const FitResult& fit, double ped_box) {
  out << "k,distance_m,empirical";
  for (const auto& c : fit.candidates) out << ',' << column_label(c.crash_cost);
  out << '\n';
  for (std::size_t i = 0; i < fit.empirical_cumulative.size(); ++i) {
    const auto& e = fit.empirical_cumulative[i];
    out << e.k << ',' << format_number(e.k * ped_box) << ',' << format_number(e.survival);
    for (const auto& c : fit.candidates) {
      out << ',';
      if (i < c.model_cumulative.size()) out << format_number(c.model_cumulative[i].survival);
    }
    out << '\n';
  }
}

std::string summary_json(const Analysis& a) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["best_C"] = a.fit.best_crash_cost;
  j["tied_with_best"] = a.fit.tied_with_best;
  ojson cands = ojson::array();
  for (const auto& c : a.fit.candidates) {
    ojson o;
    o["C"] = c.crash_cost;
    o["valid"] = c.log_likelihood.has_value();
    o["log_likelihood"] = c.log_likelihood ? ojson(*c.log_likelihood) : ojson(nullptr);
    o["cumulative_rmse"] = c.cumulative_rmse ? ojson(*c.cumulative_rmse) : ojson(nullptr);
    if (!c.error.empty()) o["error"] = c.error;
    cands.push_back(o);
  }
  j["candidates"] = cands;

  const auto& f = a.filtered.funnel;
  ojson funnel;
  funnel["malformed_skipped"] = a.log.skipped;
  funnel["input_records"] = f.input;
  funnel["after_first_2m"] = f.after_first_distance;
  funnel["after_final_box_dedup"] = f.after_final_box;
  funnel["after_interesting_only"] = f.after_interesting;
  funnel["auto_played_excluded"] = f.auto_played_excluded;
  j["funnel"] = funnel;
  j["decision_points_used"] = a.fit.points_used;
  j["decision_points_below_k2"] = a.fit.points_below_k2;

  const auto& w = a.wins;
  ojson wins;
  wins["crossings"] = w.crossings;
  wins["PEDESTRIAN_FIRST"] = w.pedestrian_first;
  wins["VEHICLE_FIRST"] = w.vehicle_first;
  wins["CRASH"] = w.crash;
  wins["PENDING"] = w.pending;
  wins["interesting_decisions_won_by_pedestrian"] = w.decision_win_fraction;
  wins["sessions"] = w.sessions;
  wins["per_session_mean"] = w.per_session_mean;
  wins["per_session_sd"] = w.per_session_sd;
  wins["per_session_se"] = w.per_session_se;
  wins["crossings_with_immediate_slow"] = w.immediate_slow;
  j["outcomes"] = wins;
  j["warnings"] = a.log.warnings;
  return j.dump(2) + "\n";
}

std::string format_crash_cost(double c) {
  if (c == std::floor(c) && std::abs(c) < 1e15) return std::to_string(static_cast<long long>(c));
  return format_number(c);
}

}  // namespace seqchicken
