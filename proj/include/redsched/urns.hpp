#pragma once

// Only-arrival analysis: throw T jobs redundantly into n queues with no
// departures and study the occupancy. Two indicators summarize a policy:
//
//   LBF = E[min occupancy] / E[max occupancy]        (1 = perfect balance)
//   RDF = 1 / E[X^2], X = overlap between the server sets of jobs a fixed
//         lag apart                                  (higher = more diverse)

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "redsched/designs.hpp"
#include "redsched/policies.hpp"
#include "redsched/rng.hpp"
#include "redsched/stats.hpp"

namespace redsched::urns {

/// Balls per urn after a run; the counts always sum to throws * r.
struct OccupancyVector {
  std::vector<std::int64_t> counts;
};

struct OnlyArrivalResult {
  OccupancyVector occupancy;
  std::vector<int> overlaps; // throws - lag samples, each in [0, r]
};

/// Throw `throws` balls by the policy and record final occupancy plus the
/// overlap |A_t ∩ A_{t+lag}| for every pair of arrivals `lag` apart.
/// Needs throws >= lag + 1 so at least one overlap sample exists.
inline OnlyArrivalResult run_only_arrival(const policies::PolicyConfig& policy,
                                          std::int64_t throws, int lag) {
  if (lag < 1) {
    throw std::invalid_argument("run_only_arrival: lag must be >= 1");
  }
  if (throws < lag + 1) {
    throw std::invalid_argument(
        "run_only_arrival: need throws > lag for at least one overlap sample");
  }
  policies::AssignmentPolicy gen(policy);
  const int n = policy.servers;

  OnlyArrivalResult result;
  result.occupancy.counts.assign(static_cast<std::size_t>(n), 0);
  result.overlaps.reserve(static_cast<std::size_t>(throws - lag));

  std::vector<policies::Assignment> window(static_cast<std::size_t>(lag));
  std::vector<char> member(static_cast<std::size_t>(n), 0);
  for (std::int64_t t = 0; t < throws; ++t) {
    policies::Assignment a = gen.next();
    for (int s : a) ++result.occupancy.counts[static_cast<std::size_t>(s)];
    const std::size_t slot = static_cast<std::size_t>(t % lag);
    if (t >= lag) {
      const policies::Assignment& past = window[slot];
      for (int s : past) member[static_cast<std::size_t>(s)] = 1;
      int overlap = 0;
      for (int s : a) overlap += member[static_cast<std::size_t>(s)];
      for (int s : past) member[static_cast<std::size_t>(s)] = 0;
      result.overlaps.push_back(overlap);
    }
    window[slot] = std::move(a);
  }
  return result;
}

struct IndicatorEstimate {
  double lbf = 0.0;
  double rdf = 0.0; // +inf when every overlap sample is 0
  double lbf_ci95 = 0.0;
  double rdf_ci95 = 0.0;
  std::int64_t throws = 0;
  int reps = 1;
  int lag = 1;
};

/// 1 / E[X^2] for the random policy: X ~ Hypergeometric(N = n, K = r,
/// draws = r), so E[X] = r^2/n and Var X = r (r/n) (1 - r/n) (n-r)/(n-1).
inline double closed_form_rdf_random(int n, int r) {
  if (r < 1 || r > n) {
    throw std::invalid_argument("closed_form_rdf_random: need 1 <= r <= n");
  }
  const double dn = n;
  const double dr = r;
  const double mean = dr * dr / dn;
  const double var =
      n == r ? 0.0
             : dr * (dr / dn) * (1.0 - dr / dn) * (dn - dr) / (dn - 1.0);
  return 1.0 / (var + mean * mean);
}

/// Monte Carlo (or exact, for deterministic policies) LBF/RDF estimate.
/// LBF is the ratio of the replication-mean min and max occupancies, not the
/// mean of per-replication ratios. Replication k runs on the derived seed
/// substream k; deterministic policies collapse to a single replication.
inline IndicatorEstimate estimate_indicators(
    const policies::PolicyConfig& policy, std::int64_t throws, int lag,
    int reps) {
  if (reps < 1) {
    throw std::invalid_argument("estimate_indicators: reps must be >= 1");
  }
  const bool deterministic = policy.kind != policies::PolicyKind::Random;
  const int used_reps = deterministic ? 1 : reps;

  std::vector<double> mins, maxs, mean_sq;
  mins.reserve(static_cast<std::size_t>(used_reps));
  maxs.reserve(static_cast<std::size_t>(used_reps));
  mean_sq.reserve(static_cast<std::size_t>(used_reps));

  for (int k = 0; k < used_reps; ++k) {
    policies::PolicyConfig rep_cfg = policy;
    rep_cfg.seed = rng::derive_seed(policy.seed, static_cast<std::uint64_t>(k));
    const OnlyArrivalResult run = run_only_arrival(rep_cfg, throws, lag);
    const auto [lo, hi] = stats::min_max(
        std::span<const std::int64_t>(run.occupancy.counts));
    mins.push_back(static_cast<double>(lo));
    maxs.push_back(static_cast<double>(hi));
    double acc = 0.0;
    for (int x : run.overlaps) acc += static_cast<double>(x) * x;
    mean_sq.push_back(acc / static_cast<double>(run.overlaps.size()));
  }

  const auto mean_of = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };

  IndicatorEstimate est;
  est.throws = throws;
  est.reps = used_reps;
  est.lag = lag;

  const double min_bar = mean_of(mins);
  const double max_bar = mean_of(maxs);
  est.lbf = min_bar / max_bar;
  const double sq_bar = mean_of(mean_sq);
  est.rdf = sq_bar > 0.0 ? 1.0 / sq_bar
                         : std::numeric_limits<double>::infinity();

  if (used_reps >= 2) {
    const double t_crit =
        stats::student_t_quantile(0.975, static_cast<double>(used_reps - 1));
    const double dr = static_cast<double>(used_reps);
    // Delta method on the ratio of replication means.
    double s_mm = 0.0, s_xx = 0.0, s_mx = 0.0, s_yy = 0.0;
    for (int k = 0; k < used_reps; ++k) {
      const double dm = mins[static_cast<std::size_t>(k)] - min_bar;
      const double dx = maxs[static_cast<std::size_t>(k)] - max_bar;
      const double dy = mean_sq[static_cast<std::size_t>(k)] - sq_bar;
      s_mm += dm * dm;
      s_xx += dx * dx;
      s_mx += dm * dx;
      s_yy += dy * dy;
    }
    s_mm /= dr - 1.0;
    s_xx /= dr - 1.0;
    s_mx /= dr - 1.0;
    s_yy /= dr - 1.0;
    const double ratio_var =
        (s_mm + est.lbf * est.lbf * s_xx - 2.0 * est.lbf * s_mx) /
        (dr * max_bar * max_bar);
    est.lbf_ci95 = ratio_var > 0.0 ? t_crit * std::sqrt(ratio_var) : 0.0;
    if (sq_bar > 0.0) {
      const double se_sq = std::sqrt(s_yy / dr);
      est.rdf_ci95 = t_crit * se_sq / (sq_bar * sq_bar);
    }
  }
  return est;
}

/// One sweep row; a missing estimate marks a redundancy level with no
/// available block design (BIBD policy only).
struct SweepRow {
  policies::PolicyKind kind = policies::PolicyKind::Random;
  int servers = 0;
  int redundancy = 0;
  std::int64_t throws = 0;
  int lag = 1;
  int reps = 1;
  std::optional<IndicatorEstimate> estimate;
};

/// Indicator table over redundancy levels with n = r(r-1)+1, all three
/// policies per r. `throws` = 0 picks 10 n per level.
inline std::vector<SweepRow> sweep_indicators(std::span<const int> r_values,
                                              std::int64_t throws, int lag,
                                              int reps,
                                              std::uint64_t seed = 1) {
  static constexpr policies::PolicyKind kOrder[] = {
      policies::PolicyKind::Random, policies::PolicyKind::RoundRobin,
      policies::PolicyKind::Bibd};
  std::vector<SweepRow> rows;
  std::uint64_t stream = 0;
  for (int r : r_values) {
    const int n = designs::points_for(r);
    const std::int64_t row_throws = throws == 0 ? 10 * n : throws;
    const auto design = designs::find_difference_set(r);
    for (policies::PolicyKind kind : kOrder) {
      SweepRow row;
      row.kind = kind;
      row.servers = n;
      row.redundancy = r;
      row.throws = row_throws;
      row.lag = lag;
      row.reps = kind == policies::PolicyKind::Random ? reps : 1;
      if (kind == policies::PolicyKind::Bibd && !design) {
        rows.push_back(std::move(row)); // no design at this r
        ++stream;
        continue;
      }
      policies::PolicyConfig cfg;
      cfg.kind = kind;
      cfg.servers = n;
      cfg.redundancy = r;
      cfg.stride = 1;
      cfg.seed = rng::derive_seed(seed, stream);
      if (kind == policies::PolicyKind::Bibd) {
        cfg.design = designs::expand_blocks(*design);
      }
      row.estimate = estimate_indicators(cfg, row_throws, lag, reps);
      rows.push_back(std::move(row));
      ++stream;
    }
  }
  return rows;
}

} // namespace redsched::urns
