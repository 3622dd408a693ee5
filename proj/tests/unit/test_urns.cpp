#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "redsched/designs.hpp"
#include "redsched/policies.hpp"
#include "redsched/stats.hpp"
#include "redsched/urns.hpp"

using namespace redsched;
using policies::PolicyConfig;
using policies::PolicyKind;

namespace {

PolicyConfig make_cfg(PolicyKind kind, int n, int r, std::uint64_t seed = 1,
                      int stride = 1) {
  PolicyConfig cfg;
  cfg.kind = kind;
  cfg.servers = n;
  cfg.redundancy = r;
  cfg.stride = stride;
  cfg.seed = seed;
  if (kind == PolicyKind::Bibd) {
    cfg.design = designs::expand_blocks(*designs::find_difference_set(r));
  }
  return cfg;
}

// Exact E[X^2] for uniform r-subsets of [n] by enumerating all subset pairs.
double brute_force_mean_sq_overlap(int n, int r) {
  std::vector<std::vector<int>> subsets;
  std::vector<int> pick(static_cast<std::size_t>(r));
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    subsets.push_back(pick);
    int i = r - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - r + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < r; ++j) {
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  double acc = 0.0;
  for (const auto& a : subsets) {
    for (const auto& b : subsets) {
      std::vector<int> shared;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                            std::back_inserter(shared));
      acc += static_cast<double>(shared.size() * shared.size());
    }
  }
  const double pairs =
      static_cast<double>(subsets.size()) * static_cast<double>(subsets.size());
  return acc / pairs;
}

} // namespace

TEST_CASE("fano occupancy is flat after one full cycle") {
  auto run = urns::run_only_arrival(make_cfg(PolicyKind::Bibd, 7, 3), 7, 1);
  CHECK(run.occupancy.counts ==
        std::vector<std::int64_t>{3, 3, 3, 3, 3, 3, 3});
}

TEST_CASE("sliding window overlaps are always r-1") {
  auto run =
      urns::run_only_arrival(make_cfg(PolicyKind::RoundRobin, 7, 3), 7, 1);
  REQUIRE(run.overlaps.size() == 6);
  for (int x : run.overlaps) CHECK(x == 2);
}

TEST_CASE("too few throws for one overlap sample is invalid") {
  CHECK_THROWS_AS(
      urns::run_only_arrival(make_cfg(PolicyKind::Random, 21, 5), 1, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      urns::run_only_arrival(make_cfg(PolicyKind::Random, 21, 5), 5, 0),
      std::invalid_argument);
  CHECK_NOTHROW(
      urns::run_only_arrival(make_cfg(PolicyKind::Random, 21, 5), 2, 1));
}

TEST_CASE("occupancy conservation across policies") {
  for (PolicyKind kind :
       {PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::Bibd}) {
    auto run = urns::run_only_arrival(make_cfg(kind, 21, 5, 99), 404, 3);
    const std::int64_t sum = std::accumulate(run.occupancy.counts.begin(),
                                             run.occupancy.counts.end(),
                                             std::int64_t{0});
    CHECK(sum == 404 * 5);
    CHECK(run.overlaps.size() == 401);
    for (int x : run.overlaps) {
      CHECK(x >= 0);
      CHECK(x <= 5);
    }
  }
}

TEST_CASE("bibd indicators are exactly one over a cycle") {
  auto est = urns::estimate_indicators(make_cfg(PolicyKind::Bibd, 21, 5), 21,
                                       1, 1000);
  CHECK(est.lbf == 1.0);
  CHECK(est.rdf == 1.0);
  CHECK(est.reps == 1); // deterministic policy collapses replication
  CHECK(est.lbf_ci95 == 0.0);
  CHECK(est.rdf_ci95 == 0.0);
}

TEST_CASE("round robin rdf is exactly one sixteenth at r = 5") {
  auto est = urns::estimate_indicators(
      make_cfg(PolicyKind::RoundRobin, 21, 5), 21 * 100, 1, 1);
  CHECK(est.rdf == 0.0625);
  CHECK(est.lbf == 1.0); // n divides T
}

TEST_CASE("bibd rdf is one for any lag except multiples of n") {
  for (int lag : {1, 2, 5, 20}) {
    auto est = urns::estimate_indicators(make_cfg(PolicyKind::Bibd, 21, 5),
                                         210, lag, 1);
    CHECK(est.rdf == 1.0);
  }
  // Same block again at lag n: overlap is r, so RDF = 1/r^2.
  auto wrap = urns::estimate_indicators(make_cfg(PolicyKind::Bibd, 21, 5),
                                        210, 21, 1);
  CHECK(wrap.rdf == 1.0 / 25.0);
}

TEST_CASE("degenerate zero-overlap stream reports infinite rdf") {
  // Disjoint consecutive windows: stride r with r | n, lag 1.
  auto est = urns::estimate_indicators(
      make_cfg(PolicyKind::RoundRobin, 20, 5, 1, 5), 40, 1, 1);
  CHECK(std::isinf(est.rdf));
  CHECK(est.rdf > 0);
}

TEST_CASE("closed form random rdf matches enumeration and spot values") {
  CHECK(urns::closed_form_rdf_random(21, 5) ==
        Catch::Approx(7.0 / 15.0).epsilon(1e-12));
  CHECK(urns::closed_form_rdf_random(9, 9) ==
        Catch::Approx(1.0 / 81.0).epsilon(1e-12));
  CHECK(urns::closed_form_rdf_random(1, 1) == Catch::Approx(1.0));
  CHECK_THROWS_AS(urns::closed_form_rdf_random(5, 6), std::invalid_argument);

  // Exhaustive oracle over all pairs of 3-subsets of [7].
  const double brute = brute_force_mean_sq_overlap(7, 3);
  CHECK(urns::closed_form_rdf_random(7, 3) ==
        Catch::Approx(1.0 / brute).epsilon(1e-12));
}

TEST_CASE("monte carlo random rdf converges to the closed form") {
  auto est = urns::estimate_indicators(make_cfg(PolicyKind::Random, 21, 5, 7),
                                       210, 1, 2000);
  const double truth = urns::closed_form_rdf_random(21, 5);
  const double se = est.rdf_ci95 / stats::student_t_quantile(0.975, 1999);
  CHECK(std::fabs(est.rdf - truth) <= 3.0 * se);
  CHECK(est.lbf < 1.0);
  CHECK(est.lbf > 0.0);
}

TEST_CASE("deterministic estimates ignore the seed") {
  auto a = urns::estimate_indicators(make_cfg(PolicyKind::Bibd, 21, 5, 1),
                                     210, 1, 50);
  auto b = urns::estimate_indicators(make_cfg(PolicyKind::Bibd, 21, 5, 999),
                                     210, 1, 50);
  CHECK(a.lbf == b.lbf);
  CHECK(a.rdf == b.rdf);
}

TEST_CASE("lbf is one whenever n divides the throw count") {
  for (std::int64_t t : {21, 42, 210}) {
    auto rr = urns::estimate_indicators(
        make_cfg(PolicyKind::RoundRobin, 21, 5), t, 1, 1);
    CHECK(rr.lbf == 1.0);
    auto bibd = urns::estimate_indicators(make_cfg(PolicyKind::Bibd, 21, 5),
                                          t, 1, 1);
    CHECK(bibd.lbf == 1.0);
  }
}

TEST_CASE("sweep emits one row per policy per redundancy level") {
  const std::vector<int> r_values{3, 4, 5};
  auto rows = urns::sweep_indicators(r_values, 0, 1, 50, 1);
  REQUIRE(rows.size() == 9);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = r_values[i / 3];
    CHECK(rows[i].redundancy == r);
    CHECK(rows[i].servers == designs::points_for(r));
    CHECK(rows[i].throws == 10 * designs::points_for(r));
    REQUIRE(rows[i].estimate.has_value());
  }
}

TEST_CASE("sweep marks the missing order 6 plane") {
  const std::vector<int> r_values{7};
  auto rows = urns::sweep_indicators(r_values, 0, 1, 10, 1);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].estimate.has_value());  // random
  CHECK(rows[1].estimate.has_value());  // round-robin
  CHECK(rows[2].kind == PolicyKind::Bibd);
  CHECK_FALSE(rows[2].estimate.has_value());
}

TEST_CASE("sweep reproduces the indicator ordering at every level") {
  const std::vector<int> r_values{3, 4, 5, 6};
  auto rows = urns::sweep_indicators(r_values, 0, 1, 400, 5);
  REQUIRE(rows.size() == 12);
  for (std::size_t base = 0; base < rows.size(); base += 3) {
    const auto& random = rows[base];
    const auto& rr = rows[base + 1];
    const auto& bibd = rows[base + 2];
    REQUIRE(random.estimate.has_value());
    REQUIRE(rr.estimate.has_value());
    REQUIRE(bibd.estimate.has_value());
    CHECK(bibd.estimate->lbf >= rr.estimate->lbf);
    CHECK(rr.estimate->lbf >=
          random.estimate->lbf - random.estimate->lbf_ci95);
    CHECK(bibd.estimate->rdf > random.estimate->rdf);
    CHECK(random.estimate->rdf > rr.estimate->rdf);
  }
}
