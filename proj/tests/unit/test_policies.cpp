#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "redsched/designs.hpp"
#include "redsched/policies.hpp"

using namespace redsched;
using policies::Assignment;
using policies::AssignmentPolicy;
using policies::PolicyConfig;
using policies::PolicyKind;

namespace {

PolicyConfig round_robin(int n, int r, int stride = 1) {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::RoundRobin;
  cfg.servers = n;
  cfg.redundancy = r;
  cfg.stride = stride;
  return cfg;
}

PolicyConfig random_cfg(int n, int r, std::uint64_t seed = 1) {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::Random;
  cfg.servers = n;
  cfg.redundancy = r;
  cfg.seed = seed;
  return cfg;
}

PolicyConfig bibd_cfg(int r) {
  PolicyConfig cfg;
  cfg.kind = PolicyKind::Bibd;
  cfg.redundancy = r;
  cfg.servers = designs::points_for(r);
  cfg.design = designs::expand_blocks(*designs::find_difference_set(r));
  return cfg;
}

int overlap(const Assignment& a, const Assignment& b) {
  Assignment shared;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(shared));
  return static_cast<int>(shared.size());
}

bool well_formed(const Assignment& a, int n, int r) {
  if (static_cast<int>(a.size()) != r) return false;
  if (!std::is_sorted(a.begin(), a.end())) return false;
  if (std::adjacent_find(a.begin(), a.end()) != a.end()) return false;
  return a.front() >= 0 && a.back() < n;
}

double binom(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                  std::lgamma(n - k + 1.0));
}

} // namespace

TEST_CASE("round robin slides a contiguous window") {
  AssignmentPolicy pol(round_robin(7, 3));
  CHECK(pol.next() == Assignment{0, 1, 2});
  CHECK(pol.next() == Assignment{1, 2, 3});
  for (int i = 0; i < 5; ++i) pol.next();
  CHECK(pol.cursor() == 0); // wrapped after 7 calls
}

TEST_CASE("round robin wraps around the last servers") {
  AssignmentPolicy pol(round_robin(7, 3, 1));
  for (int i = 0; i < 5; ++i) pol.next();
  CHECK(pol.next() == Assignment{0, 5, 6});
}

TEST_CASE("bibd walks the blocks in cyclic order") {
  AssignmentPolicy pol(bibd_cfg(3));
  pol.next();
  pol.next();
  CHECK(pol.next() == Assignment{2, 3, 5});

  AssignmentPolicy wide(bibd_cfg(5));
  CHECK(wide.next() == Assignment{0, 1, 6, 8, 18});
}

TEST_CASE("reset restores the exact sequence") {
  AssignmentPolicy pol(random_cfg(21, 5, 42));
  std::vector<Assignment> first;
  for (int i = 0; i < 100; ++i) first.push_back(pol.next());
  pol.reset();
  for (int i = 0; i < 100; ++i) CHECK(pol.next() == first[static_cast<std::size_t>(i)]);

  AssignmentPolicy rr(round_robin(7, 3));
  for (int i = 0; i < 3; ++i) rr.next();
  rr.reset();
  CHECK(rr.cursor() == 0);
  CHECK(rr.next() == Assignment{0, 1, 2});
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(AssignmentPolicy(random_cfg(5, 6)), std::invalid_argument);
  CHECK_THROWS_AS(AssignmentPolicy(random_cfg(5, 0)), std::invalid_argument);
  CHECK_THROWS_AS(AssignmentPolicy(round_robin(7, 3, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(AssignmentPolicy(round_robin(7, 3, 8)),
                  std::invalid_argument);

  PolicyConfig missing;
  missing.kind = PolicyKind::Bibd;
  missing.servers = 7;
  missing.redundancy = 3;
  CHECK_THROWS_AS(AssignmentPolicy(missing), std::invalid_argument);

  PolicyConfig mismatched = bibd_cfg(3);
  mismatched.servers = 21;
  CHECK_THROWS_AS(AssignmentPolicy(mismatched), std::invalid_argument);
}

TEST_CASE("all policies emit r distinct servers in range") {
  const int n = 21;
  const int r = 5;
  std::vector<PolicyConfig> cfgs{random_cfg(n, r, 9), round_robin(n, r, 3),
                                 bibd_cfg(r)};
  for (const auto& cfg : cfgs) {
    AssignmentPolicy pol(cfg);
    for (int i = 0; i < 100'000; ++i) {
      REQUIRE(well_formed(pol.next(), n, r));
    }
  }
}

TEST_CASE("random assignments hit each server uniformly") {
  const int n = 21;
  const int r = 5;
  const int draws = 1'000'000;
  AssignmentPolicy pol(random_cfg(n, r, 20240601));
  std::vector<long> uses(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < draws; ++i) {
    for (int s : pol.next()) ++uses[static_cast<std::size_t>(s)];
  }
  // Per-server count is Binomial(draws, r/n).
  const double mean = static_cast<double>(draws) * r / n;
  const double sd = std::sqrt(static_cast<double>(draws) * (double(r) / n) *
                              (1.0 - double(r) / n));
  for (long u : uses) {
    CHECK(std::fabs(static_cast<double>(u) - mean) <= 3.0 * sd);
  }
}

TEST_CASE("stride 1 consecutive windows share r-1 servers") {
  AssignmentPolicy pol(round_robin(21, 5, 1));
  Assignment prev = pol.next();
  for (int i = 0; i < 200; ++i) {
    Assignment cur = pol.next();
    CHECK(overlap(prev, cur) == 4);
    prev = cur;
  }
}

TEST_CASE("round robin balances over a full cursor period") {
  // Coprime stride: every server is used exactly r times per n calls.
  for (int stride : {1, 2, 5}) {
    AssignmentPolicy pol(round_robin(21, 4, stride));
    std::vector<int> uses(21, 0);
    for (int i = 0; i < 21; ++i) {
      for (int s : pol.next()) ++uses[static_cast<std::size_t>(s)];
    }
    for (int u : uses) CHECK(u == 4);
  }
  // Disjoint windows (stride = r dividing n): each server once per period.
  AssignmentPolicy pol(round_robin(20, 5, 5));
  std::vector<int> uses(20, 0);
  for (int i = 0; i < 4; ++i) {
    for (int s : pol.next()) ++uses[static_cast<std::size_t>(s)];
  }
  for (int u : uses) CHECK(u == 1);
}

TEST_CASE("bibd assignments pairwise intersect in exactly one server") {
  AssignmentPolicy pol(bibd_cfg(5));
  std::vector<Assignment> period;
  for (int i = 0; i < 21; ++i) period.push_back(pol.next());
  for (std::size_t a = 0; a < period.size(); ++a) {
    for (std::size_t b = a + 1; b < period.size(); ++b) {
      CHECK(overlap(period[a], period[b]) == 1);
    }
  }
  std::vector<int> uses(21, 0);
  for (const auto& block : period) {
    for (int s : block) ++uses[static_cast<std::size_t>(s)];
  }
  for (int u : uses) CHECK(u == 5);
}

TEST_CASE("random consecutive overlaps follow the hypergeometric law") {
  const int n = 21;
  const int r = 5;
  const int samples = 100'000;
  AssignmentPolicy pol(random_cfg(n, r, 77));
  std::vector<long> hist(static_cast<std::size_t>(r + 1), 0);
  Assignment prev = pol.next();
  for (int i = 0; i < samples; ++i) {
    Assignment cur = pol.next();
    ++hist[static_cast<std::size_t>(overlap(prev, cur))];
    prev = cur;
  }
  // chi-square against Hypergeometric(N=21, K=5, draws=5); critical value
  // 20.515 at alpha = 0.001 with 5 degrees of freedom.
  double chi2 = 0.0;
  for (int k = 0; k <= r; ++k) {
    const double pmf =
        binom(r, k) * binom(n - r, r - k) / binom(n, r);
    const double expected = pmf * samples;
    const double diff = static_cast<double>(hist[static_cast<std::size_t>(k)]) - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 20.515);
}
