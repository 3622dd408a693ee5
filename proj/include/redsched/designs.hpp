#pragma once

// Cyclic (n, r, 1) difference sets and their development into symmetric
// balanced incomplete block designs for the n = r(r-1)+1 family. Every point
// pair lies in exactly one block and any two blocks meet in exactly one
// point, which is what the BIBD dispatch policy relies on.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace redsched::designs {

/// Residues mod `modulus` whose pairwise differences cover every nonzero
/// residue exactly once. Sorted ascending, 0 always a member.
struct DifferenceSet {
  int modulus = 0;
  std::vector<int> residues;

  int size() const noexcept { return static_cast<int>(residues.size()); }
};

/// A symmetric block design: n points, n blocks of size r, every point in r
/// blocks, every point pair in exactly `lambda` blocks.
struct BlockDesign {
  int points = 0;
  std::vector<std::vector<int>> blocks;
  int lambda = 1;

  int block_size() const noexcept {
    return blocks.empty() ? 0 : static_cast<int>(blocks.front().size());
  }
};

struct Violation {
  std::string rule; // block-count | block-content | replication |
                    // pair-coverage | block-intersection
  int a = -1;       // point, pair member, or block index (rule dependent)
  int b = -1;
  long observed = -1;
};

struct VerificationReport {
  bool passed = false;
  std::vector<Violation> violations;
};

/// Number of servers (points) paired with redundancy r in this family.
constexpr int points_for(int r) noexcept { return r * (r - 1) + 1; }

/// True iff `residues` is a planar ((n, r, 1)) difference set mod n.
inline bool is_planar_difference_set(const std::vector<int>& residues, int n) {
  if (n < 1) return false;
  const int r = static_cast<int>(residues.size());
  if (n != points_for(r)) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int a : residues) {
    if (a < 0 || a >= n) return false;
    for (int b : residues) {
      if (a == b) continue;
      const int d = ((a - b) % n + n) % n;
      if (d == 0 || seen[static_cast<std::size_t>(d)]) return false;
      seen[static_cast<std::size_t>(d)] = 1;
    }
  }
  for (int d = 1; d < n; ++d) {
    if (!seen[static_cast<std::size_t>(d)]) return false;
  }
  return true;
}

namespace detail {

// Backtracking over ascending residues with 0 fixed; a used-difference table
// prunes on the first repeated difference. Returns the lexicographically
// first complete set, or nullopt when the search space is exhausted.
inline std::optional<std::vector<int>> search_difference_set(int r) {
  const int n = points_for(r);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<int> cur{0};
  std::vector<int> marks; // scratch for undo

  auto rec = [&](auto&& self, int start) -> bool {
    if (static_cast<int>(cur.size()) == r) return true;
    for (int x = start; x < n; ++x) {
      bool ok = true;
      const std::size_t mark_base = marks.size();
      for (int a : cur) {
        const int d1 = (x - a + n) % n;
        const int d2 = (a - x + n) % n;
        if (used[static_cast<std::size_t>(d1)] ||
            used[static_cast<std::size_t>(d2)] || d1 == d2) {
          ok = false;
          break;
        }
        used[static_cast<std::size_t>(d1)] = 1;
        used[static_cast<std::size_t>(d2)] = 1;
        marks.push_back(d1);
        marks.push_back(d2);
      }
      if (ok) {
        cur.push_back(x);
        if (self(self, x + 1)) return true;
        cur.pop_back();
      }
      while (marks.size() > mark_base) {
        used[static_cast<std::size_t>(marks.back())] = 0;
        marks.pop_back();
      }
    }
    return false;
  };

  if (rec(rec, 1)) return cur;
  return std::nullopt;
}

struct CachedSet {
  int r;
  std::vector<int> residues;
};

// Planar difference sets for small r, validated on first access.
inline const std::vector<int>* cached_residues(int r) {
  static const std::array<CachedSet, 5> cache = {{
      {2, {0, 1}},
      {3, {0, 1, 3}},
      {4, {0, 1, 3, 9}},
      {5, {0, 1, 6, 8, 18}},
      {6, {0, 1, 3, 8, 12, 18}},
  }};
  static const bool validated = [] {
    for (const auto& entry : cache) {
      if (!is_planar_difference_set(entry.residues, points_for(entry.r))) {
        throw std::logic_error("difference-set cache is corrupt");
      }
    }
    return true;
  }();
  (void)validated;
  for (const auto& entry : cache) {
    if (entry.r == r) return &entry.residues;
  }
  return nullptr;
}

} // namespace detail

/// Find the cyclic (r(r-1)+1, r, 1) difference set for redundancy r.
/// Small r come from a validated built-in table; other r run an exhaustive
/// backtracking search. Returns nullopt when no such set exists (r = 7 is
/// the first case: there is no projective plane of order 6).
inline std::optional<DifferenceSet> find_difference_set(int r) {
  if (r < 2) {
    throw std::invalid_argument("find_difference_set: r must be >= 2");
  }
  const int n = points_for(r);
  if (const std::vector<int>* hit = detail::cached_residues(r)) {
    return DifferenceSet{n, *hit};
  }
  if (auto found = detail::search_difference_set(r)) {
    return DifferenceSet{n, std::move(*found)};
  }
  return std::nullopt;
}

/// Develop a difference set cyclically: block t is the set shifted by t.
inline BlockDesign expand_blocks(const DifferenceSet& ds) {
  const int n = ds.modulus;
  BlockDesign d;
  d.points = n;
  d.lambda = 1;
  d.blocks.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    std::vector<int> block;
    block.reserve(ds.residues.size());
    for (int x : ds.residues) block.push_back((x + t) % n);
    std::sort(block.begin(), block.end());
    d.blocks.push_back(std::move(block));
  }
  return d;
}

/// Check every symmetric-design invariant by enumeration. Failures are
/// reported as data, one entry per violating witness.
inline VerificationReport verify_design(const BlockDesign& d) {
  VerificationReport report;
  auto add = [&report](std::string rule, int a, int b, long observed) {
    report.violations.push_back({std::move(rule), a, b, observed});
  };

  const int n = d.points;
  const long b_count = static_cast<long>(d.blocks.size());
  if (b_count != n) {
    add("block-count", -1, -1, b_count);
  }
  const int r = d.block_size();
  bool contents_ok = true;
  for (std::size_t t = 0; t < d.blocks.size(); ++t) {
    const auto& block = d.blocks[t];
    std::vector<int> sorted(block);
    std::sort(sorted.begin(), sorted.end());
    const bool in_range =
        std::all_of(sorted.begin(), sorted.end(),
                    [n](int p) { return p >= 0 && p < n; });
    const bool distinct =
        std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    if (!in_range || !distinct ||
        static_cast<int>(block.size()) != r) {
      add("block-content", static_cast<int>(t), -1,
          static_cast<long>(block.size()));
      contents_ok = false;
    }
  }
  if (!contents_ok || n <= 0) {
    report.passed = report.violations.empty();
    return report;
  }

  std::vector<std::vector<int>> sorted_blocks(d.blocks);
  for (auto& block : sorted_blocks) std::sort(block.begin(), block.end());

  // Replication: every point in exactly r blocks.
  std::vector<long> replication(static_cast<std::size_t>(n), 0);
  for (const auto& block : d.blocks) {
    for (int p : block) ++replication[static_cast<std::size_t>(p)];
  }
  for (int p = 0; p < n; ++p) {
    if (replication[static_cast<std::size_t>(p)] != r) {
      add("replication", p, -1, replication[static_cast<std::size_t>(p)]);
    }
  }

  // Pair coverage: every unordered point pair in exactly lambda blocks.
  std::vector<long> pair_count(static_cast<std::size_t>(n) * n, 0);
  for (const auto& block : d.blocks) {
    for (std::size_t i = 0; i < block.size(); ++i) {
      for (std::size_t j = i + 1; j < block.size(); ++j) {
        const int p = std::min(block[i], block[j]);
        const int q = std::max(block[i], block[j]);
        ++pair_count[static_cast<std::size_t>(p) * n + q];
      }
    }
  }
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      const long c = pair_count[static_cast<std::size_t>(p) * n + q];
      if (c != d.lambda) {
        add("pair-coverage", p, q, c);
      }
    }
  }

  // Intersection: any two distinct blocks share exactly lambda points.
  for (std::size_t s = 0; s < sorted_blocks.size(); ++s) {
    for (std::size_t t = s + 1; t < sorted_blocks.size(); ++t) {
      std::vector<int> shared;
      std::set_intersection(sorted_blocks[s].begin(), sorted_blocks[s].end(),
                            sorted_blocks[t].begin(), sorted_blocks[t].end(),
                            std::back_inserter(shared));
      if (static_cast<long>(shared.size()) != d.lambda) {
        add("block-intersection", static_cast<int>(s), static_cast<int>(t),
            static_cast<long>(shared.size()));
      }
    }
  }

  report.passed = report.violations.empty();
  return report;
}

} // namespace redsched::designs
