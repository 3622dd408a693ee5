#pragma once

// Non-adaptive server-set generators. Each call yields one set of r distinct
// servers for an arriving job, independent of queue state: uniform random
// subsets, a sliding round-robin window, or the blocks of a symmetric design
// in cyclic order.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "redsched/designs.hpp"
#include "redsched/rng.hpp"

namespace redsched::policies {

enum class PolicyKind { Random, RoundRobin, Bibd };

inline std::string_view to_string(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::Random: return "random";
    case PolicyKind::RoundRobin: return "round-robin";
    case PolicyKind::Bibd: return "bibd";
  }
  return "?";
}

/// Sorted set of r distinct server indices in [0, n).
using Assignment = std::vector<int>;

struct PolicyConfig {
  PolicyKind kind = PolicyKind::Random;
  int servers = 0;     // n
  int redundancy = 0;  // r
  int stride = 1;      // RoundRobin: window advance per arrival
  std::uint64_t seed = 1;
  std::optional<designs::BlockDesign> design; // Bibd only
};

/// Stateful assignment generator. One instance drives one replication;
/// distinct instances are independent.
class AssignmentPolicy {
 public:
  explicit AssignmentPolicy(PolicyConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    if (cfg_.design) {
      for (auto& block : cfg_.design->blocks) {
        std::sort(block.begin(), block.end());
      }
    }
    reset();
  }

  /// Server set for the next arrival; advances cursor / RNG state.
  Assignment next() {
    switch (cfg_.kind) {
      case PolicyKind::Random: return next_random();
      case PolicyKind::RoundRobin: return next_round_robin();
      case PolicyKind::Bibd: return next_bibd();
    }
    throw std::logic_error("unreachable policy kind");
  }

  /// Back to cursor 0 and a fresh RNG stream from the configured seed. Two
  /// policies reset with equal configs produce identical sequences.
  void reset() {
    cursor_ = 0;
    rng_ = rng::make_engine(cfg_.seed);
    if (cfg_.kind == PolicyKind::Random) {
      perm_.resize(static_cast<std::size_t>(cfg_.servers));
      std::iota(perm_.begin(), perm_.end(), 0);
    }
  }

  const PolicyConfig& config() const noexcept { return cfg_; }
  int cursor() const noexcept { return cursor_; }

  static void validate(const PolicyConfig& cfg) {
    if (cfg.redundancy < 1 || cfg.redundancy > cfg.servers) {
      throw std::invalid_argument("policy: need 1 <= r <= n");
    }
    if (cfg.kind == PolicyKind::RoundRobin &&
        (cfg.stride < 1 || cfg.stride > cfg.servers)) {
      throw std::invalid_argument("policy: need 1 <= stride <= n");
    }
    if (cfg.kind == PolicyKind::Bibd) {
      if (!cfg.design) {
        throw std::invalid_argument("policy: bibd requires a block design");
      }
      const auto& d = *cfg.design;
      if (d.points != cfg.servers ||
          static_cast<int>(d.blocks.size()) != cfg.servers ||
          d.block_size() != cfg.redundancy) {
        throw std::invalid_argument(
            "policy: design does not match (n, r)");
      }
      for (const auto& block : d.blocks) {
        std::vector<int> sorted(block);
        std::sort(sorted.begin(), sorted.end());
        const bool in_range = sorted.empty() ||
                              (sorted.front() >= 0 && sorted.back() < d.points);
        if (static_cast<int>(block.size()) != cfg.redundancy || !in_range ||
            std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
          throw std::invalid_argument("policy: malformed design block");
        }
      }
    }
  }

 private:
  Assignment next_random() {
    const int n = cfg_.servers;
    const int r = cfg_.redundancy;
    // Partial Fisher-Yates: the leading r entries are a uniform r-subset
    // regardless of the permutation left behind by earlier calls.
    for (int i = 0; i < r; ++i) {
      const int j =
          i + static_cast<int>(rng::uniform_below(
                  rng_, static_cast<std::uint64_t>(n - i)));
      std::swap(perm_[static_cast<std::size_t>(i)],
                perm_[static_cast<std::size_t>(j)]);
    }
    Assignment out(perm_.begin(), perm_.begin() + r);
    std::sort(out.begin(), out.end());
    return out;
  }

  Assignment next_round_robin() {
    const int n = cfg_.servers;
    Assignment out;
    out.reserve(static_cast<std::size_t>(cfg_.redundancy));
    for (int i = 0; i < cfg_.redundancy; ++i) {
      out.push_back((cursor_ + i) % n);
    }
    std::sort(out.begin(), out.end());
    cursor_ = (cursor_ + cfg_.stride) % n;
    return out;
  }

  Assignment next_bibd() {
    Assignment out = cfg_.design->blocks[static_cast<std::size_t>(cursor_)];
    cursor_ = (cursor_ + 1) % cfg_.servers;
    return out;
  }

  PolicyConfig cfg_;
  int cursor_ = 0;
  rng::Engine rng_;
  std::vector<int> perm_;
};

} // namespace redsched::policies
