#pragma once

// Streaming statistics: Welford moments with exact-stream merge, Student-t
// quantiles (self-contained, no tables), batch-means confidence intervals and
// occupancy order statistics.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace redsched::stats {

/// Single-pass mean/variance accumulator (Welford recurrence). Merging two
/// accumulators yields the moments of the concatenated streams.
class RunningMoments {
 public:
  void update(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningMoments& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / (na + nb);
    m2_ += other.m2_ + delta * delta * na * nb / (na + nb);
    count_ += other.count_;
  }

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }

  /// Sample variance (n-1 denominator); 0 for fewer than two samples.
  double variance() const noexcept {
    return count_ < 2 ? 0.0 : m2_ / static_cast<double>(count_ - 1);
  }

  double stddev() const noexcept { return std::sqrt(variance()); }

  double std_error() const noexcept {
    return count_ < 2 ? 0.0
                      : std::sqrt(variance() / static_cast<double>(count_));
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

namespace detail {

// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction.
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where the fraction converges
  // fastest.
  if (x > (a + 1.0) / (a + b + 2.0)) {
    return 1.0 - incomplete_beta(b, a, 1.0 - x);
  }
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  constexpr double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 400; ++m) {
    const double dm = static_cast<double>(m);
    double num = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + dm) * (a + b + dm) * x /
          ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(ln_front) * h / a;
}

inline double student_t_cdf(double t, double dof) {
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

} // namespace detail

/// Quantile of Student's t distribution with `dof` degrees of freedom,
/// accurate to well under 1e-6 for dof >= 1.
inline double student_t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("student_t_quantile: p must be in (0, 1)");
  }
  if (!(dof >= 1.0)) {
    throw std::invalid_argument("student_t_quantile: dof must be >= 1");
  }
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, dof);
  double hi = 1.0;
  while (detail::student_t_cdf(hi, dof) < p) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (detail::student_t_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-13 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

/// Batch means with a fixed confidence level. Half-width needs >= 2 batches.
struct BatchMeansCI {
  std::size_t batch_size = 0;
  std::vector<double> batch_means;
  double level = 0.95;
};

inline double ci_halfwidth(const BatchMeansCI& b) {
  const std::size_t k = b.batch_means.size();
  if (k < 2) {
    throw std::invalid_argument("ci_halfwidth: need at least 2 batches");
  }
  RunningMoments rm;
  for (double m : b.batch_means) rm.update(m);
  const double t =
      student_t_quantile(0.5 + 0.5 * b.level, static_cast<double>(k - 1));
  return t * rm.std_error();
}

/// Replication-level half-width: t-quantile times the standard error of the
/// per-replication means.
inline double replication_halfwidth(std::span<const double> rep_means,
                                    double level = 0.95) {
  if (rep_means.size() < 2) return 0.0;
  RunningMoments rm;
  for (double m : rep_means) rm.update(m);
  const double t = student_t_quantile(
      0.5 + 0.5 * level, static_cast<double>(rep_means.size() - 1));
  return t * rm.std_error();
}

/// Smallest and largest entry of a non-empty occupancy vector.
inline std::pair<std::int64_t, std::int64_t> min_max(
    std::span<const std::int64_t> counts) {
  if (counts.empty()) {
    throw std::invalid_argument("min_max: empty input");
  }
  std::int64_t lo = counts[0];
  std::int64_t hi = counts[0];
  for (std::int64_t c : counts) {
    if (c < lo) lo = c;
    if (c > hi) hi = c;
  }
  return {lo, hi};
}

} // namespace redsched::stats
