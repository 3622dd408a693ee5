#pragma once

// Discrete-event simulator: Poisson arrivals, each job copied into the r
// queues picked by a policy, n FIFO servers, bimodal exponential service.
// Cancel-on-start semantics: the moment one copy enters service every
// sibling copy is discarded, so a job consumes exactly one service draw and
// redundancy only ever shortens queueing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <queue>
#include <stdexcept>
#include <vector>

#include "redsched/policies.hpp"
#include "redsched/rng.hpp"
#include "redsched/stats.hpp"

namespace redsched::sim {

struct SimConfig {
  int servers = 1;     // n
  int redundancy = 1;  // r
  double mu1 = 1.0;    // regular service rate
  double q = 1.0;      // data-intensive mean service inflation (>= 1)
  double p = 0.0;      // probability an arrival is data-intensive
  double lambda = 1.0; // Poisson arrival rate
  std::int64_t total_jobs = 0;
  std::int64_t warmup_jobs = 0; // leading jobs excluded from statistics
  std::uint64_t seed = 1;
};

inline void validate(const SimConfig& cfg) {
  if (cfg.servers < 1 || cfg.redundancy < 1 ||
      cfg.redundancy > cfg.servers) {
    throw std::invalid_argument("sim: need 1 <= r <= n");
  }
  if (!(cfg.mu1 > 0.0)) throw std::invalid_argument("sim: mu1 must be > 0");
  if (!(cfg.q >= 1.0)) throw std::invalid_argument("sim: q must be >= 1");
  if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) {
    throw std::invalid_argument("sim: p must be in [0, 1]");
  }
  if (!(cfg.lambda > 0.0)) {
    throw std::invalid_argument("sim: lambda must be > 0");
  }
  if (cfg.total_jobs < 1 || cfg.warmup_jobs < 0 ||
      cfg.warmup_jobs >= cfg.total_jobs) {
    throw std::invalid_argument("sim: need 0 <= warmup_jobs < total_jobs");
  }
}

/// Mean service time of an arrival: (1-p)/mu1 + p q/mu1.
inline double mean_service_time(const SimConfig& cfg) {
  return (1.0 - cfg.p) / cfg.mu1 + cfg.p * cfg.q / cfg.mu1;
}

/// Arrival rate at which offered work equals capacity, n / E[S].
inline double saturation_rate(const SimConfig& cfg) {
  return static_cast<double>(cfg.servers) / mean_service_time(cfg);
}

enum class JobClass : std::uint8_t { Regular, DataIntensive };

/// Exponential service draw: rate mu1 for regular jobs, mu1/q for
/// data-intensive ones.
inline double sample_service(JobClass cls, double mu1, double q,
                             rng::Engine& g) {
  const double rate = cls == JobClass::Regular ? mu1 : mu1 / q;
  return rng::exponential(g, rate);
}

struct MetricsRecord {
  double mean_queue_time = 0.0;    // arrival -> service start
  double mean_response_time = 0.0; // arrival -> departure
  double ci95_queue = 0.0;
  std::int64_t jobs_measured = 0;
  std::int64_t jobs_regular = 0;
  std::int64_t jobs_data = 0;
  double mean_queue_regular = 0.0;
  double mean_queue_data = 0.0;
  double mean_response_regular = 0.0;
  double mean_response_data = 0.0;
  std::vector<double> utilization; // per-server busy fraction
  bool unstable = false;
  int reps = 1;

  double util_mean() const noexcept {
    if (utilization.empty()) return 0.0;
    double acc = 0.0;
    for (double u : utilization) acc += u;
    return acc / static_cast<double>(utilization.size());
  }
};

namespace detail {

enum class JobState : std::uint8_t { Waiting, InService, Done };

struct JobRec {
  double arrival = 0.0;
  JobClass cls = JobClass::Regular;
  JobState state = JobState::Waiting;
};

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  std::int32_t server = -1; // >= 0: departure there; -1: arrival
  std::int64_t job = -1;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const noexcept {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

// Bookkeeping switched on only for invariant-checking runs. Violations are
// programming errors, reported as std::logic_error.
struct AuditState {
  std::vector<policies::Assignment> assignment;       // per job
  std::vector<std::vector<std::uint64_t>> push_order; // parallel to above
  std::vector<std::uint8_t> start_count;
  std::vector<std::uint8_t> depart_count;
  std::vector<std::int64_t> live;                 // waiting copies per server
  std::vector<std::uint64_t> last_started_order;  // FIFO watermark per server
  std::uint64_t push_counter = 0;
  std::int64_t dead_pops = 0;

  static void fail(const char* what) {
    throw std::logic_error(std::string("sim audit: ") + what);
  }
};

} // namespace detail

/// Run one replication and return its steady-state record. `audit` enables
/// exhaustive invariant checking (service-once, cancel accounting, FIFO
/// order, work conservation) at a modest cost; the sample path is identical
/// either way.
inline MetricsRecord run(const SimConfig& cfg,
                         const policies::PolicyConfig& policy,
                         bool audit = false) {
  using detail::Event;
  using detail::JobRec;
  using detail::JobState;

  validate(cfg);
  if (policy.servers != cfg.servers ||
      policy.redundancy != cfg.redundancy) {
    throw std::invalid_argument("sim: policy (n, r) must match the config");
  }

  const int n = cfg.servers;
  const int r = cfg.redundancy;
  const std::int64_t total = cfg.total_jobs;
  const double rate_regular = cfg.mu1;

  // Arrival and service streams are salted substreams of the config seed so
  // they never alias the policy's own stream even when both are seeded with
  // the same value.
  policies::AssignmentPolicy dispatch(policy);
  rng::Engine arrivals_rng =
      rng::make_engine(rng::derive_seed(cfg.seed, 0x41525256ull));
  rng::Engine service_rng =
      rng::make_engine(rng::derive_seed(cfg.seed, 0x53525643ull));

  std::vector<JobRec> jobs(static_cast<std::size_t>(total));
  std::vector<std::deque<std::int64_t>> queue(static_cast<std::size_t>(n));
  std::vector<std::int64_t> in_service(static_cast<std::size_t>(n), -1);
  std::vector<double> busy_since(static_cast<std::size_t>(n), 0.0);
  std::vector<double> busy_time(static_cast<std::size_t>(n), 0.0);

  std::priority_queue<Event, std::vector<Event>, detail::EventAfter> calendar;
  std::uint64_t event_seq = 0;
  auto schedule = [&](double time, std::int32_t server, std::int64_t job) {
    calendar.push(Event{time, event_seq++, server, job});
  };

  detail::AuditState aud;
  if (audit) {
    aud.assignment.resize(static_cast<std::size_t>(total));
    aud.push_order.resize(static_cast<std::size_t>(total));
    aud.start_count.assign(static_cast<std::size_t>(total), 0);
    aud.depart_count.assign(static_cast<std::size_t>(total), 0);
    aud.live.assign(static_cast<std::size_t>(n), 0);
    aud.last_started_order.assign(static_cast<std::size_t>(n), 0);
  }

  // Output accumulators. Queue times stream in service-start order into
  // equal-count batches for the single-run confidence interval.
  stats::RunningMoments queue_all, resp_all;
  stats::RunningMoments queue_cls[2], resp_cls[2];
  const std::int64_t measured_target = total - cfg.warmup_jobs;
  const int n_batches =
      measured_target >= 2
          ? static_cast<int>(std::min<std::int64_t>(20, measured_target))
          : 0;
  const std::int64_t batch_size =
      n_batches > 0 ? measured_target / n_batches : 0;
  std::vector<stats::RunningMoments> batch_acc(
      static_cast<std::size_t>(n_batches));
  std::int64_t measured_started = 0;

  auto record_start = [&](std::int64_t job, double now) {
    const JobRec& rec = jobs[static_cast<std::size_t>(job)];
    if (job < cfg.warmup_jobs) return;
    const double wait = now - rec.arrival;
    queue_all.update(wait);
    queue_cls[static_cast<int>(rec.cls)].update(wait);
    if (n_batches > 0) {
      const std::int64_t b =
          std::min<std::int64_t>(measured_started / batch_size, n_batches - 1);
      batch_acc[static_cast<std::size_t>(b)].update(wait);
    }
    ++measured_started;
  };

  // Pop the first still-waiting copy at server s and start it. Copies of
  // jobs that began service elsewhere sit in the queue as dead entries and
  // are skipped here.
  auto start_next = [&](int s, double now) {
    auto& q = queue[static_cast<std::size_t>(s)];
    while (!q.empty()) {
      const std::int64_t job = q.front();
      q.pop_front();
      JobRec& rec = jobs[static_cast<std::size_t>(job)];
      if (rec.state != JobState::Waiting) {
        if (audit) ++aud.dead_pops;
        continue;
      }
      if (audit) {
        if (++aud.start_count[static_cast<std::size_t>(job)] != 1) {
          detail::AuditState::fail("job started twice");
        }
        const auto& assigned = aud.assignment[static_cast<std::size_t>(job)];
        const auto it = std::find(assigned.begin(), assigned.end(), s);
        if (it == assigned.end()) {
          detail::AuditState::fail("serving server not in assignment");
        }
        const std::uint64_t order =
            aud.push_order[static_cast<std::size_t>(job)]
                          [static_cast<std::size_t>(it - assigned.begin())];
        if (order <= aud.last_started_order[static_cast<std::size_t>(s)]) {
          detail::AuditState::fail("FIFO order violated");
        }
        aud.last_started_order[static_cast<std::size_t>(s)] = order;
        for (int other : assigned) {
          --aud.live[static_cast<std::size_t>(other)];
        }
        if (now < rec.arrival) {
          detail::AuditState::fail("service start before arrival");
        }
      }
      rec.state = JobState::InService;
      record_start(job, now);
      in_service[static_cast<std::size_t>(s)] = job;
      busy_since[static_cast<std::size_t>(s)] = now;
      const double svc = sample_service(rec.cls, cfg.mu1, cfg.q, service_rng);
      schedule(now + svc, static_cast<std::int32_t>(s), job);
      return;
    }
  };

  std::int64_t generated = 0;
  schedule(rng::exponential(arrivals_rng, cfg.lambda), -1, generated++);

  double horizon = 0.0;
  while (!calendar.empty()) {
    const Event ev = calendar.top();
    calendar.pop();
    const double now = ev.time;
    horizon = now;

    if (ev.server < 0) {
      // Arrival: draw the class, enqueue one copy at each assigned server,
      // then the lowest-indexed idle assigned server (if any) starts it.
      const std::int64_t job = ev.job;
      JobRec& rec = jobs[static_cast<std::size_t>(job)];
      rec.arrival = now;
      rec.cls = rng::uniform_unit(arrivals_rng) <= cfg.p
                    ? JobClass::DataIntensive
                    : JobClass::Regular;
      rec.state = JobState::Waiting;
      policies::Assignment assigned = dispatch.next();
      for (int s : assigned) {
        queue[static_cast<std::size_t>(s)].push_back(job);
      }
      if (audit) {
        aud.push_order[static_cast<std::size_t>(job)].reserve(assigned.size());
        for (int s : assigned) {
          ++aud.live[static_cast<std::size_t>(s)];
          aud.push_order[static_cast<std::size_t>(job)].push_back(
              ++aud.push_counter);
        }
        aud.assignment[static_cast<std::size_t>(job)] = assigned;
      }
      for (int s : assigned) {
        if (in_service[static_cast<std::size_t>(s)] < 0) {
          start_next(s, now);
          break;
        }
      }
      if (generated < total) {
        schedule(now + rng::exponential(arrivals_rng, cfg.lambda), -1,
                 generated++);
      }
    } else {
      // Departure: finish the job in service, then pull the next live copy.
      const int s = ev.server;
      const std::int64_t job = in_service[static_cast<std::size_t>(s)];
      JobRec& rec = jobs[static_cast<std::size_t>(job)];
      if (audit) {
        if (job != ev.job || rec.state != JobState::InService) {
          detail::AuditState::fail("departure for a job not in service");
        }
        if (++aud.depart_count[static_cast<std::size_t>(job)] != 1) {
          detail::AuditState::fail("job departed twice");
        }
      }
      rec.state = JobState::Done;
      busy_time[static_cast<std::size_t>(s)] +=
          now - busy_since[static_cast<std::size_t>(s)];
      in_service[static_cast<std::size_t>(s)] = -1;
      if (job >= cfg.warmup_jobs) {
        const double resp = now - rec.arrival;
        resp_all.update(resp);
        resp_cls[static_cast<int>(rec.cls)].update(resp);
      }
      start_next(s, now);
    }

    if (audit) {
      for (int s = 0; s < n; ++s) {
        if (in_service[static_cast<std::size_t>(s)] < 0 &&
            aud.live[static_cast<std::size_t>(s)] != 0) {
          detail::AuditState::fail("idle server with waiting work");
        }
      }
    }
  }

  if (audit) {
    std::int64_t leftovers = 0;
    for (int s = 0; s < n; ++s) {
      for (std::int64_t job : queue[static_cast<std::size_t>(s)]) {
        if (jobs[static_cast<std::size_t>(job)].state != JobState::Done) {
          detail::AuditState::fail("live copy left after drain");
        }
        ++leftovers;
      }
    }
    if (aud.dead_pops + leftovers !=
        static_cast<std::int64_t>(r - 1) * total) {
      detail::AuditState::fail("cancelled-copy count is not (r-1) per job");
    }
    for (std::int64_t j = 0; j < total; ++j) {
      if (aud.start_count[static_cast<std::size_t>(j)] != 1 ||
          aud.depart_count[static_cast<std::size_t>(j)] != 1 ||
          jobs[static_cast<std::size_t>(j)].state != JobState::Done) {
        detail::AuditState::fail("job not served exactly once");
      }
    }
  }

  MetricsRecord out;
  out.mean_queue_time = queue_all.mean();
  out.mean_response_time = resp_all.mean();
  out.jobs_measured = static_cast<std::int64_t>(queue_all.count());
  out.jobs_regular = static_cast<std::int64_t>(queue_cls[0].count());
  out.jobs_data = static_cast<std::int64_t>(queue_cls[1].count());
  out.mean_queue_regular = queue_cls[0].mean();
  out.mean_queue_data = queue_cls[1].mean();
  out.mean_response_regular = resp_cls[0].mean();
  out.mean_response_data = resp_cls[1].mean();
  out.utilization.resize(static_cast<std::size_t>(n), 0.0);
  if (horizon > 0.0) {
    for (int s = 0; s < n; ++s) {
      out.utilization[static_cast<std::size_t>(s)] =
          busy_time[static_cast<std::size_t>(s)] / horizon;
    }
  }
  if (n_batches >= 2) {
    stats::BatchMeansCI ci;
    ci.batch_size = static_cast<std::size_t>(batch_size);
    ci.batch_means.reserve(static_cast<std::size_t>(n_batches));
    for (const auto& acc : batch_acc) ci.batch_means.push_back(acc.mean());
    out.ci95_queue = stats::ci_halfwidth(ci);
    // Trend check on coarse batch means: a strict monotone rise across the
    // whole run flags an unstable (overloaded) configuration.
    if (n_batches == 20) {
      bool rising = true;
      for (int i = 2; i < 20 && rising; i += 2) {
        const double prev =
            0.5 * (ci.batch_means[static_cast<std::size_t>(i - 2)] +
                   ci.batch_means[static_cast<std::size_t>(i - 1)]);
        const double next =
            0.5 * (ci.batch_means[static_cast<std::size_t>(i)] +
                   ci.batch_means[static_cast<std::size_t>(i + 1)]);
        rising = next > prev;
      }
      out.unstable = rising;
    }
  }
  return out;
}

/// `reps` independent replications on derived seed substreams, pooled.
/// reps = 1 is exactly `run`. The 95% half-width comes from the spread of
/// per-replication means.
inline MetricsRecord run_replications(const SimConfig& cfg,
                                      const policies::PolicyConfig& policy,
                                      int reps, bool audit = false) {
  if (reps < 1) {
    throw std::invalid_argument("run_replications: reps must be >= 1");
  }
  if (reps == 1) return run(cfg, policy, audit);

  std::vector<MetricsRecord> recs;
  recs.reserve(static_cast<std::size_t>(reps));
  for (int k = 0; k < reps; ++k) {
    SimConfig rep_cfg = cfg;
    rep_cfg.seed = rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(k));
    policies::PolicyConfig rep_policy = policy;
    rep_policy.seed =
        rng::derive_seed(policy.seed, static_cast<std::uint64_t>(k));
    recs.push_back(run(rep_cfg, rep_policy, audit));
  }

  MetricsRecord out;
  out.reps = reps;
  out.utilization.assign(static_cast<std::size_t>(cfg.servers), 0.0);
  std::vector<double> queue_means;
  queue_means.reserve(recs.size());
  double resp_acc = 0.0;
  double q_reg_w = 0.0, q_dat_w = 0.0, r_reg_w = 0.0, r_dat_w = 0.0;
  for (const MetricsRecord& rec : recs) {
    queue_means.push_back(rec.mean_queue_time);
    resp_acc += rec.mean_response_time;
    out.jobs_measured += rec.jobs_measured;
    out.jobs_regular += rec.jobs_regular;
    out.jobs_data += rec.jobs_data;
    q_reg_w += rec.mean_queue_regular * static_cast<double>(rec.jobs_regular);
    q_dat_w += rec.mean_queue_data * static_cast<double>(rec.jobs_data);
    r_reg_w +=
        rec.mean_response_regular * static_cast<double>(rec.jobs_regular);
    r_dat_w += rec.mean_response_data * static_cast<double>(rec.jobs_data);
    for (std::size_t s = 0; s < out.utilization.size(); ++s) {
      out.utilization[s] += rec.utilization[s] / static_cast<double>(reps);
    }
    out.unstable = out.unstable || rec.unstable;
  }
  double queue_acc = 0.0;
  for (double m : queue_means) queue_acc += m;
  out.mean_queue_time = queue_acc / static_cast<double>(reps);
  out.mean_response_time = resp_acc / static_cast<double>(reps);
  out.mean_queue_regular =
      out.jobs_regular > 0 ? q_reg_w / static_cast<double>(out.jobs_regular)
                           : 0.0;
  out.mean_queue_data =
      out.jobs_data > 0 ? q_dat_w / static_cast<double>(out.jobs_data) : 0.0;
  out.mean_response_regular =
      out.jobs_regular > 0 ? r_reg_w / static_cast<double>(out.jobs_regular)
                           : 0.0;
  out.mean_response_data =
      out.jobs_data > 0 ? r_dat_w / static_cast<double>(out.jobs_data) : 0.0;
  out.ci95_queue = stats::replication_halfwidth(queue_means);
  return out;
}

} // namespace redsched::sim
