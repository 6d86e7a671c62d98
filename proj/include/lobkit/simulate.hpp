#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "lobkit/book.hpp"
#include "lobkit/intensity.hpp"
#include "lobkit/rng.hpp"
#include "lobkit/stability.hpp"
#include "lobkit/stats.hpp"

namespace lobkit {

// ---------------------------------------------------------------------------
// Event logs
// ---------------------------------------------------------------------------

struct EventRecord {
  double t = 0.0;
  int agent = 1;
  Side side = Side::Bid;
  Direction dir = Direction::Provide;
  int level = 0;
  int size = 1;
  BookState post{};
  bool depleted = false;
  int price_move = 0;  // ticks

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct LogMeta {
  std::uint64_t seed = 0;
  std::string model_id = "unknown";
  BookState initial{2, 2, 1};
  double t0 = 0.0;
  double horizon = 0.0;     // end of the simulated window, seconds
  double unit_per_aes = 1.0;  // order-size units per AES
  double tick_size = 1.0;   // price units per tick

  friend bool operator==(const LogMeta&, const LogMeta&) = default;
};

struct EventLog {
  LogMeta meta;
  std::vector<EventRecord> records;
};

// Rebuilds the event input of a record given its pre-state (the replenishment
// field is the recorded post-state when the event depleted a queue).
inline EventInput record_to_input(const EventRecord& r) {
  EventInput e;
  e.size = r.size;
  e.level = r.level;
  e.dir = r.dir;
  e.side = r.side;
  e.agent = r.agent;
  if (r.depleted) e.replenish = r.post;
  return e;
}

// ---------------------------------------------------------------------------
// Simulation by thinning
// ---------------------------------------------------------------------------

struct SimConfig {
  IntensityModel model;
  BookState initial{2, 2, 1};
  double horizon_time = std::numeric_limits<double>::infinity();  // seconds
  long max_events = std::numeric_limits<long>::max();
  std::uint64_t seed = 1;
  double rate_cap = 1e7;       // dominating-rate abort threshold
  int empirical_window = 4096;  // ring buffer for resampled replenishment
  double tick_size = 1.0;
  double unit_per_aes = 1.0;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact pathwise construction of the event process by thinning against a
// piecewise-constant dominating rate.
//
// Between accepted events the book state is frozen and the kernel summaries
// cannot grow (exponential kernels decay, the empty kernel is constant), so
// the left-limit total rate dominates until the next event; user kernels get
// a configured multiplicative head room instead, and any observed violation
// aborts rather than biasing the law.
//
// Random-stream layout (one SplitMix64 draw each, in order): waiting time,
// acceptance; then on acceptance: class pick, and a replenishment draw when
// the event depletes a queue. This makes logs bit-reproducible from the seed.
inline EventLog simulate(const SimConfig& cfg) {
  cfg.model.validate();
  if (!cfg.initial.observable())
    throw std::invalid_argument("simulate: initial state must be observable");
  if (!(cfg.horizon_time > 0.0) && cfg.max_events == std::numeric_limits<long>::max())
    throw std::invalid_argument("simulate: need a positive time horizon or an event cap");

  const IntensityModel& m = cfg.model;
  const bool user_kernel = std::holds_alternative<UserKernel>(m.kernel);
  const double headroom = user_kernel ? std::get<UserKernel>(m.kernel).headroom : 1.0;
  if (user_kernel && !(headroom >= 1.0))
    throw std::invalid_argument("simulate: user-kernel head room must be >= 1");

  Rng rng(cfg.seed);
  KernelState ks(m);
  BookState u = cfg.initial;
  double t = 0.0;

  EventLog log;
  log.meta.seed = cfg.seed;
  log.meta.model_id = m.id;
  log.meta.initial = cfg.initial;
  log.meta.tick_size = cfg.tick_size;
  log.meta.unit_per_aes = cfg.unit_per_aes;

  std::vector<BookState> ring;  // recent post-states for empirical resampling
  ring.reserve(static_cast<std::size_t>(std::max(cfg.empirical_window, 1)));
  ring.push_back(cfg.initial);
  std::size_t ring_next = ring.size();

  std::vector<double> rates(m.n_classes(), 0.0);
  const auto total_rate = [&](const BookState& state) {
    double total = 0.0;
    for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
      rates[ci] = evaluate_intensity(m, ci, state, ks.time(), ks.summary(ci));
      total += rates[ci];
    }
    return total;
  };

  while (static_cast<long>(log.records.size()) < cfg.max_events) {
    ks.advance_to(t);
    const double lambda_now = total_rate(u);
    if (!(lambda_now > 0.0)) break;  // silent forever: summaries only decay
    const double bound = lambda_now * headroom;
    if (bound > cfg.rate_cap)
      throw SimulationError("simulate: dominating rate " + std::to_string(bound) +
                            " exceeds the configured cap at t=" + std::to_string(t));

    const double wait = rng.next_exponential(bound);
    const double tc = t + wait;
    if (tc >= cfg.horizon_time) {
      t = cfg.horizon_time;
      break;
    }

    ks.advance_to(tc);
    const double lambda_cand = total_rate(u);
    if (lambda_cand > bound * (1.0 + 1e-9))
      throw SimulationError("simulate: dominating bound violated (rate rose between events); "
                            "increase the kernel head room");

    const double accept = rng.next_unit() * bound;
    if (accept >= lambda_cand) {
      t = tc;  // rejected candidate; summaries stay decayed
      continue;
    }

    const std::size_t ci = rng.next_index(rates, lambda_cand);
    EventInput e = make_event(m.classes[ci], u);
    const bool depletes =
        e.dir == Direction::Consume && e.size >= (e.side == Side::Bid ? u.q1 : u.q2);
    if (depletes) {
      switch (m.replenishment.kind) {
        case ReplenishmentSpec::Kind::Categorical: {
          std::vector<double> w(m.replenishment.categorical.size());
          for (std::size_t i = 0; i < w.size(); ++i) w[i] = m.replenishment.categorical[i].second;
          e.replenish =
              m.replenishment.categorical[rng.next_index(w, m.replenishment.total_weight())].first;
          break;
        }
        case ReplenishmentSpec::Kind::DepletedSideReset: {
          std::vector<double> w(m.replenishment.side_reset.size());
          for (std::size_t i = 0; i < w.size(); ++i) w[i] = m.replenishment.side_reset[i].second;
          const int q =
              m.replenishment.side_reset[rng.next_index(w, m.replenishment.side_reset_weight())]
                  .first;
          e.replenish = m.replenishment.resolve_side_reset(u, e.side, q);
          break;
        }
        case ReplenishmentSpec::Kind::EmpiricalResample:
          e.replenish = ring[static_cast<std::size_t>(rng.next_u64() % ring.size())];
          break;
      }
    }

    const Transition tr = apply_event(u, e);
    log.records.push_back({tc, e.agent, e.side, e.dir, e.level, e.size, tr.post, tr.depleted,
                           tr.price_move});
    ks.add_event(ci);
    u = tr.post;
    t = tc;

    if (ring.size() < static_cast<std::size_t>(std::max(cfg.empirical_window, 1))) {
      ring.push_back(u);
    } else {
      ring[ring_next % ring.size()] = u;
    }
    ++ring_next;
  }

  log.meta.horizon = std::isfinite(cfg.horizon_time) ? cfg.horizon_time : t;
  return log;
}

// ---------------------------------------------------------------------------
// Residual diagnostics (time-rescaling goodness of fit)
// ---------------------------------------------------------------------------

struct ReplayDiagnostics {
  std::size_t n = 0;
  std::vector<double> rescaled;  // total-process compensator increments
  double mean_increment = 0.0;   // ~= 1 under the generating model
  double ks_stat = 0.0;
  double ks_critical_1pct = 0.0;
  bool rejected = false;
  std::unordered_map<std::size_t, double> class_mean;  // per-class compensator per own event
};

namespace detail {

inline double compensator_increment(const IntensityModel& m, double h, double z0, double dt) {
  switch (m.family) {
    case Family::Poisson:
    case Family::QueueReactive:
      return h * dt;
    case Family::HawkesQueueReactive: {
      const auto* k = std::get_if<ExponentialKernel>(&m.kernel);
      if (!k) return h * dt;  // no kernel: reduces to the base
      const double b = k->beta;
      return h * dt + z0 * (1.0 - std::exp(-b * dt)) / b;
    }
    case Family::QuadraticHawkes: {
      const auto* k = std::get_if<ExponentialKernel>(&m.kernel);
      if (!k) return h * dt;
      const double b = k->beta;
      return h * dt + z0 * z0 * (1.0 - std::exp(-2.0 * b * dt)) / (2.0 * b);
    }
  }
  return h * dt;
}

}  // namespace detail

// Replays a log under a (possibly different) model and returns the
// time-rescaled residuals: under the generating model the per-event
// compensator increments are unit exponentials, checked by a KS test at the
// 1% level. Exponential and history-free kernels integrate in closed form;
// user kernels are integrated numerically.
inline ReplayDiagnostics replay(const EventLog& log, const IntensityModel& m) {
  m.validate();
  ReplayDiagnostics diag;
  if (log.records.empty()) return diag;

  // Class lookup for the log's events.
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
    const EventClass& c = m.classes[ci];
    const std::string key = std::to_string(static_cast<int>(c.kind)) + ":" +
                            std::to_string(side_index(c.side)) + ":" + std::to_string(c.agent) +
                            ":" + std::to_string(c.size) + ":" +
                            (c.kind == EventKind::InsertSpread ? std::to_string(c.improve) : "0");
    lookup.emplace(key, ci);
  }

  const bool user_kernel = std::holds_alternative<UserKernel>(m.kernel);
  KernelState ks(m);
  BookState u = log.meta.initial;
  double t_prev = log.meta.t0;
  std::vector<double> per_class_comp(m.n_classes(), 0.0);
  std::vector<double> per_class_count(m.n_classes(), 0.0);

  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const EventRecord& r = log.records[i];
    const double dt = r.t - t_prev;
    if (dt < 0.0) throw std::invalid_argument("replay: timestamps must be non-decreasing");

    ks.advance_to(t_prev);
    double increment = 0.0;
    if (!user_kernel) {
      for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
        const double inc =
            detail::compensator_increment(m, m.base_rate(ci, u), ks.summary(ci), dt);
        increment += inc;
        per_class_comp[ci] += inc;
      }
    } else {
      for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
        const double inc = integrate_adaptive(
            [&](double s) { return evaluate_intensity(m, ci, u, s, ks.summary_at(ci, s)); },
            t_prev, r.t, 1e-10);
        increment += inc;
        per_class_comp[ci] += inc;
      }
    }
    diag.rescaled.push_back(increment);

    // Identify the event's class and advance the book.
    EventKind kind;
    int improve = 0;
    if (r.dir == Direction::Consume) {
      kind = EventKind::Consume;
    } else if ((r.side == Side::Bid && r.level == 0) ||
               (r.side == Side::Ask && r.level == u.spread)) {
      kind = EventKind::InsertBest;
    } else {
      kind = EventKind::InsertSpread;
      improve = r.side == Side::Bid ? r.level : u.spread - r.level;
    }
    const std::string key = std::to_string(static_cast<int>(kind)) + ":" +
                            std::to_string(side_index(r.side)) + ":" + std::to_string(r.agent) +
                            ":" + std::to_string(r.size) + ":" + std::to_string(improve);
    const auto it = lookup.find(key);
    if (it == lookup.end())
      throw std::invalid_argument("replay: log event " + std::to_string(i) +
                                  " has no class in this model (class-mapping mismatch)");
    per_class_count[it->second] += 1.0;

    const Transition tr = apply_event(u, record_to_input(r));
    if (tr.post != r.post)
      throw std::invalid_argument("replay: log record " + std::to_string(i) +
                                  " is inconsistent with the book dynamics");
    ks.advance_to(r.t);  // stamp the excitation at the event's own time
    ks.add_event(it->second);
    u = tr.post;
    t_prev = r.t;
  }

  diag.n = diag.rescaled.size();
  diag.mean_increment = mean(diag.rescaled);
  std::vector<double> unif;
  unif.reserve(diag.n);
  for (double tau : diag.rescaled) unif.push_back(-std::expm1(-tau));
  diag.ks_stat = ks_statistic_uniform(std::move(unif));
  diag.ks_critical_1pct = ks_critical(diag.n, 0.01);
  diag.rejected = diag.ks_stat > diag.ks_critical_1pct;
  for (std::size_t ci = 0; ci < m.n_classes(); ++ci)
    if (per_class_count[ci] > 0.0) diag.class_mean[ci] = per_class_comp[ci] / per_class_count[ci];
  return diag;
}

}  // namespace lobkit
