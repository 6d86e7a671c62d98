#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "lobkit/generator.hpp"
#include "lobkit/simulate.hpp"
#include "lobkit/stats.hpp"

namespace lobkit {

// ---------------------------------------------------------------------------
// Scope filters and state maps
// ---------------------------------------------------------------------------

// Analysis-scope filters in the spirit of the usual data hygiene: keep only
// events whose pre-state spread is at most `spread_filter` ticks (0 disables
// the filter) and whose timestamp falls inside the session window. Excluded
// stretches contribute neither transitions nor occupation time, so rate
// denominators stay consistent.
struct IngestionConfig {
  int spread_filter = 1;
  double session_begin = -std::numeric_limits<double>::infinity();
  double session_end = std::numeric_limits<double>::infinity();
  // Per-day trading session in seconds of day; when set, the first and last
  // `trim_hours` of every session are dropped (auction-phase hygiene).
  double session_open_tod = -1.0;
  double session_close_tod = -1.0;
  double trim_hours = 1.0;
  double fixed_aes = 0.0;     // 0: per-day per-limit AES (raw feeds only)
  int units_per_aes = 1;      // order-size units per AES

  bool in_session(double t) const {
    if (t < session_begin || t > session_end) return false;
    if (session_open_tod >= 0.0 && session_close_tod > session_open_tod) {
      const double tod = t - 86400.0 * std::floor(t / 86400.0);
      if (tod < session_open_tod + 3600.0 * trim_hours ||
          tod > session_close_tod - 3600.0 * trim_hours)
        return false;
    }
    return true;
  }
};

// Volume normalisation: raw share volumes become integer queue units as the
// smallest integer at least volume / AES, scaled by the configured units per
// AES. Zero maps to zero.
inline int volume_to_units(double volume, double aes, int units_per_aes = 1) {
  if (!(aes > 0.0)) throw std::invalid_argument("volume_to_units: AES must be > 0");
  if (units_per_aes < 1) throw std::invalid_argument("volume_to_units: units_per_aes must be >= 1");
  if (!(volume > 0.0)) return 0;
  return static_cast<int>(std::ceil(volume * units_per_aes / aes - 1e-12));
}

// Which chain the log is projected onto. The full map keeps the whole triple
// (clamped to the caps); the queue maps track one limit; the pooled map
// treats both limits as samples of one generic queue, the view behind the
// intensity-versus-queue-size analysis.
enum class StateMapKind : std::uint8_t { FullBook, BidQueue, AskQueue, PooledQueue };

struct StateMapSpec {
  StateMapKind kind = StateMapKind::FullBook;
  int q_cap = 30;
  int s_cap = 5;
};

// ---------------------------------------------------------------------------
// Generator estimate
// ---------------------------------------------------------------------------

constexpr int kUnattributedAgent = 0;

struct CellEstimate {
  long long count = 0;                    // transitions z -> z'
  std::map<int, long long> by_agent;
  double qhat = 0.0;                      // per second (timed rows) or probability
  double ci_low = 0.0, ci_high = 0.0;     // 95% band, timed cells only
  bool ci_valid = false;
};

struct GeneratorEstimate {
  StateSpace space;
  StateMapSpec map;
  std::map<std::pair<int, int>, CellEstimate> cells;  // ordered: deterministic output
  std::vector<double> occupation;                     // seconds per state
  std::vector<long long> departures;                  // counted exits per state
  std::map<int, long long> agent_events;              // in-scope events per agent
  std::map<int, long long> agent_volume;              // summed order sizes per agent
  double horizon_in_scope = 0.0;
  long long total_steps = 0;
  long long dropped_events = 0;                       // filtered out of scope

  bool observed(int z) const {
    return occupation[static_cast<std::size_t>(z)] > 0.0 ||
           departures[static_cast<std::size_t>(z)] > 0;
  }

  // Rate (or resolution probability, for zero-dwell marker states) of one
  // cell, recomputed from the integer counts so that agent arithmetic stays
  // exact.
  double rate(int z, int zp) const {
    const auto it = cells.find({z, zp});
    if (it == cells.end()) return 0.0;
    return cell_rate(z, it->second.count);
  }
  double cell_rate(int z, long long count) const {
    const double occ = occupation[static_cast<std::size_t>(z)];
    if (occ > 0.0) return static_cast<double>(count) / occ;
    const long long dep = departures[static_cast<std::size_t>(z)];
    return dep > 0 ? static_cast<double>(count) / static_cast<double>(dep) : 0.0;
  }

  std::set<int> agents() const {
    std::set<int> out;
    for (const auto& [key, cell] : cells)
      for (const auto& [a, c] : cell.by_agent)
        if (c > 0) out.insert(a);
    return out;
  }
};

namespace detail {

struct StepVisit {
  long long step = 0;  // global step index
  double dt = 0.0;     // sojourn that ended with this step
  int to = -1;
  int agent = kUnattributedAgent;
};

// One projected chain walker: tracks the current projected state, accrues
// occupation, and emits steps. Depletions insert the zero-dwell marker step.
class ChainAccumulator {
 public:
  ChainAccumulator(StateMapKind kind, int q_cap, int s_cap, Side queue_side)
      : kind_(kind), q_cap_(q_cap), s_cap_(s_cap), side_(queue_side) {}

  int project(const BookState& u, StateSpace& space) const {
    if (kind_ == StateMapKind::FullBook)
      return space.add({std::min(u.q1, q_cap_), std::min(u.q2, q_cap_),
                        std::min(u.spread, s_cap_)});
    const int q = side_ == Side::Bid ? u.q1 : u.q2;
    return space.add(StateSpace::queue(std::min(q, q_cap_)));
  }

  Side side() const { return side_; }

 private:
  StateMapKind kind_;
  int q_cap_, s_cap_;
  Side side_;
};

}  // namespace detail

struct EstimateOptions {
  IngestionConfig scope;
  bool compute_ci = true;
  int ci_lags = 50;  // Bartlett-taper truncation for the long-run variance
};

// ---------------------------------------------------------------------------
// The generator estimator
// ---------------------------------------------------------------------------

// Counts-over-occupation estimator of the chain generator on the projected
// state space: qhat(z,z') = N(z,z') / t(z), with per-agent splits of the
// counts. A depleting event contributes two chain steps, pre -> marker
// (carrying the sojourn) and marker -> post (zero dwell), so marker rows are
// estimated as resolution probabilities rather than rates.
//
// 95% confidence bands come from the delta method on the ratio with a
// Bartlett-tapered long-run variance of the per-step sequence
// a_i - qhat * dt_i, truncated at `ci_lags` steps.
inline GeneratorEstimate estimate_generator(const EventLog& log, const StateMapSpec& map,
                                            const EstimateOptions& opts = {}) {
  GeneratorEstimate est;
  est.map = map;
  est.space.kind = map.kind == StateMapKind::FullBook ? ChainKind::FullBook
                                                      : ChainKind::SingleQueue;
  est.space.q_cap = map.q_cap;
  est.space.s_cap = map.s_cap;

  std::vector<detail::ChainAccumulator> chains;
  if (map.kind == StateMapKind::FullBook) {
    chains.emplace_back(map.kind, map.q_cap, map.s_cap, Side::Bid);
  } else if (map.kind == StateMapKind::BidQueue) {
    chains.emplace_back(map.kind, map.q_cap, map.s_cap, Side::Bid);
  } else if (map.kind == StateMapKind::AskQueue) {
    chains.emplace_back(map.kind, map.q_cap, map.s_cap, Side::Ask);
  } else {
    chains.emplace_back(map.kind, map.q_cap, map.s_cap, Side::Bid);
    chains.emplace_back(map.kind, map.q_cap, map.s_cap, Side::Ask);
  }

  std::vector<CompensatedSum> occupation;
  std::vector<long long> departures;
  std::map<std::pair<int, int>, CellEstimate> cells;
  std::vector<std::vector<detail::StepVisit>> visits;  // per state, for the CI pass
  CompensatedSum horizon;

  auto ensure = [&](int z) {
    const auto n = static_cast<std::size_t>(z) + 1;
    if (occupation.size() < n) {
      occupation.resize(n);
      departures.resize(n, 0);
      visits.resize(n);
    }
  };
  auto add_step = [&](int from, int to, int agent, double dt, bool count_time) {
    ensure(from);
    ensure(to);
    if (count_time && dt > 0.0) occupation[static_cast<std::size_t>(from)].add(dt);
    if (from == to) return;  // projection did not move: occupation only
    auto& cell = cells[{from, to}];
    cell.count += 1;
    cell.by_agent[agent] += 1;
    departures[static_cast<std::size_t>(from)] += 1;
    est.total_steps += 1;
    if (opts.compute_ci)
      visits[static_cast<std::size_t>(from)].push_back({est.total_steps, count_time ? dt : 0.0,
                                                        to, agent});
  };

  BookState pre = log.meta.initial;
  double t_prev = std::max(log.meta.t0, opts.scope.session_begin);
  const double session_stop = std::min(log.meta.horizon, opts.scope.session_end);
  const bool spread_ok_always = opts.scope.spread_filter <= 0;

  for (const EventRecord& r : log.records) {
    const bool in_scope = (spread_ok_always || pre.spread <= opts.scope.spread_filter) &&
                          opts.scope.in_session(r.t) && r.t >= t_prev;
    const double dt = r.t - std::max(t_prev, opts.scope.session_begin);
    if (in_scope) {
      horizon.add(dt);
      est.agent_events[r.agent] += 1;
      est.agent_volume[r.agent] += r.size;
      for (const auto& chain : chains) {
        const int z_pre = chain.project(pre, est.space);
        // A depletion passes through its price-move marker. The full-book
        // chain sees both sides' markers; a queue chain only the marker of
        // its own limit.
        const bool through_marker =
            r.depleted &&
            (map.kind == StateMapKind::FullBook || r.side == chain.side());
        if (!through_marker) {
          const int z_post = chain.project(r.post, est.space);
          add_step(z_pre, z_post, r.agent, dt, true);
        } else {
          BookState marker = pre;
          (r.side == Side::Bid ? marker.q1 : marker.q2) = 0;
          const int z_marker =
              est.space.kind == ChainKind::SingleQueue
                  ? est.space.add(StateSpace::queue(0))
                  : est.space.add({std::min(marker.q1, map.q_cap), std::min(marker.q2, map.q_cap),
                                   std::min(marker.spread, map.s_cap)});
          const int z_post = chain.project(r.post, est.space);
          add_step(z_pre, z_marker, r.agent, dt, true);
          add_step(z_marker, z_post, r.agent, 0.0, false);
        }
      }
    } else {
      ++est.dropped_events;
    }
    pre = r.post;
    t_prev = r.t;
  }
  // Tail occupation up to the end of the in-scope window.
  if (session_stop > t_prev && (spread_ok_always || pre.spread <= opts.scope.spread_filter)) {
    const double dt = session_stop - t_prev;
    horizon.add(dt);
    for (const auto& chain : chains) {
      const int z = chain.project(pre, est.space);
      ensure(z);
      occupation[static_cast<std::size_t>(z)].add(dt);
    }
  }

  ensure(static_cast<int>(est.space.size()) - 1);
  est.occupation.resize(est.space.size());
  for (std::size_t i = 0; i < est.space.size(); ++i) est.occupation[i] = occupation[i].value();
  est.departures = std::move(departures);
  est.departures.resize(est.space.size(), 0);
  est.horizon_in_scope = horizon.value();
  est.cells = std::move(cells);

  // Rates from integer counts.
  for (auto& [key, cell] : est.cells) cell.qhat = est.cell_rate(key.first, cell.count);

  if (opts.compute_ci) {
    // Delta-method band per timed cell; the per-step residual a - qhat*dt is
    // supported on visits to the source state, so lagged products only pair
    // visits within the truncation window.
    const int L = opts.ci_lags;
    for (int z = 0; z < static_cast<int>(est.space.size()); ++z) {
      const auto& vz = visits[static_cast<std::size_t>(z)];
      if (vz.empty() || !(est.occupation[static_cast<std::size_t>(z)] > 0.0)) continue;

      // Pair sums shared across this state's cells.
      std::unordered_map<int, double> a_pair, b_pair;  // keyed by target state
      double c_pair = 0.0;
      std::unordered_map<int, double> b_diag;
      double c_diag = 0.0;
      for (std::size_t i = 0; i < vz.size(); ++i) {
        c_diag += vz[i].dt * vz[i].dt;
        b_diag[vz[i].to] += vz[i].dt;
        for (std::size_t j = i + 1; j < vz.size(); ++j) {
          const long long lag = vz[j].step - vz[i].step;
          if (lag > L) break;
          const double w = 1.0 - static_cast<double>(lag) / (L + 1.0);
          if (vz[i].to == vz[j].to) a_pair[vz[i].to] += w;
          b_pair[vz[i].to] += w * vz[j].dt;
          b_pair[vz[j].to] += w * vz[i].dt;
          c_pair += w * vz[i].dt * vz[j].dt;
        }
      }
      // sd(qhat) ~ sqrt(sum of tapered residual products) / occupation; the
      // residual a - qhat*dt has exactly zero mean by construction. The
      // quantile uses a Student-t with the cell count as degrees of freedom
      // (Cornish-Fisher expansion), which widens low-count cells and tends
      // to 1.96 for well-populated ones.
      const double occ = est.occupation[static_cast<std::size_t>(z)];
      for (auto& [key, cell] : est.cells) {
        if (key.first != z) continue;
        const double q = cell.qhat;
        const double diag = static_cast<double>(cell.count) - 2.0 * q * b_diag[key.second] +
                            q * q * c_diag;
        const double cross = a_pair.count(key.second) ? a_pair[key.second] : 0.0;
        const double bcross = b_pair.count(key.second) ? b_pair[key.second] : 0.0;
        const double s_raw = diag + 2.0 * (cross - q * bcross + q * q * c_pair);
        const double df = std::max(static_cast<double>(cell.count) - 1.0, 1.0);
        const double zq = 1.959964;
        const double quantile = zq + 2.372 / df + 2.822 / (df * df);
        const double half = quantile * std::sqrt(std::max(s_raw, 0.0)) / occ;
        cell.ci_low = q - half;
        cell.ci_high = q + half;
        cell.ci_valid = true;
      }
    }
  }
  return est;
}

// Associative merge of shard estimates (counting is a fold, so a log can be
// counted in slices and combined in any order). Integer counts merge exactly;
// occupation times are float sums, identical across merge orders up to
// summation rounding. Confidence bands need global step indices and are not
// defined on shards.
inline GeneratorEstimate merge_estimates(const GeneratorEstimate& a, const GeneratorEstimate& b) {
  if (a.map.kind != b.map.kind || a.map.q_cap != b.map.q_cap || a.map.s_cap != b.map.s_cap)
    throw std::invalid_argument("merge_estimates: shard state maps differ");
  GeneratorEstimate out;
  out.map = a.map;
  out.space.kind = a.space.kind;
  out.space.q_cap = a.space.q_cap;
  out.space.s_cap = a.space.s_cap;

  const auto remap = [&out](const GeneratorEstimate& src, std::vector<int>& ids) {
    ids.resize(src.space.size());
    for (std::size_t i = 0; i < src.space.size(); ++i) ids[i] = out.space.add(src.space.states[i]);
  };
  std::vector<int> ida, idb;
  remap(a, ida);
  remap(b, idb);

  out.occupation.assign(out.space.size(), 0.0);
  out.departures.assign(out.space.size(), 0);
  const auto fold = [&out](const GeneratorEstimate& src, const std::vector<int>& ids) {
    for (std::size_t i = 0; i < src.space.size(); ++i) {
      out.occupation[static_cast<std::size_t>(ids[i])] += src.occupation[i];
      out.departures[static_cast<std::size_t>(ids[i])] += src.departures[i];
    }
    for (const auto& [key, cell] : src.cells) {
      auto& dst = out.cells[{ids[static_cast<std::size_t>(key.first)],
                             ids[static_cast<std::size_t>(key.second)]}];
      dst.count += cell.count;
      for (const auto& [ag, c] : cell.by_agent) dst.by_agent[ag] += c;
    }
    for (const auto& [ag, c] : src.agent_events) out.agent_events[ag] += c;
    for (const auto& [ag, c] : src.agent_volume) out.agent_volume[ag] += c;
    out.horizon_in_scope += src.horizon_in_scope;
    out.total_steps += src.total_steps;
    out.dropped_events += src.dropped_events;
  };
  fold(a, ida);
  fold(b, idb);
  for (auto& [key, cell] : out.cells) cell.qhat = out.cell_rate(key.first, cell.count);
  return out;
}

// Slices a log into `shards` contiguous pieces whose metadata chains
// correctly: shard i starts where shard i-1 ended, with the matching
// pre-state.
inline std::vector<EventLog> shard_log(const EventLog& log, int shards) {
  if (shards < 1) throw std::invalid_argument("shard_log: need at least one shard");
  std::vector<EventLog> out;
  const std::size_t n = log.records.size();
  std::size_t begin = 0;
  BookState state = log.meta.initial;
  double t_prev = log.meta.t0;
  for (int s = 0; s < shards; ++s) {
    const std::size_t end = n * static_cast<std::size_t>(s + 1) / static_cast<std::size_t>(shards);
    EventLog piece;
    piece.meta = log.meta;
    piece.meta.initial = state;
    piece.meta.t0 = t_prev;
    piece.records.assign(log.records.begin() + static_cast<std::ptrdiff_t>(begin),
                         log.records.begin() + static_cast<std::ptrdiff_t>(end));
    if (!piece.records.empty()) {
      state = piece.records.back().post;
      t_prev = piece.records.back().t;
    }
    piece.meta.horizon = s + 1 == shards ? log.meta.horizon : t_prev;
    out.push_back(std::move(piece));
    begin = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interarrival and conditional price-move estimators
// ---------------------------------------------------------------------------

struct MeanEstimate {
  double value = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  std::size_t n = 0;
};

inline MeanEstimate estimate_mean_interarrival(const EventLog& log) {
  if (log.records.size() < 2)
    throw std::invalid_argument("estimate_mean_interarrival: need at least two events");
  std::vector<double> gaps;
  gaps.reserve(log.records.size() - 1);
  for (std::size_t i = 1; i < log.records.size(); ++i)
    gaps.push_back(log.records[i].t - log.records[i - 1].t);
  MeanEstimate out;
  out.n = gaps.size();
  out.value = mean(gaps);
  const double lrv = long_run_variance(gaps, 50);
  const double half = 1.96 * std::sqrt(std::max(lrv, 0.0) / static_cast<double>(gaps.size()));
  out.ci_low = out.value - half;
  out.ci_high = out.value + half;
  return out;
}

// Per-step price-move sequence of a log: one entry per chain step, i.e. the
// marker step carrying the tick move followed by its zero-move resolution
// step for every depleting record.
inline std::vector<double> price_move_steps(const EventLog& log) {
  std::vector<double> eta;
  eta.reserve(log.records.size() + log.records.size() / 8);
  for (const EventRecord& r : log.records) {
    if (r.depleted) {
      eta.push_back(static_cast<double>(r.price_move));
      eta.push_back(0.0);
    } else {
      eta.push_back(0.0);
    }
  }
  return eta;
}

struct ConditionalMove {
  double value = 0.0;
  double se = 0.0;       // delta-method standard error
  long long n = 0;       // occurrences of the condition
};

// E[eta_k | eta_0 = eta] estimated as the ratio of lagged sums over a move
// sequence; one table entry per observed conditioning value.
inline std::map<int, ConditionalMove> estimate_conditional_price_move(
    std::span<const double> eta, int k) {
  if (k < 1) throw std::invalid_argument("estimate_conditional_price_move: k must be >= 1");
  if (static_cast<std::size_t>(k) >= eta.size())
    throw std::invalid_argument("estimate_conditional_price_move: lag exceeds the log length");

  std::map<int, ConditionalMove> table;
  std::map<int, double> sums;
  for (std::size_t j = static_cast<std::size_t>(k); j < eta.size(); ++j) {
    const int cond = static_cast<int>(eta[j - static_cast<std::size_t>(k)]);
    table[cond].n += 1;
    sums[cond] += eta[j];
  }
  for (auto& [cond, cm] : table) {
    cm.value = sums[cond] / static_cast<double>(cm.n);
    // Long-run variance of the residual sequence restricted to the condition.
    std::vector<double> resid;
    resid.reserve(static_cast<std::size_t>(cm.n));
    for (std::size_t j = static_cast<std::size_t>(k); j < eta.size(); ++j)
      if (static_cast<int>(eta[j - static_cast<std::size_t>(k)]) == cond)
        resid.push_back(eta[j] - cm.value);
    const double lrv = long_run_variance(resid, 50);
    cm.se = std::sqrt(std::max(lrv, 0.0) / static_cast<double>(cm.n));
  }
  return table;
}

// Log overload: conditions on the per-step sequence including the zero-move
// resolution steps that follow each depletion.
inline std::map<int, ConditionalMove> estimate_conditional_price_move(const EventLog& log,
                                                                      int k) {
  const std::vector<double> eta = price_move_steps(log);
  return estimate_conditional_price_move(std::span<const double>(eta), k);
}

// Time-weighted average spread of a log under the same scope filters used by
// the estimator (a direct estimate, not a chain functional).
inline double time_average_spread(const EventLog& log, const IngestionConfig& scope = {},
                                  double tick_size = 1.0) {
  BookState pre = log.meta.initial;
  double t_prev = std::max(log.meta.t0, scope.session_begin);
  CompensatedSum weighted, total;
  const bool no_filter = scope.spread_filter <= 0;
  auto accrue = [&](double until) {
    if (until > t_prev && (no_filter || pre.spread <= scope.spread_filter)) {
      weighted.add((until - t_prev) * pre.spread);
      total.add(until - t_prev);
    }
  };
  for (const EventRecord& r : log.records) {
    accrue(std::min(r.t, scope.session_end));
    pre = r.post;
    t_prev = std::max(r.t, t_prev);
  }
  accrue(std::min(log.meta.horizon, scope.session_end));
  if (!(total.value() > 0.0)) throw std::invalid_argument("time_average_spread: no in-scope time");
  return tick_size * weighted.value() / total.value();
}

// ---------------------------------------------------------------------------
// Estimated generator -> solvable chain
// ---------------------------------------------------------------------------

struct EstimateToGenerator {
  TruncatedGenerator generator;
  long long dangling_transitions = 0;  // targets removed as unobserved
  std::vector<int> state_of_estimate;  // estimate state id -> generator id (-1 if removed)
};

// Builds the solvable chain from an estimate: observed timed states get rate
// rows, zero-dwell marker states get probability rows. States with no
// observed departure have no estimable row (this covers never-visited states
// and the trajectory's terminal stub, which would otherwise read as
// absorbing); they are removed and transitions into them dropped with a
// count.
inline EstimateToGenerator generator_from_estimate(const GeneratorEstimate& est) {
  EstimateToGenerator out;
  TruncatedGenerator& gen = out.generator;
  gen.provenance = "estimate";
  gen.space.kind = est.space.kind;
  gen.space.q_cap = est.space.q_cap;
  gen.space.s_cap = est.space.s_cap;

  out.state_of_estimate.assign(est.space.size(), -1);
  for (int z = 0; z < static_cast<int>(est.space.size()); ++z) {
    if (est.departures[static_cast<std::size_t>(z)] <= 0) continue;
    out.state_of_estimate[static_cast<std::size_t>(z)] = gen.space.add(est.space.states[static_cast<std::size_t>(z)]);
  }
  gen.rows.resize(gen.space.size());
  for (int z = 0; z < static_cast<int>(est.space.size()); ++z) {
    const int gz = out.state_of_estimate[static_cast<std::size_t>(z)];
    if (gz < 0) continue;
    const bool timed = est.occupation[static_cast<std::size_t>(z)] > 0.0;
    gen.rows[static_cast<std::size_t>(gz)].instantaneous = !timed;
  }
  for (const auto& [key, cell] : est.cells) {
    if (cell.count <= 0) continue;
    const int gz = out.state_of_estimate[static_cast<std::size_t>(key.first)];
    const int gt = out.state_of_estimate[static_cast<std::size_t>(key.second)];
    if (gz < 0) continue;
    if (gt < 0) {
      out.dangling_transitions += cell.count;
      continue;
    }
    gen.rows[static_cast<std::size_t>(gz)].out.push_back(
        {gt, est.cell_rate(key.first, cell.count)});
  }
  gen.validate();
  return out;
}

}  // namespace lobkit
