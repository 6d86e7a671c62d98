#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lobkit/book.hpp"

namespace lobkit {

// ---------------------------------------------------------------------------
// Event classes
// ---------------------------------------------------------------------------

// The countable mark space is reduced to a finite alphabet of event classes:
// what the order does, which side it hits, who sends it, its size in units
// and (for in-spread insertions) how many ticks it improves the quote.
enum class EventKind : std::uint8_t { InsertBest, Consume, InsertSpread };

struct EventClass {
  EventKind kind = EventKind::InsertBest;
  Side side = Side::Bid;
  int agent = 1;
  int size = 1;
  int improve = 1;  // tick improvement for InsertSpread

  friend bool operator==(const EventClass&, const EventClass&) = default;
};

// Expands a class into a concrete event descriptor for the given pre-state.
// Only call where applicable(cls, u) holds.
inline EventInput make_event(const EventClass& cls, const BookState& u) {
  EventInput e;
  e.size = cls.size;
  e.side = cls.side;
  e.agent = cls.agent;
  switch (cls.kind) {
    case EventKind::InsertBest:
      e.dir = Direction::Provide;
      e.level = cls.side == Side::Bid ? 0 : u.spread;
      break;
    case EventKind::Consume:
      e.dir = Direction::Consume;
      e.level = cls.side == Side::Bid ? 0 : u.spread;
      break;
    case EventKind::InsertSpread:
      e.dir = Direction::Provide;
      e.level = cls.side == Side::Bid ? cls.improve : u.spread - cls.improve;
      break;
  }
  return e;
}

inline bool class_applicable(const EventClass& cls, const BookState& u) {
  if (cls.kind != EventKind::InsertSpread) return true;
  return cls.improve >= 1 && cls.improve <= u.spread - 1;
}

// ---------------------------------------------------------------------------
// Base rate tables
// ---------------------------------------------------------------------------

// How a class's base rate reads the book. ByOwnQueue indexes the queue on the
// class's own side (value for q, clamped at the table end), BySpread indexes
// the spread in ticks, Constant ignores the state.
struct RateTable {
  enum class Kind : std::uint8_t { Constant, ByOwnQueue, BySpread };
  Kind kind = Kind::Constant;
  double constant = 0.0;
  std::vector<double> values;  // index 0 <-> q=0 / spread=1

  static RateTable fixed(double v) { return {Kind::Constant, v, {}}; }
  static RateTable by_queue(std::vector<double> v) { return {Kind::ByOwnQueue, 0.0, std::move(v)}; }
  static RateTable by_spread(std::vector<double> v) { return {Kind::BySpread, 0.0, std::move(v)}; }

  double eval(const BookState& u, Side side) const {
    switch (kind) {
      case Kind::Constant:
        return constant;
      case Kind::ByOwnQueue: {
        const std::size_t q = static_cast<std::size_t>(side == Side::Bid ? u.q1 : u.q2);
        if (values.empty()) return 0.0;
        return values[std::min(q, values.size() - 1)];
      }
      case Kind::BySpread: {
        const std::size_t s = static_cast<std::size_t>(u.spread - 1);
        if (values.empty()) return 0.0;
        return values[std::min(s, values.size() - 1)];
      }
    }
    return 0.0;
  }

  double max_value() const {
    if (kind == Kind::Constant) return constant;
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  }
};

// ---------------------------------------------------------------------------
// Hawkes kernels
// ---------------------------------------------------------------------------

// Exponential kernel phi(e, x, s) = alpha[e][x] * exp(-beta s) with a common
// decay. The running sums it induces admit exact O(1) updates between events.
struct ExponentialKernel {
  std::vector<std::vector<double>> alpha;  // [receiving class][emitting class]
  double beta = 1.0;
};

// Arbitrary non-negative kernel phi(e, x, s); evaluated by direct summation
// over the whole event history, with a multiplicative head-room factor
// supplying the thinning bound.
struct UserKernel {
  std::function<double(std::size_t e, std::size_t x, double s)> phi;
  double headroom = 2.0;
};

using KernelSpec = std::variant<std::monostate, ExponentialKernel, UserKernel>;

// ---------------------------------------------------------------------------
// Replenishment after a depletion
// ---------------------------------------------------------------------------

// How a depleted limit refills. Categorical draws a whole new book state;
// DepletedSideReset redraws only the emptied queue and keeps the opposite
// queue and spread, which makes the two queues autonomous (the
// independent-queues convention behind the birth--death closed forms);
// EmpiricalResample redraws a recent post-state of the running simulation.
struct ReplenishmentSpec {
  enum class Kind : std::uint8_t { Categorical, DepletedSideReset, EmpiricalResample };
  Kind kind = Kind::Categorical;
  std::vector<std::pair<BookState, double>> categorical;  // observable states, weights
  std::vector<std::pair<int, double>> side_reset{{1, 1.0}};  // new own-queue values, weights

  double total_weight() const {
    double t = 0.0;
    for (const auto& [u, w] : categorical) t += w;
    return t;
  }
  double side_reset_weight() const {
    double t = 0.0;
    for (const auto& [q, w] : side_reset) t += w;
    return t;
  }

  // Resolves the replenishment target for a depletion of `side` from the
  // pre-event state `u`, given a draw over the configured weights.
  BookState resolve_side_reset(const BookState& u, Side side, int new_queue) const {
    return side == Side::Bid ? BookState{new_queue, u.q2, u.spread}
                             : BookState{u.q1, new_queue, u.spread};
  }

  void validate() const {
    if (kind == Kind::Categorical) {
      if (categorical.empty() || !(total_weight() > 0.0))
        throw std::invalid_argument("replenishment: categorical support must be non-empty");
      for (const auto& [u, w] : categorical) {
        if (!u.observable())
          throw std::invalid_argument("replenishment: states must be observable");
        if (w < 0.0) throw std::invalid_argument("replenishment: negative weight");
      }
    } else if (kind == Kind::DepletedSideReset) {
      if (side_reset.empty() || !(side_reset_weight() > 0.0))
        throw std::invalid_argument("replenishment: side-reset support must be non-empty");
      for (const auto& [q, w] : side_reset) {
        if (q < 1) throw std::invalid_argument("replenishment: refill queue must be >= 1");
        if (w < 0.0) throw std::invalid_argument("replenishment: negative weight");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// The intensity model
// ---------------------------------------------------------------------------

// lambda_t(e) = psi(e, U_{t-}, t, z) with z the running kernel sum. The four
// shipped families differ in how psi combines the base table h with z:
//   Poisson / QueueReactive : psi = h            (history ignored)
//   HawkesQueueReactive     : psi = h + z
//   QuadraticHawkes         : psi = h + z^2
enum class Family : std::uint8_t { Poisson, QueueReactive, HawkesQueueReactive, QuadraticHawkes };

inline int psi_exponent(Family f) {
  switch (f) {
    case Family::HawkesQueueReactive: return 1;
    case Family::QuadraticHawkes: return 2;
    default: return 0;
  }
}

inline std::string family_name(Family f) {
  switch (f) {
    case Family::Poisson: return "poisson";
    case Family::QueueReactive: return "queue-reactive";
    case Family::HawkesQueueReactive: return "hawkes-qr";
    case Family::QuadraticHawkes: return "quadratic";
  }
  return "?";
}

struct IntensityModel {
  Family family = Family::QueueReactive;
  int n_agents = 1;
  std::vector<EventClass> classes;
  std::vector<RateTable> base;  // parallel to classes
  KernelSpec kernel;
  ReplenishmentSpec replenishment;
  std::string id = "model";

  std::size_t n_classes() const { return classes.size(); }
  int n_psi() const { return psi_exponent(family); }
  bool markovian() const {
    return family == Family::Poisson || family == Family::QueueReactive ||
           std::holds_alternative<std::monostate>(kernel);
  }

  // Growth-bound coefficients of Assumption-style checks: psi(e,u,t,z) <=
  // c(e) + d(e) z^{n_psi} with c(e) the largest base-table value.
  double growth_c(std::size_t ci) const { return base[ci].max_value(); }
  double growth_d(std::size_t) const { return n_psi() > 0 ? 1.0 : 0.0; }

  // Base rate including the state-dependent support mask (an in-spread
  // insertion that has no admissible level contributes rate zero).
  double base_rate(std::size_t ci, const BookState& u) const {
    if (!class_applicable(classes[ci], u)) return 0.0;
    return base[ci].eval(u, classes[ci].side);
  }

  void validate() const {
    if (classes.size() != base.size())
      throw std::invalid_argument("model: classes/base size mismatch");
    if (n_agents < 1) throw std::invalid_argument("model: need at least one agent");
    for (const auto& cls : classes) {
      if (cls.size < 1) throw std::invalid_argument("model: class size must be >= 1");
      if (cls.agent < 1 || cls.agent > n_agents)
        throw std::invalid_argument("model: class agent out of range");
      if (cls.kind == EventKind::InsertSpread && cls.improve < 1)
        throw std::invalid_argument("model: spread insertion must improve by >= 1 tick");
    }
    for (const auto& t : base) {
      if (t.constant < 0.0) throw std::invalid_argument("model: negative base rate");
      for (double v : t.values)
        if (v < 0.0) throw std::invalid_argument("model: negative base rate");
    }
    if (const auto* k = std::get_if<ExponentialKernel>(&kernel)) {
      if (!(k->beta > 0.0)) throw std::invalid_argument("kernel: beta must be > 0");
      if (k->alpha.size() != classes.size())
        throw std::invalid_argument("kernel: alpha must have one row per class");
      for (const auto& row : k->alpha) {
        if (row.size() != classes.size())
          throw std::invalid_argument("kernel: alpha rows must have one column per class");
        for (double a : row)
          if (a < 0.0) throw std::invalid_argument("kernel: negative excitation");
      }
    }
    replenishment.validate();
  }
};

// psi(e, u, t, z) for class `ci`. The history enters only through the running
// kernel sum z maintained by the caller; Poisson and queue-reactive families
// ignore it entirely.
inline double evaluate_intensity(const IntensityModel& m, std::size_t ci, const BookState& u,
                                 double /*clock_time*/, double z) {
  if (ci >= m.n_classes()) throw std::invalid_argument("evaluate_intensity: class out of range");
  if (z < 0.0) throw std::invalid_argument("evaluate_intensity: negative history summary");
  const double h = m.base_rate(ci, u);
  switch (m.family) {
    case Family::Poisson:
    case Family::QueueReactive:
      return h;
    case Family::HawkesQueueReactive:
      return h + z;
    case Family::QuadraticHawkes:
      return h + z * z;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Running kernel state
// ---------------------------------------------------------------------------

// Exact incremental summaries for the exponential kernel: one decay
// accumulator g[x] per emitting class, all sharing the decay beta, so
// z_e(t) = sum_x alpha[e][x] g[x](t) and advancing time multiplies every
// g[x] by the same factor.
class KernelState {
 public:
  KernelState() = default;
  explicit KernelState(const IntensityModel& m) : model_(&m) {
    if (const auto* k = std::get_if<ExponentialKernel>(&m.kernel)) {
      beta_ = k->beta;
      g_.assign(m.n_classes(), 0.0);
      mode_ = Mode::Exponential;
    } else if (std::holds_alternative<UserKernel>(m.kernel)) {
      mode_ = Mode::Naive;
    } else {
      mode_ = Mode::None;
    }
  }

  void advance_to(double t) {
    if (mode_ == Mode::Exponential) {
      const double dt = t - time_;
      if (dt < 0.0) throw std::logic_error("kernel state cannot move backwards in time");
      if (dt > 0.0) {
        const double f = std::exp(-beta_ * dt);
        for (double& g : g_) g *= f;
      }
    }
    time_ = t;
  }

  void add_event(std::size_t emitting_class) {
    if (mode_ == Mode::Exponential)
      g_[emitting_class] += 1.0;
    else if (mode_ == Mode::Naive)
      history_.push_back({time_, emitting_class});
  }

  // z for receiving class `ci` at the current internal time.
  double summary(std::size_t ci) const {
    switch (mode_) {
      case Mode::None:
        return 0.0;
      case Mode::Exponential: {
        const auto& alpha = std::get<ExponentialKernel>(model_->kernel).alpha[ci];
        double z = 0.0;
        for (std::size_t x = 0; x < g_.size(); ++x) z += alpha[x] * g_[x];
        return z;
      }
      case Mode::Naive: {
        const auto& k = std::get<UserKernel>(model_->kernel);
        double z = 0.0;
        for (const auto& [s, x] : history_) z += k.phi(ci, x, time_ - s);
        return z;
      }
    }
    return 0.0;
  }

  // z for class `ci` at a time at or after the internal clock, without
  // mutating the state (used by quadrature in goodness-of-fit replays).
  double summary_at(std::size_t ci, double t) const {
    if (t < time_) throw std::logic_error("summary_at: time before the kernel clock");
    switch (mode_) {
      case Mode::None:
        return 0.0;
      case Mode::Exponential: {
        const auto& alpha = std::get<ExponentialKernel>(model_->kernel).alpha[ci];
        double z = 0.0;
        for (std::size_t x = 0; x < g_.size(); ++x) z += alpha[x] * g_[x];
        return z * std::exp(-beta_ * (t - time_));
      }
      case Mode::Naive: {
        const auto& k = std::get<UserKernel>(model_->kernel);
        double z = 0.0;
        for (const auto& [s, x] : history_)
          if (s < t) z += k.phi(ci, x, t - s);
        return z;
      }
    }
    return 0.0;
  }

  double time() const { return time_; }

 private:
  enum class Mode : std::uint8_t { None, Exponential, Naive };
  const IntensityModel* model_ = nullptr;
  Mode mode_ = Mode::None;
  double beta_ = 1.0;
  double time_ = 0.0;
  std::vector<double> g_;
  std::vector<std::pair<double, std::size_t>> history_;
};

// Direct O(history) evaluation of the kernel sum, used as the reference for
// the incremental updates.
inline double naive_kernel_sum(const IntensityModel& m, std::size_t ci, double t,
                               std::span<const std::pair<double, std::size_t>> history) {
  double z = 0.0;
  if (const auto* exp_k = std::get_if<ExponentialKernel>(&m.kernel)) {
    for (const auto& [s, x] : history)
      if (s < t) z += exp_k->alpha[ci][x] * std::exp(-exp_k->beta * (t - s));
  } else if (const auto* user_k = std::get_if<UserKernel>(&m.kernel)) {
    for (const auto& [s, x] : history)
      if (s < t) z += user_k->phi(ci, x, t - s);
  }
  return z;
}

// ---------------------------------------------------------------------------
// A ready-made two-sided queue-reactive market
// ---------------------------------------------------------------------------

// Symmetric default model: insertions slow down and consumptions speed up as
// the target queue grows, in-spread insertions re-tighten the spread, and
// depletions resolve to a symmetric categorical replenishment law. Total flow
// is split evenly across `n_agents` agents.
inline IntensityModel default_queue_reactive_model(int n_agents = 2, int table_len = 32) {
  if (n_agents < 1) throw std::invalid_argument("default model: n_agents >= 1");
  IntensityModel m;
  m.family = Family::QueueReactive;
  m.n_agents = n_agents;
  m.id = "default-qr";

  std::vector<double> insert(table_len), consume(table_len);
  for (int q = 0; q < table_len; ++q) {
    insert[q] = 1.25 / std::sqrt(static_cast<double>(std::max(q, 1)));
    consume[q] = q == 0 ? 0.0 : 0.22 + 0.20 * q;
  }
  const double in_spread_rate = 0.9;

  const double share = 1.0 / n_agents;
  auto scaled = [share](std::vector<double> v) {
    for (double& x : v) x *= share;
    return v;
  };
  for (int a = 1; a <= n_agents; ++a) {
    for (Side side : {Side::Bid, Side::Ask}) {
      m.classes.push_back({EventKind::InsertBest, side, a, 1, 1});
      m.base.push_back(RateTable::by_queue(scaled(insert)));
      m.classes.push_back({EventKind::Consume, side, a, 1, 1});
      m.base.push_back(RateTable::by_queue(scaled(consume)));
      m.classes.push_back({EventKind::InsertSpread, side, a, 1, 1});
      m.base.push_back(RateTable::fixed(in_spread_rate * share));
    }
  }

  m.replenishment.kind = ReplenishmentSpec::Kind::Categorical;
  m.replenishment.categorical = {
      {{2, 2, 1}, 0.30}, {{1, 2, 1}, 0.10}, {{2, 1, 1}, 0.10},
      {{3, 3, 2}, 0.30}, {{2, 2, 2}, 0.20},
  };
  m.validate();
  return m;
}

}  // namespace lobkit
