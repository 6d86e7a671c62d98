#pragma once

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lobkit/intensity.hpp"

namespace lobkit {

// ---------------------------------------------------------------------------
// State spaces for analysis chains
// ---------------------------------------------------------------------------

// Full-book chains carry the whole triple; single-queue chains (the per-limit
// view used for the intensity-versus-queue-size analysis) carry one queue in
// q1 with the other coordinates unused.
struct StateKey {
  int q1 = 0, q2 = 0, spread = 0;
  friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (std::uint64_t v : {static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.q1)),
                            static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.q2)),
                            static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.spread))}) {
      h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

enum class ChainKind : std::uint8_t { FullBook, SingleQueue };

struct StateSpace {
  ChainKind kind = ChainKind::FullBook;
  int q_cap = 0;  // diagnostics only
  int s_cap = 0;
  std::vector<StateKey> states;
  std::unordered_map<StateKey, int, StateKeyHash> index;

  int add(const StateKey& k) {
    auto [it, inserted] = index.try_emplace(k, static_cast<int>(states.size()));
    if (inserted) states.push_back(k);
    return it->second;
  }
  int find(const StateKey& k) const {
    auto it = index.find(k);
    return it == index.end() ? -1 : it->second;
  }
  std::size_t size() const { return states.size(); }

  // Price-move marker states: one empty queue on the full chain, the empty
  // queue on a single-queue chain.
  bool fictitious(int i) const {
    const StateKey& k = states[static_cast<std::size_t>(i)];
    if (kind == ChainKind::SingleQueue) return k.q1 == 0;
    return (k.q1 == 0) != (k.q2 == 0);
  }
  bool any_fictitious() const {
    for (int i = 0; i < static_cast<int>(size()); ++i)
      if (fictitious(i)) return true;
    return false;
  }
  bool at_boundary(int i) const {
    const StateKey& k = states[static_cast<std::size_t>(i)];
    if (kind == ChainKind::SingleQueue) return q_cap > 0 && k.q1 >= q_cap;
    return (q_cap > 0 && (k.q1 >= q_cap || k.q2 >= q_cap)) || (s_cap > 0 && k.spread >= s_cap);
  }

  static StateKey full(const BookState& u) { return {u.q1, u.q2, u.spread}; }
  static StateKey queue(int q) { return {q, -1, -1}; }
};

// ---------------------------------------------------------------------------
// Truncated generator
// ---------------------------------------------------------------------------

// Finite-state description of the analysis chain. A timed row holds
// transition rates per second (diagonal implied by the row sum); an
// instantaneous row holds transition probabilities for a zero-sojourn state
// that resolves at the same timestamp — the representation of price-move
// markers whose replenishment happens within the same book event.
struct TruncatedGenerator {
  struct Row {
    bool instantaneous = false;
    std::vector<std::pair<int, double>> out;  // (state, rate) or (state, prob)
  };

  StateSpace space;
  std::vector<Row> rows;
  std::string provenance = "model";

  double exit_rate(int i) const {
    const Row& r = rows[static_cast<std::size_t>(i)];
    if (r.instantaneous) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (const auto& [j, v] : r.out) s += v;
    return s;
  }

  void validate() const {
    if (rows.size() != space.size()) throw std::invalid_argument("generator: row/state mismatch");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double total = 0.0;
      for (const auto& [j, v] : rows[i].out) {
        if (j < 0 || j >= static_cast<int>(space.size()))
          throw std::invalid_argument("generator: transition target out of range");
        if (v < 0.0) throw std::invalid_argument("generator: negative rate or probability");
        if (rows[i].instantaneous && rows[static_cast<std::size_t>(j)].instantaneous)
          throw std::invalid_argument(
              "generator: instantaneous state may not resolve to another instantaneous state");
        total += v;
      }
      if (rows[i].instantaneous && !(total > 0.0))
        throw std::invalid_argument("generator: instantaneous state needs outgoing probability");
    }
  }
};

// ---------------------------------------------------------------------------
// Embedded (per-event) chain, Markov transition rows
// ---------------------------------------------------------------------------

// Jump-chain of the generator: timed rows are normalised by the exit rate
// and a state with no outflow keeps P(u,u) = 1; instantaneous rows carry
// their probabilities directly.
struct EmbeddedChain {
  std::vector<std::vector<std::pair<int, double>>> rows;

  std::size_t size() const { return rows.size(); }

  // y = P x  (y_u = sum_v P(u,v) x_v)
  std::vector<double> apply_right(const std::vector<double>& x) const {
    std::vector<double> y(rows.size(), 0.0);
    for (std::size_t u = 0; u < rows.size(); ++u)
      for (const auto& [v, p] : rows[u]) y[u] += p * x[static_cast<std::size_t>(v)];
    return y;
  }
  // y = x P  (y_v = sum_u x_u P(u,v))
  std::vector<double> apply_left(const std::vector<double>& x) const {
    std::vector<double> y(rows.size(), 0.0);
    for (std::size_t u = 0; u < rows.size(); ++u)
      for (const auto& [v, p] : rows[u]) y[static_cast<std::size_t>(v)] += x[u] * p;
    return y;
  }
};

inline EmbeddedChain embedded_chain(const TruncatedGenerator& gen) {
  EmbeddedChain P;
  P.rows.resize(gen.rows.size());
  for (std::size_t u = 0; u < gen.rows.size(); ++u) {
    const auto& row = gen.rows[u];
    if (row.instantaneous) {
      double total = 0.0;
      for (const auto& [v, p] : row.out) total += p;
      for (const auto& [v, p] : row.out)
        if (p > 0.0) P.rows[u].push_back({v, p / total});
      continue;
    }
    double rate = 0.0;
    for (const auto& [v, r] : row.out) rate += r;
    if (!(rate > 0.0)) {
      P.rows[u].push_back({static_cast<int>(u), 1.0});  // degenerate row
      continue;
    }
    for (const auto& [v, r] : row.out)
      if (r > 0.0) P.rows[u].push_back({v, r / rate});
  }
  return P;
}

// ---------------------------------------------------------------------------
// Stationary solve
// ---------------------------------------------------------------------------

struct SolveOptions {
  double tol = 1e-10;            // residual gate, relative to max |Q|
  long max_power_iters = 200000;
  int check_every = 128;
  double boundary_warn = 1e-3;
};

struct StationarySolution {
  std::vector<double> pi_time;   // occupation law; zero on instantaneous states
  std::vector<double> pi_event;  // embedded per-step law
  double residual = 0.0;
  double max_rate = 0.0;
  bool irreducible = true;
  int n_closed_classes = 1;
  std::vector<int> closed_class;  // id per state, -1 for transient states
  int solved_class = 0;
  double boundary_mass = 0.0;
  double mean_step_seconds = 0.0;  // E[dT] per embedded step
  std::vector<std::string> warnings;
};

namespace detail {

// Iterative Tarjan strongly-connected components over the embedded support.
inline std::vector<int> strongly_connected(const EmbeddedChain& P) {
  const int n = static_cast<int>(P.size());
  std::vector<int> comp(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n), 0),
      num(static_cast<std::size_t>(n), -1);
  std::vector<int> stack, call_state(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<int, std::size_t>> frames;
  std::vector<bool> on_stack(static_cast<std::size_t>(n), false);
  int counter = 0, comps = 0;

  for (int root = 0; root < n; ++root) {
    if (num[static_cast<std::size_t>(root)] != -1) continue;
    frames.push_back({root, 0});
    while (!frames.empty()) {
      auto& [u, edge] = frames.back();
      if (edge == 0) {
        num[static_cast<std::size_t>(u)] = low[static_cast<std::size_t>(u)] = counter++;
        stack.push_back(u);
        on_stack[static_cast<std::size_t>(u)] = true;
      }
      bool descended = false;
      while (edge < P.rows[static_cast<std::size_t>(u)].size()) {
        const int v = P.rows[static_cast<std::size_t>(u)][edge].first;
        ++edge;
        if (num[static_cast<std::size_t>(v)] == -1) {
          frames.push_back({v, 0});
          descended = true;
          break;
        }
        if (on_stack[static_cast<std::size_t>(v)])
          low[static_cast<std::size_t>(u)] =
              std::min(low[static_cast<std::size_t>(u)], num[static_cast<std::size_t>(v)]);
      }
      if (descended) continue;
      if (low[static_cast<std::size_t>(u)] == num[static_cast<std::size_t>(u)]) {
        while (true) {
          const int w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = false;
          comp[static_cast<std::size_t>(w)] = comps;
          if (w == u) break;
        }
        ++comps;
      }
      const int child = u;
      frames.pop_back();
      if (!frames.empty()) {
        const int parent = frames.back().first;
        low[static_cast<std::size_t>(parent)] = std::min(low[static_cast<std::size_t>(parent)],
                                                         low[static_cast<std::size_t>(child)]);
      }
    }
  }
  return comp;
}

}  // namespace detail

// Solves pi Q = 0, pi 1 = 1 on the generator's recurrent support.
//
// Instantaneous (zero-sojourn) states are eliminated algebraically before the
// timed solve, so the occupation law is exact in the limit they represent;
// their embedded-step mass is restored afterwards from the stationary flow.
// The timed system is solved by uniformised power iteration with a sparse-LU
// direct solve as fallback. When the support splits into several closed
// communicating classes the largest one is solved and a warning records the
// reducibility; transient states get zero mass.
inline StationarySolution solve_stationary(const TruncatedGenerator& gen,
                                           const SolveOptions& opts = {}) {
  gen.validate();
  const int n = static_cast<int>(gen.space.size());
  StationarySolution sol;
  sol.pi_time.assign(static_cast<std::size_t>(n), 0.0);
  sol.pi_event.assign(static_cast<std::size_t>(n), 0.0);
  if (n == 0) throw std::invalid_argument("solve_stationary: empty state space");

  const EmbeddedChain P = embedded_chain(gen);

  // Closed communicating classes of the embedded support.
  const std::vector<int> scc = detail::strongly_connected(P);
  const int n_scc = 1 + *std::max_element(scc.begin(), scc.end());
  std::vector<bool> closed(static_cast<std::size_t>(n_scc), true);
  for (int u = 0; u < n; ++u)
    for (const auto& [v, p] : P.rows[static_cast<std::size_t>(u)])
      if (scc[static_cast<std::size_t>(u)] != scc[static_cast<std::size_t>(v)])
        closed[static_cast<std::size_t>(scc[static_cast<std::size_t>(u)])] = false;

  std::vector<int> closed_id(static_cast<std::size_t>(n_scc), -1);
  int n_closed = 0;
  std::vector<int> closed_sizes;
  for (int c = 0; c < n_scc; ++c)
    if (closed[static_cast<std::size_t>(c)]) {
      closed_id[static_cast<std::size_t>(c)] = n_closed++;
      closed_sizes.push_back(0);
    }
  sol.closed_class.assign(static_cast<std::size_t>(n), -1);
  for (int u = 0; u < n; ++u) {
    const int cid = closed_id[static_cast<std::size_t>(scc[static_cast<std::size_t>(u)])];
    sol.closed_class[static_cast<std::size_t>(u)] = cid;
    if (cid >= 0) ++closed_sizes[static_cast<std::size_t>(cid)];
  }
  sol.n_closed_classes = n_closed;
  if (n_closed == 0) throw std::logic_error("solve_stationary: no closed class found");
  sol.irreducible = n_closed == 1 && *std::min_element(sol.closed_class.begin(),
                                                       sol.closed_class.end()) == 0;
  int pick = 0;
  for (int c = 1; c < n_closed; ++c)
    if (closed_sizes[static_cast<std::size_t>(c)] > closed_sizes[static_cast<std::size_t>(pick)])
      pick = c;
  sol.solved_class = pick;
  if (n_closed > 1)
    sol.warnings.push_back("reducible support: " + std::to_string(n_closed) +
                           " closed classes; solving the largest (" +
                           std::to_string(closed_sizes[static_cast<std::size_t>(pick)]) +
                           " states)");
  else if (!sol.irreducible)
    sol.warnings.push_back("transient states present; they carry zero stationary mass");

  // Member list of the solved class, timed members first for the Q_eff solve.
  std::vector<int> members;
  for (int u = 0; u < n; ++u)
    if (sol.closed_class[static_cast<std::size_t>(u)] == pick) members.push_back(u);
  std::vector<int> timed;
  for (int u : members)
    if (!gen.rows[static_cast<std::size_t>(u)].instantaneous) timed.push_back(u);
  if (timed.empty())
    throw std::invalid_argument("solve_stationary: closed class has no timed state");

  std::vector<int> timed_pos(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < timed.size(); ++i)
    timed_pos[static_cast<std::size_t>(timed[i])] = static_cast<int>(i);

  // Collapse instantaneous states: rate u->v->w becomes rate*prob into w.
  const int m = static_cast<int>(timed.size());
  std::vector<std::map<int, double>> q_eff(static_cast<std::size_t>(m));
  std::vector<double> exit(static_cast<std::size_t>(m), 0.0);
  double max_rate = 0.0;
  for (int i = 0; i < m; ++i) {
    const int u = timed[static_cast<std::size_t>(i)];
    for (const auto& [v, r] : gen.rows[static_cast<std::size_t>(u)].out) {
      if (!(r > 0.0)) continue;
      exit[static_cast<std::size_t>(i)] += r;
      if (gen.rows[static_cast<std::size_t>(v)].instantaneous) {
        for (const auto& [w, p] : P.rows[static_cast<std::size_t>(v)]) {
          const int j = timed_pos[static_cast<std::size_t>(w)];
          if (j < 0) throw std::logic_error("instantaneous state resolves outside closed class");
          if (w != u) q_eff[static_cast<std::size_t>(i)][j] += r * p;
        }
      } else {
        const int j = timed_pos[static_cast<std::size_t>(v)];
        if (j < 0) throw std::logic_error("closed class is not closed");
        q_eff[static_cast<std::size_t>(i)][j] += r;
      }
    }
    max_rate = std::max(max_rate, exit[static_cast<std::size_t>(i)]);
  }
  sol.max_rate = max_rate;
  if (!(max_rate > 0.0)) {
    // Single absorbing state: all mass sits there.
    sol.pi_time[static_cast<std::size_t>(timed[0])] = 1.0;
    sol.pi_event[static_cast<std::size_t>(timed[0])] = 1.0;
    sol.mean_step_seconds = std::numeric_limits<double>::infinity();
    sol.warnings.push_back("absorbing timed state; per-second quantities are degenerate");
    return sol;
  }

  // Effective exit rates (self-returns through a marker do not count).
  std::vector<double> eff_exit(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i)
    for (const auto& [j, r] : q_eff[static_cast<std::size_t>(i)])
      if (j != i) eff_exit[static_cast<std::size_t>(i)] += r;

  auto residual_of = [&](const std::vector<double>& x) {
    std::vector<double> flow(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
      for (const auto& [j, r] : q_eff[static_cast<std::size_t>(i)])
        if (j != i) flow[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(i)] * r;
      flow[static_cast<std::size_t>(i)] -=
          x[static_cast<std::size_t>(i)] * eff_exit[static_cast<std::size_t>(i)];
    }
    double res = 0.0;
    for (double f : flow) res = std::max(res, std::abs(f));
    return res;
  };

  // Uniformised power iteration.
  const double unif = max_rate * 1.05 + 1e-12;
  std::vector<double> x(static_cast<std::size_t>(m), 1.0 / m), next(static_cast<std::size_t>(m));
  bool converged = false;
  const double gate = opts.tol * max_rate;
  for (long it = 0; it < opts.max_power_iters; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      double keep = 1.0 - eff_exit[static_cast<std::size_t>(i)] / unif;
      next[static_cast<std::size_t>(i)] += xi * keep;
      for (const auto& [j, r] : q_eff[static_cast<std::size_t>(i)])
        if (j != i) next[static_cast<std::size_t>(j)] += xi * r / unif;
    }
    double total = 0.0;
    for (double v : next) total += v;
    for (double& v : next) v /= total;
    x.swap(next);
    if ((it + 1) % opts.check_every == 0 && residual_of(x) <= gate) {
      converged = true;
      break;
    }
  }

  if (!converged && residual_of(x) > gate) {
    // Direct solve: Q_eff^T pi = 0 with the first equation replaced by the
    // normalisation.
    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> trips;
    for (int i = 0; i < m; ++i) trips.emplace_back(0, i, 1.0);
    for (int i = 0; i < m; ++i) {
      for (const auto& [j, r] : q_eff[static_cast<std::size_t>(i)])
        if (j != i && j != 0) trips.emplace_back(j, i, r);
      if (i != 0) trips.emplace_back(i, i, -eff_exit[static_cast<std::size_t>(i)]);
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() == Eigen::Success) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
      b[0] = 1.0;
      const Eigen::VectorXd pi = lu.solve(b);
      if (lu.info() == Eigen::Success) {
        double total = 0.0;
        bool ok = true;
        for (int i = 0; i < m; ++i) {
          if (pi[i] < -1e-9) ok = false;
          total += pi[i];
        }
        if (ok && total > 0.0) {
          for (int i = 0; i < m; ++i)
            x[static_cast<std::size_t>(i)] = std::max(pi[i], 0.0) / total;
        }
      }
    }
    if (residual_of(x) > gate)
      sol.warnings.push_back("stationary solve residual above tolerance");
  }

  sol.residual = residual_of(x) / max_rate;

  for (int i = 0; i < m; ++i) sol.pi_time[static_cast<std::size_t>(timed[i])] = x[static_cast<std::size_t>(i)];

  // Embedded-step mass: event flow pi_time * rate for timed states, entering
  // flow for instantaneous states (zero sojourn, positive step frequency).
  double total_flow = 0.0;
  for (int i = 0; i < m; ++i) {
    const int u = timed[static_cast<std::size_t>(i)];
    const double flow = x[static_cast<std::size_t>(i)] * exit[static_cast<std::size_t>(i)];
    sol.pi_event[static_cast<std::size_t>(u)] = flow;
    total_flow += flow;
  }
  for (int w : members) {
    if (gen.rows[static_cast<std::size_t>(w)].instantaneous) continue;
    for (const auto& [v, r] : gen.rows[static_cast<std::size_t>(w)].out) {
      if (!gen.rows[static_cast<std::size_t>(v)].instantaneous) continue;
      const double flow = sol.pi_time[static_cast<std::size_t>(w)] * r;
      sol.pi_event[static_cast<std::size_t>(v)] += flow;
      total_flow += flow;
    }
  }
  if (total_flow > 0.0)
    for (double& v : sol.pi_event) v /= total_flow;

  // Mean wall-clock duration of one embedded step.
  double mean_dt = 0.0;
  for (int i = 0; i < m; ++i) {
    const int u = timed[static_cast<std::size_t>(i)];
    if (exit[static_cast<std::size_t>(i)] > 0.0)
      mean_dt += sol.pi_event[static_cast<std::size_t>(u)] / exit[static_cast<std::size_t>(i)];
  }
  sol.mean_step_seconds = mean_dt;

  for (int u = 0; u < n; ++u)
    if (gen.space.at_boundary(u)) sol.boundary_mass += sol.pi_time[static_cast<std::size_t>(u)];
  if (sol.boundary_mass > opts.boundary_warn)
    sol.warnings.push_back("truncation boundary holds " + std::to_string(sol.boundary_mass) +
                           " stationary mass");
  return sol;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

// Generator of the full-book chain induced by a Markovian intensity model on
// the truncated window q <= q_cap, spread <= s_cap. Depleting consumptions
// route through their price-move marker (an instantaneous state) and resolve
// per the model's categorical replenishment law. Transitions that would leave
// the window are dropped (reflecting truncation).
inline TruncatedGenerator generator_from_model(const IntensityModel& m, int q_cap, int s_cap) {
  m.validate();
  if (!m.markovian())
    throw std::invalid_argument(
        "generator_from_model: only Markovian (state-determined) families induce a generator");
  if (m.replenishment.kind == ReplenishmentSpec::Kind::EmpiricalResample)
    throw std::invalid_argument(
        "generator_from_model: empirical replenishment is path dependent, not a rate law");
  if (q_cap < 1 || s_cap < 1) throw std::invalid_argument("generator_from_model: caps must be >= 1");
  if (m.replenishment.kind == ReplenishmentSpec::Kind::Categorical)
    for (const auto& [state, w] : m.replenishment.categorical)
      if (state.q1 > q_cap || state.q2 > q_cap || state.spread > s_cap)
        throw std::invalid_argument("generator_from_model: replenishment state outside the window");
  if (m.replenishment.kind == ReplenishmentSpec::Kind::DepletedSideReset)
    for (const auto& [q, w] : m.replenishment.side_reset)
      if (q > q_cap)
        throw std::invalid_argument("generator_from_model: replenishment state outside the window");

  TruncatedGenerator gen;
  gen.provenance = "model:" + m.id;
  gen.space.kind = ChainKind::FullBook;
  gen.space.q_cap = q_cap;
  gen.space.s_cap = s_cap;
  for (int q1 = 1; q1 <= q_cap; ++q1)
    for (int q2 = 1; q2 <= q_cap; ++q2)
      for (int s = 1; s <= s_cap; ++s) gen.space.add({q1, q2, s});
  gen.rows.resize(gen.space.size());

  const double repl_total = m.replenishment.total_weight();
  const std::size_t n_obs = gen.space.size();
  for (std::size_t ui = 0; ui < n_obs; ++ui) {
    const StateKey key = gen.space.states[ui];
    const BookState u{key.q1, key.q2, key.spread};
    std::map<int, double> acc;
    for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
      const double rate = m.base_rate(ci, u);
      if (!(rate > 0.0)) continue;
      EventInput e = make_event(m.classes[ci], u);
      const bool depletes =
          e.dir == Direction::Consume && e.size >= (e.side == Side::Bid ? u.q1 : u.q2);
      if (depletes) {
        const StateKey marker = e.side == Side::Bid ? StateKey{0, u.q2, u.spread}
                                                    : StateKey{u.q1, 0, u.spread};
        const int vi = gen.space.add(marker);
        if (gen.rows.size() < gen.space.size()) gen.rows.resize(gen.space.size());
        acc[vi] += rate;
        continue;
      }
      const auto tr = apply_event(u, e);
      if (tr.post.q1 > q_cap || tr.post.q2 > q_cap || tr.post.spread > s_cap) continue;
      acc[gen.space.find(StateSpace::full(tr.post))] += rate;
    }
    for (const auto& [v, r] : acc) gen.rows[ui].out.push_back({v, r});
  }

  // Marker rows: instantaneous resolution by the replenishment law. A marker
  // carries the surviving queue and the spread, so the side-reset law is a
  // function of the marker state itself.
  for (std::size_t vi = n_obs; vi < gen.space.size(); ++vi) {
    gen.rows[vi].instantaneous = true;
    const StateKey marker = gen.space.states[vi];
    if (m.replenishment.kind == ReplenishmentSpec::Kind::Categorical) {
      for (const auto& [state, w] : m.replenishment.categorical) {
        if (!(w > 0.0)) continue;
        gen.rows[vi].out.push_back({gen.space.find(StateSpace::full(state)), w / repl_total});
      }
    } else {
      const Side side = marker.q1 == 0 ? Side::Bid : Side::Ask;
      const BookState survivor{std::max(marker.q1, 1), std::max(marker.q2, 1), marker.spread};
      const double total = m.replenishment.side_reset_weight();
      for (const auto& [q, w] : m.replenishment.side_reset) {
        if (!(w > 0.0)) continue;
        const BookState target = m.replenishment.resolve_side_reset(survivor, side, q);
        gen.rows[vi].out.push_back({gen.space.find(StateSpace::full(target)), w / total});
      }
    }
  }
  gen.validate();
  return gen;
}

// Single-queue birth--death generator: up-rate lambda_up(q) for q = 0..n-1,
// down-rate lambda_down(q) for q = 1..n. State 0 is the price-move marker; it
// is a timed state here, refilled by insertions, which is the convention
// under which the constant-rate chain has the geometric stationary law.
inline TruncatedGenerator birth_death_generator(const std::vector<double>& up,
                                                const std::vector<double>& down) {
  if (up.size() != down.size())
    throw std::invalid_argument("birth_death_generator: need one up rate and one down rate per level");
  const int top = static_cast<int>(up.size());
  if (top < 1) throw std::invalid_argument("birth_death_generator: empty ladder");
  TruncatedGenerator gen;
  gen.provenance = "birth-death";
  gen.space.kind = ChainKind::SingleQueue;
  gen.space.q_cap = top;
  for (int q = 0; q <= top; ++q) gen.space.add(StateSpace::queue(q));
  gen.rows.resize(gen.space.size());
  for (int q = 0; q <= top; ++q) {
    auto& row = gen.rows[static_cast<std::size_t>(q)];
    if (q < top && up[static_cast<std::size_t>(q)] > 0.0)
      row.out.push_back({q + 1, up[static_cast<std::size_t>(q)]});
    if (q > 0 && down[static_cast<std::size_t>(q - 1)] > 0.0)
      row.out.push_back({q - 1, down[static_cast<std::size_t>(q - 1)]});
  }
  gen.validate();
  return gen;
}

}  // namespace lobkit
