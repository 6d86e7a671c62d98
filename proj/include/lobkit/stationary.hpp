#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lobkit/generator.hpp"

namespace lobkit {

// Event-indexed functionals of the analysis chain. Price-move and imbalance
// sequences are indexed by embedded steps, so every expectation here is taken
// under the per-step law pi_event; wall-clock quantities (expected spread,
// per-second volatility) use the occupation law pi_time.

// Tick-valued price move read off each chain state. Full-book chains apply
// the mid-price mapping (default: -1 when the bid queue empties, +1 when the
// ask empties); single-queue chains mark their empty-queue state with a unit
// move whose sign is the bid convention. Only squared moves and same-marker
// products enter single-queue summaries, so that sign is immaterial there.
inline std::vector<double> price_move_vector(const StateSpace& space,
                                             const MidPriceMoveFn& f = {}) {
  std::vector<double> eta(space.size(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const StateKey& k = space.states[i];
    if (space.kind == ChainKind::SingleQueue) {
      eta[i] = k.q1 == 0 ? -1.0 : 0.0;
    } else {
      const BookState u{k.q1, k.q2, k.spread};
      eta[i] = f ? static_cast<double>(f(u)) : static_cast<double>(default_price_move(u));
    }
  }
  return eta;
}

// First-order volatility E[eta_0^2] in tick^2 per embedded step. Requires the
// chain to carry its price-move markers; without them the estimate would be
// identically zero by construction, which is reported as an error rather
// than a value.
inline double volatility_G(const std::vector<double>& pi_event, const std::vector<double>& eta,
                           const StateSpace& space) {
  if (pi_event.size() != space.size() || eta.size() != space.size())
    throw std::invalid_argument("volatility_G: size mismatch");
  if (!space.any_fictitious())
    throw std::invalid_argument("volatility_G: chain has no price-move marker states");
  double v = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) v += pi_event[i] * eta[i] * eta[i];
  return v;
}

struct LaggedVolatility {
  double value = 0.0;
  int lags = 0;
  bool negative = false;          // autocovariance correction overwhelmed the leading term
  std::vector<double> cross_terms;  // E[eta_0 eta_j], j = 1..k
};

// sigma^2_k = E[eta_0^2] + 2 sum_{j=1}^k E[eta_0 eta_j] with
// E[eta_0 eta_j] = sum_u pi(u) eta(u) (P^j eta)(u), evaluated by iterated
// matrix-vector products. k = 0 reduces to the first-order estimator. A
// negative value is reported as-is with the diagnostic flag set.
inline LaggedVolatility volatility_M(const std::vector<double>& pi_event, const EmbeddedChain& P,
                                     const std::vector<double>& eta, int k,
                                     const StateSpace& space) {
  if (k < 0) throw std::invalid_argument("volatility_M: lag count must be >= 0");
  LaggedVolatility out;
  out.lags = k;
  out.value = volatility_G(pi_event, eta, space);
  std::vector<double> v = eta;
  for (int j = 1; j <= k; ++j) {
    v = P.apply_right(v);  // v = P^j eta
    double cross = 0.0;
    for (std::size_t u = 0; u < space.size(); ++u) cross += pi_event[u] * eta[u] * v[u];
    out.cross_terms.push_back(cross);
    out.value += 2.0 * cross;
  }
  out.negative = out.value < 0.0;
  return out;
}

// Calendar-time rescaling: tick^2 per event over mean seconds per event.
inline double volatility_per_second(double sigma2_per_step, double mean_step_seconds) {
  if (!(mean_step_seconds > 0.0))
    throw std::invalid_argument("volatility_per_second: mean step duration must be > 0");
  return sigma2_per_step / mean_step_seconds;
}

// Stationary expected spread in price units (tick count times tick size),
// under the occupation law.
inline double expected_spread(const std::vector<double>& pi_time, const StateSpace& space,
                              double tick_size = 1.0) {
  if (space.kind != ChainKind::FullBook)
    throw std::invalid_argument("expected_spread: needs the full-book chain");
  double s = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space.fictitious(static_cast<int>(i))) continue;
    s += pi_time[i] * space.states[i].spread;
    mass += pi_time[i];
  }
  if (!(mass > 0.0)) throw std::invalid_argument("expected_spread: no observable mass");
  return tick_size * s / mass;
}

// ---------------------------------------------------------------------------
// Liquidity-imbalance fluctuations
// ---------------------------------------------------------------------------

// Signed net inserted volume (bid minus ask) carried by one transition of the
// full-book chain. Replenishment hops out of a marker are not order flow.
// Same-spread moves read the queue delta on whichever side moved; a spread
// reduction with the opposite queue unchanged is an in-spread insertion whose
// flow is the freshly posted queue.
inline std::optional<double> imbalance_increment(const StateSpace& space, int from, int to) {
  const StateKey a = space.states[static_cast<std::size_t>(from)];
  const StateKey b = space.states[static_cast<std::size_t>(to)];
  if (space.fictitious(from)) return 0.0;
  if (b.spread == a.spread && b.q2 == a.q2) return static_cast<double>(b.q1 - a.q1);
  if (b.spread == a.spread && b.q1 == a.q1) return -static_cast<double>(b.q2 - a.q2);
  if (b.spread < a.spread && b.q2 == a.q2 && b.q1 > 0) return static_cast<double>(b.q1);
  if (b.spread < a.spread && b.q1 == a.q1 && b.q2 > 0) return -static_cast<double>(b.q2);
  return std::nullopt;  // not attributable to a single order
}

struct ImbalanceVolatility {
  double value = 0.0;
  int lags = 0;
  bool negative = false;
  long unclassified_transitions = 0;  // treated as zero flow
};

// sigma~^2_k for the cumulative imbalance: transition-valued increments n
// with E[n_0^2] = sum pi(u) P(u,u') n(u,u')^2 and cross terms through the
// conditional mean g = P-average of n.
inline ImbalanceVolatility imbalance_volatility(const std::vector<double>& pi_event,
                                                const EmbeddedChain& P, const StateSpace& space,
                                                int k) {
  if (space.kind != ChainKind::FullBook)
    throw std::invalid_argument("imbalance_volatility: needs the full-book chain");
  if (k < 0) throw std::invalid_argument("imbalance_volatility: lag count must be >= 0");
  ImbalanceVolatility out;
  out.lags = k;

  const std::size_t n = space.size();
  std::vector<double> g(n, 0.0);  // conditional mean increment out of u
  double second = 0.0;
  std::vector<std::vector<double>> inc(n);
  for (std::size_t u = 0; u < n; ++u) {
    inc[u].resize(P.rows[u].size(), 0.0);
    for (std::size_t e = 0; e < P.rows[u].size(); ++e) {
      const auto& [v, p] = P.rows[u][e];
      const auto ni = imbalance_increment(space, static_cast<int>(u), v);
      const double val = ni.value_or(0.0);
      if (!ni.has_value()) ++out.unclassified_transitions;
      inc[u][e] = val;
      g[u] += p * val;
      second += pi_event[u] * p * val * val;
    }
  }
  out.value = second;

  // E[n_0 n_j] = sum_u pi(u) sum_v P(u,v) n(u,v) (P^{j-1} g)(v)
  std::vector<double> h = g;
  for (int j = 1; j <= k; ++j) {
    if (j > 1) h = P.apply_right(h);
    double cross = 0.0;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t e = 0; e < P.rows[u].size(); ++e) {
        const auto& [v, p] = P.rows[u][e];
        cross += pi_event[u] * p * inc[u][e] * h[static_cast<std::size_t>(v)];
      }
    out.value += 2.0 * cross;
  }
  out.negative = out.value < 0.0;
  return out;
}

}  // namespace lobkit
