#pragma once

#include <algorithm>
#include <future>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lobkit/estimate.hpp"
#include "lobkit/stationary.hpp"

namespace lobkit {

// Counterfactual market surgery on estimated generators. All identities here
// are integer-count arithmetic: the market count of a cell is the sum of its
// per-agent counts, so removing an agent and reconstituting the market are
// exact inverses and the recomputed rates match bit for bit.

// The market without agent `a`: its counts leave every cell (including the
// marker resolutions its depletions caused); occupation times stay, the other
// participants do not change their behaviour.
inline GeneratorEstimate remove_agent(const GeneratorEstimate& market, int agent) {
  GeneratorEstimate out = market;
  for (auto it = out.cells.begin(); it != out.cells.end();) {
    auto& cell = it->second;
    const auto ag = cell.by_agent.find(agent);
    if (ag != cell.by_agent.end()) {
      cell.count -= ag->second;
      out.departures[static_cast<std::size_t>(it->first.first)] -= ag->second;
      out.total_steps -= ag->second;
      if (cell.count < 0)
        throw std::logic_error("remove_agent: agent counts exceed the market counts");
      cell.by_agent.erase(ag);
    }
    cell.ci_valid = false;  // bands are for the full market sample
    if (cell.count == 0) {
      it = out.cells.erase(it);
    } else {
      cell.qhat = out.cell_rate(it->first.first, cell.count);
      ++it;
    }
  }
  out.agent_events.erase(agent);
  out.agent_volume.erase(agent);
  return out;
}

// One agent's own flow, on the market's state space and occupation clock.
inline GeneratorEstimate isolate_agent(const GeneratorEstimate& market, int agent) {
  GeneratorEstimate out = market;
  out.cells.clear();
  out.total_steps = 0;
  std::fill(out.departures.begin(), out.departures.end(), 0);
  for (const auto& [key, cell] : market.cells) {
    const auto ag = cell.by_agent.find(agent);
    if (ag == cell.by_agent.end() || ag->second == 0) continue;
    CellEstimate mine;
    mine.count = ag->second;
    mine.by_agent[agent] = ag->second;
    mine.qhat = market.cell_rate(key.first, mine.count);
    out.cells.emplace(key, std::move(mine));
    out.departures[static_cast<std::size_t>(key.first)] += ag->second;
    out.total_steps += ag->second;
  }
  out.agent_events.clear();
  out.agent_volume.clear();
  if (market.agent_events.count(agent)) out.agent_events[agent] = market.agent_events.at(agent);
  if (market.agent_volume.count(agent)) out.agent_volume[agent] = market.agent_volume.at(agent);
  return out;
}

// Exact inverse of the per-agent split: sums per-agent estimates that share a
// state space and occupation clock. Rejects inputs whose agent sets overlap,
// which would double-count flow.
inline GeneratorEstimate reconstitute_market(std::span<const GeneratorEstimate> parts) {
  if (parts.empty()) throw std::invalid_argument("reconstitute_market: no inputs");
  GeneratorEstimate out = parts[0];
  std::set<int> seen;
  for (const auto& [key, cell] : out.cells)
    for (const auto& [a, c] : cell.by_agent)
      if (c > 0) seen.insert(a);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const GeneratorEstimate& p = parts[i];
    if (p.space.states != out.space.states)
      throw std::invalid_argument("reconstitute_market: state spaces differ");
    if (p.occupation != out.occupation)
      throw std::invalid_argument("reconstitute_market: occupation clocks differ");
    std::set<int> mine;
    for (const auto& [key, cell] : p.cells)
      for (const auto& [a, c] : cell.by_agent)
        if (c > 0) mine.insert(a);
    for (const int a : mine)
      if (!seen.insert(a).second)
        throw std::invalid_argument("reconstitute_market: agent " + std::to_string(a) +
                                    " appears in more than one part");
    for (const auto& [key, cell] : p.cells) {
      auto& dst = out.cells[key];
      dst.count += cell.count;
      for (const auto& [a, c] : cell.by_agent) dst.by_agent[a] += c;
      dst.ci_valid = false;
      out.departures[static_cast<std::size_t>(key.first)] += cell.count;
      out.total_steps += cell.count;
    }
    for (const auto& [a, c] : p.agent_events) out.agent_events[a] += c;
    for (const auto& [a, c] : p.agent_volume) out.agent_volume[a] += c;
  }
  for (auto& [key, cell] : out.cells) cell.qhat = out.cell_rate(key.first, cell.count);
  return out;
}

// ---------------------------------------------------------------------------
// Counterfactual ranking
// ---------------------------------------------------------------------------

struct RankOptions {
  int k = 10;                 // lag depth of the ranking volatility
  MidPriceMoveFn price_move;  // full-book chains only; default mapping if empty
  SolveOptions solve;
};

struct AgentOutcome {
  int agent = 0;
  long long events = 0;
  double event_share = 0.0;   // fraction of in-scope events
  double volume_share = 0.0;  // fraction of in-scope order volume
  double sigma2_g_cf = 0.0;   // market volatility estimators without the agent
  double sigma2_m_cf = 0.0;
  double delta_g = 0.0;       // counterfactual minus baseline
  double delta_m = 0.0;
  int rank = 0;               // 1 = most stabilising; 0 = unrankable
  bool rankable = true;
  std::string reason;
  int stars = 0;              // assets on which removal raises volatility
};

struct RankingReport {
  std::string asset = "asset";
  int k = 10;
  double baseline_g = 0.0;
  double baseline_m = 0.0;
  bool baseline_m_negative = false;
  std::vector<AgentOutcome> rows;  // ranked first, unrankable at the end
  bool rank_disagreement = false;  // sigma2G would order the agents differently
};

namespace detail {

struct ChainMetrics {
  double g = 0.0, m = 0.0;
  bool m_negative = false;
  bool ok = false;
  std::string reason;
};

inline ChainMetrics chain_metrics(const GeneratorEstimate& est, const RankOptions& opt) {
  ChainMetrics out;
  const auto bridge = generator_from_estimate(est);
  if (bridge.generator.space.size() == 0) {
    out.reason = "no observed transitions";
    return out;
  }
  const auto sol = solve_stationary(bridge.generator, opt.solve);
  if (sol.n_closed_classes != 1) {
    out.reason = "reducible support (" + std::to_string(sol.n_closed_classes) +
                 " closed classes)";
    return out;
  }
  const auto& space = bridge.generator.space;
  if (!space.any_fictitious()) {
    out.reason = "no price-move marker reached";
    return out;
  }
  const auto eta = price_move_vector(space, opt.price_move);
  const auto P = embedded_chain(bridge.generator);
  out.g = volatility_G(sol.pi_event, eta, space);
  const auto m = volatility_M(sol.pi_event, P, eta, opt.k, space);
  out.m = m.value;
  out.m_negative = m.negative;
  out.ok = true;
  return out;
}

}  // namespace detail

// Ranks market makers by the volatility the market would have without them:
// the agent whose removal leaves the highest lag-k volatility is the most
// stabilising and ranks first. Ties break on the first-order estimator, then
// on the agent id. Agents whose counterfactual market cannot be solved are
// reported unrankable with the reason.
inline RankingReport rank_market_makers(const GeneratorEstimate& market,
                                        std::vector<int> agents = {},
                                        const RankOptions& opt = {}) {
  RankingReport rep;
  rep.k = opt.k;
  const auto base = detail::chain_metrics(market, opt);
  if (!base.ok)
    throw std::invalid_argument("rank_market_makers: baseline market unsolvable (" + base.reason +
                                ")");
  rep.baseline_g = base.g;
  rep.baseline_m = base.m;
  rep.baseline_m_negative = base.m_negative;

  if (agents.empty())
    for (const int a : market.agents()) agents.push_back(a);

  long long total_events = 0, total_volume = 0;
  for (const auto& [a, c] : market.agent_events) total_events += c;
  for (const auto& [a, c] : market.agent_volume) total_volume += c;

  // Counterfactual solves are independent; run them concurrently and reduce
  // in the deterministic agent order.
  std::vector<std::future<detail::ChainMetrics>> futures;
  futures.reserve(agents.size());
  for (const int a : agents)
    futures.push_back(std::async(std::launch::async, [&market, &opt, a] {
      return detail::chain_metrics(remove_agent(market, a), opt);
    }));
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const int a = agents[i];
    AgentOutcome row;
    row.agent = a;
    row.events = market.agent_events.count(a) ? market.agent_events.at(a) : 0;
    row.event_share =
        total_events > 0 ? static_cast<double>(row.events) / static_cast<double>(total_events)
                         : 0.0;
    row.volume_share =
        total_volume > 0 && market.agent_volume.count(a)
            ? static_cast<double>(market.agent_volume.at(a)) / static_cast<double>(total_volume)
            : 0.0;
    const auto cf = futures[i].get();
    if (!cf.ok) {
      row.rankable = false;
      row.reason = cf.reason;
    } else {
      row.sigma2_g_cf = cf.g;
      row.sigma2_m_cf = cf.m;
      row.delta_g = cf.g - rep.baseline_g;
      row.delta_m = cf.m - rep.baseline_m;
      row.stars = row.delta_m > 0.0 ? 1 : 0;
    }
    rep.rows.push_back(row);
  }

  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const AgentOutcome& x,
                                                        const AgentOutcome& y) {
    if (x.rankable != y.rankable) return x.rankable;
    if (!x.rankable) return x.agent < y.agent;
    if (x.sigma2_m_cf != y.sigma2_m_cf) return x.sigma2_m_cf > y.sigma2_m_cf;
    if (x.sigma2_g_cf != y.sigma2_g_cf) return x.sigma2_g_cf > y.sigma2_g_cf;
    return x.agent < y.agent;
  });
  int next_rank = 1;
  for (auto& row : rep.rows)
    if (row.rankable) row.rank = next_rank++;

  // Does the first-order estimator induce the same order?
  std::vector<const AgentOutcome*> by_g;
  for (const auto& row : rep.rows)
    if (row.rankable) by_g.push_back(&row);
  std::vector<const AgentOutcome*> sorted_g = by_g;
  std::stable_sort(sorted_g.begin(), sorted_g.end(), [](const AgentOutcome* x,
                                                        const AgentOutcome* y) {
    if (x->sigma2_g_cf != y->sigma2_g_cf) return x->sigma2_g_cf > y->sigma2_g_cf;
    return x->agent < y->agent;
  });
  rep.rank_disagreement = by_g != sorted_g;
  return rep;
}

// Cross-asset star convention: an agent collects one star per asset on which
// its removal raises the lag-k volatility.
inline void apply_star_counts(std::vector<RankingReport>& reports) {
  std::map<int, int> stars;
  for (const auto& rep : reports)
    for (const auto& row : rep.rows)
      if (row.rankable && row.delta_m > 0.0) stars[row.agent] += 1;
  for (auto& rep : reports)
    for (auto& row : rep.rows) row.stars = stars.count(row.agent) ? stars[row.agent] : 0;
}

}  // namespace lobkit
