#pragma once

#include <json.hpp>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "lobkit/estimate.hpp"
#include "lobkit/rank.hpp"
#include "lobkit/stationary.hpp"

namespace lobkit {

// Report assembly and serialisation. All numeric fields carry their units in
// the field names (per_second, ticks, tick2_per_event, aes).

struct StationaryReport {
  ChainKind chain = ChainKind::FullBook;
  double tick_size = 1.0;
  int k = 10;
  double sigma2_g_tick2_per_event = 0.0;
  double sigma2_m_tick2_per_event = 0.0;
  bool sigma2_m_negative = false;
  double mean_step_seconds = 0.0;
  double sigma2_per_second = 0.0;
  double expected_spread_ticks = std::numeric_limits<double>::quiet_NaN();
  double imbalance_sigma2 = std::numeric_limits<double>::quiet_NaN();
  bool imbalance_negative = false;
  double boundary_mass = 0.0;
  double solver_residual = 0.0;
  int closed_classes = 1;
  std::vector<std::string> warnings;
  StateSpace space;
  std::vector<double> pi_time;
  std::vector<double> pi_event;
};

struct ReportOptions {
  int k = 10;
  MidPriceMoveFn price_move;
  double tick_size = 1.0;
  bool imbalance = true;
  SolveOptions solve;
};

inline StationaryReport build_stationary_report(const TruncatedGenerator& gen,
                                                const ReportOptions& opt = {}) {
  const auto sol = solve_stationary(gen, opt.solve);
  StationaryReport rep;
  rep.chain = gen.space.kind;
  rep.tick_size = opt.tick_size;
  rep.k = opt.k;
  rep.space = gen.space;
  rep.pi_time = sol.pi_time;
  rep.pi_event = sol.pi_event;
  rep.boundary_mass = sol.boundary_mass;
  rep.solver_residual = sol.residual;
  rep.closed_classes = sol.n_closed_classes;
  rep.warnings = sol.warnings;
  rep.mean_step_seconds = sol.mean_step_seconds;

  const auto eta = price_move_vector(gen.space, opt.price_move);
  const auto P = embedded_chain(gen);
  rep.sigma2_g_tick2_per_event = volatility_G(sol.pi_event, eta, gen.space);
  const auto m = volatility_M(sol.pi_event, P, eta, opt.k, gen.space);
  rep.sigma2_m_tick2_per_event = m.value;
  rep.sigma2_m_negative = m.negative;
  if (rep.mean_step_seconds > 0.0 && std::isfinite(rep.mean_step_seconds))
    rep.sigma2_per_second = volatility_per_second(m.value, rep.mean_step_seconds);
  if (gen.space.kind == ChainKind::FullBook) {
    rep.expected_spread_ticks = expected_spread(sol.pi_time, gen.space, 1.0);
    if (opt.imbalance) {
      const auto imb = imbalance_volatility(sol.pi_event, P, gen.space, opt.k);
      rep.imbalance_sigma2 = imb.value;
      rep.imbalance_negative = imb.negative;
    }
  }
  return rep;
}

inline nlohmann::json stationary_report_to_json(const StationaryReport& rep) {
  nlohmann::json j;
  j["chain"] = rep.chain == ChainKind::FullBook ? "full_book" : "single_queue";
  j["tick_size"] = rep.tick_size;
  j["k"] = rep.k;
  j["sigma2_G_tick2_per_event"] = rep.sigma2_g_tick2_per_event;
  j["sigma2_M_tick2_per_event"] = rep.sigma2_m_tick2_per_event;
  j["sigma2_M_negative"] = rep.sigma2_m_negative;
  j["mean_step_seconds"] = rep.mean_step_seconds;
  j["sigma2_per_second"] = rep.sigma2_per_second;
  if (std::isfinite(rep.expected_spread_ticks)) {
    j["expected_spread_ticks"] = rep.expected_spread_ticks;
    j["expected_spread_price"] = rep.expected_spread_ticks * rep.tick_size;
  }
  if (std::isfinite(rep.imbalance_sigma2)) {
    j["imbalance_sigma2_aes2_per_event"] = rep.imbalance_sigma2;
    j["imbalance_sigma2_negative"] = rep.imbalance_negative;
  }
  j["diagnostics"] = {{"boundary_mass", rep.boundary_mass},
                      {"solver_residual", rep.solver_residual},
                      {"closed_classes", rep.closed_classes},
                      {"warnings", rep.warnings}};
  nlohmann::json pi = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.space.size(); ++i) {
    if (rep.pi_time[i] <= 0.0 && rep.pi_event[i] <= 0.0) continue;
    const StateKey& s = rep.space.states[i];
    nlohmann::json row;
    if (rep.chain == ChainKind::FullBook) {
      row["q1"] = s.q1;
      row["q2"] = s.q2;
      row["spread"] = s.spread;
    } else {
      row["queue"] = s.q1;
    }
    row["pi_time"] = rep.pi_time[i];
    row["pi_event"] = rep.pi_event[i];
    pi.push_back(row);
  }
  j["pi"] = pi;
  return j;
}

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

// Plot-ready stationary law: one row per state.
inline void write_pi_csv(std::ostream& os, const StationaryReport& rep) {
  if (rep.chain == ChainKind::FullBook)
    os << "q1_aes,q2_aes,spread_ticks,pi_time,pi_event\n";
  else
    os << "queue_aes,pi_time,pi_event\n";
  for (std::size_t i = 0; i < rep.space.size(); ++i) {
    if (rep.pi_time[i] <= 0.0 && rep.pi_event[i] <= 0.0) continue;
    const StateKey& s = rep.space.states[i];
    if (rep.chain == ChainKind::FullBook)
      os << s.q1 << ',' << s.q2 << ',' << s.spread << ',' << detail::num(rep.pi_time[i]) << ','
         << detail::num(rep.pi_event[i]) << '\n';
    else
      os << s.q1 << ',' << detail::num(rep.pi_time[i]) << ',' << detail::num(rep.pi_event[i])
         << '\n';
  }
}

// Liquidity provision/consumption intensities per queue size (orders per
// second against queue size in AES), from a single-queue estimate.
inline void write_intensity_csv(std::ostream& os, const GeneratorEstimate& est) {
  if (est.space.kind != ChainKind::SingleQueue)
    throw std::invalid_argument("write_intensity_csv: needs a single-queue estimate");
  os << "queue_aes,insert_per_second,consume_per_second,occupation_seconds\n";
  std::map<int, std::tuple<double, double, double>> rows;  // q -> (up, down, occ)
  for (int z = 0; z < static_cast<int>(est.space.size()); ++z) {
    const double occ = est.occupation[static_cast<std::size_t>(z)];
    if (!(occ > 0.0)) continue;
    const int q = est.space.states[static_cast<std::size_t>(z)].q1;
    double up = 0.0, down = 0.0;
    for (const auto& [key, cell] : est.cells) {
      if (key.first != z) continue;
      const int qp = est.space.states[static_cast<std::size_t>(key.second)].q1;
      if (qp > q) up += est.cell_rate(z, cell.count);
      else if (qp < q) down += est.cell_rate(z, cell.count);
    }
    rows[q] = {up, down, occ};
  }
  for (const auto& [q, row] : rows)
    os << q << ',' << detail::num(std::get<0>(row)) << ',' << detail::num(std::get<1>(row)) << ','
       << detail::num(std::get<2>(row)) << '\n';
}

inline void ranking_to_csv(std::ostream& os, const RankingReport& rep) {
  os << "agent,rank,market_share_pct,volume_share_pct,sigma2G_cf,sigma2Mk_cf,delta,stars\n";
  for (const auto& row : rep.rows) {
    os << row.agent << ',' << row.rank << ',' << detail::num(100.0 * row.event_share) << ','
       << detail::num(100.0 * row.volume_share) << ',';
    if (row.rankable)
      os << detail::num(row.sigma2_g_cf) << ',' << detail::num(row.sigma2_m_cf) << ','
         << detail::num(row.delta_m);
    else
      os << ",,";
    os << ',' << row.stars << '\n';
  }
}

inline nlohmann::json ranking_to_json(const RankingReport& rep) {
  nlohmann::json j;
  j["asset"] = rep.asset;
  j["k"] = rep.k;
  j["baseline_sigma2_G"] = rep.baseline_g;
  j["baseline_sigma2_M"] = rep.baseline_m;
  j["rank_disagreement_G_vs_M"] = rep.rank_disagreement;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rep.rows) {
    nlohmann::json r;
    r["agent"] = row.agent;
    r["rank"] = row.rank;
    r["events"] = row.events;
    r["market_share_pct"] = 100.0 * row.event_share;
    r["volume_share_pct"] = 100.0 * row.volume_share;
    r["rankable"] = row.rankable;
    if (row.rankable) {
      r["sigma2_G_cf"] = row.sigma2_g_cf;
      r["sigma2_M_cf"] = row.sigma2_m_cf;
      r["delta_G"] = row.delta_g;
      r["delta_M"] = row.delta_m;
    } else {
      r["reason"] = row.reason;
    }
    r["stars"] = row.stars;
    rows.push_back(r);
  }
  j["agents"] = rows;
  return j;
}

// Human-readable cross-asset table: one row per market maker, a ranking and
// market-share column pair per asset, stars appended to the name.
inline void ranking_table(std::ostream& os, const std::vector<RankingReport>& reports) {
  if (reports.empty()) return;
  std::map<int, std::vector<const AgentOutcome*>> rows;  // agent -> per asset
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (const auto& row : reports[i].rows) {
      auto& v = rows[row.agent];
      v.resize(reports.size(), nullptr);
      v[i] = &row;
    }

  os << std::left << std::setw(14) << "Market maker";
  for (const auto& rep : reports)
    os << std::right << std::setw(10) << ("Rk " + rep.asset).substr(0, 9) << std::setw(8)
       << "Share";
  os << '\n';
  for (const auto& [agent, per_asset] : rows) {
    int stars = 0;
    for (const auto* r : per_asset)
      if (r) stars = std::max(stars, r->stars);
    std::string name = "MM" + std::to_string(agent) + std::string(static_cast<std::size_t>(stars), '*');
    os << std::left << std::setw(14) << name;
    for (const auto* r : per_asset) {
      if (r && r->rankable) {
        char share[16];
        std::snprintf(share, sizeof share, "%.0f%%", 100.0 * r->event_share);
        os << std::right << std::setw(10) << r->rank << std::setw(8) << share;
      } else {
        os << std::right << std::setw(10) << "-" << std::setw(8) << "-";
      }
    }
    os << '\n';
  }
}

// Sparse text form of an estimated generator:
//   z z' count occupation qhat ci_low ci_high [agent]
// with one unkeyed line per market cell and one keyed line per agent split.
inline void write_generator_estimate(std::ostream& os, const GeneratorEstimate& est) {
  os << "# z and z' are state labels: (q1,q2,spread) or (queue) per chain kind\n";
  os << "z,zprime,count,occupation_seconds,qhat_per_second,ci_low,ci_high,agent\n";
  const auto label = [&](int z) {
    const StateKey& s = est.space.states[static_cast<std::size_t>(z)];
    if (est.space.kind == ChainKind::SingleQueue) return "(" + std::to_string(s.q1) + ")";
    return "(" + std::to_string(s.q1) + "|" + std::to_string(s.q2) + "|" +
           std::to_string(s.spread) + ")";
  };
  for (const auto& [key, cell] : est.cells) {
    const double occ = est.occupation[static_cast<std::size_t>(key.first)];
    os << label(key.first) << ',' << label(key.second) << ',' << cell.count << ','
       << detail::num(occ) << ',' << detail::num(cell.qhat) << ',';
    if (cell.ci_valid) os << detail::num(cell.ci_low) << ',' << detail::num(cell.ci_high);
    else os << ',';
    os << ",\n";
    for (const auto& [a, c] : cell.by_agent)
      os << label(key.first) << ',' << label(key.second) << ',' << c << ',' << detail::num(occ)
         << ',' << detail::num(est.cell_rate(key.first, c)) << ",,," << a << '\n';
  }
}

}  // namespace lobkit
