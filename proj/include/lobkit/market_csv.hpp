#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lobkit/estimate.hpp"
#include "lobkit/simulate.hpp"

namespace lobkit {

// Best-effort adapter from a raw order-flow CSV to the event alphabet. The
// expected columns are
//
//   timestamp,side,action,price,volume,member
//
// with side in {B,S,1,2}, action in {insert,cancel,trade}, price in currency
// units, volume in shares and an optional member id (events without one go to
// the reserved unattributed agent). Cancellations and trades both consume
// liquidity.
//
// The adapter rebuilds the two first limits from the flow. Rows that do not
// touch a best limit (deeper inserts, stale cancels), rows that would cross
// the book, and rows arriving while a limit is unknown are dropped with
// counters. After a depletion the refilled limit is only known when the next
// insertion re-establishes it; the depletion record is emitted at that point
// with the re-established book as its replenishment state.
//
// Volumes are converted to integer queue units by ceil(volume * units_per_aes
// / AES), with the AES either fixed or computed per day and per side as the
// mean event volume, following the usual normalisation.

struct IngestStats {
  long long rows = 0;
  long long rejected_parse = 0;
  long long rejected_nonmonotone = 0;
  long long dropped_deeper = 0;
  long long dropped_crossing = 0;
  long long dropped_unknown_state = 0;
  long long events = 0;
  long long depletions = 0;
};

struct MarketCsvResult {
  EventLog log;
  IngestStats stats;
  std::map<std::pair<long, int>, double> aes;  // (day, side index) -> mean event volume
};

namespace detail {

struct RawRow {
  double t = 0.0;
  Side side = Side::Bid;
  int action = 0;  // 0 insert, 1 consume
  double price = 0.0;
  double volume = 0.0;
  int agent = kUnattributedAgent;
};

inline std::optional<RawRow> parse_market_row(const std::string& line) {
  std::istringstream ls(line);
  std::string f[6];
  for (int i = 0; i < 6; ++i)
    if (!std::getline(ls, f[i], ',') && i < 5) return std::nullopt;
  RawRow r;
  try {
    r.t = std::stod(f[0]);
    if (f[1] == "B" || f[1] == "b" || f[1] == "1") r.side = Side::Bid;
    else if (f[1] == "S" || f[1] == "s" || f[1] == "A" || f[1] == "a" || f[1] == "2")
      r.side = Side::Ask;
    else return std::nullopt;
    if (f[2] == "insert") r.action = 0;
    else if (f[2] == "cancel" || f[2] == "trade") r.action = 1;
    else return std::nullopt;
    r.price = std::stod(f[3]);
    r.volume = std::stod(f[4]);
    if (!(r.volume > 0.0)) return std::nullopt;
    r.agent = f[5].empty() ? kUnattributedAgent : std::stoi(f[5]);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return r;
}

}  // namespace detail

inline MarketCsvResult read_market_csv(std::istream& is, double tick_size,
                                       const IngestionConfig& cfg = {}) {
  if (!(tick_size > 0.0)) throw std::invalid_argument("read_market_csv: tick size must be > 0");
  MarketCsvResult out;
  IngestStats& st = out.stats;

  std::vector<detail::RawRow> rows;
  std::string line;
  bool first = true;
  double last_t = -std::numeric_limits<double>::infinity();
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("timestamp", 0) == 0) {
      first = false;
      continue;  // header row
    }
    first = false;
    ++st.rows;
    const auto row = detail::parse_market_row(line);
    if (!row.has_value()) {
      ++st.rejected_parse;
      continue;
    }
    if (row->t < last_t) {
      ++st.rejected_nonmonotone;
      continue;
    }
    last_t = row->t;
    rows.push_back(*row);
  }

  // AES per day and side: mean raw event volume.
  std::map<std::pair<long, int>, std::pair<double, long>> acc;
  for (const auto& r : rows) {
    const long day = static_cast<long>(std::floor(r.t / 86400.0));
    auto& a = acc[{day, side_index(r.side)}];
    a.first += r.volume;
    a.second += 1;
  }
  for (const auto& [key, a] : acc) out.aes[key] = a.first / static_cast<double>(a.second);
  const auto aes_of = [&](double t, Side side) {
    if (cfg.fixed_aes > 0.0) return cfg.fixed_aes;
    const long day = static_cast<long>(std::floor(t / 86400.0));
    return out.aes.at({day, side_index(side)});
  };
  const int units = std::max(cfg.units_per_aes, 1);
  const auto to_units = [&](double volume, double aes) {
    return std::max(1, volume_to_units(volume, aes, units));
  };

  // First-limit reconstruction on the integer tick grid.
  long long bid_px = 0, ask_px = 0;
  bool bid_known = false, ask_known = false;
  double bid_vol = 0.0, ask_vol = 0.0;
  bool started = false;
  long long mid2 = 0;  // bid_px + ask_px: mid price in half ticks

  struct PendingDepletion {
    double t;
    int agent;
    Side side;
    int size;
    int pre_spread;  // spread at the depletion, the level a consumed ask sat at
  };
  std::optional<PendingDepletion> pending;

  const auto snapshot = [&](double t, Side) {
    return BookState{to_units(bid_vol, aes_of(t, Side::Bid)),
                     to_units(ask_vol, aes_of(t, Side::Ask)),
                     static_cast<int>(ask_px - bid_px)};
  };

  for (const auto& r : rows) {
    const long long px = static_cast<long long>(std::llround(r.price / tick_size));
    const double aes = aes_of(r.t, r.side);

    if (r.action == 0) {  // insertion
      if (r.side == Side::Bid) {
        if (ask_known && px >= ask_px) {
          ++st.dropped_crossing;
          continue;
        }
        if (!bid_known || px > bid_px) {
          const bool had = bid_known;
          const long long old_bid = bid_px;
          bid_px = px;
          bid_vol = r.volume;
          bid_known = true;
          if (!started) {
            if (bid_known && ask_known) {
              started = true;
              out.log.meta.initial = snapshot(r.t, r.side);
              out.log.meta.t0 = r.t;
              mid2 = bid_px + ask_px;
            }
            continue;
          }
          if (pending.has_value() && pending->side == Side::Bid) {
            // The depletion resolves here: emit it with the refilled book.
            const long long new_mid2 = bid_px + ask_px;
            const int eta = static_cast<int>(std::llround((new_mid2 - mid2) / 2.0));
            out.log.records.push_back({pending->t, pending->agent, Side::Bid,
                                       Direction::Consume, 0, pending->size,
                                       snapshot(r.t, r.side), true, eta});
            mid2 = new_mid2;
            pending.reset();
            ++st.events;
            ++st.depletions;
            continue;
          }
          if (!had || !ask_known) {
            ++st.dropped_unknown_state;
            continue;
          }
          // In-spread buy: level is the improvement over the old bid.
          const int level = static_cast<int>(px - old_bid);
          out.log.records.push_back({r.t, r.agent, Side::Bid, Direction::Provide, level,
                                     to_units(r.volume, aes), snapshot(r.t, r.side), false, 0});
          ++st.events;
          continue;
        }
        if (px < bid_px) {
          ++st.dropped_deeper;
          continue;
        }
        bid_vol += r.volume;
        if (!started || pending.has_value()) {
          ++st.dropped_unknown_state;
          continue;
        }
        out.log.records.push_back({r.t, r.agent, Side::Bid, Direction::Provide, 0,
                                   to_units(r.volume, aes), snapshot(r.t, r.side), false, 0});
        ++st.events;
      } else {  // ask insertion, mirror image
        if (bid_known && px <= bid_px) {
          ++st.dropped_crossing;
          continue;
        }
        if (!ask_known || px < ask_px) {
          const bool had = ask_known;
          const long long old_ask = ask_px;
          (void)old_ask;
          ask_px = px;
          ask_vol = r.volume;
          ask_known = true;
          if (!started) {
            if (bid_known && ask_known) {
              started = true;
              out.log.meta.initial = snapshot(r.t, r.side);
              out.log.meta.t0 = r.t;
              mid2 = bid_px + ask_px;
            }
            continue;
          }
          if (pending.has_value() && pending->side == Side::Ask) {
            const long long new_mid2 = bid_px + ask_px;
            const int eta = static_cast<int>(std::llround((new_mid2 - mid2) / 2.0));
            const BookState post = snapshot(r.t, r.side);
            out.log.records.push_back({pending->t, pending->agent, Side::Ask,
                                       Direction::Consume, pending->pre_spread, pending->size,
                                       post, true, eta});
            mid2 = new_mid2;
            pending.reset();
            ++st.events;
            ++st.depletions;
            continue;
          }
          if (!had || !bid_known) {
            ++st.dropped_unknown_state;
            continue;
          }
          const BookState post = snapshot(r.t, r.side);
          out.log.records.push_back({r.t, r.agent, Side::Ask, Direction::Provide, post.spread,
                                     to_units(r.volume, aes), post, false, 0});
          ++st.events;
          continue;
        }
        if (px > ask_px) {
          ++st.dropped_deeper;
          continue;
        }
        ask_vol += r.volume;
        if (!started || pending.has_value()) {
          ++st.dropped_unknown_state;
          continue;
        }
        const BookState post = snapshot(r.t, r.side);
        out.log.records.push_back({r.t, r.agent, Side::Ask, Direction::Provide, post.spread,
                                   to_units(r.volume, aes), post, false, 0});
        ++st.events;
      }
      continue;
    }

    // Consumption (cancel or trade).
    const bool at_best = r.side == Side::Bid ? (bid_known && px == bid_px)
                                             : (ask_known && px == ask_px);
    if (!at_best) {
      ++st.dropped_deeper;
      continue;
    }
    if (!started || pending.has_value()) {
      ++st.dropped_unknown_state;
      continue;
    }
    double& vol = r.side == Side::Bid ? bid_vol : ask_vol;
    if (r.volume < vol - 1e-9) {
      vol -= r.volume;
      const BookState post = snapshot(r.t, r.side);
      out.log.records.push_back({r.t, r.agent, r.side, Direction::Consume,
                                 r.side == Side::Bid ? 0 : post.spread, to_units(r.volume, aes),
                                 post, false, 0});
      ++st.events;
    } else {
      // Queue emptied: the limit is unknown until the flow re-establishes it.
      pending = PendingDepletion{r.t, r.agent, r.side, to_units(r.volume, aes),
                                 static_cast<int>(ask_px - bid_px)};
      if (r.side == Side::Bid) {
        bid_known = false;
        bid_vol = 0.0;
      } else {
        ask_known = false;
        ask_vol = 0.0;
      }
    }
  }

  // Feeds can carry duplicate timestamps; the log invariant wants strictly
  // increasing times, so equal stamps are nudged by one ulp.
  for (std::size_t i = 1; i < out.log.records.size(); ++i)
    if (out.log.records[i].t <= out.log.records[i - 1].t)
      out.log.records[i].t =
          std::nextafter(out.log.records[i - 1].t, std::numeric_limits<double>::infinity());

  if (!out.log.records.empty()) out.log.meta.horizon = out.log.records.back().t;
  out.log.meta.model_id = "market-csv";
  out.log.meta.tick_size = tick_size;
  out.log.meta.unit_per_aes = units;
  return out;
}

inline MarketCsvResult read_market_csv(const std::string& path, double tick_size,
                                       const IngestionConfig& cfg = {}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_market_csv(is, tick_size, cfg);
}

}  // namespace lobkit
