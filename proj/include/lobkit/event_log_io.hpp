#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lobkit/simulate.hpp"

namespace lobkit {

// Delimited text event logs. One record per line, tab separated; the header
// carries the seed, the model id, units and the initial state so a log can be
// replayed standalone. Timestamps are printed with 17 significant digits,
// which round-trips IEEE doubles exactly.
//
//   #lobkit-eventlog v1 seed=... model=... q1=2 q2=2 spread=1 ...
//   time  agent  side  dir  level  size  q1_post  q2_post  spread_post  epsilon  eta
//   2.5024546200376803  1  2  +1  0  1  2  3  1  0  0

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("event log: bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_event_log(std::ostream& os, const EventLog& log) {
  const LogMeta& m = log.meta;
  os << "#lobkit-eventlog v1 seed=" << m.seed << " model=" << m.model_id << " q1=" << m.initial.q1
     << " q2=" << m.initial.q2 << " spread=" << m.initial.spread
     << " t0=" << detail::format_double(m.t0) << " horizon=" << detail::format_double(m.horizon)
     << " tick=" << detail::format_double(m.tick_size)
     << " unit_per_aes=" << detail::format_double(m.unit_per_aes) << "\n";
  os << "time\tagent\tside\tdir\tlevel\tsize\tq1_post\tq2_post\tspread_post\tepsilon\teta\n";
  for (const EventRecord& r : log.records) {
    os << detail::format_double(r.t) << '\t' << r.agent << '\t' << side_index(r.side) << '\t'
       << (r.dir == Direction::Provide ? "+1" : "-1") << '\t' << r.level << '\t' << r.size << '\t'
       << r.post.q1 << '\t' << r.post.q2 << '\t' << r.post.spread << '\t' << (r.depleted ? 1 : 0)
       << '\t' << r.price_move << '\n';
  }
}

inline void write_event_log(const std::string& path, const EventLog& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_event_log(os, log);
}

inline EventLog read_event_log(std::istream& is) {
  EventLog log;
  std::string line;
  if (!std::getline(is, line) || line.rfind("#lobkit-eventlog v1", 0) != 0)
    throw std::invalid_argument("event log: missing or unsupported header");

  std::istringstream head(line.substr(std::strlen("#lobkit-eventlog v1")));
  std::string tok;
  while (head >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("event log: bad header field " + tok);
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "seed") log.meta.seed = std::stoull(val);
    else if (key == "model") log.meta.model_id = val;
    else if (key == "q1") log.meta.initial.q1 = std::stoi(val);
    else if (key == "q2") log.meta.initial.q2 = std::stoi(val);
    else if (key == "spread") log.meta.initial.spread = std::stoi(val);
    else if (key == "t0") log.meta.t0 = detail::parse_double(val);
    else if (key == "horizon") log.meta.horizon = detail::parse_double(val);
    else if (key == "tick") log.meta.tick_size = detail::parse_double(val);
    else if (key == "unit_per_aes") log.meta.unit_per_aes = detail::parse_double(val);
    else throw std::invalid_argument("event log: unknown header field " + key);
  }

  if (!std::getline(is, line) || line.rfind("time\t", 0) != 0)
    throw std::invalid_argument("event log: missing column row");

  long line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[11];
    for (int i = 0; i < 11; ++i)
      if (!std::getline(ls, f[i], '\t'))
        throw std::invalid_argument("event log: truncated record at line " +
                                    std::to_string(line_no));
    EventRecord r;
    r.t = detail::parse_double(f[0]);
    r.agent = std::stoi(f[1]);
    const int side = std::stoi(f[2]);
    if (side != 1 && side != 2)
      throw std::invalid_argument("event log: bad side at line " + std::to_string(line_no));
    r.side = side == 1 ? Side::Bid : Side::Ask;
    const int dir = std::stoi(f[3]);
    if (dir != 1 && dir != -1)
      throw std::invalid_argument("event log: bad direction at line " + std::to_string(line_no));
    r.dir = dir == 1 ? Direction::Provide : Direction::Consume;
    r.level = std::stoi(f[4]);
    r.size = std::stoi(f[5]);
    r.post = {std::stoi(f[6]), std::stoi(f[7]), std::stoi(f[8])};
    r.depleted = std::stoi(f[9]) != 0;
    r.price_move = std::stoi(f[10]);
    if (!log.records.empty() && !(r.t > log.records.back().t))
      throw std::invalid_argument("event log: timestamps not strictly increasing at line " +
                                  std::to_string(line_no));
    log.records.push_back(r);
  }
  return log;
}

inline EventLog read_event_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_event_log(is);
}

}  // namespace lobkit
