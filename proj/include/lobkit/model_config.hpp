#pragma once

#include <json.hpp>
#include <string>

#include "lobkit/estimate.hpp"
#include "lobkit/intensity.hpp"
#include "lobkit/simulate.hpp"

namespace lobkit {

// JSON schemas (versioned by the "schema" field):
//
//   lobkit-model/1     an intensity model: family, classes with rate tables,
//                      kernel, replenishment law. {"builtin": "default-qr"}
//                      loads the shipped symmetric queue-reactive market.
//   lobkit-sim/1       a simulation run: model + initial state + horizon +
//                      seed and caps.
//   lobkit-pipeline/1  an estimation run: state map, scope filters, lag depth
//                      and ranking switches.

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void expect_schema(const json& j, const std::string& want) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  const std::string got = j.value("schema", want);  // schema field is optional
  if (got != want) throw ConfigError("config: expected schema '" + want + "', got '" + got + "'");
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad field '" + key + "': " + e.what());
  }
}

inline Side side_from(const std::string& s) {
  if (s == "bid") return Side::Bid;
  if (s == "ask") return Side::Ask;
  throw ConfigError("config: side must be 'bid' or 'ask', got '" + s + "'");
}

inline EventKind kind_from(const std::string& s) {
  if (s == "insert") return EventKind::InsertBest;
  if (s == "consume") return EventKind::Consume;
  if (s == "insert_spread") return EventKind::InsertSpread;
  throw ConfigError("config: kind must be insert|consume|insert_spread, got '" + s + "'");
}

inline Family family_from(const std::string& s) {
  if (s == "poisson") return Family::Poisson;
  if (s == "queue-reactive") return Family::QueueReactive;
  if (s == "hawkes-qr") return Family::HawkesQueueReactive;
  if (s == "quadratic") return Family::QuadraticHawkes;
  throw ConfigError("config: unknown family '" + s + "'");
}

inline RateTable rate_table_from(const json& j) {
  const std::string type = require<std::string>(j, "type");
  if (type == "constant") return RateTable::fixed(require<double>(j, "value"));
  if (type == "by_queue") return RateTable::by_queue(require<std::vector<double>>(j, "values"));
  if (type == "by_spread") return RateTable::by_spread(require<std::vector<double>>(j, "values"));
  throw ConfigError("config: rate type must be constant|by_queue|by_spread");
}

inline BookState book_state_from(const json& j) {
  return {require<int>(j, "q1"), require<int>(j, "q2"), require<int>(j, "spread")};
}

}  // namespace detail

inline IntensityModel model_from_json(const json& j) {
  if (j.contains("builtin")) {
    const std::string name = j.at("builtin").get<std::string>();
    if (name == "default-qr")
      return default_queue_reactive_model(j.value("agents", 2));
    throw ConfigError("config: unknown builtin model '" + name + "'");
  }
  detail::expect_schema(j, "lobkit-model/1");
  IntensityModel m;
  m.id = j.value("id", "model");
  m.family = detail::family_from(detail::require<std::string>(j, "family"));
  m.n_agents = detail::require<int>(j, "agents");
  for (const json& cj : detail::require<json>(j, "classes")) {
    EventClass cls;
    cls.kind = detail::kind_from(detail::require<std::string>(cj, "kind"));
    cls.side = detail::side_from(detail::require<std::string>(cj, "side"));
    cls.agent = cj.value("agent", 1);
    cls.size = cj.value("size", 1);
    cls.improve = cj.value("improve", 1);
    m.classes.push_back(cls);
    m.base.push_back(detail::rate_table_from(detail::require<json>(cj, "rate")));
  }
  if (j.contains("kernel")) {
    const json& kj = j.at("kernel");
    const std::string type = detail::require<std::string>(kj, "type");
    if (type == "exponential") {
      ExponentialKernel k;
      k.beta = detail::require<double>(kj, "beta");
      k.alpha = detail::require<std::vector<std::vector<double>>>(kj, "alpha");
      m.kernel = std::move(k);
    } else if (type != "none") {
      throw ConfigError("config: kernel type must be none|exponential");
    }
  }
  if (j.contains("replenishment")) {
    const json& rj = j.at("replenishment");
    const std::string type = detail::require<std::string>(rj, "type");
    if (type == "categorical") {
      m.replenishment.kind = ReplenishmentSpec::Kind::Categorical;
      m.replenishment.categorical.clear();
      for (const json& sj : detail::require<json>(rj, "states"))
        m.replenishment.categorical.push_back(
            {detail::book_state_from(sj), detail::require<double>(sj, "weight")});
    } else if (type == "side_reset") {
      m.replenishment.kind = ReplenishmentSpec::Kind::DepletedSideReset;
      m.replenishment.side_reset.clear();
      for (const json& sj : detail::require<json>(rj, "values"))
        m.replenishment.side_reset.push_back(
            {detail::require<int>(sj, "queue"), detail::require<double>(sj, "weight")});
    } else if (type == "empirical") {
      m.replenishment.kind = ReplenishmentSpec::Kind::EmpiricalResample;
    } else {
      throw ConfigError("config: replenishment type must be categorical|side_reset|empirical");
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: invalid model: ") + e.what());
  }
  return m;
}

inline SimConfig sim_config_from_json(const json& j) {
  detail::expect_schema(j, "lobkit-sim/1");
  SimConfig cfg;
  cfg.model = model_from_json(detail::require<json>(j, "model"));
  if (j.contains("initial")) cfg.initial = detail::book_state_from(j.at("initial"));
  if (j.contains("horizon_time")) cfg.horizon_time = j.at("horizon_time").get<double>();
  if (j.contains("max_events")) cfg.max_events = j.at("max_events").get<long>();
  cfg.seed = j.value("seed", 1ull);
  cfg.rate_cap = j.value("rate_cap", 1e7);
  cfg.tick_size = j.value("tick_size", 1.0);
  cfg.unit_per_aes = j.value("unit_per_aes", 1.0);
  if (!cfg.initial.observable()) throw ConfigError("config: initial state must be observable");
  if (!(cfg.horizon_time > 0.0) && cfg.max_events == std::numeric_limits<long>::max())
    throw ConfigError("config: need horizon_time or max_events");
  return cfg;
}

struct PipelineConfig {
  StateMapSpec map;
  IngestionConfig scope;
  int k = 10;
  bool rank = true;
  bool imbalance = true;          // full-book chains only
  std::vector<int> rank_agents;   // empty: all observed agents
  std::string input_kind = "eventlog";  // or "market_csv"
  double tick_size = 1.0;
  int ci_lags = 50;
  bool compute_ci = true;
};

inline PipelineConfig pipeline_config_from_json(const json& j) {
  detail::expect_schema(j, "lobkit-pipeline/1");
  PipelineConfig cfg;
  if (j.contains("state_map")) {
    const json& mj = j.at("state_map");
    const std::string kind = mj.value("kind", "pooled_queue");
    if (kind == "full_book") cfg.map.kind = StateMapKind::FullBook;
    else if (kind == "bid_queue") cfg.map.kind = StateMapKind::BidQueue;
    else if (kind == "ask_queue") cfg.map.kind = StateMapKind::AskQueue;
    else if (kind == "pooled_queue") cfg.map.kind = StateMapKind::PooledQueue;
    else throw ConfigError("config: state_map.kind must be full_book|bid_queue|ask_queue|pooled_queue");
    cfg.map.q_cap = mj.value("q_cap", 30);
    cfg.map.s_cap = mj.value("s_cap", 5);
  } else {
    cfg.map.kind = StateMapKind::PooledQueue;
  }
  if (j.contains("scope")) {
    const json& sj = j.at("scope");
    cfg.scope.spread_filter = sj.value("spread_filter", 1);
    cfg.scope.session_begin = sj.value("session_begin", -std::numeric_limits<double>::infinity());
    cfg.scope.session_end = sj.value("session_end", std::numeric_limits<double>::infinity());
    cfg.scope.session_open_tod = sj.value("session_open_tod", -1.0);
    cfg.scope.session_close_tod = sj.value("session_close_tod", -1.0);
    cfg.scope.trim_hours = sj.value("trim_hours", 1.0);
    cfg.scope.fixed_aes = sj.value("fixed_aes", 0.0);
    cfg.scope.units_per_aes = sj.value("units_per_aes", 1);
  }
  cfg.k = j.value("k", 10);
  cfg.rank = j.value("rank", true);
  cfg.imbalance = j.value("imbalance", true);
  if (j.contains("agents")) cfg.rank_agents = j.at("agents").get<std::vector<int>>();
  cfg.input_kind = j.value("input_kind", std::string("eventlog"));
  if (cfg.input_kind != "eventlog" && cfg.input_kind != "market_csv")
    throw ConfigError("config: input_kind must be eventlog|market_csv");
  cfg.tick_size = j.value("tick_size", 1.0);
  cfg.ci_lags = j.value("ci_lags", 50);
  cfg.compute_ci = j.value("compute_ci", true);
  if (cfg.k < 0) throw ConfigError("config: k must be >= 0");
  return cfg;
}

inline json model_to_json(const IntensityModel& m) {
  json j;
  j["schema"] = "lobkit-model/1";
  j["id"] = m.id;
  j["family"] = family_name(m.family);
  j["agents"] = m.n_agents;
  json classes = json::array();
  for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
    const EventClass& c = m.classes[ci];
    json cj;
    cj["kind"] = c.kind == EventKind::InsertBest
                     ? "insert"
                     : (c.kind == EventKind::Consume ? "consume" : "insert_spread");
    cj["side"] = c.side == Side::Bid ? "bid" : "ask";
    cj["agent"] = c.agent;
    cj["size"] = c.size;
    if (c.kind == EventKind::InsertSpread) cj["improve"] = c.improve;
    const RateTable& t = m.base[ci];
    if (t.kind == RateTable::Kind::Constant)
      cj["rate"] = {{"type", "constant"}, {"value", t.constant}};
    else if (t.kind == RateTable::Kind::ByOwnQueue)
      cj["rate"] = {{"type", "by_queue"}, {"values", t.values}};
    else
      cj["rate"] = {{"type", "by_spread"}, {"values", t.values}};
    classes.push_back(cj);
  }
  j["classes"] = classes;
  if (const auto* k = std::get_if<ExponentialKernel>(&m.kernel))
    j["kernel"] = {{"type", "exponential"}, {"beta", k->beta}, {"alpha", k->alpha}};
  else
    j["kernel"] = {{"type", "none"}};
  if (m.replenishment.kind == ReplenishmentSpec::Kind::Categorical) {
    json states = json::array();
    for (const auto& [u, w] : m.replenishment.categorical)
      states.push_back({{"q1", u.q1}, {"q2", u.q2}, {"spread", u.spread}, {"weight", w}});
    j["replenishment"] = {{"type", "categorical"}, {"states", states}};
  } else if (m.replenishment.kind == ReplenishmentSpec::Kind::DepletedSideReset) {
    json values = json::array();
    for (const auto& [q, w] : m.replenishment.side_reset)
      values.push_back({{"queue", q}, {"weight", w}});
    j["replenishment"] = {{"type", "side_reset"}, {"values", values}};
  } else {
    j["replenishment"] = {{"type", "empirical"}};
  }
  return j;
}

}  // namespace lobkit
