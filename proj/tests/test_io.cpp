#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "lobkit/market_csv.hpp"
#include "lobkit/model_config.hpp"
#include "lobkit/report_io.hpp"

using namespace lobkit;
using Catch::Approx;

TEST_CASE("model config round trip", "[io][config]") {
  const auto m = default_queue_reactive_model(2);
  const auto j = model_to_json(m);
  const auto back = model_from_json(j);
  CHECK(back.family == m.family);
  CHECK(back.n_agents == m.n_agents);
  REQUIRE(back.n_classes() == m.n_classes());
  const BookState probe{3, 5, 2};
  for (std::size_t ci = 0; ci < m.n_classes(); ++ci) {
    CHECK(back.classes[ci] == m.classes[ci]);
    CHECK(back.base_rate(ci, probe) == m.base_rate(ci, probe));
  }
  CHECK(back.replenishment.categorical == m.replenishment.categorical);
}

TEST_CASE("config errors carry context", "[io][config]") {
  CHECK_THROWS_AS(model_from_json(nlohmann::json{{"builtin", "nope"}}), ConfigError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json{{"schema", "lobkit-model/1"},
                                                 {"family", "warp-drive"},
                                                 {"agents", 1},
                                                 {"classes", nlohmann::json::array()}}),
                  ConfigError);
  nlohmann::json sim{{"schema", "lobkit-sim/1"},
                     {"model", {{"builtin", "default-qr"}}},
                     {"initial", {{"q1", 0}, {"q2", 1}, {"spread", 1}}},
                     {"horizon_time", 10.0}};
  CHECK_THROWS_AS(sim_config_from_json(sim), ConfigError);

  nlohmann::json pipe{{"schema", "lobkit-pipeline/1"}, {"input_kind", "telepathy"}};
  CHECK_THROWS_AS(pipeline_config_from_json(pipe), ConfigError);
}

TEST_CASE("hawkes kernel survives the config round trip", "[io][config]") {
  IntensityModel m;
  m.family = Family::HawkesQueueReactive;
  m.n_agents = 1;
  m.classes = {{EventKind::InsertBest, Side::Bid, 1, 1, 1},
               {EventKind::Consume, Side::Bid, 1, 1, 1}};
  m.base = {RateTable::by_queue({0.0, 1.0, 0.8}), RateTable::fixed(0.5)};
  m.kernel = ExponentialKernel{{{0.1, 0.2}, {0.0, 0.3}}, 1.4};
  m.replenishment.kind = ReplenishmentSpec::Kind::DepletedSideReset;
  m.replenishment.side_reset = {{1, 0.7}, {2, 0.3}};
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.family == Family::HawkesQueueReactive);
  const auto& k = std::get<ExponentialKernel>(back.kernel);
  CHECK(k.beta == 1.4);
  CHECK(k.alpha[0][1] == 0.2);
  CHECK(back.replenishment.kind == ReplenishmentSpec::Kind::DepletedSideReset);
  CHECK(back.replenishment.side_reset == m.replenishment.side_reset);
}

TEST_CASE("raw market feed adapter", "[io][csv]") {
  // tick 0.05; fixed AES 100 for predictable units.
  const std::string csv =
      "timestamp,side,action,price,volume,member\n"
      "1.0,B,insert,99.95,300,1\n"    // establishes the bid at 1999 ticks
      "2.0,S,insert,100.05,200,2\n"   // establishes the ask; book starts here
      "3.0,B,insert,100.00,100,1\n"   // in-spread buy, improvement 1 tick
      "4.0,S,trade,100.05,150,3\n"    // partial consumption at the ask
      "5.0,S,trade,100.05,50,3\n"     // empties the ask: pending depletion
      "6.0,B,insert,99.90,50,1\n"     // behind the best bid: dropped
      "7.0,S,insert,100.10,400,2\n"   // re-establishes the ask: depletion resolves
      "8.0,B,cancel,100.00,100,\n"    // empties the bid, unattributed agent
      "9.0,B,insert,99.95,100,2\n"    // re-establishes the bid
      "10.0,X,insert,1,1,1\n"         // bad side: parse reject
      "8.5,B,insert,99.95,100,1\n";   // behind the clock: non-monotone reject
  std::istringstream is(csv);
  IngestionConfig cfg;
  cfg.fixed_aes = 100.0;
  const auto res = read_market_csv(is, 0.05, cfg);
  const auto& st = res.stats;

  CHECK(st.rows == 11);
  CHECK(st.rejected_parse == 1);
  CHECK(st.rejected_nonmonotone == 1);
  CHECK(st.dropped_deeper == 1);
  CHECK(st.events == 4);
  CHECK(st.depletions == 2);

  const auto& log = res.log;
  CHECK(log.meta.initial == BookState{3, 2, 2});
  CHECK(log.meta.t0 == 2.0);
  REQUIRE(log.records.size() == 4);

  // In-spread buy.
  CHECK(log.records[0].t == 3.0);
  CHECK(log.records[0].dir == Direction::Provide);
  CHECK(log.records[0].level == 1);
  CHECK(log.records[0].post == BookState{1, 2, 1});

  // Partial consumption at the ask.
  CHECK(log.records[1].dir == Direction::Consume);
  CHECK(log.records[1].size == 2);  // ceil(150 / 100)
  CHECK(log.records[1].post == BookState{1, 1, 1});

  // Ask depletion, resolved by the 100.10 insertion: price up one tick.
  CHECK(log.records[2].t == 5.0);
  CHECK(log.records[2].side == Side::Ask);
  CHECK(log.records[2].depleted);
  CHECK(log.records[2].price_move == 1);
  CHECK(log.records[2].post == BookState{1, 4, 2});

  // Bid depletion by the unattributed cancel: price down.
  CHECK(log.records[3].t == 8.0);
  CHECK(log.records[3].agent == kUnattributedAgent);
  CHECK(log.records[3].depleted);
  CHECK(log.records[3].price_move == -1);
  CHECK(log.records[3].post == BookState{1, 4, 3});
}

TEST_CASE("per-day AES normalisation", "[io][csv]") {
  // Two days; day-0 events average 100 shares, day-1 events 200 shares.
  std::ostringstream csv;
  csv << "timestamp,side,action,price,volume,member\n";
  csv << "10,B,insert,9.9,100,1\n10.5,S,insert,10.1,100,1\n";
  csv << "11,B,insert,9.9,100,1\n";
  const double day1 = 86400.0;
  csv << day1 + 10 << ",B,insert,9.9,200,1\n" << day1 + 11 << ",S,insert,10.1,200,1\n";
  csv << day1 + 12 << ",B,insert,9.9,300,1\n";
  std::istringstream is(csv.str());
  const auto res = read_market_csv(is, 0.1, {});
  CHECK(res.aes.at({0, 1}) == Approx(100.0));
  CHECK(res.aes.at({1, 1}) == Approx(250.0));
  // Day-1 300-share insert: ceil(300/250) = 2 units.
  REQUIRE_FALSE(res.log.records.empty());
  CHECK(res.log.records.back().size == 2);
}

TEST_CASE("intensity table is sorted and carries per-second rates", "[io][report]") {
  GeneratorEstimate est;
  est.map.kind = StateMapKind::PooledQueue;
  est.space.kind = ChainKind::SingleQueue;
  for (int q = 0; q <= 3; ++q) est.space.add(StateSpace::queue(q));
  est.occupation = {0.0, 10.0, 5.0, 2.0};
  est.departures = {2, 0, 0, 0};
  est.cells[{1, 2}].count = 20;  // 2 inserts/s at q=1
  est.cells[{2, 3}].count = 5;
  est.cells[{2, 1}].count = 10;  // 2 consumes/s at q=2
  est.cells[{1, 0}].count = 5;
  std::ostringstream os;
  write_intensity_csv(os, est);
  CHECK(os.str() ==
        "queue_aes,insert_per_second,consume_per_second,occupation_seconds\n"
        "1,2,0.5,10\n"
        "2,1,2,5\n"
        "3,0,0,2\n");
}

TEST_CASE("ranking table renders one row per market maker", "[io][report]") {
  RankingReport rep;
  rep.asset = "SYNTH";
  rep.baseline_m = 0.1;
  for (int a = 1; a <= 9; ++a) {
    AgentOutcome row;
    row.agent = a;
    row.rank = a;
    row.event_share = 0.01 * a;
    row.sigma2_m_cf = 0.1 + 0.01 * (10 - a);
    row.delta_m = row.sigma2_m_cf - rep.baseline_m;
    row.stars = row.delta_m > 0 ? 1 : 0;
    rep.rows.push_back(row);
  }
  std::ostringstream os;
  ranking_table(os, {rep});
  std::istringstream lines(os.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line))
    if (line.rfind("MM", 0) == 0) ++count;
  CHECK(count == 9);
  CHECK(os.str().find("MM1*") != std::string::npos);

  std::ostringstream csv;
  ranking_to_csv(csv, rep);
  CHECK(csv.str().find("agent,rank,market_share_pct,volume_share_pct,sigma2G_cf,sigma2Mk_cf,"
                       "delta,stars") == 0);
}
