#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "lobkit/event_log_io.hpp"
#include "lobkit/simulate.hpp"

using namespace lobkit;
using Catch::Approx;

namespace {

// A pure point-process model: one insertion class per side at a constant
// rate, so the total event stream is homogeneous Poisson.
IntensityModel poisson_market(double rate_per_side) {
  IntensityModel m;
  m.family = Family::Poisson;
  m.n_agents = 1;
  m.id = "poisson";
  for (Side side : {Side::Bid, Side::Ask}) {
    m.classes.push_back({EventKind::InsertBest, side, 1, 1, 1});
    m.base.push_back(RateTable::fixed(rate_per_side));
  }
  m.replenishment.categorical = {{{1, 1, 1}, 1.0}};
  return m;
}

// Constant birth--death per side with independent queues: each depletion
// refills only its own side, so the queue marginals are autonomous ladders.
IntensityModel birth_death_market(double up, double down) {
  IntensityModel m;
  m.family = Family::QueueReactive;
  m.n_agents = 1;
  m.id = "bd";
  for (Side side : {Side::Bid, Side::Ask}) {
    m.classes.push_back({EventKind::InsertBest, side, 1, 1, 1});
    m.base.push_back(RateTable::fixed(up));
    m.classes.push_back({EventKind::Consume, side, 1, 1, 1});
    m.base.push_back(RateTable::fixed(down));
  }
  m.replenishment.kind = ReplenishmentSpec::Kind::DepletedSideReset;
  m.replenishment.side_reset = {{1, 1.0}};
  return m;
}

}  // namespace

TEST_CASE("seed determinism", "[sim]") {
  SimConfig cfg;
  cfg.model = default_queue_reactive_model(2);
  cfg.horizon_time = 50.0;
  cfg.seed = 99;
  const auto a = simulate(cfg);
  const auto b = simulate(cfg);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.records == b.records);
  cfg.seed = 100;
  const auto c = simulate(cfg);
  CHECK(a.records != c.records);
}

TEST_CASE("zero model yields an empty log", "[sim]") {
  SimConfig cfg;
  cfg.model = poisson_market(0.0);
  cfg.horizon_time = 10.0;
  const auto log = simulate(cfg);
  CHECK(log.records.empty());
  CHECK(log.meta.horizon == 10.0);
}

TEST_CASE("homogeneous poisson subcase is exact", "[sim]") {
  SimConfig cfg;
  cfg.model = poisson_market(1.0);  // total rate 2.0
  cfg.horizon_time = 1000.0;
  cfg.seed = 12345;
  const auto log = simulate(cfg);

  // Inter-arrivals against Exp(2) at the 1% level.
  std::vector<double> u;
  double prev = 0.0;
  for (const auto& r : log.records) {
    u.push_back(-std::expm1(-2.0 * (r.t - prev)));
    prev = r.t;
  }
  const double ks = ks_statistic_uniform(u);
  CHECK(ks < ks_critical(u.size(), 0.01));

  // Total count within 4 sigma of 2000.
  const double n = static_cast<double>(log.records.size());
  CHECK(std::abs(n - 2000.0) < 4.0 * std::sqrt(2000.0));
}

TEST_CASE("book trajectory is reproducible from the log", "[sim][property]") {
  SimConfig cfg;
  cfg.model = default_queue_reactive_model(3);
  cfg.horizon_time = 200.0;
  cfg.seed = 7;
  const auto log = simulate(cfg);
  REQUIRE(log.records.size() > 100);

  BookState u = log.meta.initial;
  long price = 0;
  double prev_t = log.meta.t0;
  for (const auto& r : log.records) {
    CHECK(r.t > prev_t);
    const auto tr = apply_event(u, record_to_input(r));
    CHECK(tr.post == r.post);
    CHECK(tr.depleted == r.depleted);
    CHECK(tr.price_move == r.price_move);
    CHECK(r.post.observable());
    price += r.price_move;
    u = r.post;
    prev_t = r.t;
  }
  (void)price;
}

TEST_CASE("queue histogram of the constant birth-death market is geometric", "[sim]") {
  SimConfig cfg;
  cfg.model = birth_death_market(1.0, 2.0);
  cfg.initial = {10, 10, 1};
  cfg.max_events = 120000;
  cfg.horizon_time = 1e9;
  cfg.seed = 31;
  const auto log = simulate(cfg);
  REQUIRE(static_cast<long>(log.records.size()) == cfg.max_events);

  // Time-weighted occupation of the bid queue.
  std::map<int, double> occ;
  BookState u = log.meta.initial;
  double prev = 0.0;
  for (const auto& r : log.records) {
    occ[u.q1] += r.t - prev;
    prev = r.t;
    u = r.post;
  }
  // Detailed balance forces pi(q+1)/pi(q) = 1/2 for q >= 1 whatever the
  // depletion boundary does.
  for (int q = 1; q <= 5; ++q) {
    const double ratio = occ[q + 1] / occ[q];
    CHECK(ratio == Approx(0.5).margin(0.05));
  }
}

TEST_CASE("hawkes feedback reaches the expected stationary rate", "[sim]") {
  IntensityModel m = poisson_market(0.5);  // base totals 1.0
  m.family = Family::HawkesQueueReactive;
  m.id = "hawkes";
  m.kernel = ExponentialKernel{{{0.25, 0.25}, {0.25, 0.25}}, 1.0};  // branching 0.5

  SimConfig cfg;
  cfg.model = m;
  cfg.horizon_time = 2000.0;
  cfg.seed = 5;
  const auto log = simulate(cfg);
  // Stationary rate h / (1 - branching) = 2.0; Hawkes counts are
  // overdispersed by (1-a)^-3, sd ~ 126 here. Allow 5 sigma.
  const double n = static_cast<double>(log.records.size());
  CHECK(std::abs(n - 4000.0) < 5.0 * std::sqrt(2000.0 * 8.0));
}

TEST_CASE("rate explosion aborts with a diagnostic", "[sim]") {
  IntensityModel m = poisson_market(1.0);
  m.family = Family::HawkesQueueReactive;
  m.kernel = ExponentialKernel{{{2.0, 2.0}, {2.0, 2.0}}, 0.5};  // branching 8: supercritical
  SimConfig cfg;
  cfg.model = m;
  cfg.horizon_time = 1e4;
  cfg.rate_cap = 1e4;
  cfg.seed = 3;
  CHECK_THROWS_AS(simulate(cfg), SimulationError);
}

TEST_CASE("empirical replenishment resamples visited states", "[sim]") {
  IntensityModel m = birth_death_market(0.8, 1.6);
  m.replenishment.kind = ReplenishmentSpec::Kind::EmpiricalResample;
  SimConfig cfg;
  cfg.model = m;
  cfg.initial = {3, 3, 2};
  cfg.max_events = 20000;
  cfg.horizon_time = 1e9;
  cfg.seed = 61;
  const auto log = simulate(cfg);
  REQUIRE(static_cast<long>(log.records.size()) == cfg.max_events);
  long depletions = 0;
  for (const auto& r : log.records) {
    CHECK(r.post.observable());
    if (r.depleted) ++depletions;
  }
  CHECK(depletions > 100);
  // Deterministic under the seed, like every other mode.
  CHECK(simulate(cfg).records == log.records);
}

TEST_CASE("user kernels run with head room and detect violations", "[sim]") {
  // Delayed excitation peaks one second after each event, so the intensity
  // can rise between events; thinning is only exact with head room.
  IntensityModel m = poisson_market(0.4);
  m.family = Family::HawkesQueueReactive;
  m.id = "delayed";
  UserKernel uk;
  uk.phi = [](std::size_t, std::size_t, double s) { return 0.35 * s * std::exp(-s); };
  uk.headroom = 4.0;
  m.kernel = uk;

  SimConfig cfg;
  cfg.model = m;
  cfg.horizon_time = 300.0;
  cfg.seed = 303;
  const auto log = simulate(cfg);
  CHECK(log.records.size() > 100);

  // Replaying under the same model integrates the kernel numerically.
  const auto diag = replay(log, m);
  CHECK(diag.mean_increment == Approx(1.0).margin(0.1));
  CHECK_FALSE(diag.rejected);

  // Without head room the rising intensity trips the exactness guard.
  IntensityModel tight = m;
  std::get<UserKernel>(tight.kernel).headroom = 1.0;
  SimConfig bad = cfg;
  bad.model = tight;
  CHECK_THROWS_AS(simulate(bad), SimulationError);
}

TEST_CASE("replay under the generating model passes the residual test", "[sim]") {
  SimConfig cfg;
  cfg.model = default_queue_reactive_model(2);
  cfg.horizon_time = 2000.0;
  cfg.seed = 11;
  const auto log = simulate(cfg);
  REQUIRE(log.records.size() > 2000);

  const auto diag = replay(log, cfg.model);
  CHECK(diag.n == log.records.size());
  CHECK(diag.mean_increment == Approx(1.0).margin(0.05));
  CHECK_FALSE(diag.rejected);

  SECTION("a doubled-rate model doubles the mean compensator") {
    IntensityModel twice = cfg.model;
    for (auto& t : twice.base) {
      t.constant *= 2.0;
      for (double& v : t.values) v *= 2.0;
    }
    const auto d2 = replay(log, twice);
    CHECK(d2.mean_increment == Approx(2.0).margin(0.1));
    CHECK(d2.rejected);
  }
  SECTION("empty log gives empty diagnostics") {
    EventLog empty;
    empty.meta = log.meta;
    const auto d = replay(empty, cfg.model);
    CHECK(d.n == 0);
    CHECK_FALSE(d.rejected);
  }
  SECTION("class mismatch is rejected") {
    const auto one_agent = default_queue_reactive_model(1);
    CHECK_THROWS_AS(replay(log, one_agent), std::invalid_argument);
  }
}

TEST_CASE("hawkes replay residuals line up too", "[sim]") {
  IntensityModel m = poisson_market(0.5);
  m.family = Family::HawkesQueueReactive;
  m.id = "hawkes";
  m.kernel = ExponentialKernel{{{0.2, 0.1}, {0.1, 0.2}}, 1.3};
  SimConfig cfg;
  cfg.model = m;
  cfg.horizon_time = 1500.0;
  cfg.seed = 17;
  const auto log = simulate(cfg);
  const auto diag = replay(log, m);
  CHECK(diag.mean_increment == Approx(1.0).margin(0.05));
  CHECK_FALSE(diag.rejected);
}

TEST_CASE("event log round trip", "[sim][io]") {
  SimConfig cfg;
  cfg.model = default_queue_reactive_model(2);
  cfg.horizon_time = 100.0;
  cfg.seed = 23;
  cfg.tick_size = 0.005;
  const auto log = simulate(cfg);

  std::ostringstream first;
  write_event_log(first, log);
  std::istringstream in(first.str());
  const auto back = read_event_log(in);
  CHECK(back.meta == log.meta);
  REQUIRE(back.records.size() == log.records.size());
  CHECK(back.records == log.records);

  // Write -> read -> write is byte identical.
  std::ostringstream second;
  write_event_log(second, back);
  CHECK(first.str() == second.str());
}

TEST_CASE("event log rejects malformed input", "[sim][io]") {
  std::istringstream no_header("time\tagent\n");
  CHECK_THROWS_AS(read_event_log(no_header), std::invalid_argument);

  std::istringstream bad_time(
      "#lobkit-eventlog v1 seed=1 model=m q1=1 q2=1 spread=1 t0=0 horizon=1 tick=1 "
      "unit_per_aes=1\n"
      "time\tagent\tside\tdir\tlevel\tsize\tq1_post\tq2_post\tspread_post\tepsilon\teta\n"
      "1.0\t1\t1\t+1\t0\t1\t2\t1\t1\t0\t0\n"
      "0.5\t1\t1\t+1\t0\t1\t3\t1\t1\t0\t0\n");
  CHECK_THROWS_AS(read_event_log(bad_time), std::invalid_argument);
}
