#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lobkit/generator.hpp"
#include "lobkit/rng.hpp"
#include "lobkit/simulate.hpp"
#include "lobkit/stationary.hpp"

using namespace lobkit;
using Catch::Approx;

namespace {

// Independent reference: dense Gaussian elimination on Q^T with the
// normalisation appended, no shared code with the production solver.
std::vector<double> null_space_pi(const std::vector<std::vector<double>>& rates) {
  const std::size_t n = rates.size();
  // A x = b with A = [ones; (Q^T rows 1..n-1)]
  std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t j = 0; j < n; ++j) A[0][j] = 1.0;
  A[0][n] = 1.0;
  for (std::size_t r = 1; r < n; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i == r) continue;
      A[r][i] += rates[i][r];   // inflow from i
      A[r][r] -= rates[r][i];   // outflow of r
    }
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[col], A[piv]);
    REQUIRE(std::abs(A[col][col]) > 1e-14);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c <= n; ++c) A[r][c] -= f * A[col][c];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = A[i][n] / A[i][i];
  return pi;
}

TruncatedGenerator dense_to_generator(const std::vector<std::vector<double>>& rates) {
  TruncatedGenerator gen;
  gen.space.kind = ChainKind::SingleQueue;
  const int n = static_cast<int>(rates.size());
  for (int i = 0; i < n; ++i) gen.space.add(StateSpace::queue(i + 1));  // avoid marker at q=0
  gen.rows.resize(gen.space.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && rates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] > 0.0)
        gen.rows[static_cast<std::size_t>(i)].out.push_back(
            {j, rates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]});
  return gen;
}

}  // namespace

TEST_CASE("analytic stationary laws", "[steady]") {
  SECTION("constant-rate queue ladder has the geometric law including the empty state") {
    const int top = 50;
    std::vector<double> up(top, 1.0), down(top, 2.0);
    const auto gen = birth_death_generator(up, down);
    const auto sol = solve_stationary(gen);
    const double rho = 0.5;
    for (int q = 0; q <= top; ++q)
      CHECK(sol.pi_time[static_cast<std::size_t>(q)] ==
            Approx((1.0 - rho) * std::pow(rho, q)).margin(1e-10));
    CHECK(sol.residual < 1e-10);
  }
  SECTION("two symmetric states split the mass") {
    const auto gen = dense_to_generator({{0.0, 1.0}, {1.0, 0.0}});
    const auto sol = solve_stationary(gen);
    CHECK(sol.pi_time[0] == Approx(0.5).margin(1e-12));
    CHECK(sol.pi_time[1] == Approx(0.5).margin(1e-12));
  }
  SECTION("three-state cycle with equal rates is uniform") {
    const auto gen = dense_to_generator({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
    const auto sol = solve_stationary(gen);
    for (int i = 0; i < 3; ++i)
      CHECK(sol.pi_time[static_cast<std::size_t>(i)] == Approx(1.0 / 3.0).margin(1e-12));
  }
}

TEST_CASE("solver matches dense null-space elimination", "[steady][oracle]") {
  Rng rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 3 + (rng.next_u64() % 198);  // up to 200 states
    std::vector<std::vector<double>> rates(n, std::vector<double>(n, 0.0));
    // A ring keeps the chain irreducible; extra random edges densify it.
    for (std::size_t i = 0; i < n; ++i) rates[i][(i + 1) % n] = 0.5 + 1.5 * rng.next_unit();
    const std::size_t extras = 2 * n;
    for (std::size_t e = 0; e < extras; ++e) {
      const std::size_t i = rng.next_u64() % n, j = rng.next_u64() % n;
      if (i != j) rates[i][j] += 2.0 * rng.next_unit();
    }
    const auto expected = null_space_pi(rates);
    const auto sol = solve_stationary(dense_to_generator(rates));
    for (std::size_t i = 0; i < n; ++i)
      CHECK(sol.pi_time[i] == Approx(expected[i]).margin(1e-9));
  }
}

TEST_CASE("embedded chain rows", "[steady]") {
  SECTION("off-diagonal normalisation") {
    const auto gen = dense_to_generator({{0.0, 3.0}, {1.0, 0.0}});
    const auto P = embedded_chain(gen);
    REQUIRE(P.rows[0].size() == 1);
    CHECK(P.rows[0][0] == std::pair<int, double>{1, 1.0});
    CHECK(P.rows[1][0] == std::pair<int, double>{0, 1.0});
  }
  SECTION("a silent state keeps itself") {
    const auto gen = dense_to_generator({{0.0, 0.0}, {1.0, 0.0}});
    const auto P = embedded_chain(gen);
    REQUIRE(P.rows[0].size() == 1);
    CHECK(P.rows[0][0] == std::pair<int, double>{0, 1.0});
  }
  SECTION("interior birth-death state moves up with rate share") {
    const auto gen = birth_death_generator({1.0, 1.0, 1.0}, {2.0, 2.0, 2.0});
    const auto P = embedded_chain(gen);
    for (const auto& [v, p] : P.rows[1]) {
      if (v == 2) CHECK(p == Approx(1.0 / 3.0));
      if (v == 0) CHECK(p == Approx(2.0 / 3.0));
    }
  }
}

TEST_CASE("instantaneous marker states collapse exactly", "[steady]") {
  // A --2--> M (zero dwell) --0.5/0.5--> {A, B},  B --1--> A.
  TruncatedGenerator gen;
  gen.space.kind = ChainKind::FullBook;
  const int A = gen.space.add({1, 1, 1});
  const int B = gen.space.add({2, 1, 1});
  const int M = gen.space.add({0, 1, 1});
  gen.rows.resize(3);
  gen.rows[static_cast<std::size_t>(A)].out = {{M, 2.0}};
  gen.rows[static_cast<std::size_t>(B)].out = {{A, 1.0}};
  gen.rows[static_cast<std::size_t>(M)].instantaneous = true;
  gen.rows[static_cast<std::size_t>(M)].out = {{A, 0.5}, {B, 0.5}};

  const auto sol = solve_stationary(gen);
  // Collapsed: A -> B at rate 1, B -> A at rate 1.
  CHECK(sol.pi_time[static_cast<std::size_t>(A)] == Approx(0.5).margin(1e-12));
  CHECK(sol.pi_time[static_cast<std::size_t>(B)] == Approx(0.5).margin(1e-12));
  CHECK(sol.pi_time[static_cast<std::size_t>(M)] == 0.0);
  // Step frequencies: A fires at 1.0, B at 0.5, M receives 1.0.
  CHECK(sol.pi_event[static_cast<std::size_t>(A)] == Approx(0.4).margin(1e-12));
  CHECK(sol.pi_event[static_cast<std::size_t>(B)] == Approx(0.2).margin(1e-12));
  CHECK(sol.pi_event[static_cast<std::size_t>(M)] == Approx(0.4).margin(1e-12));
  CHECK(sol.mean_step_seconds == Approx(0.4).margin(1e-12));
}

TEST_CASE("reducibility handling", "[steady]") {
  SECTION("zero generator reports one closed class per state") {
    TruncatedGenerator gen;
    gen.space.kind = ChainKind::SingleQueue;
    gen.space.add(StateSpace::queue(1));
    gen.space.add(StateSpace::queue(2));
    gen.rows.resize(2);
    const auto sol = solve_stationary(gen);
    CHECK_FALSE(sol.irreducible);
    CHECK(sol.n_closed_classes == 2);
    CHECK_FALSE(sol.warnings.empty());
  }
  SECTION("transient feeder states get zero mass") {
    // 0 -> 1 <-> 2, nothing returns to 0.
    const auto gen = dense_to_generator({{0, 1, 0}, {0, 0, 1}, {0, 1, 0}});
    const auto sol = solve_stationary(gen);
    CHECK_FALSE(sol.irreducible);
    CHECK(sol.n_closed_classes == 1);
    CHECK(sol.pi_time[0] == 0.0);
    CHECK(sol.pi_time[1] == Approx(0.5));
    CHECK(sol.pi_time[2] == Approx(0.5));
  }
}

TEST_CASE("first-order volatility", "[steady]") {
  StateSpace sp;
  sp.kind = ChainKind::FullBook;
  sp.add({1, 1, 1});
  sp.add({0, 1, 1});  // bid marker
  sp.add({1, 0, 1});  // ask marker
  const auto eta = price_move_vector(sp);
  CHECK(eta == std::vector<double>{0.0, -1.0, 1.0});

  SECTION("two markers holding a percent each") {
    CHECK(volatility_G({0.98, 0.01, 0.01}, eta, sp) == Approx(0.02).margin(1e-15));
  }
  SECTION("no marker mass gives zero") {
    CHECK(volatility_G({1.0, 0.0, 0.0}, eta, sp) == 0.0);
  }
  SECTION("a chain without marker states is an error") {
    StateSpace obs;
    obs.kind = ChainKind::FullBook;
    obs.add({1, 1, 1});
    CHECK_THROWS_AS(volatility_G({1.0}, price_move_vector(obs), obs), std::invalid_argument);
  }
}

TEST_CASE("lag-corrected volatility", "[steady]") {
  // Alternating deterministic +1/-1 markers.
  StateSpace sp;
  sp.kind = ChainKind::FullBook;
  sp.add({0, 1, 1});
  sp.add({1, 0, 1});
  EmbeddedChain P;
  P.rows = {{{1, 1.0}}, {{0, 1.0}}};
  const std::vector<double> pi{0.5, 0.5};
  const auto eta = price_move_vector(sp);

  SECTION("k = 0 reduces to the first-order value") {
    const auto v = volatility_M(pi, P, eta, 0, sp);
    CHECK(v.value == Approx(volatility_G(pi, eta, sp)));
    CHECK_FALSE(v.negative);
  }
  SECTION("perfect alternation turns negative at k = 1 and is reported as-is") {
    const auto v = volatility_M(pi, P, eta, 1, sp);
    CHECK(v.value == Approx(-1.0).margin(1e-15));
    CHECK(v.negative);
  }
  SECTION("state-independent rows wipe the cross terms") {
    // Both rows jump to the two markers evenly: mean next move is zero.
    EmbeddedChain iid;
    iid.rows = {{{0, 0.5}, {1, 0.5}}, {{0, 0.5}, {1, 0.5}}};
    const auto v0 = volatility_G(pi, eta, sp);
    for (int k : {1, 2, 7}) {
      const auto v = volatility_M(pi, iid, eta, k, sp);
      CHECK(v.value == Approx(v0).margin(1e-14));
    }
  }
}

TEST_CASE("per-second rescaling", "[steady]") {
  CHECK(volatility_per_second(0.2, 0.5) == Approx(0.4));
  CHECK(volatility_per_second(0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(volatility_per_second(0.2, 0.0), std::invalid_argument);
}

TEST_CASE("expected spread", "[steady]") {
  StateSpace sp;
  sp.kind = ChainKind::FullBook;
  sp.add({1, 1, 1});
  sp.add({1, 1, 2});
  SECTION("point mass") { CHECK(expected_spread({1.0, 0.0}, sp) == Approx(1.0)); }
  SECTION("even split") { CHECK(expected_spread({0.5, 0.5}, sp) == Approx(1.5)); }
  SECTION("tick size scales the answer") {
    CHECK(expected_spread({0.5, 0.5}, sp, 0.005) == Approx(0.0075));
  }
}

TEST_CASE("imbalance increments and fluctuations", "[steady]") {
  SECTION("hand-built two-state insert/consume loop alternates perfectly") {
    StateSpace sp;
    sp.kind = ChainKind::FullBook;
    sp.add({1, 1, 1});
    sp.add({2, 1, 1});
    EmbeddedChain P;
    P.rows = {{{1, 1.0}}, {{0, 1.0}}};
    const std::vector<double> pi{0.5, 0.5};
    const auto v0 = imbalance_volatility(pi, P, sp, 0);
    CHECK(v0.value == Approx(1.0));
    const auto v1 = imbalance_volatility(pi, P, sp, 1);
    CHECK(v1.value == Approx(-1.0));
    CHECK(v1.negative);
  }
  SECTION("classification of single-order transitions") {
    StateSpace sp;
    sp.kind = ChainKind::FullBook;
    const int a = sp.add({2, 3, 2});
    const int bid_in = sp.add({3, 3, 2});
    const int ask_in = sp.add({2, 5, 2});
    const int ws_bid = sp.add({1, 3, 1});
    const int ws_ask = sp.add({2, 4, 1});
    const int marker = sp.add({0, 3, 2});
    CHECK(imbalance_increment(sp, a, bid_in) == 1.0);
    CHECK(imbalance_increment(sp, a, ask_in) == -2.0);
    CHECK(imbalance_increment(sp, a, ws_bid) == 1.0);    // fresh bid queue of 1
    CHECK(imbalance_increment(sp, a, ws_ask) == -4.0);   // fresh ask queue of 4
    CHECK(imbalance_increment(sp, a, marker) == -2.0);   // consumed the bid queue
    CHECK(imbalance_increment(sp, marker, a) == 0.0);    // replenishment is not flow
  }
  SECTION("zero-flow model") {
    StateSpace sp;
    sp.kind = ChainKind::FullBook;
    sp.add({1, 1, 1});
    EmbeddedChain P;
    P.rows = {{{0, 1.0}}};
    CHECK(imbalance_volatility({1.0}, P, sp, 3).value == 0.0);
  }
}

TEST_CASE("model generator and truncation diagnostics", "[steady]") {
  const auto m = default_queue_reactive_model(2);
  const auto gen30 = generator_from_model(m, 30, 3);
  const auto sol30 = solve_stationary(gen30);
  // The enumerated window holds states the dynamics never enter (the
  // replenishment law tops out at spread 2); they are transient, and the
  // recurrent part must be a single class.
  CHECK(sol30.n_closed_classes == 1);
  CHECK(sol30.residual < 1e-10);

  const auto eta30 = price_move_vector(gen30.space);
  const double s2g30 = volatility_G(sol30.pi_event, eta30, gen30.space);
  CHECK(s2g30 > 0.0);

  const auto gen50 = generator_from_model(m, 50, 3);
  const auto sol50 = solve_stationary(gen50);
  const double s2g50 =
      volatility_G(sol50.pi_event, price_move_vector(gen50.space), gen50.space);

  // Enlarging the window moves the answer by less than the boundary
  // diagnostic of the smaller window plus solver tolerance.
  const double bound = sol30.boundary_mass + 1e-8;
  CHECK(std::abs(s2g50 - s2g30) <= bound);

  // The spread never exceeds the replenishment support here, so the expected
  // spread sits within [1, 2].
  const double es = expected_spread(sol30.pi_time, gen30.space);
  CHECK(es > 1.0);
  CHECK(es < 2.0);
}

TEST_CASE("per-step volatility and imbalance match a long simulation", "[steady][integration]") {
  const auto m = default_queue_reactive_model(2);
  SimConfig cfg;
  cfg.model = m;
  cfg.max_events = 1000000;
  cfg.horizon_time = std::numeric_limits<double>::infinity();
  cfg.seed = 424243;
  const auto log = simulate(cfg);

  const auto gen = generator_from_model(m, 25, 3);
  const auto sol = solve_stationary(gen);
  const auto P = embedded_chain(gen);
  const auto eta = price_move_vector(gen.space);

  SECTION("first-order volatility equals the realised mean squared move") {
    const double predicted = volatility_G(sol.pi_event, eta, gen.space);
    double sum = 0.0;
    long steps = 0;
    for (const auto& r : log.records) {
      sum += static_cast<double>(r.price_move) * r.price_move;
      steps += r.depleted ? 2 : 1;  // marker plus resolution
    }
    const double realised = sum / static_cast<double>(steps);
    CHECK(realised == Approx(predicted).epsilon(0.05));
  }

  SECTION("imbalance fluctuation matches the realised slope") {
    const int k = 400;
    const auto predicted = imbalance_volatility(sol.pi_event, P, gen.space, k);
    // Realised: variance of cumulative imbalance increments over windows of
    // W steps, divided by W.
    const int W = 500;
    std::vector<double> increments;
    double acc = 0.0;
    int in_window = 0;
    for (const auto& r : log.records) {
      const double flow = r.dir == Direction::Provide
                              ? (r.side == Side::Bid ? r.size : -r.size)
                              : 0.0;
      double consumed = 0.0;
      if (r.dir == Direction::Consume) {
        // Consumed volume is the queue delta; on depletion the whole queue.
        consumed = r.size;  // unit-size classes never overshoot
        acc += r.side == Side::Bid ? -consumed : consumed;
      } else {
        acc += flow;
      }
      in_window += r.depleted ? 2 : 1;
      if (in_window >= W) {
        increments.push_back(acc);
        acc = 0.0;
        in_window = 0;
      }
    }
    const double realised = variance(increments) / W;
    CHECK(realised == Approx(predicted.value).epsilon(0.05));
  }

  SECTION("bid/ask exchange symmetry carries to the imbalance") {
    // Swap the sides of every class and of the replenishment support.
    IntensityModel swapped = m;
    for (auto& cls : swapped.classes)
      cls.side = cls.side == Side::Bid ? Side::Ask : Side::Bid;
    for (auto& [state, w] : swapped.replenishment.categorical) std::swap(state.q1, state.q2);
    const auto gen2 = generator_from_model(swapped, 25, 3);
    const auto sol2 = solve_stationary(gen2);
    const auto P2 = embedded_chain(gen2);
    for (const int lag : {0, 3, 10}) {
      const auto a = imbalance_volatility(sol.pi_event, P, gen.space, lag);
      const auto b = imbalance_volatility(sol2.pi_event, P2, gen2.space, lag);
      CHECK(a.value == Approx(b.value).margin(1e-10));
    }
  }
}

TEST_CASE("simulated occupation converges to the stationary law", "[steady][integration]") {
  const auto m = default_queue_reactive_model(2);
  SimConfig cfg;
  cfg.model = m;
  cfg.max_events = 1000000;
  cfg.horizon_time = std::numeric_limits<double>::infinity();
  cfg.seed = 2718;
  const auto log = simulate(cfg);

  const int q_cap = 25, s_cap = 3;
  const auto gen = generator_from_model(m, q_cap, s_cap);
  const auto sol = solve_stationary(gen);

  // Time-weighted empirical occupation over the same truncated window.
  std::vector<double> occ(gen.space.size(), 0.0);
  double outside = 0.0, total = 0.0;
  BookState u = log.meta.initial;
  double t_prev = 0.0;
  for (const auto& r : log.records) {
    const double dt = r.t - t_prev;
    const int z = gen.space.find({std::min(u.q1, q_cap), std::min(u.q2, q_cap),
                                  std::min(u.spread, s_cap)});
    if (u.q1 <= q_cap && u.q2 <= q_cap && u.spread <= s_cap && z >= 0)
      occ[static_cast<std::size_t>(z)] += dt;
    else
      outside += dt;
    total += dt;
    u = r.post;
    t_prev = r.t;
  }

  double tv = outside / total;
  for (std::size_t i = 0; i < gen.space.size(); ++i)
    tv += std::abs(occ[i] / total - sol.pi_time[i]);
  tv *= 0.5;
  CHECK(tv < 0.02);
}

TEST_CASE("boundary mass warning fires on a supercritical ladder", "[steady]") {
  std::vector<double> up(30, 2.0), down(30, 1.0);
  const auto sol = solve_stationary(birth_death_generator(up, down));
  CHECK(sol.boundary_mass > 0.1);
  CHECK_FALSE(sol.warnings.empty());
}
