#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <vector>

#include "lobkit/book.hpp"

using namespace lobkit;

namespace {

// Independent reference implementation: an explicit price-grid book. The two
// best limits are tracked at absolute tick prices (bid at 0, ask at `spread`
// initially), and events are executed by their market meaning rather than via
// the indicator algebra used by apply_event.
struct GridOutcome {
  BookState post;
  bool depleted = false;
  int eta = 0;
};

std::optional<GridOutcome> grid_book_apply(const BookState& u, const EventInput& e) {
  if (!u.observable() || e.size < 1 || e.level < 0) return std::nullopt;
  long bid_px = 0, ask_px = u.spread;
  int bid_q = u.q1, ask_q = u.q2;
  const long px = e.level;

  if (e.dir == Direction::Provide) {
    if (e.side == Side::Bid) {
      if (px >= ask_px) return std::nullopt;  // marketable, not a limit insertion
      if (px == bid_px) {
        bid_q += e.size;
      } else {
        bid_px = px;
        bid_q = e.size;  // fresh queue at the improved price
      }
    } else {
      if (px <= bid_px || px > ask_px) return std::nullopt;  // marketable or behind the best
      if (px == ask_px) {
        ask_q += e.size;
      } else {
        ask_px = px;
        ask_q = e.size;
      }
    }
    return GridOutcome{{bid_q, ask_q, static_cast<int>(ask_px - bid_px)}, false, 0};
  }

  // Consumption must hit a populated best limit.
  if (e.side == Side::Bid) {
    if (px != bid_px) return std::nullopt;
    bid_q -= e.size;
    if (bid_q > 0) return GridOutcome{{bid_q, ask_q, static_cast<int>(ask_px - bid_px)}, false, 0};
    return GridOutcome{e.replenish, true, -1};
  }
  if (px != ask_px) return std::nullopt;
  ask_q -= e.size;
  if (ask_q > 0) return GridOutcome{{bid_q, ask_q, static_cast<int>(ask_px - bid_px)}, false, 0};
  return GridOutcome{e.replenish, true, +1};
}

}  // namespace

TEST_CASE("worked transition examples", "[book]") {
  SECTION("in-spread buy narrows the spread and replaces the bid queue") {
    const auto tr = apply_event({4, 12, 2}, {.size = 2, .level = 1, .dir = Direction::Provide,
                                             .side = Side::Bid, .agent = 5});
    CHECK(tr.post == BookState{2, 12, 1});
    CHECK_FALSE(tr.depleted);
    CHECK(tr.price_move == 0);
  }
  SECTION("insertion at the best bid is a plain increment") {
    const auto tr = apply_event({5, 5, 1}, {.size = 3, .level = 0, .dir = Direction::Provide,
                                            .side = Side::Bid});
    CHECK(tr.post == BookState{8, 5, 1});
    CHECK_FALSE(tr.depleted);
  }
  SECTION("consumption through the bid queue moves the price down") {
    const auto tr = apply_event({2, 5, 1}, {.size = 2, .level = 0, .dir = Direction::Consume,
                                            .side = Side::Bid, .replenish = {3, 4, 2}});
    CHECK(tr.depleted);
    CHECK(tr.marker == BookState{0, 5, 1});
    CHECK(tr.price_move == -1);
    CHECK(tr.post == BookState{3, 4, 2});
  }
  SECTION("ask-side depletion moves the price up") {
    const auto tr = apply_event({2, 1, 2}, {.size = 1, .level = 2, .dir = Direction::Consume,
                                            .side = Side::Ask, .replenish = {1, 2, 1}});
    CHECK(tr.depleted);
    CHECK(tr.marker == BookState{2, 0, 2});
    CHECK(tr.price_move == +1);
    CHECK(tr.post == BookState{1, 2, 1});
  }
}

TEST_CASE("rejected descriptors", "[book]") {
  CHECK_THROWS_AS(apply_event({3, 3, 1}, {.size = 1, .level = 0, .dir = Direction::Consume,
                                          .side = Side::Ask}),
                  std::invalid_argument);  // ask consumption must hit level = spread
  CHECK_THROWS_AS(apply_event({3, 3, 1}, {.size = 1, .level = 1, .dir = Direction::Provide,
                                          .side = Side::Bid}),
                  std::invalid_argument);  // no interior level at spread 1
  CHECK_THROWS_AS(apply_event({3, 3, 2}, {.size = 0, .level = 0, .dir = Direction::Provide,
                                          .side = Side::Bid}),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_event({3, 3, 2}, {.size = 1, .level = 0, .dir = Direction::Provide,
                                          .side = Side::Ask}),
                  std::invalid_argument);  // sell at the best bid price is marketable
  CHECK_THROWS_AS(apply_event({0, 3, 2}, {.size = 1, .level = 0, .dir = Direction::Provide,
                                          .side = Side::Bid}),
                  std::invalid_argument);  // fictitious pre-state
  // Depletion with a non-observable replenishment state is rejected...
  CHECK_THROWS_AS(apply_event({1, 3, 2}, {.size = 1, .level = 0, .dir = Direction::Consume,
                                          .side = Side::Bid, .replenish = {0, 0, 1}}),
                  std::invalid_argument);
  // ...but the replenishment field is ignored entirely when nothing depletes.
  const auto tr = apply_event({5, 3, 2}, {.size = 1, .level = 0, .dir = Direction::Consume,
                                          .side = Side::Bid, .replenish = {0, 0, 0}});
  CHECK(tr.post == BookState{4, 3, 2});
}

TEST_CASE("price move fires exactly on depletion", "[book]") {
  const std::vector<BookState> repl = {{3, 4, 2}, {1, 1, 1}, {2, 2, 3}};
  for (int q1 = 1; q1 <= 4; ++q1)
    for (int q2 = 1; q2 <= 4; ++q2)
      for (int s = 1; s <= 3; ++s)
        for (int n = 1; n <= 4; ++n)
          for (int level = 0; level <= 4; ++level)
            for (Direction dir : {Direction::Provide, Direction::Consume})
              for (Side side : {Side::Bid, Side::Ask}) {
                const BookState u{q1, q2, s};
                const EventInput e{n, level, dir, side, repl[(q1 + n + level) % 3], 1};
                if (!event_well_formed(u, e)) continue;
                const auto tr = apply_event(u, e);
                CHECK((tr.price_move != 0) == tr.depleted);
                CHECK(tr.post.observable());
                if (tr.depleted) CHECK(tr.marker.fictitious());
              }
}

TEST_CASE("exhaustive agreement with the price-grid reference", "[book][oracle]") {
  const std::vector<BookState> repl = {{3, 4, 2}, {1, 1, 1}, {2, 2, 3}};
  long cases = 0, valid = 0;
  for (int q1 = 1; q1 <= 4; ++q1)
    for (int q2 = 1; q2 <= 4; ++q2)
      for (int s = 1; s <= 3; ++s)
        for (int n = 1; n <= 4; ++n)
          for (int level = 0; level <= 4; ++level)
            for (Direction dir : {Direction::Provide, Direction::Consume})
              for (Side side : {Side::Bid, Side::Ask})
                for (const auto& r : repl) {
                  ++cases;
                  const BookState u{q1, q2, s};
                  const EventInput e{n, level, dir, side, r, 1};
                  const auto expected = grid_book_apply(u, e);
                  if (!expected.has_value()) {
                    CHECK_FALSE(event_well_formed(u, e));
                    continue;
                  }
                  REQUIRE(event_well_formed(u, e));
                  ++valid;
                  const auto tr = apply_event(u, e);
                  const auto tr_again = apply_event(u, e);
                  CHECK(tr.post == tr_again.post);  // pure function
                  CHECK(tr.post == expected->post);
                  CHECK(tr.depleted == expected->depleted);
                  CHECK(tr.price_move == expected->eta);
                }
  CHECK(cases >= 10000);
  CHECK(valid > 3000);
}

TEST_CASE("custom price-move mapping", "[book]") {
  // Two-tick jumps on ask depletion.
  const MidPriceMoveFn f = [](const BookState& u) {
    if (u.q2 == 0 && u.q1 > 0) return 2;
    if (u.q1 == 0 && u.q2 > 0) return -1;
    return 0;
  };
  const auto tr = apply_event({2, 1, 1}, {.size = 3, .level = 1, .dir = Direction::Consume,
                                          .side = Side::Ask, .replenish = {2, 2, 1}},
                              f);
  CHECK(tr.price_move == 2);
}
