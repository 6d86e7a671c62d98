#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace lobkit {

// First-limit order book state. Queue sizes are integers in minimum-order-size
// units (a quarter of the average event size by default, configurable at
// ingestion time); the spread is an integer tick count. The tick size itself
// only enters when reports are rendered.
//
// Observable states have both queues non-empty. A state with exactly one empty
// queue is a transient price-move marker: it is produced inside apply_event
// when a consumption empties a limit and is resolved immediately by the
// replenishment state, so it never appears in the public state stream.
struct BookState {
  int q1 = 1;      // best-bid quantity
  int q2 = 1;      // best-ask quantity
  int spread = 1;  // ticks between best bid and best ask

  bool observable() const { return q1 > 0 && q2 > 0 && spread >= 1; }
  bool fictitious() const { return spread >= 1 && q1 >= 0 && q2 >= 0 && ((q1 == 0) != (q2 == 0)); }

  friend auto operator<=>(const BookState&, const BookState&) = default;
};

enum class Side : std::uint8_t { Bid = 1, Ask = 2 };
enum class Direction : std::int8_t { Consume = -1, Provide = +1 };

inline int side_index(Side s) { return s == Side::Bid ? 1 : 2; }

// One order-book event before its outcome is known. `level` is the price
// offset from the best bid in ticks: 0 is the best bid, `spread` is the best
// ask, anything strictly between is inside the spread. `replenish` is
// consulted only when the event empties a queue; otherwise its value is
// ignored.
struct EventInput {
  int size = 1;
  int level = 0;
  Direction dir = Direction::Provide;
  Side side = Side::Bid;
  BookState replenish{1, 1, 1};
  int agent = 1;
};

// Outcome of applying one event.
struct Transition {
  BookState post;
  bool depleted = false;   // price-move indicator
  int price_move = 0;      // reference-price increment in ticks
  BookState marker{};      // the depleted (fictitious) state, valid when depleted
};

// Maps a (possibly fictitious) state to a tick-valued reference-price
// increment. The default moves the price down one tick when the bid queue
// empties and up one tick when the ask queue empties; larger jumps can be
// modelled by supplying a different mapping.
using MidPriceMoveFn = std::function<int(const BookState&)>;

inline int default_price_move(const BookState& u) {
  if (u.q1 == 0 && u.q2 > 0) return -1;
  if (u.q2 == 0 && u.q1 > 0) return +1;
  return 0;
}

// True when the event descriptor is admissible in state `u`:
//  - consumption happens only at a best limit (level 0 on the bid, level
//    `spread` on the ask) and must not exceed... it may exceed the queue,
//    that is a depletion;
//  - a buy insertion targets level 0..spread-1, a sell insertion targets
//    level 1..spread, so an in-spread insertion needs spread >= 2.
inline bool event_well_formed(const BookState& u, const EventInput& e) {
  if (!u.observable() || e.size < 1 || e.level < 0) return false;
  if (e.dir == Direction::Consume)
    return (e.side == Side::Bid && e.level == 0) || (e.side == Side::Ask && e.level == u.spread);
  return e.side == Side::Bid ? e.level <= u.spread - 1 : (e.level >= 1 && e.level <= u.spread);
}

// Applies one event to an observable state. Pure: identical inputs give
// identical outputs. Throws std::invalid_argument on malformed descriptors
// (including a replenishment state that is not observable when a depletion
// actually needs it).
inline Transition apply_event(const BookState& u, const EventInput& e,
                              const MidPriceMoveFn& price_move = {}) {
  if (!u.observable()) throw std::invalid_argument("apply_event: state not observable");
  if (!event_well_formed(u, e))
    throw std::invalid_argument("apply_event: malformed event descriptor (size " +
                                std::to_string(e.size) + ", level " + std::to_string(e.level) +
                                ", dir " + std::to_string(static_cast<int>(e.dir)) + ", side " +
                                std::to_string(side_index(e.side)) + " in spread " +
                                std::to_string(u.spread) + ")");

  Transition out;
  if (e.dir == Direction::Provide) {
    if (e.side == Side::Bid) {
      if (e.level == 0) {
        out.post = {u.q1 + e.size, u.q2, u.spread};
      } else {
        // In-spread buy: the best bid moves up `level` ticks and its queue
        // restarts with the inserted size.
        out.post = {e.size, u.q2, u.spread - e.level};
      }
    } else {
      if (e.level == u.spread) {
        out.post = {u.q1, u.q2 + e.size, u.spread};
      } else {
        out.post = {u.q1, e.size, e.level};
      }
    }
    return out;
  }

  // Consumption at a best limit.
  const int queue = e.side == Side::Bid ? u.q1 : u.q2;
  if (e.size < queue) {
    out.post = e.side == Side::Bid ? BookState{u.q1 - e.size, u.q2, u.spread}
                                   : BookState{u.q1, u.q2 - e.size, u.spread};
    return out;
  }

  // Depletion: pass through the fictitious marker, read the price move off
  // it, then resolve to the replenishment state.
  out.depleted = true;
  out.marker = e.side == Side::Bid ? BookState{0, u.q2, u.spread} : BookState{u.q1, 0, u.spread};
  out.price_move = price_move ? price_move(out.marker) : default_price_move(out.marker);
  if (!e.replenish.observable())
    throw std::invalid_argument("apply_event: replenishment state must be observable");
  out.post = e.replenish;
  return out;
}

}  // namespace lobkit
