#pragma once

#include <concepts>
#include <variant>

#include "mrw/rng.hpp"

namespace mrw {

template <class State>
struct Step {
  State next;
  double increment;
};

// A Markov random walk: given the current state and a random stream, produce
// the next state and the increment xi attached to the transition. step() must
// be a pure function of (state, stream position).
template <class M>
concept WalkModel = requires(const M& m, const typename M::state_type& s, RandomStream& g) {
  typename M::state_type;
  { m.step(s, g) } -> std::same_as<Step<typename M::state_type>>;
  { m.valid_state(s) } -> std::convertible_to<bool>;
};

// Models that can draw X_0 from their stationary law.
template <class M>
concept StationarySampler = WalkModel<M> && requires(const M& m, RandomStream& g) {
  { m.sample_stationary(g) } -> std::same_as<typename M::state_type>;
};

struct StationaryStart {};

// Initial law of X_0: a fixed state or the stationary law.
template <class State>
using InitialLaw = std::variant<State, StationaryStart>;

// Neumaier compensated accumulation of partial sums.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }
  void reset() noexcept { sum_ = comp_ = 0.0; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace mrw
