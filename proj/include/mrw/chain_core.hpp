#pragma once

// Trajectory simulation, first-passage stopping, ladder epochs and renewal
// measure estimation for any WalkModel.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mrw/error.hpp"
#include "mrw/rng.hpp"
#include "mrw/stats.hpp"
#include "mrw/walk.hpp"

namespace mrw {

inline constexpr std::size_t kDefaultStepCap = 100'000'000;

template <class State>
struct Trajectory {
  std::vector<State> states;  // X_0 .. X_n
  std::vector<double> sums;   // S_0 = 0 .. S_n
};

// Either a finite horizon m (the event of interest is tau < m) or an
// unbounded run stopped at a hard step cap.
struct Horizon {
  std::optional<std::size_t> m;
  std::size_t step_cap = kDefaultStepCap;

  static Horizon finite(std::size_t m) { return Horizon{m, m}; }
  static Horizon unbounded(std::size_t cap = kDefaultStepCap) { return Horizon{std::nullopt, cap}; }
};

enum class PassageOutcome { crossed, not_crossed, capped };

template <class State>
struct FirstPassageRecord {
  PassageOutcome outcome = PassageOutcome::not_crossed;
  bool crossed = false;        // tau < m (finite horizon) or tau <= cap
  std::size_t tau = 0;         // set iff crossed
  double s_tau = 0.0;
  double overshoot = 0.0;      // s_tau - b
  State x_tau{};
  std::optional<double> s_horizon;  // S_m, when the walk was run to m
  bool joint_flag = false;     // crossed and S_m < c
  std::size_t steps = 0;       // steps actually simulated
};

template <class State>
struct LadderSample {
  std::size_t tau_plus = 0;
  double s_ladder = 0.0;
  State x_ladder{};
};

template <class State>
struct LadderDraw {
  bool capped = false;
  LadderSample<State> sample;
};

template <WalkModel M>
void require_valid_state(const M& model, const typename M::state_type& x) {
  if (!model.valid_state(x)) throw DomainError("initial state is not a valid state of the model");
}

template <WalkModel M>
typename M::state_type draw_initial(const M& model, const InitialLaw<typename M::state_type>& init,
                                    RandomStream& g) {
  if (const auto* x = std::get_if<typename M::state_type>(&init)) {
    require_valid_state(model, *x);
    return *x;
  }
  if constexpr (StationarySampler<M>) {
    return model.sample_stationary(g);
  } else {
    throw DomainError("stationary initial law requested for a model without a stationary sampler");
  }
}

template <WalkModel M>
Trajectory<typename M::state_type> simulate_path(const M& model, const typename M::state_type& x0,
                                                 std::size_t n, RandomStream& g) {
  require_valid_state(model, x0);
  Trajectory<typename M::state_type> t;
  t.states.reserve(n + 1);
  t.sums.reserve(n + 1);
  t.states.push_back(x0);
  t.sums.push_back(0.0);
  CompensatedSum s;
  auto x = x0;
  for (std::size_t k = 0; k < n; ++k) {
    auto st = model.step(x, g);
    x = std::move(st.next);
    s.add(st.increment);
    t.states.push_back(x);
    t.sums.push_back(s.value());
  }
  return t;
}

// Runs the walk from x0 until S_n > b. With a finite horizon m only crossings
// at n < m count, and when a cutoff c is supplied the walk is continued to
// step m to evaluate S_m < c.
template <WalkModel M>
FirstPassageRecord<typename M::state_type> run_first_passage(const M& model,
                                                             const typename M::state_type& x0,
                                                             double b, const Horizon& horizon,
                                                             std::optional<double> c,
                                                             RandomStream& g) {
  require_valid_state(model, x0);
  if (!(b >= 0.0)) throw DomainError("first-passage level b must be >= 0");
  if (c) {
    if (!horizon.m) throw DomainError("a cutoff c requires a finite horizon m");
    if (*c > b) throw DomainError("cutoff c must satisfy c <= b");
  }
  if (horizon.m && *horizon.m < 1) throw DomainError("horizon m must be >= 1");

  FirstPassageRecord<typename M::state_type> rec;
  CompensatedSum s;
  auto x = x0;
  const std::size_t last = horizon.m ? *horizon.m : horizon.step_cap;
  for (std::size_t n = 1; n <= last; ++n) {
    auto st = model.step(x, g);
    x = std::move(st.next);
    s.add(st.increment);
    const double sn = s.value();
    rec.steps = n;
    if (!rec.crossed && sn > b && (!horizon.m || n < *horizon.m)) {
      rec.crossed = true;
      rec.tau = n;
      rec.s_tau = sn;
      rec.overshoot = sn - b;
      rec.x_tau = x;
      if (!c) break;
    }
    if (horizon.m && n == *horizon.m) rec.s_horizon = sn;
  }
  if (rec.crossed) {
    rec.outcome = PassageOutcome::crossed;
    if (c && rec.s_horizon) rec.joint_flag = *rec.s_horizon < *c;
  } else {
    rec.outcome = horizon.m ? PassageOutcome::not_crossed : PassageOutcome::capped;
  }
  return rec;
}

// First ascending ladder epoch tau_+ = inf{n >= 1 : S_n > 0} from x0.
template <WalkModel M>
LadderDraw<typename M::state_type> sample_ladder_epoch(const M& model,
                                                        const typename M::state_type& x0,
                                                        std::size_t step_cap, RandomStream& g) {
  require_valid_state(model, x0);
  LadderDraw<typename M::state_type> out;
  CompensatedSum s;
  auto x = x0;
  for (std::size_t n = 1; n <= step_cap; ++n) {
    auto st = model.step(x, g);
    x = std::move(st.next);
    s.add(st.increment);
    const double sn = s.value();
    if (sn > 0.0) {
      out.sample = {n, sn, x};
      return out;
    }
  }
  out.capped = true;
  out.sample.x_ladder = x;
  return out;
}

struct RenewalEstimate {
  double s = 0.0;
  double h = 0.0;  // +inf for the cumulative count
  double u_hat = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  std::size_t capped = 0;  // paths that hit the step cap
};

struct RenewalOptions {
  double declared_drift = 0.0;  // must be > 0
  // Counting stops once S_n exceeds the window top by this margin. Default:
  // 20 one-step standard deviations; 0 is exact for nonnegative increments.
  double no_return_margin = -1.0;
  double step_sd = 1.0;
  std::size_t step_cap = 10'000'000;
  unsigned workers = 1;
};

namespace detail {

struct RenewalAcc {
  RunningStats counts;
  std::size_t capped = 0;
  void merge(const RenewalAcc& o) {
    counts.merge(o.counts);
    capped += o.capped;
  }
};

template <WalkModel M, class Pred>
RenewalEstimate renewal_count(const M& model, const InitialLaw<typename M::state_type>& init,
                              double lo, double hi, Pred&& in_set, std::size_t reps,
                              std::uint64_t seed, const RenewalOptions& opt) {
  if (!(opt.declared_drift > 0.0))
    throw DomainError("renewal measure needs a strictly positive declared drift");
  if (!(hi > lo)) throw DomainError("renewal window needs h > 0");
  if (reps < 1) throw DomainError("reps must be >= 1");
  const double margin = opt.no_return_margin >= 0.0 ? opt.no_return_margin : 20.0 * opt.step_sd;
  const double stop_level = hi + margin;
  auto acc = replicate<RenewalAcc>(reps, seed, opt.workers, [&](std::size_t, RandomStream& g,
                                                                RenewalAcc& a) {
    auto x = draw_initial(model, init, g);
    CompensatedSum s;
    double count = (0.0 >= lo && 0.0 < hi && in_set(x)) ? 1.0 : 0.0;
    bool done = false;
    for (std::size_t n = 1; n <= opt.step_cap; ++n) {
      auto st = model.step(x, g);
      x = std::move(st.next);
      s.add(st.increment);
      const double sn = s.value();
      if (sn >= lo && sn < hi && in_set(x)) count += 1.0;
      if (sn > stop_level) {
        done = true;
        break;
      }
    }
    if (!done) ++a.capped;
    a.counts.add(count);
  });
  RenewalEstimate e;
  e.s = lo;
  e.h = hi - lo;
  e.u_hat = acc.counts.mean();
  e.std_error = acc.counts.std_error();
  e.reps = reps;
  e.capped = acc.capped;
  return e;
}

}  // namespace detail

// Mean number of visits of (X_n, S_n), n >= 0, to A x [s, s+h).
template <WalkModel M, class Pred>
RenewalEstimate estimate_renewal_measure(const M& model,
                                         const InitialLaw<typename M::state_type>& init, double s,
                                         double h, Pred&& in_set, std::size_t reps,
                                         std::uint64_t seed, const RenewalOptions& opt) {
  if (!(h > 0.0)) throw DomainError("renewal window needs h > 0");
  return detail::renewal_count(model, init, s, s + h, std::forward<Pred>(in_set), reps, seed, opt);
}

// Mean number of n >= 0 with S_n < s and X_n in A (the cumulative renewal
// function on (-inf, s)).
template <WalkModel M, class Pred>
RenewalEstimate estimate_renewal_function(const M& model,
                                          const InitialLaw<typename M::state_type>& init, double s,
                                          Pred&& in_set, std::size_t reps, std::uint64_t seed,
                                          const RenewalOptions& opt) {
  auto e = detail::renewal_count(model, init, -std::numeric_limits<double>::infinity(), s,
                                 std::forward<Pred>(in_set), reps, seed, opt);
  e.s = s;
  e.h = std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace mrw
