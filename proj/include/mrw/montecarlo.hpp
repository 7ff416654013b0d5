#pragma once

// Monte Carlo estimators of the first-passage probabilities, the exact DP
// oracle for lattice models, importance sampling under exponential tilts,
// ladder moments, bridge-conditional crossing and maximum tails.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mrw/approx.hpp"
#include "mrw/chain_core.hpp"
#include "mrw/error.hpp"
#include "mrw/finite_model.hpp"
#include "mrw/rng.hpp"
#include "mrw/spectral.hpp"
#include "mrw/stats.hpp"
#include "mrw/walk.hpp"

namespace mrw {

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  std::uint64_t master_seed = 0;
  double effective_sample_size = 0.0;
};

struct PassageEstimates {
  McEstimate crossing;             // P(tau < m)
  std::optional<McEstimate> joint;  // P(tau < m, S_m < c)
};

namespace detail {

inline McEstimate to_estimate(const RunningStats& s, std::uint64_t seed, double ess) {
  McEstimate e;
  e.value = s.mean();
  e.std_error = s.std_error();
  e.reps = static_cast<std::size_t>(s.n);
  e.master_seed = seed;
  e.effective_sample_size = ess;
  return e;
}

// Runs `steps` further steps and returns (state, summed increment). Single
// state Gaussian and point-mass walks are advanced in one exact draw.
template <WalkModel M>
std::pair<typename M::state_type, double> advance(const M& model, typename M::state_type x,
                                                  std::size_t steps, RandomStream& g) {
  if (steps == 0) return {x, 0.0};
  if constexpr (std::is_same_v<M, FiniteModel>) {
    if (model.states() == 1) {
      const auto& law = model.law(0, 0);
      const double n = static_cast<double>(steps);
      if (law.kind() == IncrementLaw::Kind::gaussian) return {x, n * law.a() + law.b() * std::sqrt(n) * g.normal()};
      if (law.kind() == IncrementLaw::Kind::point_mass) return {x, n * law.a()};
    }
  }
  CompensatedSum s;
  for (std::size_t k = 0; k < steps; ++k) {
    auto st = model.step(x, g);
    x = std::move(st.next);
    s.add(st.increment);
  }
  return {x, s.value()};
}

template <class State>
struct PassageDraw {
  bool crossed = false;
  bool joint = false;
  std::size_t n = 0;  // min(tau, m)
  double s_n = 0.0;
  State x_n{};
};

// Simulates under `sim` until tau or m; after a crossing before m the walk is
// continued under `cont` to evaluate S_m < c.
template <WalkModel M, WalkModel C>
PassageDraw<typename M::state_type> passage_draw(const M& sim, const C& cont, typename M::state_type x,
                                                 double b, std::size_t m, std::optional<double> c,
                                                 RandomStream& g) {
  PassageDraw<typename M::state_type> d;
  CompensatedSum s;
  for (std::size_t n = 1; n <= m; ++n) {
    auto st = sim.step(x, g);
    x = std::move(st.next);
    s.add(st.increment);
    const double sn = s.value();
    if (n < m && sn > b) {
      d.crossed = true;
      d.n = n;
      d.s_n = sn;
      d.x_n = x;
      if (c) {
        auto [xm, rest] = advance(cont, x, m - n, g);
        d.joint = sn + rest < *c;
      }
      return d;
    }
  }
  d.n = m;
  d.s_n = s.value();
  d.x_n = x;
  return d;
}

inline void check_passage_args(double b, std::size_t m, std::optional<double> c, std::size_t reps) {
  if (!(b >= 0.0)) throw DomainError("first-passage level b must be >= 0");
  if (m < 1) throw DomainError("horizon m must be >= 1");
  if (c && !(*c <= b)) throw DomainError("cutoff c must satisfy c <= b");
  if (reps < 1) throw DomainError("reps must be >= 1");
}

struct PassageAcc {
  RunningStats cross, joint;
  double w_sum = 0.0, w_sq = 0.0;
  void merge(const PassageAcc& o) {
    cross.merge(o.cross);
    joint.merge(o.joint);
    w_sum += o.w_sum;
    w_sq += o.w_sq;
  }
};

}  // namespace detail

// Plain Monte Carlo frequencies of {tau < m} and {tau < m, S_m < c}.
template <WalkModel M>
PassageEstimates mc_first_passage(const M& model, const InitialLaw<typename M::state_type>& init, double b,
                                  std::size_t m, std::optional<double> c, std::size_t reps,
                                  std::uint64_t seed, unsigned workers = 1) {
  detail::check_passage_args(b, m, c, reps);
  auto acc = replicate<detail::PassageAcc>(reps, seed, workers, [&](std::size_t, RandomStream& g,
                                                                    detail::PassageAcc& a) {
    const auto x0 = draw_initial(model, init, g);
    const auto d = detail::passage_draw(model, model, x0, b, m, c, g);
    a.cross.add(d.crossed ? 1.0 : 0.0);
    if (c) a.joint.add(d.joint ? 1.0 : 0.0);
  });
  PassageEstimates out;
  const double n = static_cast<double>(reps);
  out.crossing = detail::to_estimate(acc.cross, seed, n);
  if (c) out.joint = detail::to_estimate(acc.joint, seed, n);
  return out;
}

// Importance sampling: paths are drawn from the alpha-tilted model up to
// N = min(tau, m) and weighted by r(X_0)/r(X_N) exp(-alpha S_N + N Lambda).
// X_0 has the same law under both measures; after a crossing the walk is
// continued under the base model, which leaves the weight unchanged.
inline PassageEstimates mc_importance_sampled(const FiniteModel& model, double alpha,
                                              const InitialLaw<std::size_t>& init, double b, std::size_t m,
                                              std::optional<double> c, std::size_t reps, std::uint64_t seed,
                                              unsigned workers = 1) {
  detail::check_passage_args(b, m, c, reps);
  const auto sd = spectral_decomposition(model, alpha);
  const FiniteModel tilted = alpha == 0.0 ? model : tilt_model(model, alpha);
  auto acc = replicate<detail::PassageAcc>(reps, seed, workers, [&](std::size_t, RandomStream& g,
                                                                    detail::PassageAcc& a) {
    const auto x0 = draw_initial(model, init, g);
    const auto d = detail::passage_draw(tilted, model, x0, b, m, c, g);
    double w = 1.0;
    if (alpha != 0.0) {
      w = sd.r(static_cast<Eigen::Index>(x0)) / sd.r(static_cast<Eigen::Index>(d.x_n)) *
          std::exp(-alpha * d.s_n + static_cast<double>(d.n) * sd.Lambda);
    }
    a.cross.add(d.crossed ? w : 0.0);
    if (c) a.joint.add(d.joint ? w : 0.0);
    a.w_sum += w;
    a.w_sq += w * w;
  });
  PassageEstimates out;
  const double ess = acc.w_sq > 0 ? acc.w_sum * acc.w_sum / acc.w_sq : 0.0;
  out.crossing = detail::to_estimate(acc.cross, seed, ess);
  if (c) out.joint = detail::to_estimate(acc.joint, seed, ess);
  return out;
}

struct DpResult {
  double crossing = 0.0;
  double joint = 0.0;
  double lattice_step = 0.0;
  // S > b and S < c are evaluated as S > b_effective, S < c_effective with
  // both on the lattice
  double b_effective = 0.0;
  double c_effective = 0.0;
  std::size_t table_size = 0;
};

namespace detail {

inline bool near_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

// Largest d with every value an integer multiple of d.
inline double lattice_span(const std::vector<double>& values) {
  double minabs = std::numeric_limits<double>::infinity();
  for (double v : values)
    if (v != 0.0) minabs = std::min(minabs, std::abs(v));
  if (!std::isfinite(minabs)) return 1.0;
  for (int q = 1; q <= 10000; ++q) {
    const double d = minabs / q;
    bool ok = true;
    for (double v : values) ok = ok && near_integer(v / d);
    if (ok) return d;
  }
  throw StructuralError("increment values do not share a lattice span");
}

}  // namespace detail

// Exact P(tau < m) and P(tau < m, S_m < c) by forward recursion over
// (state, lattice index) with an absorbing crossed layer.
inline DpResult dp_exact_oracle(const FiniteModel& model, const InitialLaw<std::size_t>& init, double b,
                                double c, std::size_t m, std::size_t memory_cap = 50'000'000) {
  if (!(b >= 0.0)) throw DomainError("first-passage level b must be >= 0");
  if (!(c <= b)) throw DomainError("cutoff c must satisfy c <= b");
  if (m < 1) throw DomainError("horizon m must be >= 1");
  const auto K = model.states();
  std::vector<double> values;
  model.for_each_edge([&](std::size_t i, std::size_t j) {
    const auto& law = model.law(i, j);
    if (!law.is_lattice()) {
      std::ostringstream os;
      os << "transition " << i << "->" << j << " has non-lattice law " << law.describe();
      throw StructuralError(os.str());
    }
    for (const auto& [v, p] : law.atoms()) values.push_back(v);
  });
  const double d = detail::lattice_span(values);
  long kmax = 0;
  for (double v : values) kmax = std::max(kmax, std::lround(std::abs(v) / d));
  const long reach = static_cast<long>(m) * kmax;
  const std::size_t width = static_cast<std::size_t>(2 * reach + 1);
  const std::size_t need = 2 * 2 * K * width;
  if (need > memory_cap) {
    std::ostringstream os;
    os << "DP table needs " << need << " entries, above the cap of " << memory_cap;
    throw DomainError(os.str());
  }
  // S > b  <=>  k >= kb ;  S < c  <=>  k <= kc
  const double bq = b / d, cq = c / d;
  const long kb = detail::near_integer(bq) ? std::lround(bq) + 1 : static_cast<long>(std::floor(bq)) + 1;
  const long kc = detail::near_integer(cq) ? std::lround(cq) - 1 : static_cast<long>(std::ceil(cq)) - 1;

  // per-edge atom lists as lattice offsets
  struct Move {
    std::size_t j;
    long dk;
    double p;
  };
  std::vector<std::vector<Move>> moves(K);
  model.for_each_edge([&](std::size_t i, std::size_t j) {
    for (const auto& [v, p] : model.law(i, j).atoms()) moves[i].push_back({j, std::lround(v / d), model.transition()(i, j) * p});
  });

  auto idx = [&](std::size_t x, long k) { return x * width + static_cast<std::size_t>(k + reach); };
  std::vector<double> freeL(K * width, 0.0), crossL(K * width, 0.0), nf(K * width), nc(K * width);
  if (const auto* x0 = std::get_if<std::size_t>(&init)) {
    if (*x0 >= K) throw DomainError("initial state is not a valid state of the model");
    freeL[idx(*x0, 0)] = 1.0;
  } else {
    const Eigen::VectorXd& pi = stationary_distribution(model);
    for (std::size_t x = 0; x < K; ++x) freeL[idx(x, 0)] = pi(static_cast<Eigen::Index>(x));
  }
  for (std::size_t n = 1; n <= m; ++n) {
    std::fill(nf.begin(), nf.end(), 0.0);
    std::fill(nc.begin(), nc.end(), 0.0);
    const long span = static_cast<long>(n - 1) * kmax;
    for (std::size_t x = 0; x < K; ++x)
      for (long k = -span; k <= span; ++k) {
        const double pf = freeL[idx(x, k)], pc = crossL[idx(x, k)];
        if (pf == 0.0 && pc == 0.0) continue;
        for (const auto& mv : moves[x]) {
          const long k2 = k + mv.dk;
          if (pc != 0.0) nc[idx(mv.j, k2)] += pc * mv.p;
          if (pf != 0.0) {
            if (n < m && k2 >= kb)
              nc[idx(mv.j, k2)] += pf * mv.p;
            else
              nf[idx(mv.j, k2)] += pf * mv.p;
          }
        }
      }
    std::swap(freeL, nf);
    std::swap(crossL, nc);
  }
  DpResult r;
  r.lattice_step = d;
  r.b_effective = static_cast<double>(kb - 1) * d;
  r.c_effective = static_cast<double>(kc + 1) * d;
  r.table_size = need;
  for (std::size_t x = 0; x < K; ++x)
    for (long k = -reach; k <= reach; ++k) {
      const double p = crossL[idx(x, k)];
      r.crossing += p;
      if (k <= kc) r.joint += p;
    }
  return r;
}

struct LadderStats {
  std::vector<double> heights;  // retained ladder heights after burn-in
  double mean_tau = 0.0;
  double mean_s = 0.0, mean_s2 = 0.0, mean_s3 = 0.0;
  double se_s = 0.0, se_s2 = 0.0, se_s3 = 0.0;
  double rho_plus = 0.0;
  double rho_se = 0.0;
  std::vector<std::pair<double, double>> h_grid;  // (s, empirical H+(s))
  std::size_t burn_in = 0;
  std::size_t count = 0;
  std::size_t capped_count = 0;
  bool unreliable = false;  // capped fraction above 1%
};

struct LadderOptions {
  std::size_t burn_in = 1000;
  std::size_t count = 100000;
  std::size_t step_cap = kDefaultStepCap;
  std::size_t chains = 1;  // independent chains, each with its own burn-in
  unsigned workers = 1;
  std::vector<double> h_grid = {0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
};

namespace detail {

struct LadderAcc {
  std::vector<double> heights;
  double tau_sum = 0.0;
  std::size_t capped = 0;
  void merge(const LadderAcc& o) {
    heights.insert(heights.end(), o.heights.begin(), o.heights.end());
    tau_sum += o.tau_sum;
    capped += o.capped;
  }
};

}  // namespace detail

// Chained ladder epochs: each epoch starts from the previous ladder state.
// The first burn_in epochs of every chain are discarded.
template <WalkModel M>
LadderStats mc_ladder_moments(const M& model, const InitialLaw<typename M::state_type>& init,
                              const LadderOptions& opt, std::uint64_t seed) {
  if (opt.count < 2) throw DomainError("ladder moments need count >= 2");
  if (opt.chains < 1 || opt.chains > opt.count) throw DomainError("chains must be in [1, count]");
  const std::size_t per = opt.count / opt.chains;
  const std::size_t extra = opt.count % opt.chains;
  auto acc = replicate<detail::LadderAcc>(opt.chains, seed, opt.workers, [&](std::size_t c, RandomStream& g,
                                                                             detail::LadderAcc& a) {
    auto x = draw_initial(model, init, g);
    const std::size_t want = per + (c < extra ? 1 : 0);
    std::size_t kept = 0;
    for (std::size_t e = 0; kept < want; ++e) {
      auto d = sample_ladder_epoch(model, x, opt.step_cap, g);
      x = d.sample.x_ladder;
      if (d.capped) {
        // a walk that keeps failing to climb has no usable ladder process
        if (++a.capped > std::max<std::size_t>(100, want)) break;
        continue;
      }
      if (e < opt.burn_in) continue;
      a.heights.push_back(d.sample.s_ladder);
      a.tau_sum += static_cast<double>(d.sample.tau_plus);
      ++kept;
    }
  });
  if (acc.heights.size() < 2) throw ConvergenceError("ladder epochs keep hitting the step cap");
  LadderStats st;
  st.burn_in = opt.burn_in;
  st.count = acc.heights.size();
  st.capped_count = acc.capped;
  st.unreliable = static_cast<double>(acc.capped) > 0.01 * static_cast<double>(st.count + acc.capped);
  st.mean_tau = acc.tau_sum / static_cast<double>(st.count);
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, s6 = 0;
  for (double h : acc.heights) {
    const double h2 = h * h;
    s1 += h;
    s2 += h2;
    s3 += h2 * h;
    s4 += h2 * h2;
    s6 += h2 * h2 * h2;
  }
  const double n = static_cast<double>(st.count);
  st.mean_s = s1 / n;
  st.mean_s2 = s2 / n;
  st.mean_s3 = s3 / n;
  st.se_s = std::sqrt(std::max(0.0, st.mean_s2 - st.mean_s * st.mean_s) / n);
  st.se_s2 = std::sqrt(std::max(0.0, s4 / n - st.mean_s2 * st.mean_s2) / n);
  st.se_s3 = std::sqrt(std::max(0.0, s6 / n - st.mean_s3 * st.mean_s3) / n);
  st.rho_plus = st.mean_s2 / (2.0 * st.mean_s);
  // delta method on (E S, E S^2)
  const double v11 = st.mean_s2 - st.mean_s * st.mean_s;
  const double v12 = st.mean_s3 - st.mean_s * st.mean_s2;
  const double v22 = s4 / n - st.mean_s2 * st.mean_s2;
  const double g1 = -st.mean_s2 / (2.0 * st.mean_s * st.mean_s), g2 = 1.0 / (2.0 * st.mean_s);
  st.rho_se = std::sqrt(std::max(0.0, g1 * g1 * v11 + 2 * g1 * g2 * v12 + g2 * g2 * v22) / n);
  for (double s : opt.h_grid) st.h_grid.emplace_back(s, ladder_excess_cdf(acc.heights, s));
  st.heights = std::move(acc.heights);
  return st;
}

inline double ladder_excess_cdf(const LadderStats& stats, double s) { return ladder_excess_cdf(stats.heights, s); }

// P^{(m,s)}{tau < m} for an i.i.d. Gaussian walk: increments are drawn from
// the exact bridge law given S_m = s.
inline McEstimate mc_bridge_conditional(const FiniteModel& model, double b, double s, std::size_t m,
                                        std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
  if (model.states() != 1 || model.law(0, 0).kind() != IncrementLaw::Kind::gaussian)
    throw StructuralError("bridge sampling is exact only for single-state gaussian increments");
  if (!(s < b)) throw DomainError("bridge endpoint s must be < b");
  if (m < 1) throw DomainError("horizon m must be >= 1");
  if (reps < 1) throw DomainError("reps must be >= 1");
  const double var = model.law(0, 0).b() * model.law(0, 0).b();
  auto acc = replicate<detail::PassageAcc>(reps, seed, workers, [&](std::size_t, RandomStream& g,
                                                                    detail::PassageAcc& a) {
    double S = 0.0;
    bool hit = false;
    for (std::size_t k = 0; k + 1 < m; ++k) {
      const double left = static_cast<double>(m - k);
      S += (s - S) / left + std::sqrt(var * (left - 1.0) / left) * g.normal();
      if (S > b) {
        hit = true;
        break;
      }
    }
    a.cross.add(hit ? 1.0 : 0.0);
  });
  return detail::to_estimate(acc.cross, seed, static_cast<double>(reps));
}

struct MaxTailOptions {
  double declared_drift = 0.0;  // must be < 0
  double margin = -1.0;         // default 20 / |drift|
  std::size_t step_cap = 10'000'000;
  unsigned workers = 1;
};

struct TailCurve {
  std::vector<double> log_levels;  // log B
  std::vector<McEstimate> tail;    // P{max_n S_n > log B}
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_se = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  std::size_t capped = 0;
  std::vector<std::string> warnings;
};

namespace detail {

struct TailAcc {
  std::vector<RunningStats> levels;
  std::size_t capped = 0;
  void merge(const TailAcc& o) {
    if (levels.empty()) levels.resize(o.levels.size());
    for (std::size_t i = 0; i < o.levels.size(); ++i) levels[i].merge(o.levels[i]);
    capped += o.capped;
  }
};

}  // namespace detail

// Tail of the all-time maximum on a grid of levels, with the least-squares
// slope of log P against log B.
template <WalkModel M>
TailCurve mc_max_tail(const M& model, const InitialLaw<typename M::state_type>& init,
                      std::vector<double> log_levels, std::size_t reps, std::uint64_t seed,
                      const MaxTailOptions& opt) {
  if (!(opt.declared_drift < 0.0)) throw DomainError("max tail needs a negative drift");
  if (log_levels.empty()) throw DomainError("max tail needs at least one level");
  if (reps < 1) throw DomainError("reps must be >= 1");
  std::sort(log_levels.begin(), log_levels.end());
  const double margin = opt.margin >= 0.0 ? opt.margin : 20.0 / std::abs(opt.declared_drift);
  const double lo = log_levels.front() - margin, hi = log_levels.back();
  const std::size_t L = log_levels.size();
  auto acc = replicate<detail::TailAcc>(reps, seed, opt.workers, [&](std::size_t, RandomStream& g,
                                                                     detail::TailAcc& a) {
    if (a.levels.empty()) a.levels.resize(L);
    auto x = draw_initial(model, init, g);
    CompensatedSum s;
    double mx = -std::numeric_limits<double>::infinity();
    bool done = false;
    for (std::size_t n = 1; n <= opt.step_cap; ++n) {
      auto st = model.step(x, g);
      x = std::move(st.next);
      s.add(st.increment);
      const double sn = s.value();
      mx = std::max(mx, sn);
      if (sn > hi || sn < lo) {
        done = true;
        break;
      }
    }
    if (!done) ++a.capped;
    for (std::size_t i = 0; i < L; ++i) a.levels[i].add(mx > log_levels[i] ? 1.0 : 0.0);
  });
  TailCurve out;
  out.log_levels = log_levels;
  out.capped = acc.capped;
  std::vector<double> xs, ys, ws;
  for (std::size_t i = 0; i < L; ++i) {
    out.tail.push_back(detail::to_estimate(acc.levels[i], seed, static_cast<double>(reps)));
    const double p = out.tail.back().value;
    if (p > 0.0) {
      xs.push_back(log_levels[i]);
      ys.push_back(std::log(p));
      // var(log p) ~ (1-p)/(n p)
      ws.push_back(static_cast<double>(reps) * p / std::max(1e-300, 1.0 - p));
    }
  }
  if (xs.size() >= 2) {
    const auto f = least_squares(xs, ys, ws);
    out.slope = f.slope;
    out.slope_se = f.slope_se;
    out.intercept = f.intercept;
  } else {
    out.warnings.push_back("fewer than two levels with positive tail estimates; slope not fitted");
  }
  if (out.capped > 0) out.warnings.push_back(std::to_string(out.capped) + " paths hit the step cap");
  return out;
}

struct OvershootEstimate {
  McEstimate mean;  // E R(b)
  std::size_t capped = 0;
};

// Mean overshoot S_tau - b over unbounded runs; capped runs are excluded.
template <WalkModel M>
OvershootEstimate mc_mean_overshoot(const M& model, const InitialLaw<typename M::state_type>& init, double b,
                                    std::size_t reps, std::uint64_t seed, std::size_t step_cap = kDefaultStepCap,
                                    unsigned workers = 1) {
  if (reps < 1) throw DomainError("reps must be >= 1");
  struct Acc {
    RunningStats s;
    std::size_t capped = 0;
    void merge(const Acc& o) {
      s.merge(o.s);
      capped += o.capped;
    }
  };
  auto acc = replicate<Acc>(reps, seed, workers, [&](std::size_t, RandomStream& g, Acc& a) {
    const auto x0 = draw_initial(model, init, g);
    const auto r = run_first_passage(model, x0, b, Horizon::unbounded(step_cap), std::nullopt, g);
    if (r.outcome == PassageOutcome::capped)
      ++a.capped;
    else
      a.s.add(r.overshoot);
  });
  OvershootEstimate out;
  out.mean = detail::to_estimate(acc.s, seed, acc.s.n);
  out.capped = acc.capped;
  return out;
}

struct RFactorEstimate {
  McEstimate value;
  std::size_t capped = 0;
  std::size_t defective = 0;  // epochs that drifted away without a ladder point
};

// E under the alpha_j-tilted stationary start of
//   r(X_tau+; a_j) r(X_0; a_{1-j}) / (r(X_0; a_j) r(X_tau+; a_{1-j}))
// over one ladder epoch of the a_j-tilted walk. Epochs that hit the step cap
// are excluded and counted. Under a negative tilted drift the epoch is
// defective: the tilted walk has tail root Delta, so a path below -40/Delta
// returns with probability about e^{-40} and is dropped as defective.
inline RFactorEstimate estimate_r_factor(const FiniteModel& model, const ConjugatePair& pair, int j,
                                         std::size_t reps, std::uint64_t seed, std::size_t step_cap = 1'000'000,
                                         unsigned workers = 1) {
  if (j != 0 && j != 1) throw DomainError("j must be 0 or 1");
  if (reps < 1) throw DomainError("reps must be >= 1");
  RFactorEstimate out;
  if (model.states() == 1) {
    out.value.value = 1.0;
    out.value.reps = reps;
    out.value.master_seed = seed;
    out.value.effective_sample_size = static_cast<double>(reps);
    return out;
  }
  const double aj = j == 0 ? pair.alpha0 : pair.alpha1;
  const double ak = j == 0 ? pair.alpha1 : pair.alpha0;
  const auto dj = spectral_decomposition(model, aj);
  const auto dk = spectral_decomposition(model, ak);
  const FiniteModel tilted = tilt_model(model, aj);
  const double floor = tilted.drift() < 0.0 && pair.delta_gap > 0.0 ? -40.0 / pair.delta_gap
                                                                      : -std::numeric_limits<double>::infinity();
  struct Acc {
    RunningStats s;
    std::size_t capped = 0, defective = 0;
    void merge(const Acc& o) {
      s.merge(o.s);
      capped += o.capped;
      defective += o.defective;
    }
  };
  auto acc = replicate<Acc>(reps, seed, workers, [&](std::size_t, RandomStream& g, Acc& a) {
    const auto x0 = tilted.sample_stationary(g);
    auto x = x0;
    CompensatedSum s;
    for (std::size_t n = 1; n <= step_cap; ++n) {
      auto st = tilted.step(x, g);
      x = st.next;
      s.add(st.increment);
      if (s.value() > 0.0) {
        const auto i0 = static_cast<Eigen::Index>(x0), i1 = static_cast<Eigen::Index>(x);
        a.s.add(dj.r(i1) * dk.r(i0) / (dj.r(i0) * dk.r(i1)));
        return;
      }
      if (s.value() < floor) {
        ++a.defective;
        return;
      }
    }
    ++a.capped;
  });
  if (acc.s.n < 1) throw ConvergenceError("no ladder epoch completed for the r-factor estimate");
  out.value = detail::to_estimate(acc.s, seed, acc.s.n);
  out.capped = acc.capped;
  out.defective = acc.defective;
  return out;
}

}  // namespace mrw
