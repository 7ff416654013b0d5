#pragma once

// Brute-force path sums for small lattice models.

#include <cmath>
#include <functional>
#include <utility>

#include "mrw/finite_model.hpp"
#include "mrw/spectral.hpp"

namespace testmodels {

using mrw::FiniteModel;

// Sum over every path of length m, weighted by its probability.
inline std::pair<double, double> enumerate(const FiniteModel& model, std::size_t x0, double b, double c, std::size_t m) {
  double cross = 0, joint = 0;
  std::function<void(std::size_t, std::size_t, double, double, bool)> rec = [&](std::size_t n, std::size_t x,
                                                                                double s, double p, bool hit) {
    if (n == m) {
      if (hit) {
        cross += p;
        if (s < c) joint += p;
      }
      return;
    }
    for (std::size_t j = 0; j < model.states(); ++j) {
      const double pij = model.transition()(x, j);
      if (pij == 0) continue;
      for (const auto& [v, q] : model.law(x, j).atoms()) {
        const double s2 = s + v;
        rec(n + 1, j, s2, p * pij * q, hit || (n + 1 < m && s2 > b));
      }
    }
  };
  rec(0, x0, 0, 1, false);
  return {cross, joint};
}

// Exact mean of the importance-sampling estimator: every tilted path up to
// min(tau, m) times its weight.
inline double is_expectation(const FiniteModel& model, double alpha, std::size_t x0, double b, std::size_t m) {
  const auto sd = mrw::spectral_decomposition(model, alpha);
  const auto tm = mrw::tilt_model(model, alpha);
  double total = 0;
  std::function<void(std::size_t, std::size_t, double, double)> rec = [&](std::size_t n, std::size_t x, double s,
                                                                          double p) {
    for (std::size_t j = 0; j < tm.states(); ++j) {
      const double pij = tm.transition()(x, j);
      if (pij == 0) continue;
      for (const auto& [v, q] : tm.law(x, j).atoms()) {
        const double s2 = s + v;
        if (n + 1 < m && s2 > b) {
          const double w = sd.r(x0) / sd.r(j) * std::exp(-alpha * s2 + (n + 1) * sd.Lambda);
          total += p * pij * q * w;
        } else if (n + 1 < m) {
          rec(n + 1, j, s2, p * pij * q);
        }
      }
    }
  };
  rec(0, x0, 0, 1);
  return total;
}

}  // namespace testmodels
