#pragma once

// Closed-form approximations: inverse Gaussian and ladder-excess laws,
// Edgeworth terms, the zero-drift bridge and joint formulas, the corrected
// formula with conjugate tilts, the Lorden bound and Wald residuals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "mrw/error.hpp"
#include "mrw/laws.hpp"
#include "mrw/stats.hpp"

namespace mrw {

namespace detail {

inline double clamp01(double p) { return std::min(1.0, std::max(0.0, p)); }

// log Phi(z), accurate in the far left tail.
inline double log_normal_cdf(double z) {
  if (z > -37.0) return std::log(normal_cdf(z));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * M_PI) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

}  // namespace detail

// P(first passage of Brownian motion with drift mu to level b happens by t).
inline double inverse_gaussian_cdf(double t, double mu, double b) {
  if (!(b > 0.0)) throw DomainError("inverse_gaussian_cdf needs b > 0");
  if (!(t >= 0.0)) throw DomainError("inverse_gaussian_cdf needs t >= 0");
  if (t == 0.0) return 0.0;
  if (std::isinf(t)) return mu >= 0.0 ? 1.0 : std::exp(2.0 * mu * b);
  const double rt = std::sqrt(t);
  const double first = normal_cdf((mu * t - b) / rt);
  const double second = std::exp(2.0 * mu * b + detail::log_normal_cdf((-b - mu * t) / rt));
  return detail::clamp01(first + second);
}

// Stationary excess law of a ladder height with the given parametric law.
inline double ladder_excess_cdf(const IncrementLaw& height, double s) {
  if (!(s >= 0.0)) throw DomainError("ladder_excess_cdf needs s >= 0");
  switch (height.kind()) {
    case IncrementLaw::Kind::point_mass:
    case IncrementLaw::Kind::two_point: {
      const auto atoms = height.atoms();
      double mean = 0.0, num = 0.0;
      for (const auto& [v, p] : atoms) {
        if (!(v > 0.0) && p > 0.0) throw DomainError("ladder heights must be positive");
        mean += p * v;
        num += p * std::min(v, s);
      }
      return detail::clamp01(num / mean);
    }
    case IncrementLaw::Kind::exponential: {
      const double r = height.a(), shift = height.b();
      if (shift < 0.0) throw DomainError("ladder heights must be positive");
      // integral of the survival function: min(s, shift) + (1 - e^{-r (s-shift)+})/r
      const double tail = s > shift ? -std::expm1(-r * (s - shift)) / r : 0.0;
      return detail::clamp01((std::min(s, shift) + tail) / (shift + 1.0 / r));
    }
    case IncrementLaw::Kind::gaussian:
      break;
  }
  throw DomainError("a gaussian law cannot be a ladder-height law");
}

// Empirical version: H(s) = sum_i min(x_i, s) / sum_i x_i, which integrates
// the empirical survival function exactly.
inline double ladder_excess_cdf(std::span<const double> heights, double s) {
  if (heights.empty()) throw DomainError("ladder_excess_cdf needs a nonempty sample");
  if (!(s >= 0.0)) throw DomainError("ladder_excess_cdf needs s >= 0");
  double num = 0.0, den = 0.0;
  for (double x : heights) {
    num += std::min(x, s);
    den += x;
  }
  if (!(den > 0.0)) throw DomainError("ladder heights must have positive mean");
  return detail::clamp01(num / den);
}

inline double edgeworth_cdf(double s, double n, double kappa, double kappa_nu, bool clamp = true) {
  if (!(n >= 1.0)) throw DomainError("edgeworth_cdf needs n >= 1");
  const double v = normal_cdf(s) + normal_pdf(s) * ((kappa / 6.0) * (1.0 - s * s) + kappa_nu) / std::sqrt(n);
  return clamp ? detail::clamp01(v) : v;
}

inline double edgeworth_density(double s, double n, double kappa, bool floor = true) {
  if (!(n >= 1.0)) throw DomainError("edgeworth_density needs n >= 1");
  const double v = normal_pdf(s) * (1.0 + kappa * (s * s * s - 3.0 * s) / (6.0 * std::sqrt(n)));
  return floor ? std::max(0.0, v) : v;
}

struct ZeroDriftParams {
  double b = 0.0;
  double s_or_c = 0.0;
  double m = 1.0;
  double rho_plus = 0.0;
  double kappa = 0.0;
};

namespace detail {

inline double effective_horizon(double m, double kappa, double x) {
  if (!(m > 0.0)) throw DomainError("horizon m must be positive");
  const double h = m + kappa * x / 3.0;
  if (!(h > 0.0)) {
    std::ostringstream os;
    os << "effective horizon m + kappa*x/3 = " << h << " is not positive";
    throw DomainError(os.str());
  }
  return h;
}

}  // namespace detail

// P{tau < m | S_m = s} for a standardized zero-drift walk.
inline double bridge_crossing_approx(const ZeroDriftParams& p, bool clamp = true) {
  if (!(p.b >= 0.0)) throw DomainError("level b must be >= 0");
  if (!(p.s_or_c < p.b)) throw DomainError("bridge endpoint s must be < b");
  const double s = p.s_or_c;
  const double h = detail::effective_horizon(p.m, p.kappa, s);
  const double br = p.b + p.rho_plus;
  const double v = std::exp(-2.0 * br * (br - s - p.kappa / 3.0) / h);
  return clamp ? detail::clamp01(v) : v;
}

// P{tau < m, S_m < c} for a standardized zero-drift walk.
inline double joint_ruin_approx(const ZeroDriftParams& p) {
  if (!(p.b >= 0.0)) throw DomainError("level b must be >= 0");
  if (!(p.s_or_c <= p.b)) throw DomainError("cutoff c must be <= b");
  const double c = p.s_or_c;
  const double h = detail::effective_horizon(p.m, p.kappa, c);
  return normal_cdf((c + p.kappa / 3.0 - 2.0 * (p.b + p.rho_plus)) / std::sqrt(h));
}

struct CorrectedParams {
  double b = 0.0;
  double c = 0.0;
  double m = 1.0;
  double delta_gap = 0.0;
  double rho_plus = 0.0;
  double kappa = 0.0;
  double r_factor = 1.0;
  int j = 0;
};

// Joint probability under the tilt alpha_j, with Delta = alpha_1 - alpha_0.
inline double corrected_joint_approx(const CorrectedParams& p, bool clamp = true) {
  if (!(p.b >= 0.0)) throw DomainError("level b must be >= 0");
  if (!(p.c <= p.b)) throw DomainError("cutoff c must be <= b");
  if (!(p.delta_gap >= 0.0)) throw DomainError("Delta must be >= 0");
  if (!(p.r_factor > 0.0)) throw DomainError("r_factor must be > 0");
  if (p.j != 0 && p.j != 1) throw DomainError("j must be 0 or 1");
  const double h = detail::effective_horizon(p.m, p.kappa, p.c);
  const double sign = p.j == 0 ? 1.0 : -1.0;
  const double br = p.b + p.rho_plus;
  const double rh = std::sqrt(h);
  const double z = (p.c + p.kappa / 3.0 - 2.0 * br) / rh + 0.5 * sign * p.delta_gap * rh;
  const double v = p.r_factor * std::exp(-sign * p.delta_gap * br) * normal_cdf(z);
  return clamp ? detail::clamp01(v) : v;
}

// Upper bound for sup_b E R(b): E(xi^+)^2 / E xi.
inline double lorden_bound(double e_xi_plus_sq, double e_xi) {
  if (!(e_xi > 0.0)) throw DomainError("lorden_bound needs a positive mean increment");
  if (!(e_xi_plus_sq >= 0.0)) throw DomainError("E(xi+)^2 must be >= 0");
  return e_xi_plus_sq / e_xi;
}

struct StoppedSample {
  std::size_t x0 = 0;
  std::size_t x_T = 0;
  double T = 0.0;
  double s_T = 0.0;
};

struct WaldResidual {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

// Mean of S_T - mu T - (delta(X_T) - delta(X_0)), which vanishes in
// expectation for integrable stopping times.
inline WaldResidual wald_residual(double mu, const Eigen::VectorXd& delta,
                                  std::span<const StoppedSample> samples) {
  RunningStats st;
  const auto K = static_cast<std::size_t>(delta.size());
  for (const auto& s : samples) {
    if (s.x0 >= K || s.x_T >= K) throw DomainError("stopped sample state outside the Poisson solution");
    st.add(s.s_T - mu * s.T - (delta(static_cast<Eigen::Index>(s.x_T)) - delta(static_cast<Eigen::Index>(s.x0))));
  }
  WaldResidual r;
  r.n = samples.size();
  r.mean = st.mean();
  r.std_error = st.std_error();
  return r;
}

}  // namespace mrw
