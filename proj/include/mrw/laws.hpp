#pragma once

// Parametric increment laws with closed-form transforms and exponential tilts.
//
// Four families are supported:
//   point mass       xi = v
//   gaussian         xi ~ N(mean, sd^2)
//   exponential      xi = shift + E,  E ~ Exp(rate)
//   two-point        xi = v1 with probability p1, else v2
//
// Each family is closed under exponential tilting, i.e. the law with density
// proportional to e^{alpha x} F(dx) belongs to the same family.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mrw/error.hpp"
#include "mrw/rng.hpp"

namespace mrw {

// Open interval of alphas where E e^{alpha xi} is finite.
struct TransformDomain {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double a) const { return a > lo && a < hi; }
};

class IncrementLaw {
 public:
  enum class Kind { point_mass, gaussian, exponential, two_point };

  IncrementLaw() = default;

  static IncrementLaw point_mass(double v) {
    check_finite(v, "point mass value");
    return IncrementLaw(Kind::point_mass, v, 0.0, 0.0);
  }
  static IncrementLaw gaussian(double mean, double sd) {
    check_finite(mean, "gaussian mean");
    if (!(sd > 0.0) || !std::isfinite(sd))
      throw DomainError("gaussian law needs sd > 0, got " + std::to_string(sd));
    return IncrementLaw(Kind::gaussian, mean, sd, 0.0);
  }
  static IncrementLaw exponential(double rate, double shift = 0.0) {
    if (!(rate > 0.0) || !std::isfinite(rate))
      throw DomainError("exponential law needs rate > 0, got " + std::to_string(rate));
    check_finite(shift, "exponential shift");
    return IncrementLaw(Kind::exponential, rate, shift, 0.0);
  }
  static IncrementLaw two_point(double v1, double p1, double v2) {
    check_finite(v1, "two-point value v1");
    check_finite(v2, "two-point value v2");
    if (!(p1 >= 0.0 && p1 <= 1.0))
      throw DomainError("two-point law needs p1 in [0,1], got " + std::to_string(p1));
    return IncrementLaw(Kind::two_point, v1, p1, v2);
  }

  Kind kind() const { return kind_; }

  // Raw parameters, meaning depends on kind():
  //   point_mass  (v, -, -)   gaussian (mean, sd, -)
  //   exponential (rate, shift, -)   two_point (v1, p1, v2)
  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }

  TransformDomain domain() const {
    TransformDomain d;
    if (kind_ == Kind::exponential) d.hi = a_;
    return d;
  }

  // E exp(alpha xi). Throws DomainError outside domain().
  double mgf(double alpha) const { return std::exp(log_mgf(alpha)); }

  double log_mgf(double alpha) const {
    if (alpha == 0.0) return 0.0;
    if (!domain().contains(alpha)) {
      std::ostringstream os;
      os << "alpha=" << alpha << " outside transform domain of " << describe();
      throw DomainError(os.str());
    }
    switch (kind_) {
      case Kind::point_mass:
        return alpha * a_;
      case Kind::gaussian:
        return alpha * a_ + 0.5 * alpha * alpha * b_ * b_;
      case Kind::exponential:
        return alpha * b_ + std::log(a_ / (a_ - alpha));
      case Kind::two_point: {
        // log(p e^{a v1} + (1-p) e^{a v2}) evaluated without overflow.
        const double x1 = alpha * a_, x2 = alpha * c_;
        if (b_ == 1.0) return x1;
        if (b_ == 0.0) return x2;
        const double m = std::max(x1, x2);
        return m + std::log(b_ * std::exp(x1 - m) + (1.0 - b_) * std::exp(x2 - m));
      }
    }
    return 0.0;
  }

  // Law proportional to e^{alpha x} F(dx).
  IncrementLaw tilted(double alpha) const {
    if (alpha == 0.0) return *this;
    (void)log_mgf(alpha);  // domain check
    switch (kind_) {
      case Kind::point_mass:
        return *this;
      case Kind::gaussian:
        return gaussian(a_ + alpha * b_ * b_, b_);
      case Kind::exponential:
        return exponential(a_ - alpha, b_);
      case Kind::two_point: {
        if (b_ == 0.0 || b_ == 1.0) return *this;
        // p' = p e^{a v1} / (p e^{a v1} + (1-p) e^{a v2}), computed as a logistic.
        const double logit = std::log(b_ / (1.0 - b_)) + alpha * (a_ - c_);
        const double p = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                                    : std::exp(logit) / (1.0 + std::exp(logit));
        return two_point(a_, p, c_);
      }
    }
    return *this;
  }

  // Law of factor * xi, factor > 0.
  IncrementLaw scaled(double factor) const {
    if (!(factor > 0.0)) throw DomainError("law scale factor must be positive");
    switch (kind_) {
      case Kind::point_mass:
        return point_mass(factor * a_);
      case Kind::gaussian:
        return gaussian(factor * a_, factor * b_);
      case Kind::exponential:
        return exponential(a_ / factor, factor * b_);
      case Kind::two_point:
        return two_point(factor * a_, b_, factor * c_);
    }
    return *this;
  }

  // E xi^k for k = 1, 2, 3, 4.
  double raw_moment(int k) const {
    switch (kind_) {
      case Kind::point_mass:
        return std::pow(a_, k);
      case Kind::gaussian: {
        const double m = a_, s2 = b_ * b_;
        switch (k) {
          case 1: return m;
          case 2: return m * m + s2;
          case 3: return m * m * m + 3.0 * m * s2;
          case 4: return m * m * m * m + 6.0 * m * m * s2 + 3.0 * s2 * s2;
        }
        break;
      }
      case Kind::exponential: {
        // E (s + E)^k with E E^j = j!/rate^j.
        const double s = b_, r = a_;
        const double e1 = 1.0 / r, e2 = 2.0 / (r * r), e3 = 6.0 / (r * r * r),
                     e4 = 24.0 / (r * r * r * r);
        switch (k) {
          case 1: return s + e1;
          case 2: return s * s + 2.0 * s * e1 + e2;
          case 3: return s * s * s + 3.0 * s * s * e1 + 3.0 * s * e2 + e3;
          case 4: return s * s * s * s + 4.0 * s * s * s * e1 + 6.0 * s * s * e2 + 4.0 * s * e3 + e4;
        }
        break;
      }
      case Kind::two_point:
        return b_ * std::pow(a_, k) + (1.0 - b_) * std::pow(c_, k);
    }
    throw DomainError("raw_moment supports k = 1..4");
  }

  double mean() const { return raw_moment(1); }
  double variance() const {
    const double m = mean();
    return raw_moment(2) - m * m;
  }

  // E (max(xi, 0))^2, the numerator of the Lorden overshoot bound.
  double positive_part_second_moment() const {
    switch (kind_) {
      case Kind::point_mass:
        return a_ > 0 ? a_ * a_ : 0.0;
      case Kind::gaussian: {
        const double m = a_, s = b_, z = m / s;
        const double Phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
        const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        return (m * m + s * s) * Phi + m * s * phi;
      }
      case Kind::exponential: {
        const double r = a_, s = b_;
        if (s >= 0) return raw_moment(2);
        // given E > -s, s + E ~ Exp(r) by memorylessness
        return std::exp(r * s) * 2.0 / (r * r);
      }
      case Kind::two_point: {
        const double p1 = a_ > 0 ? a_ * a_ : 0.0, p2 = c_ > 0 ? c_ * c_ : 0.0;
        return b_ * p1 + (1.0 - b_) * p2;
      }
    }
    return 0.0;
  }

  double sample(RandomStream& g) const {
    switch (kind_) {
      case Kind::point_mass:
        return a_;
      case Kind::gaussian:
        return a_ + b_ * g.normal();
      case Kind::exponential:
        return b_ + g.exponential() / a_;
      case Kind::two_point:
        return g.uniform() < b_ ? a_ : c_;
    }
    return 0.0;
  }

  bool is_lattice() const { return kind_ == Kind::point_mass || kind_ == Kind::two_point; }

  // Atoms with positive probability; only for lattice laws.
  std::vector<std::pair<double, double>> atoms() const {
    if (kind_ == Kind::point_mass) return {{a_, 1.0}};
    if (kind_ == Kind::two_point) {
      std::vector<std::pair<double, double>> out;
      if (b_ > 0.0) out.emplace_back(a_, b_);
      if (b_ < 1.0) out.emplace_back(c_, 1.0 - b_);
      return out;
    }
    throw StructuralError(describe() + " is not a lattice law");
  }

  bool is_degenerate() const {
    return kind_ == Kind::point_mass ||
           (kind_ == Kind::two_point && (b_ == 0.0 || b_ == 1.0 || a_ == c_));
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::point_mass: os << "point_mass(" << a_ << ")"; break;
      case Kind::gaussian: os << "gaussian(" << a_ << ", " << b_ << ")"; break;
      case Kind::exponential: os << "exponential(rate=" << a_ << ", shift=" << b_ << ")"; break;
      case Kind::two_point: os << "two_point(" << a_ << ", " << b_ << "; " << c_ << ")"; break;
    }
    return os.str();
  }

  friend bool operator==(const IncrementLaw&, const IncrementLaw&) = default;

 private:
  IncrementLaw(Kind k, double a, double b, double c) : kind_(k), a_(a), b_(b), c_(c) {}

  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
  }

  Kind kind_ = Kind::point_mass;
  double a_ = 0.0, b_ = 0.0, c_ = 0.0;
};

}  // namespace mrw
