#pragma once

// Exact linear algebra for finite models: stationary law, Poisson equation,
// tilted operator and its Perron eigendata, cumulants, conjugate roots,
// tilted and time-reversed chains, and the tail exponent.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include "mrw/error.hpp"
#include "mrw/finite_model.hpp"
#include "mrw/laws.hpp"

namespace mrw {

inline Eigen::VectorXd stationary_distribution(const FiniteModel& model) {
  model.require_ergodic();
  const Eigen::VectorXd& pi = model.stationary();
  const double res = (pi.transpose() * model.transition() - pi.transpose()).cwiseAbs().maxCoeff();
  if (res > 1e-12) {
    std::ostringstream os;
    os << "stationary solve residual " << res << " exceeds 1e-12";
    throw ConvergenceError(os.str());
  }
  return pi;
}

struct PoissonSolution {
  Eigen::VectorXd delta;
  double residual = 0.0;
};

// Solves P delta - delta = fbar - mu with pi . delta = 0, where fbar is the
// conditional mean increment per state.
inline PoissonSolution solve_poisson(const FiniteModel& model) {
  const Eigen::VectorXd pi = stationary_distribution(model);
  const Eigen::MatrixXd& P = model.transition();
  const auto K = P.rows();
  const Eigen::VectorXd f = model.conditional_mean();
  const double mu = pi.dot(f);
  const Eigen::VectorXd g = f - Eigen::VectorXd::Constant(K, mu);
  // fundamental matrix Z = (I - P + 1 pi)^{-1}; pi Z = pi keeps the gauge
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(K, K) - P + Eigen::VectorXd::Ones(K) * pi.transpose();
  auto lu = A.fullPivLu();
  if (!lu.isInvertible()) throw ConvergenceError("Poisson system is singular beyond its known rank deficiency");
  PoissonSolution out;
  out.delta = lu.solve(-g);
  out.delta += lu.solve(-g - A * out.delta);
  out.delta.array() -= pi.dot(out.delta);
  out.residual = ((P * out.delta - out.delta) - g).cwiseAbs().maxCoeff();
  return out;
}

// Entry (i,j) = P(i,j) E[exp(alpha xi) | i -> j].
inline Eigen::MatrixXd tilted_operator_matrix(const FiniteModel& model, double alpha) {
  Eigen::MatrixXd A = model.transition();
  if (alpha == 0.0) return A;
  model.for_each_edge([&](std::size_t i, std::size_t j) {
    const auto& law = model.law(i, j);
    if (!law.domain().contains(alpha)) {
      std::ostringstream os;
      os << "alpha=" << alpha << " outside transform domain of transition " << i << "->" << j << " ("
         << law.describe() << ")";
      throw DomainError(os.str());
    }
    A(i, j) *= law.mgf(alpha);
  });
  return A;
}

struct PerronPair {
  double lambda = 0.0;
  Eigen::VectorXd r;  // right eigenvector, sum_i w_i r_i = 1
  Eigen::VectorXd l;  // left eigenvector, l . r = 1
  std::size_t iterations = 0;
  double residual = 0.0;  // max relative residual of both eigen-equations
};

namespace detail {

// Newton steps on the bordered system [(A - lambda I) v = 0, 1.v = 1].
inline void polish_eigenpair(const Eigen::MatrixXd& A, double& lambda, Eigen::VectorXd& v) {
  const auto K = A.rows();
  for (int it = 0; it < 3; ++it) {
    Eigen::MatrixXd J(K + 1, K + 1);
    J.topLeftCorner(K, K) = A - lambda * Eigen::MatrixXd::Identity(K, K);
    J.topRightCorner(K, 1) = -v;
    J.bottomLeftCorner(1, K).setOnes();
    J(K, K) = 0.0;
    Eigen::VectorXd rhs(K + 1);
    rhs.head(K) = lambda * v - A * v;
    rhs(K) = 1.0 - v.sum();
    const Eigen::VectorXd d = J.fullPivLu().solve(rhs);
    if (!d.allFinite()) return;
    v += d.head(K);
    lambda += d(K);
  }
}

// Power iteration on A + sI, s = max row sum, which removes the periodic
// part of the peripheral spectrum.
inline std::optional<std::pair<double, Eigen::VectorXd>> power_iteration(const Eigen::MatrixXd& A,
                                                                         std::size_t& iters) {
  const auto K = A.rows();
  const double s = A.rowwise().sum().maxCoeff();
  Eigen::MatrixXd B = A + s * Eigen::MatrixXd::Identity(K, K);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  for (iters = 1; iters <= 100000; ++iters) {
    Eigen::VectorXd w = B * v;
    w /= w.sum();
    const double diff = (w - v).cwiseAbs().maxCoeff() / w.cwiseAbs().maxCoeff();
    v = std::move(w);
    if (diff <= 1e-12) {
      const double lambda = (A * v).sum() / v.sum();
      return std::make_pair(lambda, v);
    }
  }
  return std::nullopt;
}

inline std::pair<double, Eigen::VectorXd> dense_perron(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed");
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < A.rows(); ++k)
    if (es.eigenvalues()(k).real() > es.eigenvalues()(best).real()) best = k;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  if (v.sum() < 0) v = -v;
  v = v.cwiseAbs();
  return {es.eigenvalues()(best).real(), v / v.sum()};
}

inline std::pair<double, Eigen::VectorXd> perron_vector(const Eigen::MatrixXd& A, std::size_t& iters) {
  auto pv = power_iteration(A, iters);
  if (!pv) {
    if (A.rows() > 64) {
      std::ostringstream os;
      os << "power iteration did not reach 1e-12 after " << iters - 1 << " iterations (K=" << A.rows()
         << ")";
      throw ConvergenceError(os.str());
    }
    pv = dense_perron(A);
  }
  polish_eigenpair(A, pv->first, pv->second);
  return *pv;
}

}  // namespace detail

// Perron root of a nonnegative irreducible matrix with r normalized by
// sum_i w_i r_i = 1 and l by l . r = 1.
inline PerronPair perron_eigen(const Eigen::MatrixXd& A, const Eigen::VectorXd& w) {
  const auto K = A.rows();
  if (K < 1 || A.cols() != K) throw StructuralError("perron_eigen needs a square nonempty matrix");
  if (w.size() != K) throw StructuralError("gauge weights must have one entry per state");
  if ((A.array() < 0.0).any() || !A.allFinite())
    throw StructuralError("perron_eigen needs a finite nonnegative matrix");
  const auto st = detail::analyze_structure(A);
  if (!st.irreducible) {
    std::ostringstream os;
    os << "matrix is reducible: states {";
    for (std::size_t k = 0; k < st.unreachable.size(); ++k) os << (k ? ", " : "") << st.unreachable[k];
    os << "} do not communicate with state 0";
    throw StructuralError(os.str());
  }
  PerronPair out;
  if (K == 1) {
    out.lambda = A(0, 0);
    out.r = Eigen::VectorXd::Constant(1, 1.0 / w(0));
    out.l = Eigen::VectorXd::Constant(1, w(0));
    return out;
  }
  std::size_t it_r = 0, it_l = 0;
  auto [lambda, r] = detail::perron_vector(A, it_r);
  auto [lambda_l, l] = detail::perron_vector(A.transpose(), it_l);
  out.iterations = it_r + it_l;
  r /= w.dot(r);
  l /= l.dot(r);
  out.lambda = l.dot(A * r) / l.dot(r);
  out.r = std::move(r);
  out.l = std::move(l);
  if ((out.r.array() <= 0.0).any() || (out.l.array() <= 0.0).any())
    throw ConvergenceError("Perron vectors are not strictly positive");
  const double sr = (A * out.r - out.lambda * out.r).cwiseAbs().maxCoeff() /
                    (out.lambda * out.r.cwiseAbs().maxCoeff());
  const double sl = (out.l.transpose() * A - out.lambda * out.l.transpose()).cwiseAbs().maxCoeff() /
                    (out.lambda * out.l.cwiseAbs().maxCoeff());
  out.residual = std::max(sr, sl);
  if (out.residual > 1e-10) {
    std::ostringstream os;
    os << "Perron residual " << out.residual << " exceeds 1e-10 after " << out.iterations
       << " iterations";
    throw ConvergenceError(os.str());
  }
  return out;
}

struct SpectralDecomposition {
  double alpha = 0.0;
  double lambda = 1.0;
  double Lambda = 0.0;
  Eigen::VectorXd r;
  Eigen::VectorXd l;
  Eigen::VectorXd pi_alpha;
};

inline SpectralDecomposition spectral_decomposition(const FiniteModel& model, double alpha) {
  const Eigen::VectorXd pi = stationary_distribution(model);
  const auto K = pi.size();
  SpectralDecomposition d;
  d.alpha = alpha;
  if (alpha == 0.0) {
    d.r = Eigen::VectorXd::Ones(K);
    d.l = pi;
    d.pi_alpha = pi;
    return d;
  }
  const Eigen::MatrixXd A = tilted_operator_matrix(model, alpha);
  if (K == 1) {
    d.Lambda = model.law(0, 0).log_mgf(alpha);
    d.lambda = std::exp(d.Lambda);
    d.r = d.l = d.pi_alpha = Eigen::VectorXd::Ones(1);
    return d;
  }
  auto p = perron_eigen(A, pi);
  d.lambda = p.lambda;
  d.Lambda = std::log(p.lambda);
  d.pi_alpha = p.l.cwiseProduct(p.r);
  d.pi_alpha /= d.pi_alpha.sum();
  d.r = std::move(p.r);
  d.l = std::move(p.l);
  return d;
}

// Lambda(alpha) = log of the Perron root of the tilted operator.
inline double log_perron_root(const FiniteModel& model, double alpha) {
  if (alpha == 0.0) return 0.0;
  if (model.states() == 1) {
    const auto& law = model.law(0, 0);
    if (!law.domain().contains(alpha)) (void)tilted_operator_matrix(model, alpha);
    return law.log_mgf(alpha);
  }
  return spectral_decomposition(model, alpha).Lambda;
}

enum class CumulantRoute { series, lambda_derivative };

struct CumulantSet {
  double mu = 0.0;
  double sigma2 = 0.0;
  double kappa = 0.0;
  double kappa_nu = 0.0;
  std::size_t truncation = 0;
  CumulantRoute route = CumulantRoute::series;
  double truncation_error = 0.0;  // estimated size of the dropped tail
  std::vector<std::string> warnings;
};

// Second largest eigenvalue modulus of P; 0 for K = 1.
inline double subdominant_modulus(const Eigen::MatrixXd& P) {
  if (P.rows() < 2) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(P, false);
  std::vector<double> mods;
  for (Eigen::Index k = 0; k < P.rows(); ++k) mods.push_back(std::abs(es.eigenvalues()(k)));
  std::sort(mods.begin(), mods.end(), std::greater<>());
  return mods[1];
}

// Series route for mu, sigma^2, kappa and kappa_nu with every lag sum
// truncated at T. nu defaults to pi (kappa_nu = 0).
inline CumulantSet cumulants(const FiniteModel& model, std::size_t T,
                             std::optional<Eigen::VectorXd> nu = std::nullopt) {
  if (T < 1) throw DomainError("cumulant truncation T must be >= 1");
  const Eigen::VectorXd pi = stationary_distribution(model);
  const Eigen::MatrixXd& P = model.transition();
  const auto K = P.rows();
  if (nu && (nu->size() != K || std::abs(nu->sum() - 1.0) > 1e-12 || (nu->array() < 0).any()))
    throw DomainError("initial law nu must be a probability vector over the states");

  CumulantSet out;
  out.truncation = T;
  out.mu = pi.dot(model.conditional_mean());
  // D_k(i,j) = P(i,j) E[(xi - mu)^k | i -> j]
  Eigen::MatrixXd D1 = Eigen::MatrixXd::Zero(K, K), D2 = D1, D3 = D1;
  model.for_each_edge([&](std::size_t i, std::size_t j) {
    const auto& law = model.law(i, j);
    const double m = out.mu;
    const double e1 = law.raw_moment(1), e2 = law.raw_moment(2), e3 = law.raw_moment(3);
    D1(i, j) = P(i, j) * (e1 - m);
    D2(i, j) = P(i, j) * (e2 - 2 * m * e1 + m * m);
    D3(i, j) = P(i, j) * (e3 - 3 * m * e2 + 3 * m * m * e1 - m * m * m);
  });
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(K);
  const Eigen::VectorXd g = D1 * one;
  const Eigen::VectorXd h = D2 * one;

  // lag sums: sum_{t=1..T} P^{t-1} applied to g and h, and the matrix sum
  Eigen::MatrixXd Psum = Eigen::MatrixXd::Zero(K, K), Pt = Eigen::MatrixXd::Identity(K, K);
  for (std::size_t t = 1; t <= T; ++t) {
    Psum += Pt;
    Pt = Pt * P;
  }
  const Eigen::VectorXd Sg = Psum * g;
  const Eigen::RowVectorXd piD1 = pi.transpose() * D1;

  out.sigma2 = pi.dot(h) + 2.0 * piD1.dot(Sg);
  const double third = pi.dot(D3 * one);
  const double mixed = pi.transpose() * D2 * Sg;
  const double mixed2 = piD1 * Psum * h;
  const double triple = piD1 * Psum * D1 * Sg;
  out.kappa = third + 3.0 * (mixed + mixed2) + 6.0 * triple;
  out.kappa_nu = nu ? nu->dot(Sg) : 0.0;
  out.sigma2 = std::max(0.0, out.sigma2);

  const double rho = subdominant_modulus(P);
  out.truncation_error = rho < 1.0 ? std::pow(rho, static_cast<double>(T)) / (1.0 - rho) : 1.0;
  if (out.truncation_error > 1e-8) {
    std::ostringstream os;
    os << "truncation T=" << T << " leaves an estimated relative tail of " << out.truncation_error
       << " (second eigenvalue modulus " << rho << ")";
    out.warnings.push_back(os.str());
  }
  return out;
}

struct LambdaDerivatives {
  double d1 = 0.0, d2 = 0.0, d3 = 0.0;
  double err1 = 0.0, err2 = 0.0, err3 = 0.0;  // extrapolation error estimates
  double step = 0.0;
};

// Central differences of Lambda at 0 with steps h, h/2, h/4 and two rounds of
// Richardson extrapolation, h = min(width/8, 1e-2).
inline LambdaDerivatives lambda_derivatives(const FiniteModel& model) {
  const auto dom = model.domain();
  const double width = std::min(-dom.lo, dom.hi);
  if (!(width > 0.0)) throw DomainError("transform domain does not contain an interval around 0");
  LambdaDerivatives out;
  out.step = std::min(width / 8.0, 1e-2);
  auto L = [&](double a) { return log_perron_root(model, a); };
  struct Row {
    double d1, d2, d3;
  };
  auto stencil = [&](double h) {
    const double p1 = L(h), m1 = L(-h), p2 = L(2 * h), m2 = L(-2 * h);
    return Row{(p1 - m1) / (2 * h), (p1 + m1) / (h * h), (p2 - 2 * p1 + 2 * m1 - m2) / (2 * h * h * h)};
  };
  const Row a = stencil(out.step), b = stencil(out.step / 2), c = stencil(out.step / 4);
  auto rich = [](double x, double y, double z, double& err) {
    const double r1 = (4 * y - x) / 3, r2 = (4 * z - y) / 3;
    const double r = (16 * r2 - r1) / 15;
    err = std::abs(r - r2);
    return r;
  };
  out.d1 = rich(a.d1, b.d1, c.d1, out.err1);
  out.d2 = rich(a.d2, b.d2, c.d2, out.err2);
  out.d3 = rich(a.d3, b.d3, c.d3, out.err3);
  return out;
}

inline CumulantSet cumulants_from_lambda(const FiniteModel& model) {
  const auto d = lambda_derivatives(model);
  CumulantSet out;
  out.mu = d.d1;
  out.sigma2 = d.d2;
  out.kappa = d.d3;
  out.route = CumulantRoute::lambda_derivative;
  return out;
}

// Exponentially tilted model: p(i,j) P(i,j) phi_ij(alpha) r_j / (lambda r_i)
// with every law replaced by its tilt.
inline FiniteModel tilt_model(const FiniteModel& model, double alpha) {
  if (alpha == 0.0) return model;
  const auto sd = spectral_decomposition(model, alpha);
  const Eigen::MatrixXd A = tilted_operator_matrix(model, alpha);
  const auto K = A.rows();
  Eigen::MatrixXd Pa = Eigen::MatrixXd::Zero(K, K);
  FiniteModel::LawMatrix laws = model.laws();
  model.for_each_edge([&](std::size_t i, std::size_t j) {
    Pa(i, j) = A(i, j) * sd.r(j) / (sd.lambda * sd.r(i));
    laws[i][j] = model.law(i, j).tilted(alpha);
  });
  for (Eigen::Index i = 0; i < K; ++i) Pa.row(i) /= Pa.row(i).sum();
  return FiniteModel(std::move(Pa), std::move(laws));
}

// P~(j,i) = pi_i P(i,j) / pi_j, law on j -> i equal to the law on i -> j.
inline FiniteModel time_reverse(const FiniteModel& model) {
  const Eigen::VectorXd pi = stationary_distribution(model);
  const Eigen::MatrixXd& P = model.transition();
  const auto K = P.rows();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(K, K);
  FiniteModel::LawMatrix laws = model.laws();
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) {
      R(j, i) = pi(i) * P(i, j) / pi(j);
      laws[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
          model.law(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  for (Eigen::Index i = 0; i < K; ++i) R.row(i) /= R.row(i).sum();
  return FiniteModel(std::move(R), std::move(laws));
}

namespace detail {

// Finds x on the ray from 0 in direction dir (within the transform domain)
// with f(x) > 0, given f <= 0 near 0. Returns (inside, outside) bracket.
template <class F>
std::optional<std::pair<double, double>> bracket_on_ray(F&& f, double start, double dir,
                                                        const TransformDomain& dom) {
  const double edge = dir > 0 ? dom.hi : dom.lo;
  double inside = 0.0;
  double x = start;
  for (int k = 0; k < 200; ++k) {
    if (std::isfinite(edge) && std::abs(x) >= std::abs(edge)) {
      // walk towards the open edge instead of stepping past it
      x = inside + 0.5 * (edge - inside);
      if (x == inside || x == edge) return std::nullopt;
    }
    if (std::abs(x) > 1e8) return std::nullopt;
    if (f(x) > 0.0) return std::make_pair(inside, x);
    inside = x;
    x *= 2.0;
  }
  return std::nullopt;
}

template <class F>
double solve_bracketed(F&& f, double a, double b) {
  if (a > b) std::swap(a, b);
  boost::uintmax_t iters = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 1);
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  // return whichever end has the smaller residual
  return std::abs(f(r.first)) <= std::abs(f(r.second)) ? r.first : r.second;
}

}  // namespace detail

struct ConjugatePair {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double delta_gap = 0.0;
  double lambda_common = 1.0;
  double Lambda_common = 0.0;
};

// The opposite-sign root of Lambda(alpha') = Lambda(alpha). The base model
// must have zero drift, and the caller has to declare it.
inline ConjugatePair conjugate_root(const FiniteModel& model, double alpha, bool zero_drift_declared) {
  if (alpha == 0.0) throw DomainError("conjugate_root needs alpha != 0");
  const auto cs = cumulants(model, 500);
  const double scale = 1.0 + stationary_distribution(model).dot(model.conditional_moment(2));
  if (cs.sigma2 <= 1e-14 * scale) throw StructuralError("Lambda affine: degenerate increments have no conjugate root");
  if (!zero_drift_declared)
    throw DomainError("conjugate roots are defined for a zero-drift base model; declare it explicitly");
  if (std::abs(cs.mu) > 1e-9 * std::sqrt(scale)) {
    std::ostringstream os;
    os << "declared zero drift but E_pi xi = " << cs.mu;
    throw DomainError(os.str());
  }
  const auto dom = model.domain();
  const double target = log_perron_root(model, alpha);
  auto f = [&](double x) { return log_perron_root(model, x) - target; };
  const double dir = alpha > 0 ? -1.0 : 1.0;
  auto br = detail::bracket_on_ray(f, dir * std::abs(alpha), dir, dom);
  if (!br) throw DomainError("no conjugate in domain");
  const double other = detail::solve_bracketed(f, br->first, br->second);
  const double diff = std::abs(log_perron_root(model, other) - target);
  if (diff > 1e-12) {
    std::ostringstream os;
    os << "conjugate root polish reached |Lambda difference| = " << diff;
    throw ConvergenceError(os.str());
  }
  ConjugatePair p;
  p.alpha0 = std::min(alpha, other);
  p.alpha1 = std::max(alpha, other);
  p.delta_gap = p.alpha1 - p.alpha0;
  p.Lambda_common = target;
  p.lambda_common = std::exp(target);
  return p;
}

// The unique alpha* > 0 with lambda(alpha*) = 1 for a negative-drift model.
inline double tail_root(const FiniteModel& model) {
  const double mu = stationary_distribution(model).dot(model.conditional_mean());
  if (!(mu < 0.0)) throw DomainError("tail_root needs negative stationary drift");
  const auto dom = model.domain();
  auto f = [&](double x) { return log_perron_root(model, x); };
  // first get inside the region where Lambda < 0
  double start = 1e-3;
  if (std::isfinite(dom.hi)) start = std::min(start, 0.5 * dom.hi);
  while (f(start) >= 0.0) {
    start *= 0.5;
    if (start < 1e-12) throw ConvergenceError("could not locate Lambda < 0 near the origin");
  }
  auto br = detail::bracket_on_ray(f, start, 1.0, dom);
  if (!br) throw DomainError("no root in domain");
  double lo = std::max(br->first, start);
  const double root = detail::solve_bracketed(f, lo, br->second);
  const double res = std::abs(std::exp(f(root)) - 1.0);
  if (res > 1e-10) {
    std::ostringstream os;
    os << "tail root residual |lambda - 1| = " << res;
    throw ConvergenceError(os.str());
  }
  return root;
}

}  // namespace mrw
