#include <cmath>

#include <gtest/gtest.h>

#include "../common/test_models.hpp"
#include "mrw/spectral.hpp"

using mrw::FiniteModel;
using mrw::IncrementLaw;
using testmodels::mat2;

TEST(Stationary, Examples) {
  auto half = FiniteModel::by_source(mat2(0.5, 0.5, 0.5, 0.5), {IncrementLaw::point_mass(0), IncrementLaw::point_mass(0)});
  auto pi = mrw::stationary_distribution(half);
  EXPECT_NEAR(pi(0), 0.5, 1e-15);
  pi = mrw::stationary_distribution(testmodels::gauss2());
  EXPECT_NEAR(pi(0), 0.75, 1e-14);
  EXPECT_NEAR(pi(1), 0.25, 1e-14);
  EXPECT_EQ(mrw::stationary_distribution(testmodels::std_normal())(0), 1.0);
}

TEST(Stationary, StructuralErrors) {
  auto periodic = FiniteModel::by_source(mat2(0, 1, 1, 0), {IncrementLaw::point_mass(0), IncrementLaw::point_mass(1)});
  try {
    mrw::stationary_distribution(periodic);
    FAIL();
  } catch (const mrw::StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("period 2"), std::string::npos);
  }
  auto reducible = FiniteModel::by_source(mat2(1, 0, 0.5, 0.5), {IncrementLaw::point_mass(0), IncrementLaw::point_mass(1)});
  try {
    mrw::stationary_distribution(reducible);
    FAIL();
  } catch (const mrw::StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("{1}"), std::string::npos);
  }
  EXPECT_THROW(FiniteModel(mat2(0.5, 0.4, 0.5, 0.5), FiniteModel::LawMatrix(2, std::vector<IncrementLaw>(2))),
               mrw::StructuralError);
}

TEST(Poisson, Examples) {
  auto flat = FiniteModel::by_source(mat2(0.9, 0.1, 0.3, 0.7), {IncrementLaw::gaussian(1, 1), IncrementLaw::gaussian(1, 2)});
  EXPECT_LT(mrw::solve_poisson(flat).delta.cwiseAbs().maxCoeff(), 1e-14);
  auto sym = FiniteModel::by_source(mat2(0.5, 0.5, 0.5, 0.5), {IncrementLaw::point_mass(1), IncrementLaw::point_mass(-1)});
  auto p = mrw::solve_poisson(sym);
  EXPECT_NEAR(p.delta(0), -1, 1e-14);
  EXPECT_NEAR(p.delta(1), 1, 1e-14);
  EXPECT_EQ(mrw::solve_poisson(testmodels::std_normal()).delta(0), 0);
}

TEST(Poisson, InvariantsOnSuite) {
  for (const auto& [name, m] : testmodels::spectral_suite()) {
    auto p = mrw::solve_poisson(m);
    EXPECT_LE(p.residual, 1e-10) << name;
    EXPECT_LE(std::abs(m.stationary().dot(p.delta)), 1e-12) << name;
  }
}

TEST(TiltedOperator, Examples) {
  auto m = testmodels::gauss2();
  EXPECT_EQ(mrw::tilted_operator_matrix(m, 0), m.transition());
  EXPECT_NEAR(mrw::tilted_operator_matrix(testmodels::std_normal(), 0.6)(0, 0), std::exp(0.18), 1e-15);
  auto coin = FiniteModel::iid(IncrementLaw::two_point(1, 0.5, -1));
  EXPECT_NEAR(mrw::tilted_operator_matrix(coin, 0.8)(0, 0), std::cosh(0.8), 1e-15);
  try {
    mrw::tilted_operator_matrix(testmodels::mixed3(), 2.5);
    FAIL();
  } catch (const mrw::DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("2->0"), std::string::npos);
  }
}

TEST(Perron, Examples) {
  Eigen::Vector2d w(0.5, 0.5);
  auto p = mrw::perron_eigen(mat2(0.9, 0.1, 0.3, 0.7), Eigen::Vector2d(0.75, 0.25));
  EXPECT_NEAR(p.lambda, 1, 1e-14);
  EXPECT_NEAR(p.r(0), 1, 1e-13);
  EXPECT_NEAR(p.r(1), 1, 1e-13);
  auto q = mrw::perron_eigen(Eigen::MatrixXd::Constant(1, 1, 3.5), Eigen::VectorXd::Ones(1));
  EXPECT_EQ(q.lambda, 3.5);
  EXPECT_EQ(q.r(0), 1);
  auto s = mrw::perron_eigen(mat2(0, 2, 2, 0), w);
  EXPECT_NEAR(s.lambda, 2, 1e-14);
  EXPECT_NEAR(s.r(0), 1, 1e-14);
  EXPECT_NEAR(s.r(1), 1, 1e-14);
  EXPECT_NEAR(s.l.dot(s.r), 1, 1e-14);
}

TEST(Spectral, GaugeAtZero) {
  for (const auto& [name, m] : testmodels::spectral_suite()) {
    auto d = mrw::spectral_decomposition(m, 0);
    EXPECT_EQ(d.lambda, 1.0) << name;
    EXPECT_EQ(d.Lambda, 0.0) << name;
    EXPECT_TRUE((d.r.array() == 1.0).all()) << name;
    EXPECT_LE((d.pi_alpha - m.stationary()).cwiseAbs().maxCoeff(), 1e-12) << name;
    // the numerical eigensolver agrees with the gauge near 0
    if (m.states() > 1) {
      auto p = mrw::perron_eigen(m.transition(), m.stationary());
      EXPECT_NEAR(p.lambda, 1, 1e-12) << name;
      EXPECT_LE((p.r.array() - 1).abs().maxCoeff(), 1e-12) << name;
    }
  }
}

TEST(Spectral, EigenResidualsAndContinuity) {
  for (const auto& [name, m] : testmodels::spectral_suite()) {
    for (double a : {-0.4, -0.05, 0.05, 0.3, 0.9}) {
      auto d = mrw::spectral_decomposition(m, a);
      auto A = mrw::tilted_operator_matrix(m, a);
      EXPECT_LE((A * d.r - d.lambda * d.r).cwiseAbs().maxCoeff() / d.lambda, 1e-10) << name;
      EXPECT_LE((d.l.transpose() * A - d.lambda * d.l.transpose()).cwiseAbs().maxCoeff() / d.lambda, 1e-10) << name;
      EXPECT_NEAR(m.stationary().dot(d.r), 1, 1e-12) << name;
    }
    auto d = mrw::spectral_decomposition(m, 1e-7);
    EXPECT_LE((d.r.array() - 1).abs().maxCoeff(), 1e-5) << name;
  }
}

TEST(Cumulants, Examples) {
  auto c = mrw::cumulants(testmodels::std_normal(), 10);
  EXPECT_EQ(c.mu, 0);
  EXPECT_EQ(c.sigma2, 1);
  EXPECT_EQ(c.kappa, 0);
  EXPECT_EQ(c.kappa_nu, 0);
  c = mrw::cumulants(testmodels::centered_exp(), 10);
  EXPECT_NEAR(c.mu, 0, 1e-15);
  EXPECT_NEAR(c.sigma2, 1, 1e-14);
  EXPECT_NEAR(c.kappa, 2, 1e-14);
  c = mrw::cumulants(FiniteModel::iid(IncrementLaw::point_mass(1.5)), 10);
  EXPECT_EQ(c.mu, 1.5);
  EXPECT_EQ(c.sigma2, 0);
  EXPECT_EQ(c.kappa, 0);
  EXPECT_THROW(mrw::cumulants(testmodels::std_normal(), 0), mrw::DomainError);
}

// kappa_nu is the summed expected centered increment from nu.
TEST(Cumulants, KappaNuDirect) {
  auto m = testmodels::gauss2();
  Eigen::Vector2d nu(1, 0);
  auto c = mrw::cumulants(m, 500, nu);
  const Eigen::VectorXd f = m.conditional_mean();
  Eigen::RowVectorXd dist = nu.transpose();
  double sum = 0;
  for (int t = 0; t < 500; ++t) {
    sum += dist.dot(f) - c.mu;
    dist = dist * m.transition();
  }
  EXPECT_NEAR(c.kappa_nu, sum, 1e-12);
  EXPECT_EQ(mrw::cumulants(m, 500).kappa_nu, 0);
}

TEST(Cumulants, ShortTruncationWarns) {
  auto m = FiniteModel::by_source(mat2(0.99, 0.01, 0.01, 0.99), {IncrementLaw::gaussian(1, 1), IncrementLaw::gaussian(-1, 1)});
  EXPECT_FALSE(mrw::cumulants(m, 5).warnings.empty());
  EXPECT_TRUE(mrw::cumulants(testmodels::gauss2(), 500).warnings.empty());
}

TEST(LambdaDerivatives, Examples) {
  auto d = mrw::lambda_derivatives(testmodels::std_normal());
  EXPECT_NEAR(d.d1, 0, 1e-12);
  EXPECT_NEAR(d.d2, 1, 1e-9);
  EXPECT_NEAR(d.d3, 0, 1e-6);
  d = mrw::lambda_derivatives(testmodels::centered_exp());
  EXPECT_NEAR(d.d1, 0, 1e-11);
  EXPECT_NEAR(d.d2, 1, 1e-8);
  EXPECT_NEAR(d.d3, 2, 1e-5);
  d = mrw::lambda_derivatives(FiniteModel::iid(IncrementLaw::point_mass(0.7)));
  EXPECT_NEAR(d.d1, 0.7, 1e-12);
  EXPECT_NEAR(d.d2, 0, 1e-9);
  EXPECT_NEAR(d.d3, 0, 1e-6);
}

TEST(LambdaDerivatives, AgreeWithSeries) {
  for (const auto& [name, m] : testmodels::spectral_suite()) {
    auto s = mrw::cumulants(m, 500);
    auto d = mrw::lambda_derivatives(m);
    EXPECT_LE(std::abs(d.d1 - s.mu), 1e-10) << name;
    EXPECT_LE(std::abs(d.d2 - s.sigma2), 1e-6 * s.sigma2) << name;
    EXPECT_LE(std::abs(d.d3 - s.kappa), 1e-3 * std::max(std::abs(s.kappa), std::pow(s.sigma2, 1.5))) << name;
  }
}

TEST(Tilt, Examples) {
  auto m = testmodels::gauss2();
  auto t0 = mrw::tilt_model(m, 0);
  EXPECT_EQ(t0.transition(), m.transition());
  EXPECT_EQ(mrw::tilt_model(testmodels::std_normal(), 0.5).law(0, 0), IncrementLaw::gaussian(0.5, 1));
  const double a = 0.35;
  auto coin = mrw::tilt_model(FiniteModel::iid(IncrementLaw::two_point(1, 0.5, -1)), a);
  EXPECT_NEAR(coin.law(0, 0).b(), std::exp(a) / (std::exp(a) + std::exp(-a)), 1e-15);
}

TEST(Tilt, WaldOneStepAndRoundTrip) {
  for (const auto& [name, m] : testmodels::spectral_suite()) {
    for (double a : {-0.3, 0.2, 0.6}) {
      auto d = mrw::spectral_decomposition(m, a);
      auto A = mrw::tilted_operator_matrix(m, a);
      const Eigen::VectorXd one_step = (A * d.r).cwiseQuotient(d.lambda * d.r);
      EXPECT_LE((one_step.array() - 1).abs().maxCoeff(), 1e-12) << name;
      auto t = mrw::tilt_model(m, a);
      EXPECT_LE((t.transition().rowwise().sum().array() - 1).abs().maxCoeff(), 1e-12) << name;
      EXPECT_LE((t.stationary() - d.pi_alpha).cwiseAbs().maxCoeff(), 1e-10) << name;
      auto back = mrw::tilt_model(t, -a);
      EXPECT_LE((back.transition() - m.transition()).cwiseAbs().maxCoeff(), 1e-10) << name;
      for (std::size_t i = 0; i < m.states(); ++i)
        for (std::size_t j = 0; j < m.states(); ++j) {
          EXPECT_NEAR(back.law(i, j).a(), m.law(i, j).a(), 1e-10) << name;
          EXPECT_NEAR(back.law(i, j).b(), m.law(i, j).b(), 1e-10) << name;
          EXPECT_NEAR(back.law(i, j).c(), m.law(i, j).c(), 1e-10) << name;
        }
    }
  }
}

// For a zero-drift base model the tilted drift has the sign of alpha.
TEST(Tilt, DriftOrdering) {
  auto m = FiniteModel::by_source(mat2(0.8, 0.2, 0.4, 0.6), {IncrementLaw::gaussian(0.25, 1.0), IncrementLaw::gaussian(-0.5, 0.8)});
  ASSERT_NEAR(m.drift(), 0, 1e-15);
  for (double a = -1.0; a <= 1.0001; a += 0.1) {
    const double drift = mrw::tilt_model(m, a).drift();
    if (std::abs(a) < 1e-9) {
      EXPECT_NEAR(drift, 0, 1e-14);
    } else {
      EXPECT_GT(drift * a, 0) << a;
    }
  }
}

TEST(Conjugate, Examples) {
  auto p = mrw::conjugate_root(testmodels::std_normal(), 0.3, true);
  EXPECT_NEAR(p.alpha0, -0.3, 1e-14);
  EXPECT_NEAR(p.delta_gap, 0.6, 1e-14);
  auto q = mrw::conjugate_root(testmodels::centered_exp(), 0.2, true);
  EXPECT_NEAR(q.alpha0, -0.23084220978425904, 1e-13);
  EXPECT_EQ(q.alpha1, 0.2);
  const double L = [](double a) { return -a - std::log(1 - a); }(q.alpha0);
  EXPECT_LE(std::abs(L - (-0.2 - std::log(0.8))), 1e-12);
  // from the negative side the positive root approaches the domain edge
  auto r = mrw::conjugate_root(testmodels::centered_exp(), -0.23084220978425904, true);
  EXPECT_NEAR(r.alpha1, 0.2, 1e-12);
}

TEST(Conjugate, Errors) {
  try {
    mrw::conjugate_root(FiniteModel::iid(IncrementLaw::point_mass(1)), 0.3, true);
    FAIL();
  } catch (const mrw::StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("Lambda affine"), std::string::npos);
  }
  EXPECT_THROW(mrw::conjugate_root(testmodels::std_normal(), 0.3, false), mrw::DomainError);
  EXPECT_THROW(mrw::conjugate_root(testmodels::gauss2(), 0.3, true), mrw::DomainError);
}

TEST(TimeReverse, Examples) {
  auto m = testmodels::gauss2();
  auto r = mrw::time_reverse(m);
  EXPECT_NEAR(r.transition()(1, 0), 0.3, 1e-14);
  EXPECT_NEAR(r.transition()(0, 1), 0.1, 1e-14);
  EXPECT_LE((r.stationary() - m.stationary()).cwiseAbs().maxCoeff(), 1e-14);
  Eigen::MatrixXd D(3, 3);
  D << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  auto ds = FiniteModel::by_source(D, {IncrementLaw::point_mass(0), IncrementLaw::point_mass(1), IncrementLaw::point_mass(2)});
  EXPECT_LE((mrw::time_reverse(ds).transition() - D.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  auto rev = FiniteModel::by_source(mat2(0.5, 0.5, 0.25, 0.75), {IncrementLaw::point_mass(0), IncrementLaw::point_mass(1)});
  EXPECT_LE((mrw::time_reverse(rev).transition() - rev.transition()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TimeReverse, Involution) {
  for (const auto& [name, m] : testmodels::spectral_suite()) {
    auto rr = mrw::time_reverse(mrw::time_reverse(m));
    EXPECT_LE((rr.transition() - m.transition()).cwiseAbs().maxCoeff(), 1e-12) << name;
    EXPECT_EQ(rr.laws(), m.laws()) << name;
  }
}

TEST(TailRoot, Examples) {
  EXPECT_NEAR(mrw::tail_root(FiniteModel::iid(IncrementLaw::gaussian(-0.5, 1))), 1.0, 1e-12);
  EXPECT_NEAR(mrw::tail_root(FiniteModel::iid(IncrementLaw::gaussian(-0.3, 0.5))), 2 * 0.3 / 0.25, 1e-12);
  const double a = mrw::tail_root(FiniteModel::iid(IncrementLaw::two_point(1, 0.2, -2)));
  EXPECT_NEAR(a, 1.5745207675794883, 1e-12);
  EXPECT_LE(std::abs(0.2 * std::exp(a) + 0.8 * std::exp(-2 * a) - 1), 1e-10);
  EXPECT_THROW(mrw::tail_root(testmodels::std_normal()), mrw::DomainError);
  // increments bounded above by 0 never return lambda to 1
  EXPECT_THROW(mrw::tail_root(FiniteModel::iid(IncrementLaw::two_point(0, 0.5, -1))), mrw::DomainError);
}

// Reference derivatives of log lambda from 60-digit eigenvalues (oracles.py).
TEST(LambdaDerivatives, FrozenHighPrecisionValues) {
  struct Ref {
    FiniteModel m;
    double d1, d2, d3;
  };
  const Ref refs[] = {
      {testmodels::gauss2(), 0.125, 2.5275, -5.27554687499998},
      {testmodels::twopoint2(), 0.028571428571428587, 1.5323615160349853, 0.75516677574819999},
      {testmodels::mixed3(), 0.026969696969696976, 0.55116430141636758, -0.098336588975304309},
  };
  for (const auto& r : refs) {
    auto s = mrw::cumulants(r.m, 500);
    EXPECT_NEAR(s.mu, r.d1, 1e-14);
    EXPECT_NEAR(s.sigma2, r.d2, 1e-12 * r.d2);
    EXPECT_NEAR(s.kappa, r.d3, 1e-10 * std::abs(r.d3));
  }
}
