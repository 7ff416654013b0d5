#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "../common/enumeration.hpp"
#include "../common/test_models.hpp"
#include "mrw/montecarlo.hpp"

using mrw::FiniteModel;
using mrw::IncrementLaw;
using mrw::InitialLaw;
using testmodels::enumerate;
using testmodels::is_expectation;
using testmodels::lattice3;
using testmodels::mat2;

namespace {

InitialLaw<std::size_t> start(std::size_t x) { return InitialLaw<std::size_t>{x}; }
InitialLaw<std::size_t> stationary() { return InitialLaw<std::size_t>{mrw::StationaryStart{}}; }

FiniteModel symmetric_pm1() { return FiniteModel::iid(IncrementLaw::two_point(1, 0.5, -1)); }

}  // namespace

TEST(DpOracle, SymmetricExamples) {
  auto r = mrw::dp_exact_oracle(symmetric_pm1(), start(0), 0, 0, 3);
  EXPECT_NEAR(r.crossing, 0.5, 1e-15);
  r = mrw::dp_exact_oracle(symmetric_pm1(), start(0), 1, 0, 4);
  EXPECT_NEAR(r.crossing, 0.25, 1e-15);
  EXPECT_EQ(r.lattice_step, 1);
  r = mrw::dp_exact_oracle(symmetric_pm1(), start(0), 0, 0, 1);
  EXPECT_EQ(r.crossing, 0);
}

TEST(DpOracle, MatchesEnumeration) {
  std::vector<FiniteModel> models = {symmetric_pm1(), testmodels::twopoint2(), lattice3(),
                                     FiniteModel::iid(IncrementLaw::two_point(0.7, 0.3, -0.35))};
  const std::vector<std::tuple<double, double, std::size_t>> cases = {
      {0, 0, 5}, {1, 0.5, 7}, {1.5, -1, 8}, {2, 2, 9}, {0.5, -0.5, 6}, {1, 1, 2}};
  for (std::size_t mi = 0; mi < models.size(); ++mi)
    for (const auto& [b, c, m] : cases)
      for (std::size_t x0 = 0; x0 < models[mi].states(); ++x0) {
        const auto [ec, ej] = enumerate(models[mi], x0, b, c, m);
        const auto r = mrw::dp_exact_oracle(models[mi], start(x0), b, c, m);
        EXPECT_NEAR(r.crossing, ec, 1e-12) << mi << " b=" << b << " m=" << m;
        EXPECT_NEAR(r.joint, ej, 1e-12) << mi << " b=" << b << " c=" << c << " m=" << m;
      }
}

TEST(DpOracle, StationaryStartAveragesStates) {
  const auto m = lattice3();
  const auto pi = mrw::stationary_distribution(m);
  double want = 0;
  for (std::size_t x = 0; x < 3; ++x) want += pi(x) * enumerate(m, x, 1, 0, 7).first;
  EXPECT_NEAR(mrw::dp_exact_oracle(m, stationary(), 1, 0, 7).crossing, want, 1e-12);
}

TEST(DpOracle, Rejections) {
  EXPECT_THROW(mrw::dp_exact_oracle(testmodels::std_normal(), start(0), 1, 0, 5), mrw::StructuralError);
  EXPECT_THROW(mrw::dp_exact_oracle(symmetric_pm1(), start(0), 1, 2, 5), mrw::DomainError);
  EXPECT_THROW(mrw::dp_exact_oracle(symmetric_pm1(), start(0), 1, 0, 100000, 1000), mrw::DomainError);
  auto irr = FiniteModel::iid(IncrementLaw::two_point(1, 0.5, -M_SQRT2));
  EXPECT_THROW(mrw::dp_exact_oracle(irr, start(0), 1, 0, 5), mrw::StructuralError);
}

TEST(McFirstPassage, AgreesWithDp) {
  const auto m = lattice3();
  const auto dp = mrw::dp_exact_oracle(m, stationary(), 1.5, 0.5, 12);
  const auto e = mrw::mc_first_passage(m, stationary(), 1.5, 12, 0.5, 200000, 11);
  EXPECT_LT(std::abs(e.crossing.value - dp.crossing), 4 * e.crossing.std_error);
  ASSERT_TRUE(e.joint);
  EXPECT_LT(std::abs(e.joint->value - dp.joint), 4 * e.joint->std_error);
  EXPECT_EQ(e.crossing.reps, 200000u);
  EXPECT_EQ(e.crossing.master_seed, 11u);
}

TEST(McFirstPassage, WorkerCountDoesNotChangeResult) {
  const auto m = testmodels::gauss2();
  const auto a = mrw::mc_first_passage(m, stationary(), 2, 30, 1.0, 5000, 3, 1);
  const auto b = mrw::mc_first_passage(m, stationary(), 2, 30, 1.0, 5000, 3, 4);
  EXPECT_EQ(a.crossing.value, b.crossing.value);
  EXPECT_EQ(a.joint->value, b.joint->value);
}

TEST(McFirstPassage, DoublingRepsShrinksErrorBySqrt2) {
  const auto m = symmetric_pm1();
  const auto a = mrw::mc_first_passage(m, start(0), 2, 20, std::nullopt, 40000, 5);
  const auto b = mrw::mc_first_passage(m, start(0), 2, 20, std::nullopt, 80000, 6);
  EXPECT_NEAR(a.crossing.std_error / b.crossing.std_error, std::sqrt(2.0), 0.05);
  EXPECT_FALSE(a.joint);
}

TEST(McFirstPassage, ArgumentChecks) {
  const auto m = symmetric_pm1();
  EXPECT_THROW(mrw::mc_first_passage(m, start(0), -1, 5, std::nullopt, 10, 1), mrw::DomainError);
  EXPECT_THROW(mrw::mc_first_passage(m, start(0), 1, 0, std::nullopt, 10, 1), mrw::DomainError);
  EXPECT_THROW(mrw::mc_first_passage(m, start(0), 1, 5, 2.0, 10, 1), mrw::DomainError);
  EXPECT_THROW(mrw::mc_first_passage(m, start(0), 1, 5, std::nullopt, 0, 1), mrw::DomainError);
}

TEST(ImportanceSampling, ZeroTiltIsPlainMonteCarlo) {
  for (const auto& m : {testmodels::gauss2(), lattice3(), testmodels::twopoint2()}) {
    const auto a = mrw::mc_first_passage(m, stationary(), 1.5, 25, 0.5, 3000, 9);
    const auto b = mrw::mc_importance_sampled(m, 0.0, stationary(), 1.5, 25, 0.5, 3000, 9);
    EXPECT_EQ(a.crossing.value, b.crossing.value);
    EXPECT_EQ(a.crossing.std_error, b.crossing.std_error);
    EXPECT_EQ(a.joint->value, b.joint->value);
    EXPECT_EQ(b.crossing.effective_sample_size, 3000);
  }
}

TEST(ImportanceSampling, WeightsAreExactOnEveryPath) {
  const auto m = lattice3();
  for (double alpha : {-0.4, 0.3, 0.9})
    for (std::size_t x0 = 0; x0 < 3; ++x0) {
      const double exact = mrw::dp_exact_oracle(m, start(x0), 1, 0, 8).crossing;
      EXPECT_NEAR(is_expectation(m, alpha, x0, 1, 8), exact, 1e-12) << alpha << " " << x0;
    }
}

TEST(ImportanceSampling, UnbiasedAgainstDp) {
  const auto m = lattice3();
  const auto dp = mrw::dp_exact_oracle(m, start(1), 3, 1, 14);
  const auto e = mrw::mc_importance_sampled(m, 0.6, start(1), 3, 14, 1.0, 100000, 21);
  EXPECT_LT(std::abs(e.crossing.value - dp.crossing), 4 * e.crossing.std_error);
  EXPECT_LT(std::abs(e.joint->value - dp.joint), 4 * e.joint->std_error);
  EXPECT_GT(e.crossing.effective_sample_size, 0);
}

TEST(ImportanceSampling, ReducesVarianceForRareCrossing) {
  // P(tau < 60) at b = 12 for a walk with drift -0.5
  const auto m = FiniteModel::iid(IncrementLaw::gaussian(-0.5, 1));
  const double root = mrw::tail_root(m);
  const auto plain = mrw::mc_first_passage(m, start(0), 12, 60, std::nullopt, 20000, 4);
  const auto is = mrw::mc_importance_sampled(m, root, start(0), 12, 60, std::nullopt, 20000, 4);
  EXPECT_GT(is.crossing.value, 0);
  // binomial SE at the true value is far larger
  const double p = is.crossing.value;
  EXPECT_LT(is.crossing.std_error, 0.1 * std::sqrt(p * (1 - p) / 20000));
  EXPECT_LE(plain.crossing.value, 1e-3);
}

TEST(Bridge, TwoStepExact) {
  const auto m = testmodels::std_normal();
  // S_1 | S_2 = s ~ N(s/2, 1/2)
  const double b = 0.8, s = -0.4;
  const double exact = 1 - mrw::normal_cdf((b - s / 2) / std::sqrt(0.5));
  const auto e = mrw::mc_bridge_conditional(m, b, s, 2, 200000, 1);
  EXPECT_LT(std::abs(e.value - exact), 4 * e.std_error);
  EXPECT_EQ(mrw::mc_bridge_conditional(m, b, s, 1, 100, 1).value, 0);
  EXPECT_THROW(mrw::mc_bridge_conditional(testmodels::gauss2(), b, s, 4, 10, 1), mrw::StructuralError);
  EXPECT_THROW(mrw::mc_bridge_conditional(m, b, b, 4, 10, 1), mrw::DomainError);
}

TEST(Bridge, ApproachesCorrectedFormula) {
  const auto m = testmodels::std_normal();
  const double rho = 0.58259715793901067;
  const auto e = mrw::mc_bridge_conditional(m, 10, 0, 400, 40000, 2);
  const double approx = mrw::bridge_crossing_approx({10, 0, 400, rho, 0});
  EXPECT_LT(std::abs(e.value - approx), 4 * e.std_error + 2e-3);
}

TEST(Ladder, ExponentialHeights) {
  // with positive increments every step is a ladder epoch
  const auto m = FiniteModel::iid(IncrementLaw::exponential(1));
  mrw::LadderOptions o;
  o.burn_in = 10;
  o.count = 200000;
  const auto st = mrw::mc_ladder_moments(m, start(0), o, 3);
  EXPECT_EQ(st.count, 200000u);
  EXPECT_EQ(st.mean_tau, 1);
  EXPECT_LT(std::abs(st.mean_s - 1), 4 * st.se_s);
  EXPECT_LT(std::abs(st.mean_s2 - 2), 4 * st.se_s2);
  EXPECT_LT(std::abs(st.rho_plus - 1), 4 * st.rho_se);
  for (const auto& [s, h] : st.h_grid) EXPECT_NEAR(h, 1 - std::exp(-s), 0.01);
  EXPECT_FALSE(st.unreliable);
}

TEST(Ladder, ChainsAndWorkers) {
  const auto m = testmodels::gauss2();
  mrw::LadderOptions o;
  o.burn_in = 20;
  o.count = 4001;
  o.chains = 4;
  const auto a = mrw::mc_ladder_moments(m, stationary(), o, 7);
  o.workers = 3;
  const auto b = mrw::mc_ladder_moments(m, stationary(), o, 7);
  EXPECT_EQ(a.count, 4001u);
  EXPECT_EQ(a.mean_s, b.mean_s);
  EXPECT_EQ(a.heights, b.heights);
}

TEST(Ladder, PersistentCappingFails) {
  mrw::LadderOptions o;
  o.burn_in = 0;
  o.count = 10;
  o.step_cap = 50;
  EXPECT_THROW(mrw::mc_ladder_moments(FiniteModel::iid(IncrementLaw::point_mass(-1)), start(0), o, 1),
               mrw::ConvergenceError);
  o.count = 1;
  EXPECT_THROW(mrw::mc_ladder_moments(symmetric_pm1(), start(0), o, 1), mrw::DomainError);
}

TEST(MaxTail, ExponentialUpJumpsDecayAtTailRoot) {
  // with exponential up-jumps the maximum has an exactly exponential tail,
  // decaying at the tail root
  const auto m = FiniteModel::iid(IncrementLaw::exponential(1, -1.5));
  const double gamma = mrw::tail_root(m);
  mrw::MaxTailOptions o;
  o.declared_drift = -0.5;
  const auto t = mrw::mc_max_tail(m, start(0), {0.5, 1.0, 2.0, 3.0, 4.0}, 100000, 8, o);
  EXPECT_LT(std::abs(t.slope + gamma), 4 * t.slope_se) << t.slope << " +- " << t.slope_se;
  EXPECT_EQ(t.capped, 0u);
  for (std::size_t i = 1; i < t.tail.size(); ++i) EXPECT_LE(t.tail[i].value, t.tail[i - 1].value);
  o.declared_drift = 0.1;
  EXPECT_THROW(mrw::mc_max_tail(m, start(0), {1.0}, 10, 1, o), mrw::DomainError);
}

TEST(Overshoot, DeterministicAndCapped) {
  const auto e = mrw::mc_mean_overshoot(FiniteModel::iid(IncrementLaw::point_mass(0.75)), start(0), 2, 5, 1);
  EXPECT_NEAR(e.mean.value, 0.25, 1e-12);
  const auto c = mrw::mc_mean_overshoot(FiniteModel::iid(IncrementLaw::point_mass(-1)), start(0), 2, 5, 1, 100);
  EXPECT_EQ(c.capped, 5u);
}

TEST(RFactor, SingleStateIsOne) {
  const auto m = testmodels::centered_exp();
  const auto pair = mrw::conjugate_root(m, 0.2, true);
  EXPECT_EQ(mrw::estimate_r_factor(m, pair, 0, 10, 1).value.value, 1);
}

TEST(RFactor, ModulatedIsNearOne) {
  const auto m = FiniteModel::by_source(mat2(0.8, 0.2, 0.4, 0.6),
                                        {IncrementLaw::gaussian(0.25, 1.0), IncrementLaw::gaussian(-0.5, 0.8)});
  const auto pair = mrw::conjugate_root(m, 0.1, true);
  for (int j : {0, 1}) {
    const auto r = mrw::estimate_r_factor(m, pair, j, 20000, 5 + j);
    EXPECT_TRUE(std::isfinite(r.value.value));
    EXPECT_NEAR(r.value.value, 1, 0.2);
    EXPECT_EQ(r.capped, 0u);
  }
}
