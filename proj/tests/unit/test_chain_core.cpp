#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mrw/chain_core.hpp"
#include "mrw/finite_model.hpp"

using mrw::FiniteModel;
using mrw::Horizon;
using mrw::IncrementLaw;
using mrw::RandomStream;

namespace {

FiniteModel constant(double v) { return FiniteModel::iid(IncrementLaw::point_mass(v)); }

Eigen::MatrixXd flip_matrix() {
  Eigen::MatrixXd P(2, 2);
  P << 0, 1, 1, 0;
  return P;
}

FiniteModel flip_flop() {
  return FiniteModel::by_source(flip_matrix(), {IncrementLaw::point_mass(0), IncrementLaw::point_mass(1)});
}

struct Always {
  bool operator()(std::size_t) const { return true; }
};

}  // namespace

TEST(SimulatePath, DeterministicIncrement) {
  RandomStream g(1);
  auto t = mrw::simulate_path(constant(1), 0, 3, g);
  EXPECT_EQ(t.sums, (std::vector<double>{0, 1, 2, 3}));
  auto e = mrw::simulate_path(constant(1), 0, 0, g);
  EXPECT_EQ(e.states, (std::vector<std::size_t>{0}));
  EXPECT_EQ(e.sums, (std::vector<double>{0}));
}

TEST(SimulatePath, PeriodicKernel) {
  RandomStream g(1);
  auto t = mrw::simulate_path(flip_flop(), 0, 3, g);
  EXPECT_EQ(t.states, (std::vector<std::size_t>{0, 1, 0, 1}));
  EXPECT_EQ(t.sums, (std::vector<double>{0, 0, 1, 1}));
}

TEST(SimulatePath, InvalidStateRejected) {
  RandomStream g(1);
  EXPECT_THROW(mrw::simulate_path(constant(1), 3, 2, g), mrw::DomainError);
}

TEST(SimulatePath, SameSeedSamePath) {
  auto m = FiniteModel::iid(IncrementLaw::gaussian(0, 1));
  RandomStream a(5), b(5);
  EXPECT_EQ(mrw::simulate_path(m, 0, 100, a).sums, mrw::simulate_path(m, 0, 100, b).sums);
}

TEST(SimulatePath, CompensatedTelescoping) {
  auto m = FiniteModel::iid(IncrementLaw::gaussian(0.1, 1));
  RandomStream g(9), h(9);
  const std::size_t n = 1000000;
  auto t = mrw::simulate_path(m, 0, n, g);
  long double exact = 0;
  for (std::size_t k = 0; k < n; ++k) exact += m.step(0, h).increment;
  EXPECT_LE(std::abs(t.sums.back() - static_cast<double>(exact)), 1e-9);
}

TEST(FirstPassage, DeterministicExamples) {
  RandomStream g(1);
  auto r = mrw::run_first_passage(constant(1), 0, 2.5, Horizon::finite(10), std::nullopt, g);
  EXPECT_TRUE(r.crossed);
  EXPECT_EQ(r.tau, 3u);
  EXPECT_DOUBLE_EQ(r.overshoot, 0.5);
  r = mrw::run_first_passage(constant(1), 0, 0, Horizon::finite(10), std::nullopt, g);
  EXPECT_EQ(r.tau, 1u);
  EXPECT_DOUBLE_EQ(r.overshoot, 1);
  r = mrw::run_first_passage(constant(-1), 0, 5, Horizon::finite(10), std::nullopt, g);
  EXPECT_FALSE(r.crossed);
  EXPECT_EQ(r.outcome, mrw::PassageOutcome::not_crossed);
  ASSERT_TRUE(r.s_horizon);
  EXPECT_DOUBLE_EQ(*r.s_horizon, -10);
}

TEST(FirstPassage, CrossingAtHorizonIsNotBeforeIt) {
  RandomStream g(1);
  auto r = mrw::run_first_passage(constant(1), 0, 2.5, Horizon::finite(3), std::nullopt, g);
  EXPECT_FALSE(r.crossed);
  r = mrw::run_first_passage(constant(1), 0, 2.5, Horizon::finite(4), std::nullopt, g);
  EXPECT_TRUE(r.crossed);
}

TEST(FirstPassage, JointContinuesToHorizon) {
  RandomStream g(1);
  auto r = mrw::run_first_passage(constant(1), 0, 2.5, Horizon::finite(6), 2.5, g);
  EXPECT_TRUE(r.crossed);
  EXPECT_DOUBLE_EQ(*r.s_horizon, 6);
  EXPECT_FALSE(r.joint_flag);
  // up 3, down 2.5, ...: crosses at 1, S_6 = 1.5
  auto zigzag = FiniteModel::by_source(flip_matrix(), {IncrementLaw::point_mass(3), IncrementLaw::point_mass(-2.5)});
  r = mrw::run_first_passage(zigzag, 0, 2.5, Horizon::finite(6), 2.5, g);
  EXPECT_EQ(r.tau, 1u);
  EXPECT_DOUBLE_EQ(*r.s_horizon, 1.5);
  EXPECT_TRUE(r.joint_flag);
  EXPECT_THROW(mrw::run_first_passage(constant(1), 0, 1, Horizon::finite(6), 2.0, g), mrw::DomainError);
}

TEST(FirstPassage, UnboundedCap) {
  RandomStream g(1);
  auto r = mrw::run_first_passage(constant(-1), 0, 1, Horizon::unbounded(1000), std::nullopt, g);
  EXPECT_EQ(r.outcome, mrw::PassageOutcome::capped);
  EXPECT_EQ(r.steps, 1000u);
}

TEST(FirstPassage, InvariantsOnRandomPaths) {
  auto m = FiniteModel::iid(IncrementLaw::gaussian(0, 1));
  for (std::uint64_t s = 0; s < 200; ++s) {
    RandomStream g(s), h(s);
    auto r = mrw::run_first_passage(m, 0, 3, Horizon::finite(50), std::nullopt, g);
    auto t = mrw::simulate_path(m, 0, 50, h);
    std::size_t first = 0;
    for (std::size_t k = 1; k < 50; ++k)
      if (t.sums[k] > 3) {
        first = k;
        break;
      }
    EXPECT_EQ(r.crossed, first != 0);
    if (r.crossed) {
      EXPECT_EQ(r.tau, first);
      EXPECT_GT(r.overshoot, 0);
    }
  }
}

TEST(FirstPassage, ExponentialOvershootIsMemoryless) {
  auto m = FiniteModel::iid(IncrementLaw::exponential(1));
  for (double b : {0.5, 2.0, 10.0}) {
    mrw::RunningStats s;
    for (std::uint64_t k = 0; k < 40000; ++k) {
      auto g = RandomStream::for_replication(3, k);
      s.add(mrw::run_first_passage(m, 0, b, Horizon::unbounded(), std::nullopt, g).overshoot);
    }
    EXPECT_LT(std::abs(s.mean() - 1), 4 * s.std_error()) << "b=" << b;
  }
}

TEST(Ladder, Examples) {
  RandomStream g(4);
  auto d = mrw::sample_ladder_epoch(constant(1), 0, 100, g);
  EXPECT_FALSE(d.capped);
  EXPECT_EQ(d.sample.tau_plus, 1u);
  EXPECT_EQ(d.sample.s_ladder, 1);
  auto e = FiniteModel::iid(IncrementLaw::exponential(1));
  RandomStream a(8), b(8);
  auto l = mrw::sample_ladder_epoch(e, 0, 100, a);
  EXPECT_EQ(l.sample.tau_plus, 1u);
  EXPECT_EQ(l.sample.s_ladder, e.step(0, b).increment);
  RandomStream c(1);
  EXPECT_TRUE(mrw::sample_ladder_epoch(constant(-1), 0, 50, c).capped);
}

TEST(Renewal, DeterministicWindows) {
  mrw::RenewalOptions o;
  o.declared_drift = 1;
  o.no_return_margin = 0;
  auto m = constant(1);
  auto e = mrw::estimate_renewal_measure(m, mrw::InitialLaw<std::size_t>{std::size_t{0}}, 2.25, 0.5,
                                         Always{}, 10, 1, o);
  EXPECT_EQ(e.u_hat, 0);
  e = mrw::estimate_renewal_measure(m, mrw::InitialLaw<std::size_t>{std::size_t{0}}, 2, 0.5, Always{}, 10, 1,
                                    o);
  EXPECT_EQ(e.u_hat, 1);
  EXPECT_EQ(e.std_error, 0);
  o.declared_drift = 0;
  EXPECT_THROW(mrw::estimate_renewal_measure(m, mrw::InitialLaw<std::size_t>{std::size_t{0}}, 2, 0.5,
                                             Always{}, 10, 1, o),
               mrw::DomainError);
}

TEST(Renewal, PoissonRenewalDensity) {
  mrw::RenewalOptions o;
  o.declared_drift = 1;
  o.no_return_margin = 0;
  auto m = FiniteModel::iid(IncrementLaw::exponential(1));
  auto e = mrw::estimate_renewal_measure(m, mrw::InitialLaw<std::size_t>{mrw::StationaryStart{}}, 10, 1,
                                         Always{}, 100000, 2, o);
  EXPECT_LT(std::abs(e.u_hat - 1), 4 * e.std_error);
}
