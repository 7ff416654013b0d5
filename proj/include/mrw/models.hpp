#pragma once

// Application models: the random-coefficient AR(1) chain with its two
// sequential procedures, and products of random matrices driven by a finite
// modulating chain. Plain i.i.d. and modulated builders are at the end.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mrw/approx.hpp"
#include "mrw/chain_core.hpp"
#include "mrw/error.hpp"
#include "mrw/finite_model.hpp"
#include "mrw/laws.hpp"
#include "mrw/montecarlo.hpp"
#include "mrw/rng.hpp"
#include "mrw/spectral.hpp"
#include "mrw/stats.hpp"
#include "mrw/walk.hpp"

namespace mrw {

// Laws of the standardized coefficient noise eta (beta_n = beta + sigma eta)
// and of the innovation eps; both must have mean 0 and variance 1.
struct RcaLaws {
  IncrementLaw beta_shape = IncrementLaw::gaussian(0.0, 1.0);
  IncrementLaw noise = IncrementLaw::gaussian(0.0, 1.0);
};

// X_n = beta_n X_{n-1} + eps_n; the walk increment is X_n^2 / (1 + sigma^2 X_n^2).
class RcaModel {
 public:
  using state_type = double;

  RcaModel(double beta, double sigma, RcaLaws laws = {}) : beta_(beta), sigma_(sigma), laws_(std::move(laws)) {
    if (!std::isfinite(beta) || !(sigma >= 0.0)) throw DomainError("rca needs finite beta and sigma >= 0");
    if (!(beta * beta + sigma * sigma < 1.0)) {
      std::ostringstream os;
      os << "stability needs beta^2 + sigma^2 < 1, got " << beta * beta + sigma * sigma;
      throw DomainError(os.str());
    }
    check_standard(laws_.beta_shape, "coefficient noise");
    check_standard(laws_.noise, "innovation");
  }

  double beta() const { return beta_; }
  double sigma() const { return sigma_; }
  const RcaLaws& laws() const { return laws_; }

  bool valid_state(double x) const { return std::isfinite(x); }

  double next_state(double x, RandomStream& g) const {
    const double bn = sigma_ > 0.0 ? beta_ + sigma_ * laws_.beta_shape.sample(g) : beta_;
    return bn * x + laws_.noise.sample(g);
  }

  double increment(double x) const { return x * x / (1.0 + sigma_ * sigma_ * x * x); }

  Step<double> step(double x, RandomStream& g) const {
    const double nx = next_state(x, g);
    return {nx, increment(nx)};
  }

 private:
  static void check_standard(const IncrementLaw& law, const char* what) {
    if (std::abs(law.mean()) > 1e-9 || std::abs(law.variance() - 1.0) > 1e-9) {
      std::ostringstream os;
      os << what << " law " << law.describe() << " must have mean 0 and variance 1";
      throw DomainError(os.str());
    }
  }

  double beta_;
  double sigma_;
  RcaLaws laws_;
};

inline RcaModel build_rca(double beta, double sigma, RcaLaws laws = {}) { return RcaModel(beta, sigma, std::move(laws)); }

struct RcaFixedAccuracy {
  McEstimate mean_T;
  std::vector<double> standardized;  // (b_T - beta) sqrt(c), in replication order
  double fit_mean = 0.0;
  double fit_sd = 0.0;
  double ks_normal = 0.0;  // KS distance to the fitted normal
  std::size_t capped = 0;
};

// Runs each replication from X_0 = 0 until the increment sum reaches c and
// records T_c and the weighted least-squares estimate b_T.
inline RcaFixedAccuracy rca_fixed_accuracy(const RcaModel& model, double c, std::size_t reps, std::uint64_t seed,
                                           std::size_t step_cap = 10'000'000, unsigned workers = 1) {
  if (!(c > 0.0)) throw DomainError("rca_fixed_accuracy needs c > 0");
  if (reps < 1) throw DomainError("reps must be >= 1");
  const double s2 = model.sigma() * model.sigma();
  struct Acc {
    RunningStats T;
    std::vector<double> z;
    std::size_t capped = 0;
    void merge(const Acc& o) {
      T.merge(o.T);
      z.insert(z.end(), o.z.begin(), o.z.end());
      capped += o.capped;
    }
  };
  auto acc = replicate<Acc>(reps, seed, workers, [&](std::size_t, RandomStream& g, Acc& a) {
    double x = 0.0;
    CompensatedSum sum, num, den;
    for (std::size_t n = 1; n <= step_cap; ++n) {
      const double prev = x;
      x = model.next_state(prev, g);
      const double w = 1.0 + s2 * prev * prev;
      num.add(prev * x / w);
      den.add(x * x / w);
      sum.add(model.increment(x));
      if (sum.value() >= c) {
        a.T.add(static_cast<double>(n));
        a.z.push_back((num.value() / den.value() - model.beta()) * std::sqrt(c));
        return;
      }
    }
    ++a.capped;
  });
  RcaFixedAccuracy out;
  out.mean_T = detail::to_estimate(acc.T, seed, acc.T.n);
  out.capped = acc.capped;
  out.standardized = std::move(acc.z);
  if (out.standardized.size() >= 2) {
    RunningStats z;
    for (double v : out.standardized) z.add(v);
    out.fit_mean = z.mean();
    out.fit_sd = std::sqrt(z.variance());
    const double mu = out.fit_mean, sd = out.fit_sd;
    out.ks_normal = sd > 0.0 ? ks_distance(out.standardized, [&](double v) { return normal_cdf((v - mu) / sd); })
                             : 1.0;
  }
  return out;
}

enum class SignConvention { as_printed, negated };

struct RcaTestSpec {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double lambda_threshold = 0.0;
  std::size_t m = 1;
  SignConvention sign = SignConvention::as_printed;
};

// Walk of the test statistic: Z_n - Z_{n-1} = (+/-) 1/2 ((X_n - mu1 X_{n-1})^2 - (X_n - mu0 X_{n-1})^2).
class RcaStatisticWalk {
 public:
  using state_type = double;

  RcaStatisticWalk(RcaModel rca, double mu0, double mu1, SignConvention sign)
      : rca_(std::move(rca)), mu0_(mu0), mu1_(mu1), sign_(sign == SignConvention::as_printed ? 1.0 : -1.0) {}

  bool valid_state(double x) const { return std::isfinite(x); }

  Step<double> step(double x, RandomStream& g) const {
    const double nx = rca_.next_state(x, g);
    const double a = nx - mu1_ * x, b = nx - mu0_ * x;
    return {nx, sign_ * 0.5 * (a * a - b * b)};
  }

 private:
  RcaModel rca_;
  double mu0_, mu1_, sign_;
};

struct RcaTestOptions {
  unsigned workers = 1;
  std::size_t cumulant_steps = 1'000'000;  // long run for drift, sigma^2, kappa
  std::size_t burn_in = 1000;
  std::size_t ladder_count = 20000;
  std::size_t ladder_step_cap = 100'000;
};

struct RcaTestResult {
  McEstimate probability;  // P(T_lambda <= m)
  double approximation = 0.0;
  double z_drift = 0.0;
  double z_sigma = 0.0;
  double kappa = 0.0;     // standardized
  double rho_plus = 0.0;  // standardized
  std::vector<std::string> warnings;
};

namespace detail {

// Drift, sigma^2 and kappa of a stationary walk from batch sums of one run.
struct BatchCumulants {
  double mu = 0.0, sigma2 = 0.0, kappa = 0.0;
};

template <WalkModel M>
BatchCumulants batch_cumulants(const M& model, typename M::state_type x, std::size_t burn_in, std::size_t steps,
                               RandomStream& g, std::size_t len = 50) {
  for (std::size_t k = 0; k < burn_in; ++k) x = model.step(x, g).next;
  const std::size_t batches = std::max<std::size_t>(3, steps / len);
  std::vector<double> sums(batches);
  for (auto& s : sums) {
    CompensatedSum acc;
    for (std::size_t k = 0; k < len; ++k) {
      auto st = model.step(x, g);
      x = st.next;
      acc.add(st.increment);
    }
    s = acc.value();
  }
  double mean = 0.0;
  for (double s : sums) mean += s;
  mean /= static_cast<double>(batches);
  double m2 = 0.0, m3 = 0.0;
  for (double s : sums) {
    const double d = s - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double B = static_cast<double>(batches), L = static_cast<double>(len);
  BatchCumulants out;
  out.mu = mean / L;
  out.sigma2 = m2 / (B - 1.0) / L;
  out.kappa = m3 * B / ((B - 1.0) * (B - 2.0)) / L;
  return out;
}

}  // namespace detail

// Truncated sequential test: MC frequency of {T_lambda <= m} with Z_0 = 0 and
// X_0 = 0, plus the zero-drift approximation
//   P(Z_m >= lambda) + P(T < m, Z_m < lambda)
// on the standardized Z walk, with sigma, kappa and rho_+ estimated by MC.
inline RcaTestResult rca_truncated_test(const RcaModel& model, const RcaTestSpec& spec, std::size_t reps,
                                        std::uint64_t seed, const RcaTestOptions& opt = {}) {
  if (!(spec.mu1 >= spec.mu0)) throw DomainError("rca test needs mu1 > mu0");
  if (spec.m < 1) throw DomainError("horizon m must be >= 1");
  if (reps < 1) throw DomainError("reps must be >= 1");
  const RcaStatisticWalk walk(model, spec.mu0, spec.mu1, spec.sign);
  const double lam = spec.lambda_threshold;
  auto acc = replicate<detail::PassageAcc>(reps, seed, opt.workers, [&](std::size_t, RandomStream& g,
                                                                        detail::PassageAcc& a) {
    double x = 0.0;
    CompensatedSum z;
    bool hit = false;
    for (std::size_t n = 1; n <= spec.m && !hit; ++n) {
      auto st = walk.step(x, g);
      x = st.next;
      z.add(st.increment);
      hit = z.value() >= lam;
    }
    a.cross.add(hit ? 1.0 : 0.0);
  });
  RcaTestResult out;
  out.probability = detail::to_estimate(acc.cross, seed, static_cast<double>(reps));
  if (spec.mu1 == spec.mu0) {
    out.approximation = lam > 0.0 ? 0.0 : 1.0;
    out.warnings.push_back("mu0 = mu1: the statistic is identically 0");
    return out;
  }
  auto g = RandomStream(derive_seed(seed, 0x5243'4154ULL));
  const auto bc = detail::batch_cumulants(walk, 0.0, opt.burn_in, opt.cumulant_steps, g);
  out.z_drift = bc.mu;
  out.z_sigma = std::sqrt(bc.sigma2);
  out.kappa = bc.kappa / (bc.sigma2 * out.z_sigma);
  const double drift_se = out.z_sigma / std::sqrt(static_cast<double>(opt.cumulant_steps));
  if (std::abs(bc.mu) > 4.0 * drift_se)
    out.warnings.push_back("Z walk drift is not zero; the zero-drift approximation is a rough guide only");
  LadderOptions lo;
  lo.burn_in = 100;
  lo.count = opt.ladder_count;
  lo.step_cap = opt.ladder_step_cap;
  lo.workers = opt.workers;
  const auto ls = mc_ladder_moments(walk, InitialLaw<double>{0.0}, lo, derive_seed(seed, 0x4c41'4444ULL));
  if (ls.unreliable) out.warnings.push_back("more than 1% of ladder epochs hit the step cap");
  out.rho_plus = ls.rho_plus / out.z_sigma;
  if (lam <= 0.0) {
    out.approximation = 1.0;
    return out;
  }
  const double b = lam / out.z_sigma, m = static_cast<double>(spec.m);
  CorrectedParams p;
  p.b = b;
  p.c = b;
  p.m = m;
  p.rho_plus = out.rho_plus;
  p.kappa = out.kappa;
  if (!(m + out.kappa * b / 3.0 > 0.0)) {
    // the skewness correction breaks down this far out; drop it
    out.warnings.push_back("m + kappa*b/3 <= 0: approximation evaluated with kappa = 0");
    p.kappa = 0.0;
  }
  const double above = 1.0 - edgeworth_cdf(b / std::sqrt(m), m, p.kappa, 0.0);
  out.approximation = detail::clamp01(above + corrected_joint_approx(p));
  return out;
}

// ---------------------------------------------------------------------------
// Products of random matrices

class MatrixSampler {
 public:
  enum class Kind { fixed_list, gaussian_entries, rotation_scaling };

  static MatrixSampler fixed_list(std::vector<Eigen::MatrixXd> mats, std::vector<double> probs) {
    if (mats.empty() || mats.size() != probs.size()) throw DomainError("fixed_list needs matching matrices and probabilities");
    double tot = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw DomainError("fixed_list probabilities must be >= 0");
      tot += p;
    }
    if (std::abs(tot - 1.0) > 1e-12) throw DomainError("fixed_list probabilities must sum to 1");
    MatrixSampler s(Kind::fixed_list, mats.front().rows());
    for (const auto& m : mats)
      if (m.rows() != s.k_ || m.cols() != s.k_) throw DomainError("fixed_list matrices must be square of one size");
    s.mats_ = std::move(mats);
    s.probs_ = std::move(probs);
    return s;
  }

  // Entries mean(i,j) + sd * N(0,1).
  static MatrixSampler gaussian_entries(Eigen::MatrixXd mean, double sd) {
    if (mean.rows() != mean.cols() || mean.rows() < 1) throw DomainError("gaussian_entries needs a square mean");
    if (!(sd >= 0.0)) throw DomainError("gaussian_entries needs sd >= 0");
    MatrixSampler s(Kind::gaussian_entries, mean.rows());
    s.mats_ = {std::move(mean)};
    s.sd_ = sd;
    return s;
  }

  // Q * diag(exp(log_diag + sd * Z)) with Q a uniform rotation. With a common
  // scale one Z is shared by every diagonal entry, giving conformal matrices.
  static MatrixSampler rotation_scaling(Eigen::VectorXd log_diag, double sd, bool common_scale) {
    if (log_diag.size() < 1) throw DomainError("rotation_scaling needs k >= 1");
    if (!(sd >= 0.0)) throw DomainError("rotation_scaling needs sd >= 0");
    MatrixSampler s(Kind::rotation_scaling, log_diag.size());
    s.log_diag_ = std::move(log_diag);
    s.sd_ = sd;
    s.common_ = common_scale;
    return s;
  }

  Kind kind() const { return kind_; }
  Eigen::Index k() const { return k_; }

  Eigen::MatrixXd sample(RandomStream& g) const {
    switch (kind_) {
      case Kind::fixed_list: {
        double u = g.uniform(), acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs_.size(); ++i) {
          acc += probs_[i];
          if (u < acc) return mats_[i];
        }
        return mats_.back();
      }
      case Kind::gaussian_entries: {
        Eigen::MatrixXd m = mats_.front();
        for (Eigen::Index j = 0; j < k_; ++j)
          for (Eigen::Index i = 0; i < k_; ++i) m(i, j) += sd_ * g.normal();
        return m;
      }
      case Kind::rotation_scaling: {
        Eigen::VectorXd d(k_);
        const double z = common_ ? g.normal() : 0.0;
        for (Eigen::Index i = 0; i < k_; ++i) d(i) = std::exp(log_diag_(i) + sd_ * (common_ ? z : g.normal()));
        return random_rotation(g) * d.asDiagonal();
      }
    }
    return {};
  }

 private:
  MatrixSampler(Kind kind, Eigen::Index k) : kind_(kind), k_(k) {}

  Eigen::MatrixXd random_rotation(RandomStream& g) const {
    if (k_ == 1) return Eigen::MatrixXd::Identity(1, 1);
    if (k_ == 2) {
      const double t = 2.0 * M_PI * g.uniform();
      Eigen::MatrixXd q(2, 2);
      q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
      return q;
    }
    // Haar orthogonal from QR with the sign fix, then forced into SO(k)
    Eigen::MatrixXd a(k_, k_);
    for (Eigen::Index j = 0; j < k_; ++j)
      for (Eigen::Index i = 0; i < k_; ++i) a(i, j) = g.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < k_; ++i)
      if (r(i, i) < 0) q.col(i) *= -1.0;
    if (q.determinant() < 0) q.col(0) *= -1.0;
    return q;
  }

  Kind kind_;
  Eigen::Index k_;
  std::vector<Eigen::MatrixXd> mats_;
  std::vector<double> probs_;
  Eigen::VectorXd log_diag_;
  double sd_ = 0.0;
  bool common_ = false;
};

// Chain state plus the current direction Pi_n u / |Pi_n u|.
struct ProjectiveState {
  std::size_t x = 0;
  Eigen::VectorXd u;
};

enum class SingularPolicy { resample, fail };

template <class State>
struct MatrixStep {
  Step<State> step;
  Eigen::MatrixXd matrix;
};

// M_n is drawn from the sampler of the chain state entered at step n.
class MatrixProductModel {
 public:
  using state_type = ProjectiveState;

  MatrixProductModel(Eigen::MatrixXd P, std::vector<MatrixSampler> samplers, Eigen::VectorXd u0,
                     SingularPolicy policy = SingularPolicy::resample, double det_floor = 1e-12)
      : P_(std::move(P)), samplers_(std::move(samplers)), u0_(std::move(u0)), policy_(policy), det_floor_(det_floor) {
    const auto K = P_.rows();
    if (K < 1 || P_.cols() != K) throw DomainError("modulating matrix must be square");
    if (static_cast<Eigen::Index>(samplers_.size()) != K) throw DomainError("need one matrix sampler per chain state");
    for (Eigen::Index i = 0; i < K; ++i) {
      if ((P_.row(i).array() < 0.0).any() || std::abs(P_.row(i).sum() - 1.0) > 1e-12)
        throw DomainError("modulating matrix rows must be probability vectors");
    }
    k_ = samplers_.front().k();
    for (const auto& s : samplers_)
      if (s.k() != k_) throw DomainError("matrix samplers disagree on the dimension");
    if (u0_.size() != k_) throw DomainError("u0 has the wrong dimension");
    const double n = u0_.norm();
    if (!(n > 0.0)) throw DomainError("u0 must be nonzero");
    u0_ /= n;
  }

  static MatrixProductModel iid(MatrixSampler sampler, Eigen::VectorXd u0,
                                SingularPolicy policy = SingularPolicy::resample) {
    return MatrixProductModel(Eigen::MatrixXd::Ones(1, 1), {std::move(sampler)}, std::move(u0), policy);
  }

  Eigen::Index dimension() const { return k_; }
  std::size_t chain_states() const { return static_cast<std::size_t>(P_.rows()); }
  const Eigen::VectorXd& u0() const { return u0_; }

  ProjectiveState initial_state(std::size_t x = 0) const {
    if (x >= chain_states()) throw DomainError("initial chain state out of range");
    return {x, u0_};
  }

  bool valid_state(const ProjectiveState& s) const {
    return s.x < chain_states() && s.u.size() == k_ && std::abs(s.u.norm() - 1.0) <= 1e-9;
  }

  MatrixStep<ProjectiveState> step_with_matrix(const ProjectiveState& s, RandomStream& g) const {
    std::size_t j = 0;
    if (P_.rows() > 1) {
      const double u = g.uniform();
      double acc = 0.0;
      j = chain_states() - 1;
      for (std::size_t c = 0; c + 1 < chain_states(); ++c) {
        acc += P_(static_cast<Eigen::Index>(s.x), static_cast<Eigen::Index>(c));
        if (u < acc) {
          j = c;
          break;
        }
      }
    }
    Eigen::MatrixXd M = samplers_[j].sample(g);
    for (int tries = 0; std::abs(M.determinant()) <= det_floor_; ++tries) {
      if (policy_ == SingularPolicy::fail || tries >= 100) throw DomainError("sampled matrix is singular");
      M = samplers_[j].sample(g);
    }
    Eigen::VectorXd v = M * s.u;
    const double n = v.norm();
    v /= n;
    v /= v.norm();
    return {{{j, std::move(v)}, std::log(n)}, std::move(M)};
  }

  Step<ProjectiveState> step(const ProjectiveState& s, RandomStream& g) const { return step_with_matrix(s, g).step; }

 private:
  Eigen::MatrixXd P_;
  std::vector<MatrixSampler> samplers_;
  Eigen::VectorXd u0_;
  SingularPolicy policy_;
  double det_floor_;
  Eigen::Index k_ = 0;
};

inline Trajectory<ProjectiveState> matproduct_walk(const MatrixProductModel& model, std::size_t n,
                                                   std::uint64_t seed, std::size_t x0 = 0) {
  RandomStream g(seed);
  return simulate_path(model, model.initial_state(x0), n, g);
}

struct MatrixPassageOptions {
  std::size_t lyapunov_steps = 1'000'000;
  std::size_t batches = 100;
  std::size_t step_cap = 10'000'000;  // unbounded horizon only
  unsigned workers = 1;
};

struct MatrixPassageResult {
  McEstimate crossing;  // P{N(b) < m}, or P{N(b) < infinity} within the cap
  std::size_t capped = 0;
  double gamma1 = 0.0;
  double gamma1_se = 0.0;
};

inline MatrixPassageResult matproduct_first_passage(const MatrixProductModel& model, double b,
                                                    std::optional<std::size_t> m, std::size_t reps,
                                                    std::uint64_t seed, const MatrixPassageOptions& opt = {}) {
  if (!(b >= 0.0)) throw DomainError("first-passage level b must be >= 0");
  if (reps < 1) throw DomainError("reps must be >= 1");
  const Horizon hz = m ? Horizon::finite(*m) : Horizon::unbounded(opt.step_cap);
  struct Acc {
    RunningStats s;
    std::size_t capped = 0;
    void merge(const Acc& o) {
      s.merge(o.s);
      capped += o.capped;
    }
  };
  auto acc = replicate<Acc>(reps, seed, opt.workers, [&](std::size_t, RandomStream& g, Acc& a) {
    const auto r = run_first_passage(model, model.initial_state(), b, hz, std::nullopt, g);
    if (r.outcome == PassageOutcome::capped) ++a.capped;
    a.s.add(r.crossed ? 1.0 : 0.0);
  });
  MatrixPassageResult out;
  out.crossing = detail::to_estimate(acc.s, seed, static_cast<double>(reps));
  out.capped = acc.capped;
  if (opt.lyapunov_steps > 0) {
    auto g = RandomStream(derive_seed(seed, 0x4c59'4150ULL));
    std::vector<double> xs(opt.lyapunov_steps);
    auto s = model.initial_state();
    CompensatedSum sum;
    for (auto& x : xs) {
      auto st = model.step(s, g);
      s = std::move(st.next);
      x = st.increment;
      sum.add(x);
    }
    out.gamma1 = sum.value() / static_cast<double>(xs.size());
    out.gamma1_se = batch_means_se(xs, opt.batches);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convenience builders

inline FiniteModel iid_walk(const IncrementLaw& law) { return FiniteModel::iid(law); }

inline FiniteModel modulated_walk(const Eigen::MatrixXd& P, std::vector<IncrementLaw> by_source) {
  return FiniteModel::by_source(P, std::move(by_source));
}

// log A of the scalar random difference equation X_n = A_n X_{n-1} + B_n
// with log A ~ N(mu_A, sigma_A^2); its maximum drives the tail of X.
inline FiniteModel kesten_scalar_walk(double mu_A, double sigma_A) {
  return FiniteModel::iid(IncrementLaw::gaussian(mu_A, sigma_A));
}

}  // namespace mrw
