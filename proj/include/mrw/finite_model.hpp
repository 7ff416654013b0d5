#pragma once

// Finite-state Markov-modulated random walk: a row-stochastic matrix P plus a
// parametric increment law for every transition i -> j. This is the model
// class for which the spectral quantities are computed exactly.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mrw/error.hpp"
#include "mrw/laws.hpp"
#include "mrw/rng.hpp"
#include "mrw/walk.hpp"

namespace mrw {

struct ChainStructure {
  bool irreducible = false;
  std::size_t period = 0;                 // 0 when reducible
  std::vector<std::size_t> unreachable;   // states not strongly connected to state 0
};

namespace detail {

inline ChainStructure analyze_structure(const Eigen::MatrixXd& P) {
  const auto K = static_cast<std::size_t>(P.rows());
  ChainStructure out;
  auto bfs = [&](bool forward) {
    std::vector<long> level(K, -1);
    std::queue<std::size_t> q;
    level[0] = 0;
    q.push(0);
    while (!q.empty()) {
      const auto i = q.front();
      q.pop();
      for (std::size_t j = 0; j < K; ++j) {
        const double p = forward ? P(i, j) : P(j, i);
        if (p > 0.0 && level[j] < 0) {
          level[j] = level[i] + 1;
          q.push(j);
        }
      }
    }
    return level;
  };
  const auto fwd = bfs(true);
  const auto bwd = bfs(false);
  for (std::size_t i = 0; i < K; ++i)
    if (fwd[i] < 0 || bwd[i] < 0) out.unreachable.push_back(i);
  out.irreducible = out.unreachable.empty();
  if (!out.irreducible) return out;
  // period = gcd over edges of level(i) + 1 - level(j)
  long g = 0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j)
      if (P(i, j) > 0.0) g = std::gcd(g, std::abs(fwd[i] + 1 - fwd[j]));
  out.period = static_cast<std::size_t>(g);
  return out;
}

// Solves pi P = pi, sum pi = 1 for an irreducible chain.
inline Eigen::VectorXd solve_stationary(const Eigen::MatrixXd& P) {
  const auto K = P.rows();
  Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(K, K);
  A.row(K - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K);
  rhs(K - 1) = 1.0;
  Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  // one step of iterative refinement
  Eigen::VectorXd res = rhs - A * pi;
  pi += A.fullPivLu().solve(res);
  for (Eigen::Index i = 0; i < K; ++i) pi(i) = std::max(pi(i), 0.0);
  return pi / pi.sum();
}

}  // namespace detail

class FiniteModel {
 public:
  using state_type = std::size_t;
  using LawMatrix = std::vector<std::vector<IncrementLaw>>;

  FiniteModel(Eigen::MatrixXd P, LawMatrix laws) : P_(std::move(P)), laws_(std::move(laws)) {
    validate();
    structure_ = detail::analyze_structure(P_);
    if (structure_.irreducible) pi_ = detail::solve_stationary(P_);
    build_tables();
  }

  // One state, i.i.d. increments.
  static FiniteModel iid(const IncrementLaw& law) {
    return FiniteModel(Eigen::MatrixXd::Ones(1, 1), LawMatrix{{law}});
  }

  // Law depends on the source state only.
  static FiniteModel by_source(Eigen::MatrixXd P, const std::vector<IncrementLaw>& per_state) {
    const auto K = static_cast<std::size_t>(P.rows());
    if (per_state.size() != K) throw StructuralError("need one law per state");
    LawMatrix laws(K, std::vector<IncrementLaw>(K));
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) laws[i][j] = per_state[i];
    return FiniteModel(std::move(P), std::move(laws));
  }

  std::size_t states() const { return static_cast<std::size_t>(P_.rows()); }
  const Eigen::MatrixXd& transition() const { return P_; }
  const IncrementLaw& law(std::size_t i, std::size_t j) const { return laws_[i][j]; }
  const LawMatrix& laws() const { return laws_; }
  const ChainStructure& structure() const { return structure_; }

  bool valid_state(state_type s) const { return s < states(); }

  // Throws StructuralError naming the offending states unless the chain is
  // irreducible and aperiodic.
  void require_ergodic() const {
    if (!structure_.irreducible) {
      std::ostringstream os;
      os << "chain is reducible: states {";
      for (std::size_t k = 0; k < structure_.unreachable.size(); ++k)
        os << (k ? ", " : "") << structure_.unreachable[k];
      os << "} do not communicate with state 0";
      throw StructuralError(os.str());
    }
    if (structure_.period != 1)
      throw StructuralError("chain is periodic with period " + std::to_string(structure_.period));
  }

  // Stationary law; requires irreducibility.
  const Eigen::VectorXd& stationary() const {
    if (!structure_.irreducible) require_ergodic();
    return pi_;
  }

  Step<state_type> step(state_type i, RandomStream& g) const {
    const auto& row = cumulative_[i];
    std::size_t j = 0;
    const std::size_t last = row.size() - 1;
    if (last > 0) {
      const double u = g.uniform();
      while (j < last && u >= row[j]) ++j;
    }
    j = targets_[i][j];
    return {j, laws_[i][j].sample(g)};
  }

  state_type sample_stationary(RandomStream& g) const {
    const Eigen::VectorXd& pi = stationary();
    const double u = g.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < states(); ++i) {
      acc += pi(static_cast<Eigen::Index>(i));
      if (u < acc) return i;
    }
    return states() - 1;
  }

  // Intersection of the transform domains over transitions with P(i,j) > 0.
  TransformDomain domain() const {
    TransformDomain d;
    for_each_edge([&](std::size_t i, std::size_t j) {
      const auto e = laws_[i][j].domain();
      d.lo = std::max(d.lo, e.lo);
      d.hi = std::min(d.hi, e.hi);
    });
    return d;
  }

  // E[xi_1^k | X_0 = i] for each state.
  Eigen::VectorXd conditional_moment(int k) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states()));
    for_each_edge([&](std::size_t i, std::size_t j) {
      out(static_cast<Eigen::Index>(i)) += P_(i, j) * laws_[i][j].raw_moment(k);
    });
    return out;
  }
  Eigen::VectorXd conditional_mean() const { return conditional_moment(1); }

  // Stationary drift E_pi xi_1.
  double drift() const { return stationary().dot(conditional_mean()); }

  bool is_lattice() const {
    bool ok = true;
    for_each_edge([&](std::size_t i, std::size_t j) { ok = ok && laws_[i][j].is_lattice(); });
    return ok;
  }

  bool nonnegative_increments() const {
    bool ok = true;
    for_each_edge([&](std::size_t i, std::size_t j) {
      const auto& l = laws_[i][j];
      switch (l.kind()) {
        case IncrementLaw::Kind::point_mass: ok = ok && l.a() >= 0; break;
        case IncrementLaw::Kind::gaussian: ok = false; break;
        case IncrementLaw::Kind::exponential: ok = ok && l.b() >= 0; break;
        case IncrementLaw::Kind::two_point:
          ok = ok && (l.b() == 0.0 || l.a() >= 0) && (l.b() == 1.0 || l.c() >= 0);
          break;
      }
    });
    return ok;
  }

  // Largest one-step standard deviation over source states.
  double max_step_sd() const {
    const Eigen::VectorXd m1 = conditional_moment(1), m2 = conditional_moment(2);
    double s = 0.0;
    for (Eigen::Index i = 0; i < m1.size(); ++i)
      s = std::max(s, std::sqrt(std::max(0.0, m2(i) - m1(i) * m1(i))));
    return s;
  }

  // Law of factor * S_n: every increment scaled by factor > 0.
  FiniteModel scaled(double factor) const {
    LawMatrix out = laws_;
    for (auto& row : out)
      for (auto& l : row) l = l.scaled(factor);
    return FiniteModel(P_, std::move(out));
  }

  template <class F>
  void for_each_edge(F&& f) const {
    for (std::size_t i = 0; i < states(); ++i)
      for (std::size_t j = 0; j < states(); ++j)
        if (P_(i, j) > 0.0) f(i, j);
  }

 private:
  void validate() const {
    const auto K = P_.rows();
    if (K < 1 || P_.cols() != K) throw StructuralError("transition matrix must be square and nonempty");
    if (laws_.size() != static_cast<std::size_t>(K))
      throw StructuralError("law matrix must have one row per state");
    for (Eigen::Index i = 0; i < K; ++i) {
      if (laws_[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(K))
        throw StructuralError("law row " + std::to_string(i) + " must have one entry per state");
      double sum = 0.0;
      for (Eigen::Index j = 0; j < K; ++j) {
        const double p = P_(i, j);
        if (!(p >= 0.0) || !std::isfinite(p)) {
          std::ostringstream os;
          os << "transition P(" << i << "," << j << ") = " << p << " is not a probability";
          throw StructuralError(os.str());
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "row " << i << " of the transition matrix sums to " << sum << ", not 1";
        throw StructuralError(os.str());
      }
    }
  }

  void build_tables() {
    const auto K = states();
    cumulative_.assign(K, {});
    targets_.assign(K, {});
    for (std::size_t i = 0; i < K; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        if (P_(i, j) <= 0.0) continue;
        acc += P_(i, j);
        cumulative_[i].push_back(acc);
        targets_[i].push_back(j);
      }
    }
  }

  Eigen::MatrixXd P_;
  LawMatrix laws_;
  ChainStructure structure_;
  Eigen::VectorXd pi_;
  std::vector<std::vector<double>> cumulative_;
  std::vector<std::vector<std::size_t>> targets_;
};

}  // namespace mrw
