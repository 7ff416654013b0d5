#include "tasks.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "mrw/approx.hpp"
#include "mrw/chain_core.hpp"
#include "mrw/models.hpp"
#include "mrw/montecarlo.hpp"
#include "mrw/spectral.hpp"

namespace mrw::cli {

namespace {

constexpr std::uint64_t kLadderTag = 0x4c41444445524850ULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Cell opt(std::optional<double> v) { return v ? Cell(*v) : Cell(); }
Cell u64(std::uint64_t v) { return Cell(v); }

std::uint64_t row_seed(const ExperimentConfig& cfg, std::size_t row) { return derive_seed(cfg.seed, row); }

std::vector<std::size_t> horizons(const TaskParams& p) {
  if (!p.m_grid.empty()) return p.m_grid;
  return {*p.m};
}

InitialLaw<std::size_t> finite_init(const TaskParams& p) {
  if (p.x0) return *p.x0;
  return StationaryStart{};
}

// Calls f(model, initial_law) with the configured walk.
template <class F>
void visit_walk(const ExperimentConfig& cfg, F&& f) {
  const auto& ms = cfg.model;
  if (ms.finite) {
    f(*ms.finite, finite_init(cfg.params));
  } else if (ms.rca) {
    f(*ms.rca, InitialLaw<double>(0.0));
  } else if (ms.matrix) {
    f(*ms.matrix, InitialLaw<ProjectiveState>(ms.matrix->initial_state(cfg.params.x0.value_or(0))));
  } else {
    throw DomainError("no model configured");
  }
}

template <class State>
Cell state_cell(const State& s) {
  if constexpr (std::is_same_v<State, std::size_t>)
    return u64(s);
  else if constexpr (std::is_same_v<State, double>)
    return s;
  else
    return u64(s.x);
}

// Evaluates a formula; a domain failure leaves the cell empty and is reported.
template <class F>
Cell guarded(Report& r, const std::string& what, F&& f) {
  try {
    return Cell(static_cast<double>(f()));
  } catch (const DomainError& e) {
    r.warnings.push_back(what + ": " + e.what());
    return Cell();
  }
}

struct Standardized {
  FiniteModel model;
  double sigma = 1.0;
  double kappa = 0.0;
};

Standardized standardize(const FiniteModel& m, std::size_t T, Report& r) {
  const auto cs = cumulants(m, T);
  for (const auto& w : cs.warnings) r.warnings.push_back(w);
  if (!(cs.sigma2 > 0.0)) throw StructuralError("increments are degenerate; cannot standardize");
  const double sigma = std::sqrt(cs.sigma2);
  return {m.scaled(1.0 / sigma), sigma, cs.kappa / (sigma * sigma * sigma)};
}

double resolve_rho(const ExperimentConfig& cfg, const FiniteModel& model, Report& r) {
  const auto& p = cfg.params;
  if (p.rho_plus) return *p.rho_plus;
  LadderOptions o;
  o.burn_in = p.burn_in;
  o.count = p.ladder_count;
  o.step_cap = p.ladder_step_cap;
  o.chains = p.chains;
  o.workers = cfg.workers;
  const auto st = mc_ladder_moments(model, InitialLaw<std::size_t>(StationaryStart{}), o,
                                    derive_seed(cfg.seed, kLadderTag));
  if (st.unreliable) r.warnings.push_back("ladder estimate of rho_plus: capped fraction above 1%");
  return st.rho_plus;
}

void add_low_ess(Report& r, const McEstimate& e, std::size_t m) {
  if (e.effective_sample_size < 0.1 * static_cast<double>(e.reps)) {
    std::ostringstream os;
    os << "m=" << m << ": effective sample size " << e.effective_sample_size << " below 10% of reps";
    r.warnings.push_back(os.str());
  }
}

void task_simulate(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  visit_walk(cfg, [&](const auto& model, const auto& init) {
    for (std::size_t path = 0; path < p.paths; ++path) {
      auto g = RandomStream::for_replication(cfg.seed, path);
      const auto x0 = draw_initial(model, init, g);
      const auto t = simulate_path(model, x0, *p.n, g);
      for (std::size_t k = 0; k < t.sums.size(); ++k)
        r.add_row({u64(path), u64(k), state_cell(t.states[k]), t.sums[k], u64(cfg.seed)});
    }
  });
}

void task_moments(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  if (cfg.model.matrix) {
    MatrixPassageOptions o;
    o.lyapunov_steps = p.lyapunov_steps > 0 ? p.lyapunov_steps : 1'000'000;
    o.workers = cfg.workers;
    const auto res = matproduct_first_passage(*cfg.model.matrix, 0.0, std::size_t{1}, 1, cfg.seed, o);
    r.add_row({"gamma1", Cell(), res.gamma1, res.gamma1_se, u64(cfg.seed)});
    return;
  }
  const auto& m = *cfg.model.finite;
  const auto cs = cumulants(m, p.truncation);
  for (const auto& w : cs.warnings) r.warnings.push_back(w);
  auto det = [&](const std::string& q, Cell alpha, Cell v) { r.add_row({q, alpha, v, Cell(), Cell()}); };
  det("drift", Cell(), cs.mu);
  det("sigma2", Cell(), cs.sigma2);
  det("kappa", Cell(), cs.kappa);
  det("kappa_nu", Cell(), cs.kappa_nu);
  det("truncation_error", Cell(), cs.truncation_error);
  try {
    const auto d = lambda_derivatives(m);
    det("Lambda_d1", 0.0, d.d1);
    det("Lambda_d2", 0.0, d.d2);
    det("Lambda_d3", 0.0, d.d3);
  } catch (const Error& e) {
    r.warnings.push_back(std::string("Lambda derivatives: ") + e.what());
  }
  const auto pi = stationary_distribution(m);
  for (Eigen::Index i = 0; i < pi.size(); ++i) det("pi[" + std::to_string(i) + "]", Cell(), pi(i));
  const auto ps = solve_poisson(m);
  for (Eigen::Index i = 0; i < ps.delta.size(); ++i) det("poisson[" + std::to_string(i) + "]", Cell(), ps.delta(i));
  std::vector<double> alphas = p.alpha_grid;
  if (p.alpha) alphas.push_back(*p.alpha);
  for (double a : alphas) {
    det("Lambda", a, guarded(r, "Lambda", [&] { return log_perron_root(m, a); }));
    if (cfg.model.zero_drift && a != 0.0) {
      try {
        const auto pair = conjugate_root(m, a, true);
        det("alpha0", a, pair.alpha0);
        det("alpha1", a, pair.alpha1);
        det("delta", a, pair.delta_gap);
      } catch (const Error& e) {
        r.warnings.push_back(std::string("conjugate root: ") + e.what());
      }
    }
  }
  if (cs.mu < 0.0) det("tail_root", Cell(), guarded(r, "tail_root", [&] { return tail_root(m); }));
}

void task_ladder(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  LadderOptions o;
  o.burn_in = p.burn_in;
  o.count = p.count;
  o.step_cap = p.ladder_step_cap;
  o.chains = p.chains;
  o.workers = cfg.workers;
  if (!p.h_grid.empty()) o.h_grid = p.h_grid;
  visit_walk(cfg, [&](const auto& model, const auto& init) {
    const auto st = mc_ladder_moments(model, init, o, cfg.seed);
    const auto s = u64(cfg.seed);
    r.add_row({"mean_tau", Cell(), st.mean_tau, Cell(), s});
    r.add_row({"mean_s", Cell(), st.mean_s, st.se_s, s});
    r.add_row({"mean_s2", Cell(), st.mean_s2, st.se_s2, s});
    r.add_row({"mean_s3", Cell(), st.mean_s3, st.se_s3, s});
    r.add_row({"rho_plus", Cell(), st.rho_plus, st.rho_se, s});
    const double n = static_cast<double>(st.count);
    for (const auto& [x, F] : st.h_grid) r.add_row({"H_plus", x, F, std::sqrt(F * (1 - F) / n), s});
    r.add_row({"count", Cell(), n, Cell(), s});
    r.add_row({"capped", Cell(), static_cast<double>(st.capped_count), Cell(), s});
    if (st.unreliable) r.warnings.push_back("capped ladder epochs above 1%");
  });
}

void task_approx(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  const auto sm = standardize(*cfg.model.finite, p.truncation, r);
  const double rho = resolve_rho(cfg, sm.model, r);
  double delta = 0.0;
  if (p.alpha) delta = conjugate_root(sm.model, *p.alpha, cfg.model.zero_drift).delta_gap;
  const double rf = p.r_factor.value_or(1.0);
  for (std::size_t m : horizons(p)) {
    const double sq = std::sqrt(static_cast<double>(m)), md = static_cast<double>(m);
    const double b = *p.b_over_sqrt_m * sq;
    std::optional<double> c, s;
    if (p.c_over_sqrt_m) c = *p.c_over_sqrt_m * sq;
    if (p.s_over_sqrt_m) s = *p.s_over_sqrt_m * sq;
    Cell joint, bridge, j0, j1;
    if (c) {
      joint = guarded(r, "joint", [&] { return joint_ruin_approx({b, *c, md, rho, sm.kappa}); });
      j0 = guarded(r, "corrected", [&] { return corrected_joint_approx({b, *c, md, delta, rho, sm.kappa, rf, 0}); });
      j1 = guarded(r, "corrected", [&] { return corrected_joint_approx({b, *c, md, delta, rho, sm.kappa, rf, 1}); });
    }
    if (s) bridge = guarded(r, "bridge", [&] { return bridge_crossing_approx({b, *s, md, rho, sm.kappa}); });
    r.add_row({u64(m), b, opt(c), opt(s), rho, sm.kappa, delta, rf, joint, bridge, j0, j1});
  }
}

void task_mc(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  std::vector<std::optional<double>> alphas;
  for (double a : p.alpha_grid) alphas.emplace_back(a);
  if (p.alpha) alphas.emplace_back(*p.alpha);
  if (alphas.empty()) alphas.emplace_back(std::nullopt);
  std::size_t row = 0;
  for (std::size_t m : horizons(p)) {
    for (const auto& a : alphas) {
      const auto seed = row_seed(cfg, row++);
      PassageEstimates est;
      if (a) {
        est = mc_importance_sampled(*cfg.model.finite, *a, finite_init(p), *p.b, m, p.c, cfg.reps, seed, cfg.workers);
        add_low_ess(r, est.crossing, m);
      } else {
        visit_walk(cfg, [&](const auto& model, const auto& init) {
          est = mc_first_passage(model, init, *p.b, m, p.c, cfg.reps, seed, cfg.workers);
        });
      }
      Cell dpc, dpj;
      if (p.exact) {
        const auto dp = dp_exact_oracle(*cfg.model.finite, finite_init(p), *p.b, p.c.value_or(*p.b), m);
        dpc = dp.crossing;
        if (p.c) dpj = dp.joint;
      }
      Cell joint, joint_se;
      if (est.joint) {
        joint = est.joint->value;
        joint_se = est.joint->std_error;
      }
      r.add_row({u64(m), *p.b, opt(p.c), a ? Cell(*a) : Cell(), est.crossing.value, est.crossing.std_error, joint,
                 joint_se, est.crossing.effective_sample_size, dpc, dpj, u64(seed), u64(cfg.reps)});
    }
  }
}

void task_compare(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  const auto sm = standardize(*cfg.model.finite, p.truncation, r);
  const double rho = resolve_rho(cfg, sm.model, r);
  const double rf = p.r_factor.value_or(1.0);
  const bool bridge = p.event == "bridge";
  double delta = 0.0;
  std::optional<FiniteModel> target;
  if (p.alpha) {
    const auto pair = conjugate_root(sm.model, *p.alpha, cfg.model.zero_drift);
    delta = pair.delta_gap;
    target = tilt_model(sm.model, p.j == 0 ? pair.alpha0 : pair.alpha1);
  }
  const FiniteModel& walk = target ? *target : sm.model;
  std::size_t row = 0;
  for (std::size_t m : horizons(p)) {
    const auto seed = row_seed(cfg, row++);
    const double sq = std::sqrt(static_cast<double>(m)), md = static_cast<double>(m);
    const double b = *p.b_over_sqrt_m * sq;
    const double x = (bridge ? *p.s_over_sqrt_m : *p.c_over_sqrt_m) * sq;
    McEstimate mc;
    Cell approx, plain;
    if (bridge) {
      mc = mc_bridge_conditional(walk, b, x, m, cfg.reps, seed, cfg.workers);
      approx = guarded(r, "bridge", [&] { return bridge_crossing_approx({b, x, md, rho, sm.kappa}); });
      plain = guarded(r, "bridge", [&] { return bridge_crossing_approx({b, x, md, 0.0, 0.0}); });
    } else {
      mc = *mc_first_passage(walk, finite_init(p), b, m, std::optional<double>(x), cfg.reps, seed, cfg.workers).joint;
      if (target) {
        approx = guarded(r, "corrected", [&] { return corrected_joint_approx({b, x, md, delta, rho, sm.kappa, rf, p.j}); });
        plain = guarded(r, "corrected", [&] { return corrected_joint_approx({b, x, md, delta, 0.0, 0.0, rf, p.j}); });
      } else {
        approx = guarded(r, "joint", [&] { return joint_ruin_approx({b, x, md, rho, sm.kappa}); });
        plain = guarded(r, "joint", [&] { return joint_ruin_approx({b, x, md, 0.0, 0.0}); });
      }
    }
    const auto err = [&](const Cell& a) -> Cell {
      if (const auto* v = std::get_if<double>(&a)) return std::abs(mc.value - *v);
      return Cell();
    };
    const Cell e = err(approx);
    Cell es;
    if (const auto* v = std::get_if<double>(&e)) es = *v * sq;
    r.add_row({u64(m), b, x, mc.value, mc.std_error, approx, e, es, plain, err(plain), rho, sm.kappa, delta, rf,
               u64(seed), u64(cfg.reps)});
  }
}

void task_renewal(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  RenewalOptions o;
  o.no_return_margin = p.margin.value_or(-1.0);
  o.step_cap = p.step_cap;
  o.workers = cfg.workers;
  std::vector<double> hs = p.h_grid;
  if (p.h) hs.insert(hs.begin(), *p.h);
  double pi_a = 1.0, mu2 = kNaN;
  std::vector<bool> in_a;
  if (cfg.model.finite) {
    const auto& m = *cfg.model.finite;
    o.declared_drift = p.declared_drift.value_or(m.drift());
    o.step_sd = m.max_step_sd();
    const auto pi = stationary_distribution(m);
    in_a.assign(m.states(), p.states.empty());
    for (auto s : p.states) in_a[s] = true;
    pi_a = 0.0;
    for (std::size_t i = 0; i < m.states(); ++i)
      if (in_a[i]) pi_a += pi(static_cast<Eigen::Index>(i));
    if (p.states.empty()) mu2 = pi.dot(m.conditional_moment(2));
  } else {
    o.declared_drift = *p.declared_drift;
  }
  const double mu = o.declared_drift;
  const double cum_limit = std::isfinite(mu2) ? *p.s / mu + mu2 / (2.0 * mu * mu) : kNaN;
  std::size_t row = 0;
  for (double h : hs) {
    const auto seed = row_seed(cfg, row++);
    RenewalEstimate w, cum;
    visit_walk(cfg, [&](const auto& model, const auto& init) {
      using S = std::decay_t<decltype(draw_initial(model, init, std::declval<RandomStream&>()))>;
      auto pred = [&](const S& x) {
        if constexpr (std::is_same_v<S, std::size_t>)
          return static_cast<bool>(in_a[x]);
        else
          return true;
      };
      w = estimate_renewal_measure(model, init, *p.s, h, pred, cfg.reps, seed, o);
      cum = estimate_renewal_function(model, init, *p.s, pred, cfg.reps, seed, o);
    });
    if (w.capped > 0 || cum.capped > 0) r.warnings.push_back("h=" + std::to_string(h) + ": paths hit the step cap");
    r.add_row({*p.s, h, w.u_hat, w.std_error, h * pi_a / mu, cum.u_hat, cum.std_error, cum_limit, u64(seed),
               u64(cfg.reps)});
  }
}

void task_tail(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  MaxTailOptions o;
  o.declared_drift = cfg.model.finite ? p.declared_drift.value_or(cfg.model.finite->drift()) : *p.declared_drift;
  o.margin = p.margin.value_or(-1.0);
  o.step_cap = p.step_cap;
  o.workers = cfg.workers;
  TailCurve tc;
  visit_walk(cfg, [&](const auto& model, const auto& init) {
    tc = mc_max_tail(model, init, p.levels, cfg.reps, cfg.seed, o);
  });
  for (const auto& w : tc.warnings) r.warnings.push_back(w);
  Cell root;
  if (cfg.model.finite) root = guarded(r, "tail_root", [&] { return tail_root(*cfg.model.finite); });
  for (std::size_t i = 0; i < tc.log_levels.size(); ++i)
    r.add_row({tc.log_levels[i], tc.tail[i].value, tc.tail[i].std_error, tc.slope, tc.slope_se, tc.intercept, root,
               u64(cfg.seed), u64(cfg.reps)});
}

void task_rca(const ExperimentConfig& cfg, Report& r) {
  const auto& p = cfg.params;
  const auto& model = *cfg.model.rca;
  std::size_t row = 0;
  for (double c : p.c_grid) {
    const auto seed = row_seed(cfg, row++);
    const auto fa = rca_fixed_accuracy(model, c, cfg.reps, seed, p.step_cap, cfg.workers);
    if (fa.capped > 0) r.warnings.push_back("c=" + std::to_string(c) + ": " + std::to_string(fa.capped) + " runs capped");
    r.add_row({"fixed_accuracy", c, fa.mean_T.value, fa.mean_T.std_error, fa.ks_normal, fa.fit_sd, Cell(), Cell(),
               Cell(), Cell(), Cell(), Cell(), Cell(), Cell(), Cell(), Cell(), Cell(), u64(fa.capped), u64(seed),
               u64(cfg.reps)});
  }
  if (p.truncated) {
    const auto& t = *p.truncated;
    const auto seed = row_seed(cfg, row++);
    RcaTestOptions o;
    o.workers = cfg.workers;
    o.burn_in = p.burn_in;
    o.ladder_count = p.ladder_count;
    o.ladder_step_cap = p.ladder_step_cap;
    const RcaTestSpec spec{t.mu0, t.mu1, t.lambda, t.m, t.sign};
    const auto res = rca_truncated_test(model, spec, cfg.reps, seed, o);
    for (const auto& w : res.warnings) r.warnings.push_back(w);
    r.add_row({"truncated_test", Cell(), Cell(), Cell(), Cell(), Cell(), t.mu0, t.mu1, t.lambda, u64(t.m),
               t.sign == SignConvention::as_printed ? "as_printed" : "negated", res.probability.value,
               res.probability.std_error, res.approximation, res.z_sigma, res.kappa, res.rho_plus, Cell(), u64(seed),
               u64(cfg.reps)});
  }
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
  Report r;
  r.task = cfg.task;
  r.seed = cfg.seed;
  r.reps = cfg.reps;
  r.model = cfg.model.summary;
  r.columns = task_columns(cfg.task);
  const std::string& t = cfg.task;
  if (t == "simulate")
    task_simulate(cfg, r);
  else if (t == "moments")
    task_moments(cfg, r);
  else if (t == "ladder")
    task_ladder(cfg, r);
  else if (t == "approx")
    task_approx(cfg, r);
  else if (t == "mc")
    task_mc(cfg, r);
  else if (t == "compare")
    task_compare(cfg, r);
  else if (t == "renewal")
    task_renewal(cfg, r);
  else if (t == "tail")
    task_tail(cfg, r);
  else if (t == "rca-test")
    task_rca(cfg, r);
  else
    throw DomainError("unknown task " + t);
  return r;
}

}  // namespace mrw::cli
