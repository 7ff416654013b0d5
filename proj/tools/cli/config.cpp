#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace mrw::cli {

std::string format_diagnostic(const Diagnostic& d, const std::string& path) {
  std::ostringstream os;
  os << path;
  if (d.line > 0) os << ":" << d.line;
  os << ": " << d.field << ": " << d.message;
  return os.str();
}

namespace {

int line_of(const YAML::Node& n) {
  if (!n.IsDefined()) return 0;
  const auto mk = n.Mark();
  return mk.line >= 0 ? mk.line + 1 : 0;
}

class Reader {
 public:
  explicit Reader(std::vector<Diagnostic>& d) : diags_(d) {}

  void error(const YAML::Node& n, const std::string& field, const std::string& msg) {
    diags_.push_back({line_of(n), field, msg});
  }
  void error(int line, const std::string& field, const std::string& msg) { diags_.push_back({line, field, msg}); }

  void check_keys(const YAML::Node& map, const std::string& where, const std::set<std::string>& allowed) {
    if (!map.IsMap()) return;
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) error(kv.first, where.empty() ? key : where + "." + key, "unknown key");
    }
  }

  std::optional<double> real(const YAML::Node& parent, const std::string& key, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return std::nullopt;
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) throw YAML::Exception(n.Mark(), "not finite");
      return v;
    } catch (const YAML::Exception&) {
      error(n, where, "expected a finite number");
      return std::nullopt;
    }
  }

  std::optional<std::size_t> count(const YAML::Node& parent, const std::string& key, const std::string& where,
                                   std::size_t min = 0) {
    const YAML::Node n = parent[key];
    if (!n) return std::nullopt;
    try {
      const auto v = n.as<long long>();
      if (v < static_cast<long long>(min)) {
        error(n, where, "must be an integer >= " + std::to_string(min));
        return std::nullopt;
      }
      return static_cast<std::size_t>(v);
    } catch (const YAML::Exception&) {
      error(n, where, "expected an integer");
      return std::nullopt;
    }
  }

  std::optional<std::uint64_t> u64(const YAML::Node& parent, const std::string& key, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return std::nullopt;
    try {
      return n.as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      error(n, where, "expected an unsigned 64-bit integer");
      return std::nullopt;
    }
  }

  std::optional<bool> flag(const YAML::Node& parent, const std::string& key, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return std::nullopt;
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      error(n, where, "expected true or false");
      return std::nullopt;
    }
  }

  std::optional<std::string> text(const YAML::Node& parent, const std::string& key, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return std::nullopt;
    if (!n.IsScalar()) {
      error(n, where, "expected a string");
      return std::nullopt;
    }
    return n.as<std::string>();
  }

  std::vector<double> reals(const YAML::Node& parent, const std::string& key, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return {};
    try {
      auto v = n.as<std::vector<double>>();
      for (double x : v)
        if (!std::isfinite(x)) throw YAML::Exception(n.Mark(), "not finite");
      return v;
    } catch (const YAML::Exception&) {
      error(n, where, "expected a list of finite numbers");
      return {};
    }
  }

  std::vector<std::size_t> counts(const YAML::Node& parent, const std::string& key, const std::string& where) {
    const YAML::Node n = parent[key];
    if (!n) return {};
    try {
      std::vector<std::size_t> out;
      for (long long v : n.as<std::vector<long long>>()) {
        if (v < 0) throw YAML::Exception(n.Mark(), "negative");
        out.push_back(static_cast<std::size_t>(v));
      }
      return out;
    } catch (const YAML::Exception&) {
      error(n, where, "expected a list of nonnegative integers");
      return {};
    }
  }

  std::optional<Eigen::MatrixXd> matrix(const YAML::Node& n, const std::string& where) {
    if (!n.IsSequence() || n.size() == 0) {
      error(n, where, "expected a nonempty list of rows");
      return std::nullopt;
    }
    const auto rows = static_cast<Eigen::Index>(n.size());
    Eigen::Index cols = -1;
    Eigen::MatrixXd m;
    for (Eigen::Index i = 0; i < rows; ++i) {
      std::vector<double> r;
      try {
        r = n[i].as<std::vector<double>>();
      } catch (const YAML::Exception&) {
        error(n[i], where + "[" + std::to_string(i) + "]", "expected a list of numbers");
        return std::nullopt;
      }
      if (cols < 0) {
        cols = static_cast<Eigen::Index>(r.size());
        m.resize(rows, cols);
      }
      if (static_cast<Eigen::Index>(r.size()) != cols) {
        error(n[i], where + "[" + std::to_string(i) + "]", "rows must all have the same length");
        return std::nullopt;
      }
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r[static_cast<std::size_t>(j)];
    }
    return m;
  }

 private:
  std::vector<Diagnostic>& diags_;
};

// Row-stochastic check with one diagnostic per bad row.
bool check_stochastic(Reader& rd, const YAML::Node& node, const Eigen::MatrixXd& P, const std::string& where) {
  bool ok = true;
  if (P.rows() != P.cols()) {
    rd.error(node, where, "transition matrix must be square");
    return false;
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    const std::string rw = where + "[" + std::to_string(i) + "]";
    if ((P.row(i).array() < 0.0).any()) {
      rd.error(node[i], rw, "row " + std::to_string(i) + " has a negative probability");
      ok = false;
    }
    const double sum = P.row(i).sum();
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os.precision(15);
      os << "row " << i << " sums to " << sum << ", not 1";
      rd.error(node[i], rw, os.str());
      ok = false;
    }
  }
  return ok;
}

std::optional<IncrementLaw> parse_law(Reader& rd, const YAML::Node& n, const std::string& where,
                                      const std::string& label) {
  if (!n.IsMap()) {
    rd.error(n, where, label + ": expected a law mapping with a 'family' key");
    return std::nullopt;
  }
  const auto fam = rd.text(n, "family", where + ".family");
  if (!fam) {
    rd.error(n, where, label + ": law needs a 'family' (gaussian, exponential, point_mass, two_point)");
    return std::nullopt;
  }
  try {
    if (*fam == "gaussian") {
      rd.check_keys(n, where, {"family", "mean", "sd"});
      const auto mean = rd.real(n, "mean", where + ".mean"), sd = rd.real(n, "sd", where + ".sd");
      if (!mean || !sd) {
        rd.error(n, where, label + ": gaussian law needs mean and sd");
        return std::nullopt;
      }
      return IncrementLaw::gaussian(*mean, *sd);
    }
    if (*fam == "exponential") {
      rd.check_keys(n, where, {"family", "rate", "shift"});
      const auto rate = rd.real(n, "rate", where + ".rate");
      const auto shift = rd.real(n, "shift", where + ".shift");
      if (!rate) {
        rd.error(n, where, label + ": exponential law needs a rate");
        return std::nullopt;
      }
      return IncrementLaw::exponential(*rate, shift.value_or(0.0));
    }
    if (*fam == "point_mass") {
      rd.check_keys(n, where, {"family", "value"});
      const auto v = rd.real(n, "value", where + ".value");
      if (!v) {
        rd.error(n, where, label + ": point_mass law needs a value");
        return std::nullopt;
      }
      return IncrementLaw::point_mass(*v);
    }
    if (*fam == "two_point") {
      rd.check_keys(n, where, {"family", "v1", "p1", "v2"});
      const auto v1 = rd.real(n, "v1", where + ".v1"), p1 = rd.real(n, "p1", where + ".p1"),
                 v2 = rd.real(n, "v2", where + ".v2");
      if (!v1 || !p1 || !v2) {
        rd.error(n, where, label + ": two_point law needs v1, p1 and v2");
        return std::nullopt;
      }
      return IncrementLaw::two_point(*v1, *p1, *v2);
    }
    rd.error(n["family"], where + ".family",
             label + ": unknown family '" + *fam + "' (valid: gaussian, exponential, point_mass, two_point)");
  } catch (const Error& e) {
    rd.error(n, where, label + ": " + e.what());
  }
  return std::nullopt;
}

std::optional<MatrixSampler> parse_sampler(Reader& rd, const YAML::Node& n, const std::string& where, Eigen::Index k) {
  const auto kind = rd.text(n, "kind", where + ".kind");
  if (!kind) {
    rd.error(n, where, "sampler needs a 'kind' (fixed_list, gaussian_entries, rotation_scaling)");
    return std::nullopt;
  }
  try {
    if (*kind == "fixed_list") {
      rd.check_keys(n, where, {"kind", "matrices", "probs"});
      std::vector<Eigen::MatrixXd> mats;
      const YAML::Node ms = n["matrices"];
      if (!ms || !ms.IsSequence()) {
        rd.error(n, where + ".matrices", "expected a list of matrices");
        return std::nullopt;
      }
      for (std::size_t i = 0; i < ms.size(); ++i) {
        auto m = rd.matrix(ms[i], where + ".matrices[" + std::to_string(i) + "]");
        if (!m) return std::nullopt;
        if (m->rows() != k || m->cols() != k) {
          rd.error(ms[i], where + ".matrices[" + std::to_string(i) + "]", "matrix must be dimension x dimension");
          return std::nullopt;
        }
        mats.push_back(*m);
      }
      auto probs = rd.reals(n, "probs", where + ".probs");
      if (probs.empty()) probs.assign(mats.size(), 1.0 / static_cast<double>(mats.size()));
      return MatrixSampler::fixed_list(std::move(mats), std::move(probs));
    }
    if (*kind == "gaussian_entries") {
      rd.check_keys(n, where, {"kind", "mean", "sd"});
      const YAML::Node mn = n["mean"];
      auto m = mn ? rd.matrix(mn, where + ".mean") : std::optional<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(k, k));
      const auto sd = rd.real(n, "sd", where + ".sd");
      if (!m || !sd) {
        rd.error(n, where, "gaussian_entries needs mean and sd");
        return std::nullopt;
      }
      if (m->rows() != k || m->cols() != k) {
        rd.error(mn, where + ".mean", "mean must be dimension x dimension");
        return std::nullopt;
      }
      return MatrixSampler::gaussian_entries(*m, *sd);
    }
    if (*kind == "rotation_scaling") {
      rd.check_keys(n, where, {"kind", "log_diag", "sd", "common_scale"});
      const auto ld = rd.reals(n, "log_diag", where + ".log_diag");
      if (static_cast<Eigen::Index>(ld.size()) != k) {
        rd.error(n, where + ".log_diag", "log_diag needs one entry per dimension");
        return std::nullopt;
      }
      Eigen::VectorXd v(k);
      for (Eigen::Index i = 0; i < k; ++i) v(i) = ld[static_cast<std::size_t>(i)];
      return MatrixSampler::rotation_scaling(v, rd.real(n, "sd", where + ".sd").value_or(0.0),
                                             rd.flag(n, "common_scale", where + ".common_scale").value_or(true));
    }
    rd.error(n["kind"], where + ".kind",
             "unknown sampler kind '" + *kind + "' (valid: fixed_list, gaussian_entries, rotation_scaling)");
  } catch (const Error& e) {
    rd.error(n, where, e.what());
  }
  return std::nullopt;
}

void parse_finite(Reader& rd, const YAML::Node& mn, ModelSpec& spec) {
  rd.check_keys(mn, "model", {"type", "transition", "laws", "zero_drift"});
  const YAML::Node tn = mn["transition"];
  if (!tn) {
    rd.error(mn, "model.transition", "finite model needs a transition matrix");
    return;
  }
  const auto P = rd.matrix(tn, "model.transition");
  if (!P) return;
  const bool stochastic = check_stochastic(rd, tn, *P, "model.transition");
  const auto K = static_cast<std::size_t>(P->rows());
  const YAML::Node ln = mn["laws"];
  if (!ln || !ln.IsMap()) {
    rd.error(mn, "model.laws", "finite model needs laws: {by_source: [...]} or {matrix: [[...]]}");
    return;
  }
  rd.check_keys(ln, "model.laws", {"by_source", "matrix"});
  FiniteModel::LawMatrix laws(K, std::vector<IncrementLaw>(K));
  bool ok = stochastic && P->rows() == P->cols();
  if (const YAML::Node bs = ln["by_source"]) {
    if (!bs.IsSequence() || bs.size() != K) {
      rd.error(bs, "model.laws.by_source", "need one law per state (" + std::to_string(K) + ")");
      return;
    }
    for (std::size_t i = 0; i < K; ++i) {
      auto law = parse_law(rd, bs[i], "model.laws.by_source[" + std::to_string(i) + "]",
                           "transitions from state " + std::to_string(i));
      if (!law) {
        ok = false;
        continue;
      }
      for (std::size_t j = 0; j < K; ++j) laws[i][j] = *law;
    }
  } else if (const YAML::Node mx = ln["matrix"]) {
    if (!mx.IsSequence() || mx.size() != K) {
      rd.error(mx, "model.laws.matrix", "need " + std::to_string(K) + " rows of laws");
      return;
    }
    for (std::size_t i = 0; i < K; ++i) {
      if (!mx[i].IsSequence() || mx[i].size() != K) {
        rd.error(mx[i], "model.laws.matrix[" + std::to_string(i) + "]", "need " + std::to_string(K) + " laws");
        ok = false;
        continue;
      }
      for (std::size_t j = 0; j < K; ++j) {
        const YAML::Node e = mx[i][j];
        if (e.IsNull()) {
          if (stochastic && (*P)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0) {
            rd.error(e, "model.laws.matrix[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                     "transition " + std::to_string(i) + "->" + std::to_string(j) + " has positive probability but no law");
            ok = false;
          }
          continue;
        }
        auto law = parse_law(rd, e, "model.laws.matrix[" + std::to_string(i) + "][" + std::to_string(j) + "]",
                             "transition " + std::to_string(i) + "->" + std::to_string(j));
        if (law)
          laws[i][j] = *law;
        else
          ok = false;
      }
    }
  } else {
    rd.error(ln, "model.laws", "expected by_source or matrix");
    return;
  }
  if (!ok) return;
  try {
    spec.finite.emplace(*P, std::move(laws));
    spec.finite->require_ergodic();
    spec.summary = "finite K=" + std::to_string(K);
  } catch (const Error& e) {
    rd.error(mn, "model", e.what());
    spec.finite.reset();
  }
}

void parse_model(Reader& rd, const YAML::Node& mn, ModelSpec& spec) {
  if (!mn || !mn.IsMap()) {
    rd.error(mn, "model", "missing model section");
    return;
  }
  const auto type = rd.text(mn, "type", "model.type").value_or("finite");
  spec.zero_drift = rd.flag(mn, "zero_drift", "model.zero_drift").value_or(false);
  if (type == "finite") {
    spec.type = ModelType::finite;
    parse_finite(rd, mn, spec);
  } else if (type == "iid") {
    spec.type = ModelType::iid;
    rd.check_keys(mn, "model", {"type", "law", "zero_drift"});
    if (!mn["law"]) {
      rd.error(mn, "model.law", "iid model needs a law");
      return;
    }
    if (auto law = parse_law(rd, mn["law"], "model.law", "increment law")) {
      spec.finite = FiniteModel::iid(*law);
      spec.summary = "iid " + law->describe();
    }
  } else if (type == "rca") {
    spec.type = ModelType::rca;
    rd.check_keys(mn, "model", {"type", "beta", "sigma", "beta_law", "noise", "zero_drift"});
    const auto beta = rd.real(mn, "beta", "model.beta"), sigma = rd.real(mn, "sigma", "model.sigma");
    if (!beta || !sigma) {
      rd.error(mn, "model", "rca model needs beta and sigma");
      return;
    }
    RcaLaws laws;
    bool ok = true;
    if (mn["beta_law"]) {
      auto l = parse_law(rd, mn["beta_law"], "model.beta_law", "coefficient noise");
      if (l) laws.beta_shape = *l;
      ok = ok && l.has_value();
    }
    if (mn["noise"]) {
      auto l = parse_law(rd, mn["noise"], "model.noise", "innovation");
      if (l) laws.noise = *l;
      ok = ok && l.has_value();
    }
    if (!ok) return;
    try {
      spec.rca.emplace(*beta, *sigma, laws);
      std::ostringstream os;
      os << "rca beta=" << *beta << " sigma=" << *sigma;
      spec.summary = os.str();
    } catch (const Error& e) {
      rd.error(mn, "model", e.what());
    }
  } else if (type == "matrix-product") {
    spec.type = ModelType::matrix_product;
    rd.check_keys(mn, "model", {"type", "dimension", "transition", "samplers", "u0", "singular", "zero_drift"});
    const auto k = rd.count(mn, "dimension", "model.dimension", 1);
    if (!k) {
      rd.error(mn, "model.dimension", "matrix-product model needs dimension >= 1");
      return;
    }
    Eigen::MatrixXd P = Eigen::MatrixXd::Ones(1, 1);
    if (const YAML::Node tn = mn["transition"]) {
      auto m = rd.matrix(tn, "model.transition");
      if (!m || !check_stochastic(rd, tn, *m, "model.transition")) return;
      P = *m;
    }
    const YAML::Node sn = mn["samplers"];
    if (!sn || !sn.IsSequence() || sn.size() != static_cast<std::size_t>(P.rows())) {
      rd.error(sn ? sn : mn, "model.samplers", "need one sampler per chain state (" + std::to_string(P.rows()) + ")");
      return;
    }
    std::vector<MatrixSampler> samplers;
    for (std::size_t i = 0; i < sn.size(); ++i) {
      auto s = parse_sampler(rd, sn[i], "model.samplers[" + std::to_string(i) + "]", static_cast<Eigen::Index>(*k));
      if (!s) return;
      samplers.push_back(*s);
    }
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(*k));
    u0(0) = 1.0;
    if (mn["u0"]) {
      const auto v = rd.reals(mn, "u0", "model.u0");
      if (v.size() != *k) {
        rd.error(mn["u0"], "model.u0", "u0 needs one entry per dimension");
        return;
      }
      for (std::size_t i = 0; i < v.size(); ++i) u0(static_cast<Eigen::Index>(i)) = v[i];
    }
    auto policy = SingularPolicy::resample;
    if (auto s = rd.text(mn, "singular", "model.singular")) {
      if (*s == "fail")
        policy = SingularPolicy::fail;
      else if (*s != "resample")
        rd.error(mn["singular"], "model.singular", "expected resample or fail");
    }
    try {
      spec.matrix.emplace(P, samplers, u0, policy);
      spec.summary = "matrix-product k=" + std::to_string(*k) + " K=" + std::to_string(P.rows());
    } catch (const Error& e) {
      rd.error(mn, "model", e.what());
    }
  } else {
    rd.error(mn["type"], "model.type", "unknown model type '" + type + "' (valid: finite, iid, rca, matrix-product)");
  }
}

void parse_params(Reader& rd, const YAML::Node& pn, TaskParams& p) {
  if (!pn) return;
  if (!pn.IsMap()) {
    rd.error(pn, "params", "expected a mapping");
    return;
  }
  rd.check_keys(pn, "params",
                {"b", "c", "s", "h", "alpha", "rho_plus", "r_factor", "declared_drift", "margin", "b_over_sqrt_m",
                 "c_over_sqrt_m", "s_over_sqrt_m", "m", "n", "x0", "m_grid", "levels", "h_grid", "alpha_grid",
                 "c_grid", "states", "paths", "truncation", "burn_in", "count", "chains", "step_cap",
                 "ladder_count", "ladder_step_cap", "lyapunov_steps", "j", "exact", "event", "truncated"});
  auto R = [&](const char* k) { return rd.real(pn, k, std::string("params.") + k); };
  auto C = [&](const char* k, std::size_t min = 0) { return rd.count(pn, k, std::string("params.") + k, min); };
  p.b = R("b");
  p.c = R("c");
  p.s = R("s");
  p.h = R("h");
  p.alpha = R("alpha");
  p.r_factor = R("r_factor");
  p.declared_drift = R("declared_drift");
  p.margin = R("margin");
  p.b_over_sqrt_m = R("b_over_sqrt_m");
  p.c_over_sqrt_m = R("c_over_sqrt_m");
  p.s_over_sqrt_m = R("s_over_sqrt_m");
  if (const YAML::Node rn = pn["rho_plus"]; rn && !(rn.IsScalar() && rn.as<std::string>() == "ladder")) p.rho_plus = R("rho_plus");
  p.m = C("m", 1);
  p.n = C("n");
  if (const YAML::Node xn = pn["x0"]) {
    if (xn.IsScalar() && xn.as<std::string>() == "stationary")
      p.stationary = true;
    else {
      p.x0 = C("x0");
      p.stationary = false;
    }
  }
  p.m_grid = rd.counts(pn, "m_grid", "params.m_grid");
  for (auto v : p.m_grid)
    if (v < 1) rd.error(pn["m_grid"], "params.m_grid", "horizons must be >= 1");
  p.levels = rd.reals(pn, "levels", "params.levels");
  p.h_grid = rd.reals(pn, "h_grid", "params.h_grid");
  p.alpha_grid = rd.reals(pn, "alpha_grid", "params.alpha_grid");
  p.c_grid = rd.reals(pn, "c_grid", "params.c_grid");
  p.states = rd.counts(pn, "states", "params.states");
  p.paths = C("paths", 1).value_or(p.paths);
  p.truncation = C("truncation", 1).value_or(p.truncation);
  p.burn_in = C("burn_in").value_or(p.burn_in);
  p.count = C("count", 2).value_or(p.count);
  p.chains = C("chains", 1).value_or(p.chains);
  p.step_cap = C("step_cap", 1).value_or(p.step_cap);
  p.ladder_count = C("ladder_count", 2).value_or(p.ladder_count);
  p.ladder_step_cap = C("ladder_step_cap", 1).value_or(p.ladder_step_cap);
  p.lyapunov_steps = C("lyapunov_steps").value_or(p.lyapunov_steps);
  if (auto j = C("j")) {
    if (*j > 1)
      rd.error(pn["j"], "params.j", "j must be 0 or 1");
    else
      p.j = static_cast<int>(*j);
  }
  p.exact = rd.flag(pn, "exact", "params.exact").value_or(false);
  if (auto e = rd.text(pn, "event", "params.event")) {
    if (*e != "joint" && *e != "bridge")
      rd.error(pn["event"], "params.event", "expected joint or bridge");
    else
      p.event = *e;
  }
  if (const YAML::Node tn = pn["truncated"]) {
    rd.check_keys(tn, "params.truncated", {"mu0", "mu1", "lambda", "m", "sign"});
    TruncatedSpec t;
    const auto mu0 = rd.real(tn, "mu0", "params.truncated.mu0"), mu1 = rd.real(tn, "mu1", "params.truncated.mu1"),
               lam = rd.real(tn, "lambda", "params.truncated.lambda");
    const auto m = rd.count(tn, "m", "params.truncated.m", 1);
    if (!mu0 || !mu1 || !lam || !m) {
      rd.error(tn, "params.truncated", "needs mu0, mu1, lambda and m");
    } else if (*mu1 < *mu0) {
      rd.error(tn, "params.truncated", "needs mu1 >= mu0");
    } else {
      t.mu0 = *mu0;
      t.mu1 = *mu1;
      t.lambda = *lam;
      t.m = *m;
      if (auto s = rd.text(tn, "sign", "params.truncated.sign")) {
        if (*s == "negated")
          t.sign = SignConvention::negated;
        else if (*s != "as_printed")
          rd.error(tn["sign"], "params.truncated.sign", "expected as_printed or negated");
      }
      p.truncated = t;
    }
  }
}

bool is_scalar_walk(const ModelSpec& m) { return m.type == ModelType::finite || m.type == ModelType::iid; }

// Cross-field requirements of each task.
void check_task(Reader& rd, const YAML::Node& root, const ExperimentConfig& c) {
  const auto& p = c.params;
  const YAML::Node pn = root["params"];
  const int pl = line_of(pn) ? line_of(pn) : line_of(root["task"]);
  auto need = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) rd.error(pl, field, msg);
  };
  const bool scalar = is_scalar_walk(c.model);
  const bool has_model = c.model.finite || c.model.rca || c.model.matrix;
  const std::string& t = c.task;
  if (!p.m_grid.empty() && p.m) rd.error(pl, "params.m", "give either m or m_grid, not both");
  if (t == "simulate") {
    need(p.n.has_value(), "params.n", "simulate needs n");
  } else if (t == "moments") {
    need(scalar || c.model.type == ModelType::matrix_product, "model.type",
         "moments needs a finite, iid or matrix-product model");
  } else if (t == "ladder") {
  } else if (t == "approx" || t == "compare") {
    need(scalar, "model.type", t + " needs a finite or iid model");
    need(c.model.zero_drift, "model.zero_drift", t + " needs a model declared zero_drift: true");
    need(p.m || !p.m_grid.empty(), "params.m_grid", t + " needs m or m_grid");
    need(p.b_over_sqrt_m.has_value(), "params.b_over_sqrt_m", t + " needs b_over_sqrt_m");
    if (p.event == "joint")
      need(p.c_over_sqrt_m.has_value(), "params.c_over_sqrt_m", "joint event needs c_over_sqrt_m");
    else
      need(p.s_over_sqrt_m.has_value(), "params.s_over_sqrt_m", "bridge event needs s_over_sqrt_m");
    if (p.alpha) need(p.j >= 0 || t == "approx", "params.j", "a tilted comparison needs j (0 or 1)");
    if (t == "compare" && p.event == "bridge") {
      need(!p.alpha, "params.alpha", "bridge comparison is untilted");
      if (c.model.finite)
        need(c.model.finite->states() == 1 && c.model.finite->law(0, 0).kind() == IncrementLaw::Kind::gaussian,
             "model", "bridge sampling needs an iid gaussian model");
    }
  } else if (t == "mc") {
    need(p.b.has_value(), "params.b", "mc needs b");
    need(p.m || !p.m_grid.empty(), "params.m_grid", "mc needs m or m_grid");
    if (p.alpha) need(scalar, "params.alpha", "importance sampling needs a finite or iid model");
    if (p.exact) need(scalar, "params.exact", "the exact oracle needs a finite or iid lattice model");
    if (p.c && p.b) need(*p.c <= *p.b, "params.c", "cutoff c must be <= b");
  } else if (t == "renewal") {
    need(p.s.has_value(), "params.s", "renewal needs s");
    need(p.h.has_value() && *p.h > 0, "params.h", "renewal needs h > 0");
    if (!scalar) need(p.declared_drift.has_value(), "params.declared_drift", "renewal on this model needs declared_drift");
    if (has_model && !p.states.empty() && c.model.finite)
      for (auto s : p.states) need(s < c.model.finite->states(), "params.states", "state " + std::to_string(s) + " does not exist");
  } else if (t == "tail") {
    need(!p.levels.empty(), "params.levels", "tail needs levels");
    if (!scalar) need(p.declared_drift.has_value(), "params.declared_drift", "tail on this model needs declared_drift");
  } else if (t == "rca-test") {
    need(c.model.type == ModelType::rca, "model.type", "rca-test needs an rca model");
    need(p.truncated.has_value() || !p.c_grid.empty(), "params", "rca-test needs truncated and/or c_grid");
  }
  if (p.x0 && c.model.finite) need(*p.x0 < c.model.finite->states(), "params.x0", "initial state does not exist");
  if (p.x0 && c.model.matrix)
    need(*p.x0 < c.model.matrix->chain_states(), "params.x0", "initial chain state does not exist");
}

ParseResult parse_root(const YAML::Node& root) {
  ParseResult out;
  Reader rd(out.diagnostics);
  if (!root.IsMap()) {
    rd.error(root, "config", "expected a mapping at the top level");
    return out;
  }
  rd.check_keys(root, "", {"model", "task", "params", "seed", "reps", "workers", "output"});
  ExperimentConfig c;
  const auto task = rd.text(root, "task", "task");
  if (!task) {
    rd.error(root, "task", "missing task");
  } else {
    bool known = false;
    std::string valid;
    for (const char* t : kTasks) {
      known = known || *task == t;
      valid += valid.empty() ? t : std::string(", ") + t;
    }
    if (!known) rd.error(root["task"], "task", "unknown task '" + *task + "'; valid tasks: " + valid);
    c.task = *task;
  }
  parse_model(rd, root["model"], c.model);
  parse_params(rd, root["params"], c.params);
  c.seed = rd.u64(root, "seed", "seed").value_or(c.seed);
  c.reps = rd.count(root, "reps", "reps", 1).value_or(c.reps);
  c.workers = static_cast<unsigned>(rd.count(root, "workers", "workers", 1).value_or(1));
  if (const YAML::Node on = root["output"]) {
    rd.check_keys(on, "output", {"path", "format"});
    c.out_path = rd.text(on, "path", "output.path").value_or("");
    if (auto f = rd.text(on, "format", "output.format")) {
      if (*f == "csv")
        c.format = Format::csv;
      else if (*f != "json")
        rd.error(on["format"], "output.format", "expected csv or json");
    }
  }
  if (task) check_task(rd, root, c);
  if (out.diagnostics.empty()) out.config = std::move(c);
  return out;
}

}  // namespace

ParseResult parse_config_text(const std::string& text) {
  try {
    return parse_root(YAML::Load(text));
  } catch (const YAML::ParserException& e) {
    ParseResult r;
    r.diagnostics.push_back({e.mark.line + 1, "config", e.msg});
    return r;
  }
}

ParseResult load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    ParseResult r;
    r.diagnostics.push_back({0, "config", "cannot read file"});
    return r;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace mrw::cli
