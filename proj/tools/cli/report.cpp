#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>
#include <unistd.h>

namespace mrw::cli {

void Report::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw std::logic_error("report row for task " + task + " has " + std::to_string(row.size()) +
                           " cells, schema has " + std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

const std::vector<std::string>& task_columns(const std::string& task) {
  static const std::map<std::string, std::vector<std::string>> cols = {
      {"simulate", {"path", "step", "state", "sum", "seed"}},
      {"moments", {"quantity", "alpha", "value", "std_error", "seed"}},
      {"ladder", {"quantity", "s", "value", "std_error", "seed"}},
      {"approx",
       {"m", "b", "c", "s", "rho_plus", "kappa", "delta", "r_factor", "joint_approx", "bridge_approx",
        "corrected_j0", "corrected_j1"}},
      {"mc",
       {"m", "b", "c", "alpha", "crossing", "crossing_se", "joint", "joint_se", "ess", "dp_crossing", "dp_joint",
        "seed", "reps"}},
      {"compare",
       {"m", "b", "c", "mc_value", "mc_se", "approx_value", "abs_err", "err_times_sqrt_m", "approx_uncorrected",
        "abs_err_uncorrected", "rho_plus", "kappa", "delta", "r_factor", "seed", "reps"}},
      {"renewal",
       {"s", "h", "u_hat", "u_se", "limit", "cumulative", "cumulative_se", "cumulative_limit", "seed", "reps"}},
      {"tail", {"log_level", "tail", "tail_se", "slope", "slope_se", "intercept", "tail_root", "seed", "reps"}},
      {"rca-test",
       {"procedure", "c", "mean_T", "mean_T_se", "ks_normal", "fit_sd", "mu0", "mu1", "lambda", "m", "sign",
        "probability", "probability_se", "approximation", "z_sigma", "kappa", "rho_plus", "capped", "seed",
        "reps"}},
  };
  const auto it = cols.find(task);
  if (it == cols.end()) throw std::logic_error("no schema for task " + task);
  return it->second;
}

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string csv_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, double>) {
          return std::isfinite(v) ? fmt_real(v) : "";
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (v.find_first_of(",\"\n") == std::string::npos) return v;
          std::string q = "\"";
          for (char ch : v) {
            if (ch == '"') q += '"';
            q += ch;
          }
          return q + "\"";
        } else {
          return std::to_string(v);
        }
      },
      c);
}

nlohmann::ordered_json json_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) return nullptr;
          return v;
        } else {
          return v;
        }
      },
      c);
}

}  // namespace

std::string render_json(const Report& r) {
  nlohmann::ordered_json j;
  j["schema"] = kSchemaVersion;
  j["task"] = r.task;
  j["seed"] = r.seed;
  j["reps"] = r.reps;
  j["model"] = r.model;
  j["columns"] = r.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) o[r.columns[i]] = json_cell(row[i]);
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string render_csv(const Report& r) {
  std::string out;
  out += std::string("# schema: ") + kSchemaVersion + "\n";
  out += "# task: " + r.task + "\n";
  out += "# seed: " + std::to_string(r.seed) + "\n";
  out += "# reps: " + std::to_string(r.reps) + "\n";
  out += "# model: " + r.model + "\n";
  for (const auto& w : r.warnings) out += "# warning: " + w + "\n";
  for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + r.columns[i];
  out += "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += "\n";
  }
  return out;
}

std::string render(const Report& r, Format f) { return f == Format::csv ? render_csv(r) : render_json(r); }

void write_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  const fs::path tmp = dir / ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot move report to " + path + ": " + ec.message());
  }
}

}  // namespace mrw::cli
