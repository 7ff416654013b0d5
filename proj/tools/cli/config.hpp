#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrw/finite_model.hpp"
#include "mrw/models.hpp"

namespace mrw::cli {

inline constexpr const char* kTasks[] = {"simulate", "moments", "ladder", "approx", "mc",
                                         "compare",  "renewal", "tail",   "rca-test"};

struct Diagnostic {
  int line = 0;  // 1-based, 0 when unknown
  std::string field;
  std::string message;
};

std::string format_diagnostic(const Diagnostic& d, const std::string& path);

enum class ModelType { finite, iid, rca, matrix_product };

struct ModelSpec {
  ModelType type = ModelType::finite;
  std::optional<FiniteModel> finite;  // finite and iid
  std::optional<RcaModel> rca;
  std::optional<MatrixProductModel> matrix;
  bool zero_drift = false;
  std::string summary;
};

struct TruncatedSpec {
  double mu0 = 0.0, mu1 = 0.0, lambda = 0.0;
  std::size_t m = 1;
  SignConvention sign = SignConvention::as_printed;
};

// Every task parameter; which ones are required depends on the task.
struct TaskParams {
  std::optional<double> b, c, s, h, alpha, rho_plus, r_factor, declared_drift, margin;
  std::optional<double> b_over_sqrt_m, c_over_sqrt_m, s_over_sqrt_m;
  std::optional<std::size_t> m, n, x0;
  std::vector<std::size_t> m_grid;
  std::vector<double> levels, h_grid, alpha_grid, c_grid;
  std::vector<std::size_t> states;
  std::size_t paths = 1;
  std::size_t truncation = 500;
  std::size_t burn_in = 1000;
  std::size_t count = 100000;
  std::size_t chains = 1;
  std::size_t step_cap = 10'000'000;
  std::size_t ladder_count = 100000;
  std::size_t ladder_step_cap = 100000;
  std::size_t lyapunov_steps = 0;
  int j = -1;
  bool exact = false;
  bool stationary = true;  // initial law when x0 is absent
  std::string event = "joint";
  std::optional<TruncatedSpec> truncated;
};

enum class Format { csv, json };

struct ExperimentConfig {
  ModelSpec model;
  std::string task;
  TaskParams params;
  std::uint64_t seed = 1;
  std::size_t reps = 10000;
  unsigned workers = 1;
  std::string out_path;  // empty: stdout
  Format format = Format::json;
};

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<Diagnostic> diagnostics;
};

// Parses and validates a config file, collecting every violation.
ParseResult load_config(const std::string& path);
ParseResult parse_config_text(const std::string& text);

}  // namespace mrw::cli
