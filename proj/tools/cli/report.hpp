#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "config.hpp"

namespace mrw::cli {

inline constexpr const char* kSchemaVersion = "mrw-report/1";

// Empty cell, integer, real or text. Missing and non-finite reals are
// written as an empty CSV field and as JSON null.
using Cell = std::variant<std::monostate, std::int64_t, std::uint64_t, double, std::string>;

struct Report {
  std::string task;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::string model;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::string> warnings;

  void add_row(std::vector<Cell> row);
};

// Column names of each task. Fixed per schema version.
const std::vector<std::string>& task_columns(const std::string& task);

std::string render_json(const Report& r);
std::string render_csv(const Report& r);
std::string render(const Report& r, Format f);

// Writes to a temporary file in the target directory, then renames.
void write_atomic(const std::string& path, const std::string& text);

}  // namespace mrw::cli
