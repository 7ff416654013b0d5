#pragma once

#include "config.hpp"
#include "report.hpp"

namespace mrw::cli {

// Runs the configured task. Library errors propagate as mrw::Error.
Report run_experiment(const ExperimentConfig& cfg);

}  // namespace mrw::cli
