#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace swe::cli {

struct RunOptions {
    bool dump_kernels = false;
    /// Command line echoed into the manifest.
    std::string invocation;
};

/// Runs a validated config. Writes the subcommand's CSV/JSON artifacts,
/// manifest.json and, when a property fails, failure.json into
/// config.output. Returns 0 iff every asserted property holds.
int run(const ExperimentConfig& config, Subcommand command, const RunOptions& options = {});

/// A number as written to CSV: 17 significant digits.
std::string csv_number(double x);

}  // namespace swe::cli
