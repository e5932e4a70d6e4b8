#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swe/ergodicity.hpp"
#include "swe/grid.hpp"
#include "swe/malliavin.hpp"
#include "swe/noise.hpp"
#include "swe/solver.hpp"

namespace swe::cli {

enum class Subcommand { Simulate, Ergodicity, DalangCheck, SpectralCheck, PicardCheck, MalliavinCheck };

std::optional<Subcommand> parse_subcommand(const std::string& name);
std::string subcommand_name(Subcommand s);
const std::vector<std::string>& subcommand_names();

/// Everything a run needs. The covariance dimension always follows the grid.
struct ExperimentConfig {
    GridSpec grid{1, 40.0, 320, 0.0, 1.0};
    CovarianceSpec cov = CovarianceSpec::white(1);
    SigmaSpec sigma = SigmaSpec::linear();

    int replicas = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string output = "out";

    std::vector<double> radii{2.0, 4.0, 8.0, 16.0};
    TestFunctional functional;
    double decay_ratio = 0.75;
    double sigmas = 3.0;

    double ball_radius = 1.0;
    std::vector<double> profile_radii{1.0, 2.0, 4.0, 8.0, 16.0};

    int mollifier = 4;
    int picard_depth = 6;
    int picard_replicas = 4;

    int probe_step = 0;
    std::array<int, 3> probe_cell{0, 0, 0};
    double epsilon = 1e-4;
    int malliavin_replicas = 100;
    int malliavin_depth = -1;
    bool poincare = false;
    PointMap poincare_f = PointMap::Identity;
    PointMap poincare_g = PointMap::Identity;
    std::array<int, 3> poincare_f_cell{0, 0, 0};
    std::array<int, 3> poincare_g_cell{0, 0, 0};
    int lhs_replicas = 2000;
    int rhs_replicas = 100;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Carries every violation found, not just the first.
struct ConfigError : std::runtime_error {
    explicit ConfigError(std::vector<std::string> violations);
    std::vector<std::string> violations;
};

/// Sectioned key = value text (comments on lines starting with ';' or '#').
/// Throws ConfigError for syntax errors, unknown sections or keys and
/// values that do not parse. Does not check ranges.
ExperimentConfig read_config(const std::string& text);

/// Every range, Dalang and wrap-around violation relevant to `command`
/// (all of them when no command is given).
std::vector<std::string> validate_config(const ExperimentConfig& config, std::optional<Subcommand> command = {});

/// read_config followed by validate_config for every subcommand.
ExperimentConfig parse_config(const std::string& text);

/// Canonical text with every key; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

/// Applies one `section.key = value` assignment (the same keys as the file).
void set_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value);

/// Names of all recognised dotted keys.
const std::vector<std::string>& config_keys();

/// Shortest text that parses back to the same double.
std::string format_double(double x);

PointMap parse_point_map(const std::string& name);
std::string point_map_name(PointMap map);

}  // namespace swe::cli
