#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "config.hpp"
#include "doctest.h"

using namespace swe;
using namespace swe::cli;

namespace {

bool mentions(const std::vector<std::string>& violations, const std::string& needle) {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("defaults are valid and round-trip through text") {
    const ExperimentConfig defaults;
    CHECK(validate_config(defaults).empty());
    CHECK(parse_config(emit_config(defaults)) == defaults);
}

TEST_CASE("a non-default config round-trips exactly") {
    ExperimentConfig c;
    c.grid = GridSpec{2, 37.5, 150, 0.1 / 3.0, 0.7};
    c.cov = CovarianceSpec::riesz(2, 1.3);
    c.sigma = SigmaSpec::sine();
    c.replicas = 321;
    c.seed = 18446744073709551557ULL;
    c.threads = 3;
    c.output = "results/run 1";
    c.radii = {1.5, 3.0, 6.0, 12.0};
    c.functional.factors = {{LipschitzMap::Tanh, {0, 0, 0}}, {LipschitzMap::Sine, {2, -1, 0}}};
    c.functional.clip = 4.25;
    c.decay_ratio = 0.8;
    c.sigmas = 2.5;
    c.ball_radius = 0.5;
    c.profile_radii = {1, 3, 9};
    c.mollifier = 3;
    c.picard_depth = 5;
    c.picard_replicas = 2;
    c.probe_step = 4;
    c.probe_cell = {7, 3, 0};
    c.epsilon = 3e-5;
    c.malliavin_replicas = 50;
    c.malliavin_depth = 2;
    const auto text = emit_config(c);
    CHECK(read_config(text) == c);
    CHECK(emit_config(read_config(text)) == text);
}

TEST_CASE("doubles survive formatting") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(std::stod(format_double(x)) == x);
    }
}

TEST_CASE("syntax and key errors") {
    CHECK_THROWS_AS(read_config("[grid]\ncells = many\n"), ConfigError);
    CHECK_THROWS_AS(read_config("[grid]\nwidth = 3\n"), ConfigError);
    CHECK_THROWS_AS(read_config("[nonsense]\nkey = 1\n"), ConfigError);
    CHECK_THROWS_AS(read_config("stray = 1\n"), ConfigError);
    CHECK_THROWS_AS(read_config("[noise]\nmodel = pink\n"), ConfigError);
    try {
        read_config("[grid]\ncells = many\nbogus = 1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.violations.size() == 2);
    }
    // comments on their own lines
    CHECK(read_config("; comment\n# another\n[grid]\ncells = 64\n").grid.cells == 64);
}

TEST_CASE("every violation is listed") {
    ExperimentConfig c;
    c.grid.dim = 2;
    c.cov = CovarianceSpec::white(2);
    c.replicas = 10;
    c.radii = {2.0, 4.0, 8.0, 30.0};
    const auto v = validate_config(c, Subcommand::Ergodicity);
    CHECK(v.size() >= 3);
    CHECK(v.front().find("Dalang") != std::string::npos);
    CHECK(mentions(v, "replicas"));
    CHECK(mentions(v, "L/2"));
}

TEST_CASE("Dalang is not a violation for dalang-check itself") {
    ExperimentConfig c;
    c.grid.dim = 2;
    c.grid.cells = 64;
    c.cov = CovarianceSpec::white(2);
    CHECK_FALSE(mentions(validate_config(c, Subcommand::DalangCheck), "Dalang"));
    CHECK(mentions(validate_config(c, Subcommand::Simulate), "Dalang"));
}

TEST_CASE("d = 3 derivative probes are refused") {
    ExperimentConfig c;
    c.grid = GridSpec{3, 8.0, 32, 0.0, 1.0};
    c.cov = CovarianceSpec::bump(3, 0.5);
    CHECK(mentions(validate_config(c, Subcommand::MalliavinCheck), "open problem"));
    CHECK(mentions(validate_config(c, Subcommand::PicardCheck), "d = 1 or 2"));
    CHECK_FALSE(mentions(validate_config(c, Subcommand::Simulate), "d = 1 or 2"));
}

TEST_CASE("overrides use the same keys as the file") {
    ExperimentConfig c;
    set_value(c, "noise.model", "riesz");
    set_value(c, "noise.beta", "0.5");
    set_value(c, "grid.cells", "128");
    CHECK(c.cov.model == CovarianceModel::Riesz);
    CHECK(c.cov.beta == 0.5);
    CHECK(c.grid.cells == 128);
    CHECK_THROWS(set_value(c, "noise.colour", "red"));
    CHECK(std::find(config_keys().begin(), config_keys().end(), "malliavin.g_cell") != config_keys().end());
    set_value(c, "grid.dim", "2");
    CHECK(c.cov.dim == 2);
}

TEST_CASE("subcommand names") {
    for (const auto& name : subcommand_names()) {
        const auto s = parse_subcommand(name);
        REQUIRE(s.has_value());
        CHECK(subcommand_name(*s) == name);
    }
    CHECK_FALSE(parse_subcommand("simulated").has_value());
    CHECK(parse_point_map(point_map_name(PointMap::Tanh)) == PointMap::Tanh);
}
