#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "swe/kernels.hpp"

namespace swe::cli {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

double to_double(const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw std::invalid_argument("expected a finite number, got '" + s + "'");
    return v;
}

template <class Int>
Int to_int(const std::string& raw) {
    const std::string s = trim(raw);
    Int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<double> to_list(const std::string& s) {
    std::vector<double> out;
    if (trim(s).empty()) return out;
    for (const auto& item : split(s, ',')) out.push_back(to_double(item));
    return out;
}

std::string list_text(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
}

/// "i" or "i,j" or "i,j,k"; missing trailing entries are 0.
std::array<int, 3> to_cell(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.empty() || parts.size() > 3) throw std::invalid_argument("expected 1 to 3 integers, got '" + s + "'");
    std::array<int, 3> out{0, 0, 0};
    for (std::size_t i = 0; i < parts.size(); ++i) out[i] = to_int<int>(parts[i]);
    return out;
}

std::string cell_text(const std::array<int, 3>& c) {
    return std::to_string(c[0]) + ", " + std::to_string(c[1]) + ", " + std::to_string(c[2]);
}

/// "identity, tanh@2:0:0": factors separated by commas, optional shift.
TestFunctional::Factor to_factor(const std::string& s) {
    TestFunctional::Factor f;
    const auto at = s.find('@');
    f.map = parse_lipschitz(trim(s.substr(0, at)));
    if (at != std::string::npos) {
        const auto parts = split(s.substr(at + 1), ':');
        if (parts.empty() || parts.size() > 3) throw std::invalid_argument("bad shift in '" + s + "'");
        for (std::size_t i = 0; i < parts.size(); ++i) f.shift[i] = to_int<int>(parts[i]);
    }
    return f;
}

std::vector<TestFunctional::Factor> to_factors(const std::string& s) {
    std::vector<TestFunctional::Factor> out;
    for (const auto& item : split(s, ',')) out.push_back(to_factor(item));
    return out;
}

std::string factors_text(const std::vector<TestFunctional::Factor>& factors) {
    std::string out;
    for (const auto& f : factors) {
        if (!out.empty()) out += ", ";
        out += lipschitz_name(f.map);
        if (f.shift != std::array<int, 3>{0, 0, 0})
            out += "@" + std::to_string(f.shift[0]) + ":" + std::to_string(f.shift[1]) + ":" +
                   std::to_string(f.shift[2]);
    }
    return out;
}

CovarianceModel to_model(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "white") return CovarianceModel::White;
    if (s == "riesz") return CovarianceModel::Riesz;
    if (s == "bump") return CovarianceModel::Bump;
    if (s == "atom") return CovarianceModel::Atom;
    if (s == "fractional") return CovarianceModel::Fractional;
    throw std::invalid_argument("unknown model '" + s + "' (expected white, riesz, bump, atom, fractional)");
}

std::string model_text(CovarianceModel m) {
    switch (m) {
        case CovarianceModel::White: return "white";
        case CovarianceModel::Riesz: return "riesz";
        case CovarianceModel::Bump: return "bump";
        case CovarianceModel::Atom: return "atom";
        case CovarianceModel::Fractional: return "fractional";
    }
    return "?";
}

struct Key {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Key>& key_table() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<Key> keys = {
        {"grid.dim", [](C& c, S v) { c.grid.dim = c.cov.dim = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.grid.dim); }},
        {"grid.length", [](C& c, S v) { c.grid.length = to_double(v); },
         [](const C& c) { return format_double(c.grid.length); }},
        {"grid.cells", [](C& c, S v) { c.grid.cells = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.grid.cells); }},
        {"grid.dt", [](C& c, S v) { c.grid.dt = to_double(v); }, [](const C& c) { return format_double(c.grid.dt); }},
        {"grid.horizon", [](C& c, S v) { c.grid.horizon = to_double(v); },
         [](const C& c) { return format_double(c.grid.horizon); }},

        {"noise.model", [](C& c, S v) { c.cov.model = to_model(v); },
         [](const C& c) { return model_text(c.cov.model); }},
        {"noise.beta", [](C& c, S v) { c.cov.beta = to_double(v); },
         [](const C& c) { return format_double(c.cov.beta); }},
        {"noise.s", [](C& c, S v) { c.cov.s = to_double(v); }, [](const C& c) { return format_double(c.cov.s); }},
        {"noise.c", [](C& c, S v) { c.cov.c = to_double(v); }, [](const C& c) { return format_double(c.cov.c); }},
        {"noise.hurst", [](C& c, S v) { c.cov.hurst = to_double(v); },
         [](const C& c) { return format_double(c.cov.hurst); }},

        {"equation.sigma", [](C& c, S v) { c.sigma = SigmaSpec::parse(trim(v)); },
         [](const C& c) { return c.sigma.name(); }},

        {"run.replicas", [](C& c, S v) { c.replicas = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.replicas); }},
        {"run.seed", [](C& c, S v) { c.seed = to_int<std::uint64_t>(v); },
         [](const C& c) { return std::to_string(c.seed); }},
        {"run.threads", [](C& c, S v) { c.threads = to_int<unsigned>(v); },
         [](const C& c) { return std::to_string(c.threads); }},
        {"run.output", [](C& c, S v) { c.output = trim(v); }, [](const C& c) { return c.output; }},

        {"ergodicity.radii", [](C& c, S v) { c.radii = to_list(v); }, [](const C& c) { return list_text(c.radii); }},
        {"ergodicity.functional", [](C& c, S v) { c.functional.factors = to_factors(v); },
         [](const C& c) { return factors_text(c.functional.factors); }},
        {"ergodicity.clip", [](C& c, S v) { c.functional.clip = to_double(v); },
         [](const C& c) { return format_double(c.functional.clip); }},
        {"ergodicity.decay_ratio", [](C& c, S v) { c.decay_ratio = to_double(v); },
         [](const C& c) { return format_double(c.decay_ratio); }},
        {"ergodicity.sigmas", [](C& c, S v) { c.sigmas = to_double(v); },
         [](const C& c) { return format_double(c.sigmas); }},

        {"spectral.ball_radius", [](C& c, S v) { c.ball_radius = to_double(v); },
         [](const C& c) { return format_double(c.ball_radius); }},
        {"spectral.radii", [](C& c, S v) { c.profile_radii = to_list(v); },
         [](const C& c) { return list_text(c.profile_radii); }},

        {"picard.mollifier", [](C& c, S v) { c.mollifier = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.mollifier); }},
        {"picard.depth", [](C& c, S v) { c.picard_depth = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.picard_depth); }},
        {"picard.replicas", [](C& c, S v) { c.picard_replicas = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.picard_replicas); }},

        {"malliavin.probe_step", [](C& c, S v) { c.probe_step = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.probe_step); }},
        {"malliavin.probe_cell", [](C& c, S v) { c.probe_cell = to_cell(v); },
         [](const C& c) { return cell_text(c.probe_cell); }},
        {"malliavin.epsilon", [](C& c, S v) { c.epsilon = to_double(v); },
         [](const C& c) { return format_double(c.epsilon); }},
        {"malliavin.replicas", [](C& c, S v) { c.malliavin_replicas = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.malliavin_replicas); }},
        {"malliavin.depth", [](C& c, S v) { c.malliavin_depth = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.malliavin_depth); }},
        {"malliavin.poincare", [](C& c, S v) { c.poincare = to_bool(v); },
         [](const C& c) { return std::string(c.poincare ? "true" : "false"); }},
        {"malliavin.f", [](C& c, S v) { c.poincare_f = parse_point_map(v); },
         [](const C& c) { return point_map_name(c.poincare_f); }},
        {"malliavin.g", [](C& c, S v) { c.poincare_g = parse_point_map(v); },
         [](const C& c) { return point_map_name(c.poincare_g); }},
        {"malliavin.f_cell", [](C& c, S v) { c.poincare_f_cell = to_cell(v); },
         [](const C& c) { return cell_text(c.poincare_f_cell); }},
        {"malliavin.g_cell", [](C& c, S v) { c.poincare_g_cell = to_cell(v); },
         [](const C& c) { return cell_text(c.poincare_g_cell); }},
        {"malliavin.lhs_replicas", [](C& c, S v) { c.lhs_replicas = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.lhs_replicas); }},
        {"malliavin.rhs_replicas", [](C& c, S v) { c.rhs_replicas = to_int<int>(v); },
         [](const C& c) { return std::to_string(c.rhs_replicas); }},
    };
    return keys;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : key_table())
        if (k.name == name) return &k;
    return nullptr;
}

void check_ladder(const std::vector<double>& radii, const std::string& key, std::vector<std::string>& out) {
    if (radii.empty()) out.push_back(key + ": at least one radius is required");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) out.push_back(key + ": radii must be positive");
        if (i > 0 && !(radii[i] > radii[i - 1])) out.push_back(key + ": radii must be strictly increasing");
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> v)
    : std::runtime_error([&] {
          std::string msg = "invalid configuration:";
          for (const auto& s : v) msg += "\n  - " + s;
          return msg;
      }()),
      violations(std::move(v)) {}

std::optional<Subcommand> parse_subcommand(const std::string& name) {
    if (name == "simulate") return Subcommand::Simulate;
    if (name == "ergodicity") return Subcommand::Ergodicity;
    if (name == "dalang-check") return Subcommand::DalangCheck;
    if (name == "spectral-check") return Subcommand::SpectralCheck;
    if (name == "picard-check") return Subcommand::PicardCheck;
    if (name == "malliavin-check") return Subcommand::MalliavinCheck;
    return std::nullopt;
}

std::string subcommand_name(Subcommand s) {
    switch (s) {
        case Subcommand::Simulate: return "simulate";
        case Subcommand::Ergodicity: return "ergodicity";
        case Subcommand::DalangCheck: return "dalang-check";
        case Subcommand::SpectralCheck: return "spectral-check";
        case Subcommand::PicardCheck: return "picard-check";
        case Subcommand::MalliavinCheck: return "malliavin-check";
    }
    return "?";
}

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names = {"simulate",       "ergodicity",   "dalang-check",
                                                   "spectral-check", "picard-check", "malliavin-check"};
    return names;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

PointMap parse_point_map(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "identity") return PointMap::Identity;
    if (s == "sin" || s == "sine") return PointMap::Sine;
    if (s == "tanh") return PointMap::Tanh;
    throw std::invalid_argument("unknown point map '" + s + "' (expected identity, sin, tanh)");
}

std::string point_map_name(PointMap map) {
    switch (map) {
        case PointMap::Identity: return "identity";
        case PointMap::Sine: return "sin";
        case PointMap::Tanh: return "tanh";
    }
    return "?";
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& k : key_table()) out.push_back(k.name);
        return out;
    }();
    return names;
}

void set_value(ExperimentConfig& config, const std::string& dotted_key, const std::string& value) {
    const Key* key = find_key(dotted_key);
    if (!key) throw std::invalid_argument("unknown key '" + dotted_key + "'");
    try {
        key->set(config, value);
    } catch (const std::exception& e) {
        throw std::invalid_argument(dotted_key + ": " + e.what());
    }
}

ExperimentConfig read_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.what()});
    }
    ExperimentConfig config;
    std::vector<std::string> violations;
    // grid.dim first so that the covariance dimension follows it whatever the key order
    std::vector<std::pair<std::string, std::string>> assignments;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty()) violations.push_back("key '" + section + "' must sit inside a [section]");
            continue;
        }
        for (const auto& [key, leaf] : body) {
            const std::string dotted = section + "." + key;
            if (!find_key(dotted)) {
                violations.push_back("unknown key '" + dotted + "'");
                continue;
            }
            assignments.emplace_back(dotted, leaf.data());
        }
    }
    std::stable_partition(assignments.begin(), assignments.end(),
                          [](const auto& a) { return a.first == "grid.dim"; });
    for (const auto& [dotted, value] : assignments) {
        try {
            set_value(config, dotted, value);
        } catch (const std::exception& e) {
            violations.push_back(e.what());
        }
    }
    if (!violations.empty()) throw ConfigError(violations);
    return config;
}

std::vector<std::string> validate_config(const ExperimentConfig& c, std::optional<Subcommand> command) {
    std::vector<std::string> out;
    const auto wants = [&](Subcommand s) { return !command || *command == s; };
    const GridSpec& g = c.grid;

    bool grid_ok = true;
    const auto bad_grid = [&](const std::string& msg) {
        out.push_back(msg);
        grid_ok = false;
    };
    if (g.dim < 1 || g.dim > 3) bad_grid("grid.dim = " + std::to_string(g.dim) + " must be 1, 2 or 3");
    if (!(g.length > 0.0)) bad_grid("grid.length must be positive");
    if (g.cells < 2 || g.cells % 2 != 0) bad_grid("grid.cells = " + std::to_string(g.cells) + " must be even and >= 2");
    if (!(g.horizon > 0.0)) bad_grid("grid.horizon must be positive");
    if (g.dt < 0.0) bad_grid("grid.dt must be >= 0 (0 selects dx)");
    if (grid_ok && g.requested_dt() > g.dx() * (1.0 + 1e-12))
        bad_grid("grid.dt = " + format_double(g.dt) + " exceeds dx = " + format_double(g.dx()) +
                 " (the stepper requires dt <= dx)");
    if (grid_ok && g.horizon > g.length / 2.0)
        bad_grid("finite propagation: T = " + format_double(g.horizon) + " exceeds L/2 = " +
                 format_double(g.length / 2.0) + ", the light cone would wrap around the torus");
    if (c.cov.dim != g.dim) out.push_back("noise dimension differs from grid.dim");

    // Dalang first: a Riesz exponent beta >= 2 is reported as a Dalang failure
    // even when it also exceeds d
    if (command == Subcommand::DalangCheck) {
        try {
            (void)dalang_check(c.cov);
        } catch (const std::exception& e) {
            out.push_back(std::string("noise: ") + e.what());
        }
    } else {
        try {
            const auto d = dalang_check(c.cov);
            if (!d.finite) out.push_back("noise: Dalang's condition fails for " + c.cov.name() + ": " + d.reason);
            else c.cov.validate();
        } catch (const std::exception& e) {
            out.push_back(std::string("noise: ") + e.what());
        }
    }

    if (c.replicas < 1) out.push_back("run.replicas must be >= 1");
    if (c.output.empty()) out.push_back("run.output must not be empty");

    if (wants(Subcommand::Ergodicity)) {
        if (c.replicas < 200)
            out.push_back("run.replicas = " + std::to_string(c.replicas) +
                          " is below the 200 replicas the variance ratio test needs");
        check_ladder(c.radii, "ergodicity.radii", out);
        try {
            c.functional.validate();
        } catch (const std::exception& e) {
            out.push_back(std::string("ergodicity.functional: ") + e.what());
        }
        if (grid_ok && !c.radii.empty()) {
            const double reach = c.radii.back() + g.horizon + c.functional.reach(g);
            if (reach > g.length / 2.0 + 1e-12)
                out.push_back("finite propagation: R_max + T + |zeta| = " + format_double(reach) + " exceeds L/2 = " +
                              format_double(g.length / 2.0) + "; averages would see wrapped noise");
        }
        if (!(c.decay_ratio > 0.0 && c.decay_ratio < 1.0)) out.push_back("ergodicity.decay_ratio must lie in (0, 1)");
        if (!(c.sigmas >= 0.0)) out.push_back("ergodicity.sigmas must be >= 0");
    }

    if (wants(Subcommand::SpectralCheck)) {
        if (!(c.ball_radius > 0.0)) out.push_back("spectral.ball_radius must be positive");
        check_ladder(c.profile_radii, "spectral.radii", out);
    }

    const double reach_n = c.mollifier >= 1 ? kMollifierRadius / c.mollifier : 0.0;
    if (wants(Subcommand::PicardCheck)) {
        if (c.mollifier < 1) out.push_back("picard.mollifier must be >= 1");
        if (c.picard_depth < 2) out.push_back("picard.depth must be >= 2 to form a convergence ratio");
        if (c.picard_replicas < 1) out.push_back("picard.replicas must be >= 1");
    }
    if (command == Subcommand::PicardCheck && grid_ok && c.mollifier >= 1) {
        if (g.dim == 3) out.push_back("picard-check runs in d = 1 or 2; the d = 3 ladder is out of scope");
        if (reach_n < 2.0 * g.dx())
            out.push_back("picard.mollifier: a/n = " + format_double(reach_n) + " is below 2 dx = " +
                          format_double(2.0 * g.dx()) + "; the mollifier would not be resolved");
        if (g.horizon + reach_n > g.length / 2.0 + 1e-12)
            out.push_back("finite propagation: T + a/n = " + format_double(g.horizon + reach_n) + " exceeds L/2");
        const double steps = g.steps();
        const double cost = steps * steps * static_cast<double>(g.size()) * std::max(c.picard_depth, 1) *
                            std::max(c.picard_replicas, 1);
        if (cost > kPicardCostLimit)
            out.push_back("picard: cost guard, N_t^2 N^d k M = " + format_double(cost) + " exceeds " +
                          format_double(kPicardCostLimit));
    }

    if (wants(Subcommand::MalliavinCheck)) {
        if (!(c.epsilon >= 1e-10 && c.epsilon <= 1.0)) out.push_back("malliavin.epsilon must lie in [1e-10, 1]");
        if (c.malliavin_replicas < 1) out.push_back("malliavin.replicas must be >= 1");
        if (c.lhs_replicas < 2) out.push_back("malliavin.lhs_replicas must be >= 2");
        if (c.rhs_replicas < 10) out.push_back("malliavin.rhs_replicas must be >= 10 (ten batches)");
    }
    if (command == Subcommand::MalliavinCheck && grid_ok) {
        if (g.dim == 3)
            out.push_back("malliavin-check runs in d = 1 or 2; in d = 3 the derivative is measure-valued (open problem)");
        if (c.probe_step < 0 || c.probe_step >= g.steps())
            out.push_back("malliavin.probe_step must lie in [0, " + std::to_string(g.steps()) + ")");
        const auto in_grid = [&](const std::array<int, 3>& cell) {
            for (int k = 0; k < 3; ++k) {
                const int hi = k < g.dim ? g.cells : 1;
                if (cell[k] < 0 || cell[k] >= hi) return false;
            }
            return true;
        };
        if (!in_grid(c.probe_cell)) out.push_back("malliavin.probe_cell lies outside the grid");
        const double extra = c.malliavin_depth >= 0 ? reach_n : 0.0;
        if (g.horizon + extra > g.length / 2.0 + 1e-12)
            out.push_back("finite propagation: kernel support T" + std::string(extra > 0 ? " + a/n" : "") +
                          " exceeds L/2");
        if (c.malliavin_depth >= 0 && c.mollifier >= 1 && reach_n < 2.0 * g.dx())
            out.push_back("picard.mollifier: a/n is below 2 dx; the mollifier would not be resolved");
        if (c.poincare) {
            if (g.dim != 1) out.push_back("malliavin.poincare runs in d = 1 only");
            if (static_cast<double>(g.steps()) * static_cast<double>(g.size()) > 8192)
                out.push_back("malliavin.poincare: N_t * N^d exceeds the 8192 probe guard");
            if (!in_grid(c.poincare_f_cell) || !in_grid(c.poincare_g_cell))
                out.push_back("malliavin.f_cell / g_cell lie outside the grid");
        }
    }
    return out;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c = read_config(text);
    auto violations = validate_config(c);
    if (!violations.empty()) throw ConfigError(violations);
    return c;
}

std::string emit_config(const ExperimentConfig& config) {
    std::ostringstream os;
    std::string section;
    for (const auto& k : key_table()) {
        const auto dot = k.name.find('.');
        const std::string sec = k.name.substr(0, dot);
        if (sec != section) {
            os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
            section = sec;
        }
        os << k.name.substr(dot + 1) << " = " << k.get(config) << "\n";
    }
    return os.str();
}

}  // namespace swe::cli
