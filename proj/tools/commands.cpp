#include "commands.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <initializer_list>
#include <memory>
#include <span>

#include "json.hpp"
#include "swe/ergodicity.hpp"
#include "swe/kernels.hpp"
#include "swe/malliavin.hpp"
#include "swe/parallel.hpp"
#include "swe/spectral.hpp"

#ifndef SWE_VERSION
#define SWE_VERSION "unknown"
#endif

namespace swe::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

/// RFC 4180 writer: CRLF records, fields quoted only when needed.
class Csv {
public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        row(header);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            const std::string& f = fields[i];
            if (f.find_first_of(",\"\r\n") == std::string::npos) {
                out_ << f;
                continue;
            }
            out_ << '"';
            for (char c : f) out_ << (c == '"' ? "\"\"" : std::string(1, c));
            out_ << '"';
        }
        out_ << "\r\n";
    }

private:
    std::ofstream out_;
};

struct Failure {
    std::string property;
    json expected;
    json observed;
    json tolerance;
};

/// Shared state of one run: artifacts written and properties that failed.
struct Context {
    const ExperimentConfig& config;
    fs::path dir;
    std::vector<std::string> artifacts;
    std::vector<Failure> failures;

    fs::path file(const std::string& name) {
        artifacts.push_back(name);
        return dir / name;
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream out(file(name), std::ios::binary);
        out << j.dump(2) << "\n";
    }

    void check(bool ok, const std::string& property, json expected, json observed, json tolerance = nullptr) {
        if (!ok) failures.push_back({property, std::move(expected), std::move(observed), std::move(tolerance)});
    }
};

/// Flat little-endian float64 stream: the header values, then the data.
void write_flat(const fs::path& path, std::initializer_list<double> header, std::span<const double> data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const auto put = [&out](double x) {
        auto bits = std::bit_cast<std::uint64_t>(x);
        char bytes[8];
        for (char& b : bytes) {
            b = static_cast<char>(bits & 0xff);
            bits >>= 8;
        }
        out.write(bytes, 8);
    };
    for (double h : header) put(h);
    for (double x : data) put(x);
}

std::vector<std::string> coordinate_header(int dim) {
    static const char* names[] = {"x", "y", "z"};
    return {names, names + dim};
}

std::vector<std::string> coordinates(const GridSpec& grid, std::size_t flat) {
    const auto idx = grid.unflatten(flat);
    std::vector<std::string> out;
    for (int k = 0; k < grid.dim; ++k) out.push_back(csv_number(grid.signed_index(idx[k]) * grid.dx()));
    return out;
}

json grid_json(const GridSpec& g) {
    return {{"dim", g.dim}, {"length", g.length}, {"cells", g.cells}, {"dx", g.dx()},
            {"dt", g.time_step()}, {"steps", g.steps()}, {"horizon", g.horizon}};
}

/// CSV of the nonzero cell masses plus the dense box as a flat array with
/// header (d, t, dx, origin offset); the origin sits at index (offset, ...).
void dump_kernel(Context& ctx, const std::string& name, const KernelGrid& k, double t) {
    write_flat(ctx.file(name + ".bin"), {static_cast<double>(k.dim), t, k.dx, static_cast<double>(k.half_width)},
               k.values);
    auto header = coordinate_header(k.dim);
    header.push_back("mass");
    Csv csv(ctx.file(name + ".csv"), header);
    const double vol = k.cell_volume();
    for (std::size_t f = 0; f < k.values.size(); ++f) {
        if (k.values[f] == 0.0) continue;
        const auto o = k.offsets(f);
        std::vector<std::string> row;
        for (int d = 0; d < k.dim; ++d) row.push_back(csv_number(o[d] * k.dx));
        row.push_back(csv_number(k.values[f] * vol));
        csv.row(row);
    }
}

void simulate(Context& ctx) {
    const auto& c = ctx.config;
    const GridSpec& grid = c.grid;
    const auto spectrum = periodize_spectrum(c.cov, grid);
    const bool fixed_point = c.sigma(1.0) == 0.0;
    std::vector<double> origin(static_cast<std::size_t>(c.replicas));
    std::vector<double> deviation(origin.size(), 0.0);
    std::vector<double> first;
    const unsigned workers = std::min<unsigned>(resolve_threads(c.threads), static_cast<unsigned>(c.replicas));
    std::vector<std::unique_ptr<Solver>> solvers(workers);
    parallel_for(origin.size(), workers, [&](std::size_t r, unsigned w) {
        if (!solvers[w]) solvers[w] = std::make_unique<Solver>(spectrum);
        auto state = solvers[w]->solve(c.sigma, c.seed, r);
        origin[r] = state.u[0];
        for (double u : state.u) deviation[r] = std::max(deviation[r], std::abs(u - 1.0));
        if (r == 0) first = std::move(state.u);
    });

    auto header = coordinate_header(grid.dim);
    header.push_back("u");
    Csv field(ctx.file("field.csv"), header);
    for (std::size_t i = 0; i < first.size(); ++i) {
        auto row = coordinates(grid, i);
        row.push_back(csv_number(first[i]));
        field.row(row);
    }
    write_flat(ctx.file("field.bin"),
               {static_cast<double>(grid.dim), static_cast<double>(grid.cells), grid.length, grid.horizon}, first);
    Csv samples(ctx.file("samples.csv"), {"replica", "u_origin"});
    for (std::size_t r = 0; r < origin.size(); ++r) samples.row({std::to_string(r), csv_number(origin[r])});

    double max_dev = 0.0;
    for (double d : deviation) max_dev = std::max(max_dev, d);
    json j = {{"grid", grid_json(grid)},
              {"covariance", c.cov.name()},
              {"sigma", c.sigma.name()},
              {"replicas", c.replicas},
              {"fixed_point_expected", fixed_point},
              {"max_abs_u_minus_1", max_dev}};
    ctx.write_json("simulate.json", j);
    if (fixed_point) ctx.check(max_dev == 0.0, "fixed point u == 1 when sigma(1) = 0", 0.0, max_dev, 0.0);
}

void ergodicity(Context& ctx) {
    const auto& c = ctx.config;
    ErgodicConfig ec;
    ec.grid = c.grid;
    ec.cov = c.cov;
    ec.sigma = c.sigma;
    ec.functional = c.functional;
    ec.seed = c.seed;
    ec.threads = c.threads;
    ec.decay_ratio = c.decay_ratio;
    ec.sigmas = c.sigmas;
    const auto averages = sample_ball_averages(ec, c.radii, c.replicas);
    const auto rep = variance_report(c.radii, averages.functional, c.decay_ratio, c.sigmas);
    const auto first = first_order_report(c.radii, averages.identity, c.decay_ratio, c.sigmas);

    Csv csv(ctx.file("ergodicity.csv"), {"R", "mean_A", "V", "stderr", "ratio", "ratio_stderr", "first_order",
                                         "first_order_stderr"});
    for (std::size_t i = 0; i < rep.radii.size(); ++i) {
        csv.row({csv_number(rep.radii[i]), csv_number(rep.mean[i]), csv_number(rep.variance[i]),
                 csv_number(rep.variance_stderr[i]), i ? csv_number(rep.ratio[i - 1]) : "",
                 i ? csv_number(rep.ratio_stderr[i - 1]) : "", csv_number(first.second_moment[i]),
                 csv_number(first.standard_error[i])});
    }
    const bool atom = c.cov.model == CovarianceModel::Atom;
    // sigma(1) = 0 freezes u at 1, so every curve vanishes whatever the noise
    const Verdict expected = atom && c.sigma(1.0) != 0.0 ? Verdict::Plateau : Verdict::Decaying;
    json j = {{"grid", grid_json(c.grid)},
              {"covariance", c.cov.name()},
              {"sigma", c.sigma.name()},
              {"functional", c.functional.name()},
              {"replicas", c.replicas},
              {"spectral_atom", atom},
              {"verdict", verdict_name(rep.verdict)},
              {"expected_verdict", verdict_name(expected)},
              {"first_order_decaying", first.decaying}};
    j["gamma_average_vanishes"] = c.cov.gamma_is_function() ? json(gamma_average_vanishes(c.cov)) : json(nullptr);
    ctx.write_json("ergodicity.json", j);
    std::cout << "verdict: " << verdict_name(rep.verdict) << "\n";
    ctx.check(rep.verdict == expected, "ergodic verdict", verdict_name(expected), verdict_name(rep.verdict),
              {{"decay_ratio", c.decay_ratio}, {"sigmas", c.sigmas}});
}

void dalang(Context& ctx) {
    const auto& cov = ctx.config.cov;
    const auto res = dalang_check(cov);
    const bool analytic = dalang_finite_analytic(cov);
    json j = {{"covariance", cov.name()},
              {"dimension", cov.dim},
              {"report", res.finite ? "finite" : "infinite"},
              {"finite", res.finite},
              {"value", res.finite ? json(res.value) : json(nullptr)},
              {"reason", res.reason},
              {"analytic_finite", analytic}};
    ctx.write_json("dalang.json", j);
    Csv csv(ctx.file("dalang.csv"), {"covariance", "d", "finite", "value"});
    csv.row({cov.name(), std::to_string(cov.dim), res.finite ? "true" : "false",
             res.finite ? csv_number(res.value) : ""});
    std::cout << (res.finite ? "finite " + csv_number(res.value) : "infinite: " + res.reason) << "\n";
    ctx.check(res.finite == analytic, "Dalang classification", analytic ? "finite" : "infinite",
              res.finite ? "finite" : "infinite");
}

void spectral(Context& ctx) {
    const auto& c = ctx.config;
    const double b = c.ball_radius;
    Csv bessel(ctx.file("bessel.csv"), {"d", "xi", "bessel_form", "elementary_form"});
    double worst = 0.0;
    for (int d : {1, 3}) {
        const double peak = ball_volume(d, b) * ball_volume(d, b);
        for (int i = 1; i <= 20; ++i) {
            const double xi = 0.5 * i / b;
            const double via_bessel = ball_indicator_ft_sq(d, b, xi);
            const double elementary = ball_indicator_ft_sq_elementary(d, b, xi);
            worst = std::max(worst, std::abs(via_bessel - elementary) / peak);
            bessel.row({std::to_string(d), csv_number(xi), csv_number(via_bessel), csv_number(elementary)});
        }
    }
    const double u = u_constant(c.cov, b);
    const auto profile = riemann_lebesgue_profile(c.cov, b, c.profile_radii);
    Csv csv(ctx.file("profile.csv"), {"R", "D"});
    for (const auto& p : profile) csv.row({csv_number(p.radius), csv_number(p.value)});
    const bool atom = c.cov.model == CovarianceModel::Atom;
    const bool decreasing = strictly_decreasing(profile);
    double spread = 0.0;
    for (const auto& p : profile) spread = std::max(spread, std::abs(p.value - profile.front().value));
    const double rel_spread = spread / std::abs(profile.front().value);
    json j = {{"covariance", c.cov.name()},
              {"ball_radius", b},
              {"u_constant", u},
              {"bessel_max_deviation", worst},
              {"profile_strictly_decreasing", decreasing},
              {"profile_relative_spread", rel_spread},
              {"profile_last_over_first", profile.back().value / profile.front().value}};
    ctx.write_json("spectral.json", j);
    ctx.check(worst <= 1e-9, "Bessel form matches elementary closed forms (d = 1, 3)", 0.0, worst, 1e-9);
    if (atom)
        ctx.check(rel_spread <= 1e-12, "profile constant for an atom", 0.0, rel_spread, 1e-12);
    else
        ctx.check(decreasing, "profile strictly decreasing", true, false);
}

MalliavinConfig malliavin_config(const ExperimentConfig& c) {
    MalliavinConfig mc;
    mc.grid = c.grid;
    mc.cov = c.cov;
    mc.sigma = c.sigma;
    mc.mollifier = c.malliavin_depth >= 0 ? c.mollifier : 0;
    mc.depth = c.malliavin_depth;
    mc.seed = c.seed;
    mc.replicas = c.malliavin_replicas;
    mc.threads = c.threads;
    return mc;
}

void picard(Context& ctx) {
    const auto& c = ctx.config;
    const auto conv =
        picard_convergence(c.grid, c.cov, c.sigma, c.mollifier, c.picard_depth, c.seed, c.picard_replicas, c.threads);
    Csv csv(ctx.file("picard.csv"), {"k", "l2_difference", "ratio"});
    for (std::size_t k = 0; k < conv.l2_difference.size(); ++k)
        csv.row({std::to_string(k), csv_number(conv.l2_difference[k]), k ? csv_number(conv.ratio[k - 1]) : ""});

    json j = {{"grid", grid_json(c.grid)},
              {"covariance", c.cov.name()},
              {"sigma", c.sigma.name()},
              {"mollifier", c.mollifier},
              {"depth", c.picard_depth},
              {"geometric", conv.geometric},
              {"max_ratio", conv.max_ratio}};
    ctx.check(conv.geometric, "Picard differences decrease geometrically", "every ratio < 1", conv.max_ratio, 1.0);

    std::vector<int> depths;
    for (int k = 1; k <= c.picard_depth; ++k) depths.push_back(k);
    MalliavinConfig mc = malliavin_config(c);
    const auto slope = picard_support_slope(mc, c.mollifier, depths, {c.probe_step, c.probe_cell}, c.epsilon);
    Csv support(ctx.file("support.csv"), {"k", "bound", "measured_radius", "max_outside"});
    for (const auto& r : slope.reports)
        support.row({std::to_string(r.depth), csv_number(r.bound), csv_number(r.measured_radius),
                     csv_number(r.max_outside)});
    j["support_slope"] = slope.slope;
    j["support_slope_expected"] = slope.expected;
    j["support_slope_relative_error"] = slope.relative_error;
    ctx.write_json("picard.json", j);
    ctx.check(slope.pass, "Picard derivative support grows like a k / n", slope.expected, slope.slope, 0.25);
}

void malliavin(Context& ctx) {
    const auto& c = ctx.config;
    MalliavinConfig mc = malliavin_config(c);
    const Probe probe{c.probe_step, c.probe_cell};
    const auto est = fd_derivative(mc, probe, c.epsilon);
    // one row per field cell x: probe (s, y), evaluation (t, x), estimate, norms and
    // whether x lies in the predicted support (cone, plus a(k+1)/n for iterates)
    const double s_time = probe.step * c.grid.time_step();
    double support = c.grid.horizon - s_time + 2.0 * c.grid.dx();
    if (c.malliavin_depth >= 0) support += kMollifierRadius * (c.malliavin_depth + 1) / c.mollifier;
    std::vector<std::string> header{"s"};
    std::vector<std::string> probe_coords;
    for (int k = 0; k < c.grid.dim; ++k) {
        header.push_back(std::string("y_") + coordinate_header(3)[k]);
        probe_coords.push_back(csv_number(c.grid.signed_index(probe.cell[k]) * c.grid.dx()));
    }
    header.push_back("t");
    for (const auto& h : coordinate_header(c.grid.dim)) header.push_back(h);
    for (const char* h : {"distance", "derivative", "norm2", "norm4", "inside"}) header.push_back(h);
    Csv csv(ctx.file("derivative.csv"), header);
    for (std::size_t i = 0; i < est.derivative.size(); ++i) {
        std::vector<std::string> row{csv_number(s_time)};
        row.insert(row.end(), probe_coords.begin(), probe_coords.end());
        row.push_back(csv_number(c.grid.horizon));
        for (auto& x : coordinates(c.grid, i)) row.push_back(std::move(x));
        const double distance = probe_distance(c.grid, i, probe.cell);
        row.push_back(csv_number(distance));
        row.push_back(csv_number(est.derivative[i]));
        row.push_back(csv_number(est.norm2[i]));
        row.push_back(csv_number(est.norm4[i]));
        row.push_back(distance <= support ? "1" : "0");
        csv.row(row);
    }
    json j = {{"grid", grid_json(c.grid)},
              {"covariance", c.cov.name()},
              {"sigma", c.sigma.name()},
              {"probe_step", c.probe_step},
              {"epsilon", c.epsilon},
              {"halving_change", est.halving_change},
              {"stable", est.stable}};
    if (c.malliavin_depth < 0) {
        const auto cone = cone_report(mc, est);
        j["cone"] = {{"radius", cone.cone_radius},
                     {"max_outside", cone.max_outside},
                     {"fitted_constant", cone.fitted_constant},
                     {"pass", cone.pass}};
        ctx.check(cone.pass, "derivative vanishes outside the light cone + 2 dx", 0.0, cone.max_outside, 1e-10);
    } else {
        const auto sup = picard_support_check(mc, c.mollifier, c.malliavin_depth, probe, c.epsilon);
        j["support"] = {{"bound", sup.bound},
                        {"measured_radius", sup.measured_radius},
                        {"max_outside", sup.max_outside},
                        {"pass", sup.pass}};
        ctx.check(sup.pass, "Picard derivative vanishes beyond a (k + 1) / n + (T - s) + 2 dx", 0.0, sup.max_outside,
                  1e-8);
    }
    if (c.poincare) {
        PoincareConfig pc;
        pc.grid = c.grid;
        pc.cov = c.cov;
        pc.sigma = c.sigma;
        pc.seed = c.seed;
        pc.lhs_replicas = c.lhs_replicas;
        pc.rhs_replicas = c.rhs_replicas;
        pc.epsilon = c.epsilon;
        pc.threads = c.threads;
        const PointFunctional f{c.poincare_f_cell, c.poincare_f};
        const PointFunctional g{c.poincare_g_cell, c.poincare_g};
        const auto p = poincare_check(pc, f, g);
        j["poincare"] = {{"f", f.name()},
                         {"g", g.name()},
                         {"lhs", p.lhs},
                         {"lhs_stderr", p.lhs_stderr},
                         {"rhs", p.rhs},
                         {"rhs_stderr", p.rhs_stderr},
                         {"slack", p.slack},
                         {"combined_stderr", p.combined_stderr},
                         {"pass", p.pass}};
        ctx.check(p.pass, "Poincare inequality RHS - |LHS| >= -5 combined stderr", ">= 0", p.slack,
                  5.0 * p.combined_stderr);
    }
    ctx.write_json("malliavin.json", j);
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

std::string csv_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int run(const ExperimentConfig& config, Subcommand command, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    Context ctx{config, fs::path(config.output), {}, {}};
    fs::create_directories(ctx.dir);
    std::string error;
    try {
        if (options.dump_kernels) {
            dump_kernel(ctx, "kernel", discretize_kernel(config.grid, config.grid.horizon).grid, config.grid.horizon);
            if (command == Subcommand::PicardCheck || config.malliavin_depth >= 0)
                dump_kernel(ctx, "mollified_kernel",
                            mollify_kernel(discretize_kernel(config.grid, config.grid.horizon), config.mollifier).grid,
                            config.grid.horizon);
        }
        switch (command) {
            case Subcommand::Simulate: simulate(ctx); break;
            case Subcommand::Ergodicity: ergodicity(ctx); break;
            case Subcommand::DalangCheck: dalang(ctx); break;
            case Subcommand::SpectralCheck: spectral(ctx); break;
            case Subcommand::PicardCheck: picard(ctx); break;
            case Subcommand::MalliavinCheck: malliavin(ctx); break;
        }
    } catch (const std::exception& e) {
        error = e.what();
        ctx.failures.push_back({"run completes", "no error", e.what(), nullptr});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = ctx.failures.empty();
    if (!pass) {
        json f = json::array();
        for (const auto& x : ctx.failures)
            f.push_back({{"property", x.property}, {"expected", x.expected}, {"observed", x.observed},
                         {"tolerance", x.tolerance}});
        ctx.write_json("failure.json", {{"subcommand", subcommand_name(command)}, {"failures", f}});
        for (const auto& x : ctx.failures)
            std::cerr << "FAIL " << x.property << ": expected " << x.expected.dump() << ", observed "
                      << x.observed.dump() << "\n";
    }
    json manifest = {{"subcommand", subcommand_name(command)},
                     {"status", pass ? "pass" : "fail"},
                     {"seed", config.seed},
                     {"threads", resolve_threads(config.threads)},
                     {"code_version", SWE_VERSION},
                     {"invocation", options.invocation},
                     {"started_utc", started},
                     {"wall_time_seconds", wall},
                     {"artifacts", ctx.artifacts},
                     {"config", emit_config(config)}};
    ctx.write_json("manifest.json", manifest);
    return pass ? 0 : 1;
}

}  // namespace swe::cli
