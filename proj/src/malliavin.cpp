#include "swe/malliavin.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "swe/parallel.hpp"

namespace swe {
namespace {

void validate_probe(const MalliavinConfig& config, const Probe& probe) {
    config.grid.validate();
    if (config.grid.dim == 3)
        throw std::invalid_argument(
            "derivative probes are not available in d = 3: the Malliavin derivative of the solution is "
            "measure-valued there and its pointwise meaning is an open problem");
    if (probe.step < 0 || probe.step >= config.grid.steps())
        throw std::invalid_argument("probe step must lie in [0, N_t)");
    for (int d = 0; d < config.grid.dim; ++d)
        if (probe.cell[d] < 0 || probe.cell[d] >= config.grid.cells)
            throw std::invalid_argument("probe cell outside the grid");
    if (config.depth >= 0 && config.mollifier < 1)
        throw std::invalid_argument("Picard probes need a mollifier index n >= 1");
    if (config.replicas < 1) throw std::invalid_argument("need at least one replica");
}

/// Plus/minus runs of the configured scheme; one per worker.
class FieldMap {
public:
    explicit FieldMap(const MalliavinConfig& config)
        : config_(config), solver_(config.grid, config.depth >= 0 ? config.mollifier : 0) {}

    ConvolutionSolver::Difference operator()(const std::vector<std::vector<double>>& noise, int step,
                                             std::size_t cell, double eps) {
        return solver_.difference(noise, step, cell, eps, config_.sigma, config_.depth);
    }

private:
    const MalliavinConfig& config_;
    ConvolutionSolver solver_;
};

std::vector<double> central_difference(FieldMap& map, const std::vector<std::vector<double>>& noise, int step,
                                       std::size_t cell, double eps) {
    auto out = map(noise, step, cell, eps).difference;
    for (double& x : out) x /= 2.0 * eps;
    return out;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double green_density(int dim, double tau, double r) {
    if (tau <= 0.0 || r >= tau) return 0.0;
    if (dim == 1) return 0.5;
    return 1.0 / (2.0 * std::numbers::pi * std::sqrt(tau * tau - r * r));
}

}  // namespace

double probe_distance(const GridSpec& grid, std::size_t flat, const std::array<int, 3>& cell) {
    const auto idx = grid.unflatten(flat);
    double r2 = 0.0;
    for (int d = 0; d < grid.dim; ++d) {
        int diff = (idx[d] - cell[d]) % grid.cells;
        if (diff < 0) diff += grid.cells;
        const double z = grid.signed_index(diff) * grid.dx();
        r2 += z * z;
    }
    return std::sqrt(r2);
}

MalliavinEstimate fd_derivative(const MalliavinConfig& config, const Probe& probe, double epsilon) {
    validate_probe(config, probe);
    if (!(epsilon >= 1e-10))
        throw std::invalid_argument("epsilon below the rounding floor (plus and minus runs are indistinguishable)");
    if (epsilon > 1.0) throw std::invalid_argument("epsilon above the linearity window (> 1)");
    const GridSpec& grid = config.grid;
    const auto spectrum = periodize_spectrum(config.cov, grid);
    const double dt = grid.time_step();
    const std::size_t cell = grid.wrap_flat(probe.cell);
    const auto replicas = static_cast<std::size_t>(config.replicas);

    std::vector<std::vector<double>> per_replica(replicas);
    std::vector<double> halved;
    const unsigned workers = resolve_threads(config.threads);
    std::vector<std::unique_ptr<FieldMap>> maps(workers);
    std::vector<std::unique_ptr<NoiseSampler>> samplers(workers);
    parallel_for(replicas, workers, [&](std::size_t r, unsigned w) {
        if (!maps[w]) {
            maps[w] = std::make_unique<FieldMap>(config);
            samplers[w] = std::make_unique<NoiseSampler>(spectrum);
        }
        auto& sampler = *samplers[w];
        auto noise = record_noise(grid, [&](int k, std::span<double> out) {
            sampler.sample(dt, config.seed, r, k, out);
        });
        per_replica[r] = central_difference(*maps[w], noise, probe.step, cell, epsilon);
        if (r == 0) halved = central_difference(*maps[w], noise, probe.step, cell, epsilon / 2.0);
    });

    MalliavinEstimate est;
    est.probe = probe;
    est.target_step = grid.steps();
    est.epsilon = epsilon;
    est.derivative = per_replica[0];
    est.norm2.assign(grid.size(), 0.0);
    est.norm4.assign(grid.size(), 0.0);
    for (const auto& d : per_replica) {
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double sq = d[i] * d[i];
            est.norm2[i] += sq;
            est.norm4[i] += sq * sq;
        }
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        est.norm2[i] = std::sqrt(est.norm2[i] / static_cast<double>(replicas));
        est.norm4[i] = std::pow(est.norm4[i] / static_cast<double>(replicas), 0.25);
    }
    const double scale = max_abs(est.derivative);
    if (scale > 0.0) {
        double diff = 0.0;
        for (std::size_t i = 0; i < halved.size(); ++i) diff = std::max(diff, std::abs(halved[i] - est.derivative[i]));
        est.halving_change = diff / scale;
    }
    est.stable = est.halving_change < 0.05;
    return est;
}

ConeReport cone_report(const MalliavinConfig& config, const MalliavinEstimate& estimate) {
    const GridSpec& grid = config.grid;
    const double dx = grid.dx();
    const double tau = (estimate.target_step - estimate.probe.step) * grid.time_step();
    ConeReport rep;
    rep.cone_radius = tau;
    const double cell = grid.cell_volume();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = probe_distance(grid, i, estimate.probe.cell);
        const double norm = estimate.norm2[i];
        if (r > tau + 2.0 * dx) {
            rep.max_outside = std::max(rep.max_outside, norm);
        } else if (r < tau - dx) {
            const double g = green_density(grid.dim, tau, r) * cell;
            if (g > 0.0) rep.fitted_constant = std::max(rep.fitted_constant, norm / g);
        }
    }
    rep.pass = rep.max_outside < 1e-10;
    return rep;
}

PicardSupportReport picard_support_check(const MalliavinConfig& config, int n, int depth, const Probe& probe,
                                         double epsilon) {
    MalliavinConfig cfg = config;
    cfg.mollifier = n;
    cfg.depth = depth;
    const auto est = fd_derivative(cfg, probe, epsilon);
    const GridSpec& grid = cfg.grid;
    PicardSupportReport rep;
    rep.n = n;
    rep.depth = depth;
    const double tau = (est.target_step - probe.step) * grid.time_step();
    rep.bound = kMollifierRadius * (depth + 1) / n + tau;
    bool finite = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = probe_distance(grid, i, probe.cell);
        const double norm = est.norm2[i];
        if (!std::isfinite(norm)) finite = false;
        if (norm > rep.threshold) rep.measured_radius = std::max(rep.measured_radius, r);
        if (r > rep.bound + 2.0 * grid.dx()) rep.max_outside = std::max(rep.max_outside, norm);
        else rep.max_inside = std::max(rep.max_inside, norm);
    }
    rep.pass = finite && rep.max_outside < 1e-8;
    return rep;
}

SupportSlope picard_support_slope(const MalliavinConfig& config, int n, const std::vector<int>& depths,
                                  const Probe& probe, double epsilon, double tolerance) {
    if (depths.size() < 2) throw std::invalid_argument("picard_support_slope: need at least two depths");
    SupportSlope out;
    out.depths = depths;
    bool all_pass = true;
    for (int k : depths) {
        out.reports.push_back(picard_support_check(config, n, k, probe, epsilon));
        out.radii.push_back(out.reports.back().measured_radius);
        all_pass = all_pass && out.reports.back().pass;
    }
    const double kn = static_cast<double>(depths.size());
    const double mk = std::accumulate(depths.begin(), depths.end(), 0.0) / kn;
    const double mr = std::accumulate(out.radii.begin(), out.radii.end(), 0.0) / kn;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < depths.size(); ++i) {
        sxy += (depths[i] - mk) * (out.radii[i] - mr);
        sxx += (depths[i] - mk) * (depths[i] - mk);
    }
    out.slope = sxy / sxx;
    // with constant sigma the chain through earlier iterates is cut and the support stops growing
    const double unit = kMollifierRadius / n;
    out.expected = config.sigma.lipschitz() > 0.0 ? unit : 0.0;
    out.relative_error = std::abs(out.slope - out.expected) / unit;
    out.pass = all_pass && out.relative_error <= tolerance;
    return out;
}

double PointFunctional::operator()(double u) const {
    switch (map) {
        case PointMap::Identity: return u;
        case PointMap::Sine: return std::sin(u);
        case PointMap::Tanh: return std::tanh(u);
    }
    return u;
}

double PointFunctional::difference(double u, double h) const {
    switch (map) {
        case PointMap::Identity: return h;
        case PointMap::Sine: return 2.0 * std::cos(u + 0.5 * h) * std::sin(0.5 * h);
        case PointMap::Tanh: return std::sinh(h) / (std::cosh(u) * std::cosh(u + h));
    }
    return h;
}

std::string PointFunctional::name() const {
    switch (map) {
        case PointMap::Identity: return "u";
        case PointMap::Sine: return "sin(u)";
        case PointMap::Tanh: return "tanh(u)";
    }
    return "?";
}

PoincareReport poincare_check(const PoincareConfig& config, const PointFunctional& f, const PointFunctional& g) {
    const GridSpec& grid = config.grid;
    grid.validate();
    if (grid.dim == 3) throw std::invalid_argument("poincare_check: derivative probes are not available in d = 3");
    const int steps = grid.steps();
    const std::size_t cells = grid.size();
    if (static_cast<std::size_t>(steps) * cells > config.max_probes)
        throw std::invalid_argument("poincare_check: cost guard, N_t * N^d = " + std::to_string(steps * cells) +
                                    " exceeds " + std::to_string(config.max_probes));
    if (config.lhs_replicas < 2 || config.rhs_replicas < config.batches || config.batches < 2)
        throw std::invalid_argument("poincare_check: not enough replicas");
    const auto spectrum = periodize_spectrum(config.cov, grid);
    const double dt = grid.time_step();
    const std::size_t fc = grid.wrap_flat(f.cell);
    const std::size_t gc = grid.wrap_flat(g.cell);

    MalliavinConfig mc;
    mc.grid = grid;
    mc.cov = config.cov;
    mc.sigma = config.sigma;
    const unsigned workers = resolve_threads(config.threads);

    // left side: Monte-Carlo covariance
    const auto lhs_n = static_cast<std::size_t>(config.lhs_replicas);
    std::vector<double> fv(lhs_n), gv(lhs_n);
    {
        std::vector<std::unique_ptr<ConvolutionSolver>> solvers(workers);
        std::vector<std::unique_ptr<NoiseSampler>> samplers(workers);
        parallel_for(lhs_n, workers, [&](std::size_t r, unsigned w) {
            if (!solvers[w]) {
                solvers[w] = std::make_unique<ConvolutionSolver>(grid, 0);
                samplers[w] = std::make_unique<NoiseSampler>(spectrum);
            }
            auto& sampler = *samplers[w];
            auto noise = record_noise(grid, [&](int k, std::span<double> out) {
                sampler.sample(dt, config.seed, r, k, out);
            });
            const auto u = solvers[w]->run(noise, config.sigma).back();
            fv[r] = f(u[fc]);
            gv[r] = g(u[gc]);
        });
    }
    const double mf = std::accumulate(fv.begin(), fv.end(), 0.0) / lhs_n;
    const double mg = std::accumulate(gv.begin(), gv.end(), 0.0) / lhs_n;
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t r = 0; r < lhs_n; ++r) {
        const double p = (fv[r] - mf) * (gv[r] - mg);
        s1 += p;
        s2 += p * p;
    }
    PoincareReport rep;
    rep.lhs = s1 / (lhs_n - 1.0);
    const double mean_p = s1 / lhs_n;
    rep.lhs_stderr = std::sqrt(std::max(s2 / lhs_n - mean_p * mean_p, 0.0) / lhs_n);

    // right side: finite-difference derivative norms for every increment
    const auto rhs_n = static_cast<std::size_t>(config.rhs_replicas);
    const std::size_t probes = static_cast<std::size_t>(steps) * cells;
    std::vector<std::vector<double>> df(rhs_n), dg(rhs_n);
    {
        std::vector<std::unique_ptr<FieldMap>> maps(workers);
        std::vector<std::unique_ptr<NoiseSampler>> samplers(workers);
        parallel_for(rhs_n, workers, [&](std::size_t r, unsigned w) {
            if (!maps[w]) {
                maps[w] = std::make_unique<FieldMap>(mc);
                samplers[w] = std::make_unique<NoiseSampler>(spectrum);
            }
            auto& sampler = *samplers[w];
            auto noise = record_noise(grid, [&](int k, std::span<double> out) {
                sampler.sample(dt, config.seed + 0x9e3779b97f4a7c15ULL, r, k, out);
            });
            df[r].assign(probes, 0.0);
            dg[r].assign(probes, 0.0);
            for (int s = 0; s < steps; ++s) {
                const double tau = (steps - s) * dt;
                for (std::size_t y = 0; y < cells; ++y) {
                    const auto yc = grid.unflatten(y);
                    // outside both cones the derivative vanishes identically
                    if (probe_distance(grid, fc, yc) > tau + 1e-9 && probe_distance(grid, gc, yc) > tau + 1e-9)
                        continue;
                    const auto pair = (*maps[w])(noise, s, y, config.epsilon);
                    const std::size_t p = static_cast<std::size_t>(s) * cells + y;
                    df[r][p] = f.difference(pair.minus[fc], pair.difference[fc]) / (2.0 * config.epsilon);
                    dg[r][p] = g.difference(pair.minus[gc], pair.difference[gc]) / (2.0 * config.epsilon);
                }
            }
        });
    }

    // exact per-step covariance of the sampled increments
    auto cov = periodized_covariance(spectrum);
    for (double& c : cov) c = std::abs(c * dt);
    auto pairing = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double total = 0.0;
        for (int s = 0; s < steps; ++s) {
            const std::size_t off = static_cast<std::size_t>(s) * cells;
            for (std::size_t y = 0; y < cells; ++y) {
                if (a[off + y] == 0.0) continue;
                const auto yi = grid.unflatten(y);
                for (std::size_t z = 0; z < cells; ++z) {
                    if (b[off + z] == 0.0) continue;
                    const auto zi = grid.unflatten(z);
                    std::array<int, 3> lag{0, 0, 0};
                    for (int d = 0; d < grid.dim; ++d) lag[d] = yi[d] - zi[d];
                    total += a[off + y] * b[off + z] * cov[grid.wrap_flat(lag)];
                }
            }
        }
        return total;
    };
    auto norms = [&](std::size_t begin, std::size_t end) {
        std::vector<double> nf(probes, 0.0), ng(probes, 0.0);
        for (std::size_t r = begin; r < end; ++r)
            for (std::size_t p = 0; p < probes; ++p) {
                nf[p] += df[r][p] * df[r][p];
                ng[p] += dg[r][p] * dg[r][p];
            }
        const double count = static_cast<double>(end - begin);
        for (std::size_t p = 0; p < probes; ++p) {
            nf[p] = std::sqrt(nf[p] / count);
            ng[p] = std::sqrt(ng[p] / count);
        }
        return pairing(nf, ng);
    };
    rep.rhs = norms(0, rhs_n);
    const auto nb = static_cast<std::size_t>(config.batches);
    std::vector<double> batch(nb);
    for (std::size_t b = 0; b < nb; ++b) batch[b] = norms(b * rhs_n / nb, (b + 1) * rhs_n / nb);
    const double mb = std::accumulate(batch.begin(), batch.end(), 0.0) / nb;
    double vb = 0.0;
    for (double x : batch) vb += (x - mb) * (x - mb);
    rep.rhs_stderr = std::sqrt(vb / (nb - 1.0) / nb);

    rep.slack = rep.rhs - std::abs(rep.lhs);
    rep.combined_stderr = std::hypot(rep.lhs_stderr, rep.rhs_stderr);
    rep.pass = rep.slack >= -5.0 * rep.combined_stderr;
    return rep;
}

}  // namespace swe
