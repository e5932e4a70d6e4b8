#include "swe/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "swe/parallel.hpp"

namespace swe {
namespace {

/// Ceiling on replicas * cells * steps for a single covariance estimate.
constexpr double kCovarianceCostLimit = 1e11;

double minimal_image_distance(const GridSpec& grid, const std::array<int, 3>& a, const std::array<int, 3>& b) {
    double r2 = 0.0;
    for (int k = 0; k < grid.dim; ++k) {
        int diff = ((a[k] - b[k]) % grid.cells + grid.cells) % grid.cells;
        const double x = grid.signed_index(diff) * grid.dx();
        r2 += x * x;
    }
    return std::sqrt(r2);
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  ///< unbiased
    double central4 = 0.0;
};

Moments moments(const std::vector<std::vector<double>>& samples, std::size_t i) {
    const double m = static_cast<double>(samples.size());
    Moments out;
    for (const auto& row : samples) out.mean += row[i];
    out.mean /= m;
    double s2 = 0.0;
    for (const auto& row : samples) {
        const double e = row[i] - out.mean;
        s2 += e * e;
        out.central4 += e * e * e * e;
    }
    out.variance = s2 / (m - 1.0);
    out.central4 /= m;
    return out;
}

/// Delta-method standard error of b / a for two correlated estimators.
double ratio_stderr(double a, double b, double var_a, double var_b, double cov_ab) {
    const double r = b / a;
    const double rel = var_b / (b * b) + var_a / (a * a) - 2.0 * cov_ab / (a * b);
    return std::abs(r) * std::sqrt(std::max(rel, 0.0));
}

void check_ladder(const std::vector<double>& radii) {
    if (radii.empty()) throw std::invalid_argument("radius ladder is empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0)) throw std::invalid_argument("radii must be positive");
        if (i > 0 && !(radii[i] > radii[i - 1])) throw std::invalid_argument("radii must be strictly increasing");
    }
}

}  // namespace

double apply_lipschitz(LipschitzMap map, double x, double clip) {
    switch (map) {
        case LipschitzMap::ClippedIdentity: return std::clamp(x, -clip, clip);
        case LipschitzMap::Tanh: return std::tanh(x);
        case LipschitzMap::Sine: return std::sin(x);
    }
    return 0.0;
}

std::string lipschitz_name(LipschitzMap map) {
    switch (map) {
        case LipschitzMap::ClippedIdentity: return "identity";
        case LipschitzMap::Tanh: return "tanh";
        case LipschitzMap::Sine: return "sin";
    }
    return "?";
}

LipschitzMap parse_lipschitz(const std::string& name) {
    if (name == "identity" || name == "clip") return LipschitzMap::ClippedIdentity;
    if (name == "tanh") return LipschitzMap::Tanh;
    if (name == "sin" || name == "sine") return LipschitzMap::Sine;
    throw std::invalid_argument("unknown test function '" + name + "' (expected identity, tanh, sin)");
}

void TestFunctional::validate() const {
    if (factors.empty()) throw std::invalid_argument("test functional needs at least one factor");
    if (!(clip > 0.0)) throw std::invalid_argument("test functional clip must be positive");
    for (const auto& f : factors) {
        if (apply_lipschitz(f.map, 0.0, clip) != 0.0)
            throw std::invalid_argument("test function " + lipschitz_name(f.map) + " does not vanish at 0");
        // difference quotients on a fixed mesh straddling the clip points
        const double span = 2.0 * clip;
        double prev_x = -span;
        double prev = apply_lipschitz(f.map, prev_x, clip);
        for (int i = 1; i <= 4000; ++i) {
            const double x = -span + 2.0 * span * i / 4000.0;
            const double y = apply_lipschitz(f.map, x, clip);
            if (std::abs(y - prev) > (x - prev_x) * (1.0 + 1e-12))
                throw std::invalid_argument("test function " + lipschitz_name(f.map) + " has Lipschitz constant above 1");
            prev_x = x;
            prev = y;
        }
    }
}

double TestFunctional::reach(const GridSpec& grid) const {
    double out = 0.0;
    for (const auto& f : factors) out = std::max(out, minimal_image_distance(grid, f.shift, {0, 0, 0}));
    return out;
}

std::vector<double> TestFunctional::evaluate(const GridSpec& grid, std::span<const double> u) const {
    if (u.size() != grid.size()) throw std::invalid_argument("TestFunctional: field does not match the grid");
    std::vector<double> out(u.size(), 1.0);
    for (const auto& f : factors) {
        for (std::size_t i = 0; i < u.size(); ++i) {
            const auto x = grid.unflatten(i);
            const std::size_t j = grid.wrap_flat({x[0] + f.shift[0], x[1] + f.shift[1], x[2] + f.shift[2]});
            out[i] *= apply_lipschitz(f.map, u[j] - 1.0, clip);
        }
    }
    return out;
}

std::string TestFunctional::name() const {
    std::string out;
    for (const auto& f : factors) {
        if (!out.empty()) out += "*";
        out += lipschitz_name(f.map);
        if (f.shift != std::array<int, 3>{0, 0, 0})
            out += "@" + std::to_string(f.shift[0]) + ":" + std::to_string(f.shift[1]) + ":" +
                   std::to_string(f.shift[2]);
    }
    return out;
}

std::vector<std::size_t> ball_cells(const GridSpec& grid, double radius) {
    const auto r = cell_radii(grid);
    std::vector<std::size_t> out;
    const double tol = 1e-12 * std::max(1.0, radius);
    for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i] <= radius + tol) out.push_back(i);
    return out;
}

double spatial_average(const GridSpec& grid, std::span<const double> field, double radius) {
    if (field.size() != grid.size()) throw std::invalid_argument("spatial_average: field does not match the grid");
    if (radius + grid.horizon > grid.length / 2.0 + 1e-12)
        throw std::invalid_argument("spatial_average: R + T = " + std::to_string(radius + grid.horizon) +
                                    " exceeds L/2 = " + std::to_string(grid.length / 2.0) +
                                    " (finite propagation: the ball would see wrapped noise)");
    const auto cells = ball_cells(grid, radius);
    if (cells.empty()) throw std::invalid_argument("spatial_average: ball of radius R holds no cell");
    // (1 / omega_d R^d) * sum * dx^d * (omega_d R^d / (count dx^d)) = sum / count
    double sum = 0.0;
    for (std::size_t i : cells) sum += field[i];
    return sum / static_cast<double>(cells.size());
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Decaying: return "decaying";
        case Verdict::Plateau: return "plateau";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

BallAverages sample_ball_averages(const ErgodicConfig& config, const std::vector<double>& radii, int replicas) {
    const GridSpec& grid = config.grid;
    grid.validate();
    config.functional.validate();
    check_ladder(radii);
    if (replicas < 1) throw std::invalid_argument("need at least one replica");
    const double reach = radii.back() + grid.horizon + config.functional.reach(grid);
    if (reach > grid.length / 2.0 + 1e-12)
        throw std::invalid_argument("R_max + T + |zeta| = " + std::to_string(reach) + " exceeds L/2 = " +
                                    std::to_string(grid.length / 2.0) + " (finite propagation constraint)");
    const auto dalang = dalang_check(config.cov);
    if (!dalang.finite) throw std::invalid_argument("Dalang's condition fails: " + dalang.reason);
    if (config.cov.dim != grid.dim) throw std::invalid_argument("covariance and grid dimensions differ");

    std::vector<std::vector<std::size_t>> balls;
    for (double r : radii) balls.push_back(ball_cells(grid, r));

    const PeriodizedSpectrum spectrum = periodize_spectrum(config.cov, grid);
    BallAverages out;
    out.radii = radii;
    out.functional.assign(static_cast<std::size_t>(replicas), std::vector<double>(radii.size()));
    out.identity = out.functional;

    const unsigned workers = std::min<unsigned>(resolve_threads(config.threads), static_cast<unsigned>(replicas));
    std::vector<std::unique_ptr<Solver>> solvers(workers);
    parallel_for(static_cast<std::size_t>(replicas), workers, [&](std::size_t r, unsigned w) {
        if (!solvers[w]) solvers[w] = std::make_unique<Solver>(spectrum);
        const SolutionState state = solvers[w]->solve(config.sigma, config.seed, r);
        const auto phi = config.functional.evaluate(grid, state.u);
        for (std::size_t i = 0; i < balls.size(); ++i) {
            double sf = 0.0, su = 0.0;
            for (std::size_t c : balls[i]) {
                sf += phi[c];
                su += state.u[c];
            }
            const double n = static_cast<double>(balls[i].size());
            out.functional[r][i] = sf / n;
            out.identity[r][i] = su / n;
        }
    });
    return out;
}

ErgodicReport variance_report(const std::vector<double>& radii, const std::vector<std::vector<double>>& samples,
                              double decay_ratio, double sigmas) {
    const std::size_t m = samples.size();
    if (m < 2) throw std::invalid_argument("variance_report needs at least two replicas");
    const std::size_t k = radii.size();
    ErgodicReport rep;
    rep.radii = radii;
    rep.replicas = static_cast<int>(m);
    std::vector<Moments> mom;
    const double md = static_cast<double>(m);
    for (std::size_t i = 0; i < k; ++i) {
        mom.push_back(moments(samples, i));
        const Moments& q = mom.back();
        rep.mean.push_back(q.mean);
        rep.mean_stderr.push_back(std::sqrt(q.variance / md));
        rep.variance.push_back(q.variance);
        const double var_s2 = (q.central4 - (md - 3.0) / (md - 1.0) * q.variance * q.variance) / md;
        rep.variance_stderr.push_back(std::sqrt(std::max(var_s2, 0.0)));
    }
    bool all_zero = true;
    for (double v : rep.variance) all_zero = all_zero && v == 0.0;
    bool decaying = k > 1, plateau = k > 1, defined = true;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const double a = rep.variance[i], b = rep.variance[i + 1];
        if (a == 0.0) {
            rep.ratio.push_back(std::numeric_limits<double>::quiet_NaN());
            rep.ratio_stderr.push_back(std::numeric_limits<double>::quiet_NaN());
            defined = false;
            continue;
        }
        double m22 = 0.0;
        for (const auto& row : samples) {
            const double ea = row[i] - mom[i].mean, eb = row[i + 1] - mom[i + 1].mean;
            m22 += ea * ea * eb * eb;
        }
        m22 /= md;
        // same bias correction as the variance estimate, so identical columns give a zero ratio error
        const double cov = (m22 - (md - 3.0) / (md - 1.0) * a * b) / md;
        const double r = b / a;
        const double se = ratio_stderr(a, b, rep.variance_stderr[i] * rep.variance_stderr[i],
                                       rep.variance_stderr[i + 1] * rep.variance_stderr[i + 1], cov);
        rep.ratio.push_back(r);
        rep.ratio_stderr.push_back(se);
        decaying = decaying && r + sigmas * se < decay_ratio;
        plateau = plateau && std::abs(r - 1.0) <= sigmas * se + 1e-9;
    }
    if (all_zero) rep.verdict = Verdict::Decaying;
    else if (!defined) rep.verdict = Verdict::Inconclusive;
    else if (decaying) rep.verdict = Verdict::Decaying;
    else if (plateau) rep.verdict = Verdict::Plateau;
    else rep.verdict = Verdict::Inconclusive;
    return rep;
}

ErgodicReport variance_curve(const ErgodicConfig& config, const std::vector<double>& radii, int replicas) {
    if (replicas < 200)
        throw std::invalid_argument("variance_curve needs at least 200 replicas for the ratio test, got " +
                                    std::to_string(replicas));
    const auto averages = sample_ball_averages(config, radii, replicas);
    return variance_report(radii, averages.functional, config.decay_ratio, config.sigmas);
}

FirstOrderReport first_order_check(const ErgodicConfig& config, const std::vector<double>& radii, int replicas) {
    if (replicas < 200)
        throw std::invalid_argument("first_order_check needs at least 200 replicas, got " + std::to_string(replicas));
    const auto averages = sample_ball_averages(config, radii, replicas);
    return first_order_report(radii, averages.identity, config.decay_ratio, config.sigmas);
}

FirstOrderReport first_order_report(const std::vector<double>& radii, const std::vector<std::vector<double>>& identity,
                                    double decay_ratio, double sigmas) {
    if (identity.size() < 2) throw std::invalid_argument("first_order_report needs at least two replicas");
    const std::size_t k = radii.size();
    const double md = static_cast<double>(identity.size());
    std::vector<std::vector<double>> y(identity.size(), std::vector<double>(k));
    for (std::size_t r = 0; r < y.size(); ++r)
        for (std::size_t i = 0; i < k; ++i) {
            const double e = identity[r][i] - 1.0;
            y[r][i] = e * e;
        }
    FirstOrderReport rep;
    rep.radii = radii;
    std::vector<Moments> mom;
    bool all_zero = true;
    for (std::size_t i = 0; i < k; ++i) {
        mom.push_back(moments(y, i));
        rep.second_moment.push_back(mom[i].mean);
        rep.standard_error.push_back(std::sqrt(mom[i].variance / md));
        all_zero = all_zero && mom[i].mean == 0.0;
    }
    bool decaying = k > 1;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const double a = rep.second_moment[i], b = rep.second_moment[i + 1];
        if (a == 0.0) {
            rep.ratio.push_back(std::numeric_limits<double>::quiet_NaN());
            rep.ratio_stderr.push_back(std::numeric_limits<double>::quiet_NaN());
            decaying = false;
            continue;
        }
        double c = 0.0;
        for (const auto& row : y) c += (row[i] - a) * (row[i + 1] - b);
        c /= (md - 1.0) * md;
        const double r = b / a;
        const double se = ratio_stderr(a, b, rep.standard_error[i] * rep.standard_error[i],
                                       rep.standard_error[i + 1] * rep.standard_error[i + 1], c);
        rep.ratio.push_back(r);
        rep.ratio_stderr.push_back(se);
        decaying = decaying && r + sigmas * se < decay_ratio;
    }
    rep.decaying = all_zero || decaying;
    return rep;
}

CovarianceEstimate functional_covariance(const ErgodicConfig& config, const std::array<int, 3>& x,
                                         const std::array<int, 3>& y, int replicas) {
    const GridSpec& grid = config.grid;
    grid.validate();
    config.functional.validate();
    if (replicas < 2) throw std::invalid_argument("functional_covariance needs at least two replicas");
    const double cost = static_cast<double>(replicas) * static_cast<double>(grid.size()) * grid.steps();
    if (cost > kCovarianceCostLimit)
        throw std::invalid_argument("functional_covariance: replicas * cells * steps = " + std::to_string(cost) +
                                    " exceeds the cost guard " + std::to_string(kCovarianceCostLimit));
    const std::size_t fx = grid.wrap_flat(x), fy = grid.wrap_flat(y);
    const PeriodizedSpectrum spectrum = periodize_spectrum(config.cov, grid);
    std::vector<double> a(static_cast<std::size_t>(replicas)), b(a.size());
    const unsigned workers = std::min<unsigned>(resolve_threads(config.threads), static_cast<unsigned>(replicas));
    std::vector<std::unique_ptr<Solver>> solvers(workers);
    parallel_for(a.size(), workers, [&](std::size_t r, unsigned w) {
        if (!solvers[w]) solvers[w] = std::make_unique<Solver>(spectrum);
        const auto state = solvers[w]->solve(config.sigma, config.seed, r);
        const auto phi = config.functional.evaluate(grid, state.u);
        a[r] = phi[fx];
        b[r] = phi[fy];
    });
    const double md = static_cast<double>(replicas);
    double ma = 0.0, mb = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) {
        ma += a[r];
        mb += b[r];
    }
    ma /= md;
    mb /= md;
    std::vector<double> prod(a.size());
    double cov = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) {
        prod[r] = (a[r] - ma) * (b[r] - mb);
        cov += prod[r];
    }
    const double mean_prod = cov / md;
    double spread = 0.0;
    for (double p : prod) spread += (p - mean_prod) * (p - mean_prod);
    CovarianceEstimate out;
    out.covariance = cov / (md - 1.0);
    out.standard_error = std::sqrt(spread / (md - 1.0) / md);
    out.distance = minimal_image_distance(grid, x, y);
    out.replicas = replicas;
    return out;
}

bool gamma_average_vanishes(const CovarianceSpec& cov) {
    if (!cov.gamma_is_function())
        throw std::invalid_argument("gamma_average_vanishes: gamma of " + cov.name() + " is not a function");
    std::vector<double> avg;
    for (int k = 0; k <= 6; ++k) avg.push_back(gamma_ball_average(cov, std::pow(10.0, k)));
    for (std::size_t i = 1; i < avg.size(); ++i)
        if (avg[i] > avg[i - 1] * (1.0 + 1e-9)) return false;
    // a power law |x|^-p with p > 0 shows a strictly negative slope on the last decade
    const double slope = std::log10(avg.back() / avg[avg.size() - 2]);
    return avg.back() < 1e-3 * avg.front() || slope < -1e-2;
}

}  // namespace swe
