#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "swe/solver.hpp"
#include "swe/spectral.hpp"

using namespace swe;

namespace {

GridSpec grid(int dim, double length, int cells, double dt = 0.0, double horizon = 1.0) {
    GridSpec g;
    g.dim = dim;
    g.length = length;
    g.cells = cells;
    g.dt = dt;
    g.horizon = horizon;
    return g;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
    const double m = static_cast<double>(x.size());
    double s = 0.0, s2 = 0.0;
    for (double v : x) s += v;
    const double mean = s / m;
    for (double v : x) s2 += (v - mean) * (v - mean);
    return {mean, std::sqrt(s2 / (m - 1.0) / m)};
}

NoiseFn zero_noise() {
    return [](int, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
}

}  // namespace

TEST_CASE("sigma(1) = 0 keeps u identically one, bit for bit") {
    std::mt19937_64 rng(4);
    const std::vector<CovarianceSpec> covs{CovarianceSpec::white(1), CovarianceSpec::riesz(2, 1.0),
                                           CovarianceSpec::bump(3, 0.5), CovarianceSpec::atom(2, 2.0)};
    for (const auto& cov : covs) {
        const int cells = cov.dim == 3 ? 16 : 64;
        const auto state = solve(grid(cov.dim, 4.0, cells), cov, SigmaSpec::affine(), rng());
        CAPTURE(cov.name());
        CHECK(std::all_of(state.u.begin(), state.u.end(), [](double u) { return u == 1.0; }));
        CHECK(std::all_of(state.v.begin(), state.v.end(), [](double v) { return v == 0.0; }));
    }
}

TEST_CASE("zero sigma is the free wave of constant data") {
    const auto state = solve(grid(2, 4.0, 32), CovarianceSpec::bump(2, 0.3), SigmaSpec::constant(0.0), 9);
    CHECK(std::all_of(state.u.begin(), state.u.end(), [](double u) { return u == 1.0; }));
}

TEST_CASE("same seed, same field") {
    const auto g = grid(2, 4.0, 32);
    const auto a = solve(g, CovarianceSpec::riesz(2, 1.0), SigmaSpec::sine(), 123);
    const auto b = solve(g, CovarianceSpec::riesz(2, 1.0), SigmaSpec::sine(), 123);
    const auto c = solve(g, CovarianceSpec::riesz(2, 1.0), SigmaSpec::sine(), 124);
    CHECK(a.u == b.u);
    CHECK(a.v == b.v);
    CHECK(a.u != c.u);
}

TEST_CASE("step checks its inputs") {
    const auto g = grid(1, 4.0, 32);
    auto state = initial_state(g);
    NoiseSlice slice{1, std::vector<double>(g.size(), 0.0)};
    CHECK_THROWS(step(state, slice, SigmaSpec::linear()));
    slice.step = 0;
    slice.values[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(step(state, slice, SigmaSpec::linear()), NonFiniteError);
    CHECK_THROWS(solve(grid(2, 4.0, 32), CovarianceSpec::white(2), SigmaSpec::linear(), 1));
}

TEST_CASE("a displaced cell stays inside the light cone") {
    const auto g = grid(1, 8.0, 256);
    SpectralStepper stepper(g);
    auto start = initial_state(g);
    start.u[0] += 1.0;
    const auto end = stepper.run(start, zero_noise(), SigmaSpec::constant(0.0), g.steps());
    double inside = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = std::abs(g.signed_index(static_cast<int>(i))) * g.dx();
        const double change = std::abs(end.u[i] - 1.0);
        double& slot = x <= g.horizon + 2.0 * g.dx() ? inside : outside;
        slot = std::max(slot, change);
    }
    CHECK(inside > 0.1);
    CHECK(outside < 1e-12);
}

TEST_CASE("additive white noise in d=1: variance and covariance") {
    const auto g = grid(1, 4.0, 128);
    const auto spectrum = periodize_spectrum(CovarianceSpec::white(1), g);
    Solver solver(spectrum);
    const int replicas = 2000;
    const std::vector<int> lags{0, 16, 48};
    std::vector<std::vector<double>> products(lags.size(), std::vector<double>(replicas));
    std::vector<double> at0(replicas);
    for (int r = 0; r < replicas; ++r) {
        const auto s = solver.solve(SigmaSpec::constant(), 31, static_cast<std::uint64_t>(r));
        at0[r] = (s.u[0] - 1.0) * (s.u[0] - 1.0);
        for (std::size_t l = 0; l < lags.size(); ++l) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                acc += (s.u[i] - 1.0) * (s.u[(i + static_cast<std::size_t>(lags[l])) % g.size()] - 1.0);
            products[l][r] = acc / static_cast<double>(g.size());
        }
    }
    const auto v = mean_se(at0);
    CHECK(std::abs(v.mean - stepper_additive_variance(spectrum)) < 5.0 * v.se);
    CHECK(std::abs(v.mean - 0.25) < 5.0 * v.se);
    const double t = g.horizon;
    for (std::size_t l = 0; l < lags.size(); ++l) {
        // int_0^t (1/4) |(x - s, x + s) cap (y - s, y + s)| ds = (t - h/2)^2 / 4
        const double h = lags[l] * g.dx();
        const double oracle = 0.25 * std::pow(std::max(t - h / 2.0, 0.0), 2);
        const auto c = mean_se(products[l]);
        CAPTURE(h);
        CHECK(std::abs(c.mean - oracle) < 5.0 * c.se);
    }
}

TEST_CASE("linear sigma: mean one and stationary law") {
    const auto g = grid(1, 8.0, 128);
    Solver solver(periodize_spectrum(CovarianceSpec::riesz(1, 0.5), g));
    const int replicas = 1000;
    const std::vector<std::size_t> probes{0, 9, 21, 40, 64, 77, 100, 127};
    std::vector<std::vector<double>> u(probes.size(), std::vector<double>(replicas));
    double worst = 0.0;
    for (int r = 0; r < replicas; ++r) {
        const auto s = solver.solve(SigmaSpec::linear(), 77, static_cast<std::uint64_t>(r));
        for (std::size_t p = 0; p < probes.size(); ++p) u[p][r] = s.u[probes[p]];
        for (double x : s.u) worst = std::max(worst, std::abs(x));
    }
    CHECK(std::isfinite(worst));
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const auto m = mean_se(u[p]);
        CHECK(std::abs(m.mean - 1.0) < 5.0 * m.se);
        // first and second moments agree with probe 0 (paired on replicas)
        std::vector<double> d1(replicas), d2(replicas);
        for (int r = 0; r < replicas; ++r) {
            d1[r] = u[p][r] - u[0][r];
            d2[r] = std::pow(u[p][r] - 1.0, 2) - std::pow(u[0][r] - 1.0, 2);
        }
        if (p == 0) continue;
        const auto a = mean_se(d1), b = mean_se(d2);
        CHECK(std::abs(a.mean) < 5.0 * a.se);
        CHECK(std::abs(b.mean) < 5.0 * b.se);
    }
}

TEST_CASE("direct Dalang-Walsh sum") {
    const auto g = grid(1, 4.0, 64);
    const auto fixed = solve_oracle_d1(g, CovarianceSpec::white(1), SigmaSpec::affine(), 3);
    CHECK(std::all_of(fixed.u.begin(), fixed.u.end(), [](double u) { return u == 1.0; }));
    CHECK_THROWS(solve_oracle_d1(grid(2, 4.0, 16), CovarianceSpec::riesz(2, 1.0), SigmaSpec::linear(), 1));
    CHECK_THROWS(solve_oracle_d1(grid(1, 4.0, 1024), CovarianceSpec::white(1), SigmaSpec::linear(), 1));

    // additive variance t^2/4 from an independent discretisation
    std::vector<double> sq(2000);
    for (std::size_t r = 0; r < sq.size(); ++r) {
        const auto s = solve_oracle_d1(g, CovarianceSpec::white(1), SigmaSpec::constant(), 1000 + r);
        sq[r] = (s.u[5] - 1.0) * (s.u[5] - 1.0);
    }
    const auto v = mean_se(sq);
    CHECK(std::abs(v.mean - 0.25) < 5.0 * v.se);

    // pathwise agreement on one fine noise path improves under refinement
    const auto fine = periodize_spectrum(CovarianceSpec::bump(1, 0.5), grid(1, 4.0, 128));
    double previous = 0.0;
    for (int factor : {4, 2}) {
        const auto gg = grid(1, 4.0, 128 / factor);
        const auto noise = record_noise(gg, coarsened_noise(fine, 5, 0, factor));
        const NoiseFn replay = [&](int k, std::span<double> out) { std::copy(noise[k].begin(), noise[k].end(), out.begin()); };
        SpectralStepper stepper(gg);
        const auto fast = stepper.run(initial_state(gg), replay, SigmaSpec::sine(), gg.steps());
        const auto slow = solve_oracle_d1(gg, replay, SigmaSpec::sine());
        double err = 0.0;
        for (std::size_t i = 0; i < gg.size(); ++i) err = std::max(err, std::abs(fast.u[i] - slow.u[i]));
        if (previous > 0.0) CHECK(err < previous);
        previous = err;
    }
}

TEST_CASE("Picard ladder") {
    const auto g = grid(1, 4.0, 64);
    const auto affine = picard_iterate(g, CovarianceSpec::white(1), SigmaSpec::affine(), 4, 3, 8);
    for (const auto& iterate : affine.iterates)
        for (const auto& field : iterate)
            CHECK(std::all_of(field.begin(), field.end(), [](double u) { return u == 1.0; }));

    CHECK_THROWS(picard_iterate(g, CovarianceSpec::white(1), SigmaSpec::linear(), 4, 3, 8, 0, 10.0));
    CHECK_THROWS(picard_iterate(g, CovarianceSpec::white(1), SigmaSpec::linear(), 0, 3, 8));
}

TEST_CASE("first Picard iterate has the quadratic-form variance") {
    const auto g = grid(1, 4.0, 64);
    const int n = 4;
    ConvolutionSolver conv(g, n);
    // Var u_{n,1}(T, x) = sum_j sum_y K(T - t_j, y)^2 dt / dx for white noise,
    // K the kernel cell mass
    double oracle = 0.0;
    const double dt = g.time_step();
    for (int lag = 1; lag <= g.steps(); ++lag) {
        const auto& k = conv.kernel(lag);
        for (double value : k.values) {
            const double mass = value * k.cell_volume();
            oracle += mass * mass * dt / g.dx();
        }
    }
    const auto spectrum = periodize_spectrum(CovarianceSpec::white(1), g);
    NoiseSampler sampler(spectrum);
    std::vector<double> sq(3000);
    for (std::size_t r = 0; r < sq.size(); ++r) {
        const auto noise = record_noise(g, [&](int k, std::span<double> out) { sampler.sample(dt, 2, r, k, out); });
        const auto ladder = picard_iterate(conv, noise, SigmaSpec::constant(), 1);
        sq[r] = std::pow(ladder.iterates[1].back()[7] - 1.0, 2);
    }
    const auto v = mean_se(sq);
    CHECK(std::abs(v.mean - oracle) < 5.0 * v.se);
}

TEST_CASE("successive Picard differences shrink geometrically") {
    const auto g = grid(1, 8.0, 128);
    for (const auto& sigma : {SigmaSpec::linear(), SigmaSpec::sine()}) {
        const auto c = picard_convergence(g, CovarianceSpec::white(1), sigma, 4, 6, 1, 2, 1);
        CAPTURE(sigma.name());
        CHECK(c.geometric);
        CHECK(c.max_ratio < 0.5);
        CHECK(c.l2_difference.size() == 6);
    }
    const auto constant = picard_convergence(g, CovarianceSpec::white(1), SigmaSpec::constant(), 4, 3, 1, 1, 1);
    CHECK(constant.l2_difference[1] == 0.0);
    CHECK(constant.geometric);
}

TEST_CASE("convolution scheme differences vanish outside the cone in d=2") {
    const auto g = grid(2, 6.0, 48, 0.0, 1.0);
    ConvolutionSolver conv(g);
    const auto spectrum = periodize_spectrum(CovarianceSpec::bump(2, 0.3), g);
    NoiseSampler sampler(spectrum);
    const auto noise =
        record_noise(g, [&](int k, std::span<double> out) { sampler.sample(g.time_step(), 4, 0, k, out); });
    const int s = 2;
    const auto d = conv.difference(noise, s, 0, 1e-4, SigmaSpec::sine());
    const double cone = g.horizon - s * g.time_step();
    double inside = 0.0;
    for (std::size_t f = 0; f < g.size(); ++f) {
        const auto o = g.unflatten(f);
        const double r = std::hypot(g.signed_index(o[0]), g.signed_index(o[1])) * g.dx();
        if (r > cone + 2.0 * g.dx()) CHECK(d.difference[f] == 0.0);
        else inside = std::max(inside, std::abs(d.difference[f]));
    }
    CHECK(inside > 0.0);
}
