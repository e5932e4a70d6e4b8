#include <cmath>
#include <vector>

#include "doctest.h"
#include "swe/malliavin.hpp"

using namespace swe;

namespace {

MalliavinConfig config(int dim, double length, int cells, SigmaSpec sigma, int replicas = 20) {
    MalliavinConfig c;
    c.grid.dim = dim;
    c.grid.length = length;
    c.grid.cells = cells;
    c.grid.horizon = 1.0;
    c.cov = dim == 1 ? CovarianceSpec::white(1) : CovarianceSpec::riesz(dim, 1.0);
    c.sigma = sigma;
    c.replicas = replicas;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_CASE("additive derivative is the kernel weight, for every epsilon") {
    const auto c = config(1, 4.0, 64, SigmaSpec::constant());
    const Probe probe{3, {5, 0, 0}};
    const auto a = fd_derivative(c, probe, 1e-4);
    const auto b = fd_derivative(c, probe, 0.3);
    ConvolutionSolver conv(c.grid);
    const int lag = c.grid.steps() - probe.step;
    const auto& k = conv.kernel(lag);
    for (std::size_t f = 0; f < c.grid.size(); ++f) {
        const int offset = c.grid.signed_index(static_cast<int>(f)) - probe.cell[0];
        const double mass = std::abs(offset) <= k.half_width ? k.at({offset, 0, 0}) * k.cell_volume() : 0.0;
        CHECK(a.derivative[f] == doctest::Approx(mass).epsilon(1e-9));
        CHECK(std::abs(a.derivative[f] - b.derivative[f]) < 1e-12);
    }
    CHECK(a.stable);
    // the derivative approximates G(T - s, x - y) dx = dx / 2 inside the cone
    CHECK(a.derivative[5] == doctest::Approx(0.5 * c.grid.dx()).epsilon(1e-12));
}

TEST_CASE("derivatives vanish outside the light cone") {
    for (const auto& sigma : {SigmaSpec::constant(), SigmaSpec::linear(), SigmaSpec::sine(), SigmaSpec::affine()}) {
        for (int dim : {1, 2}) {
            const auto c = dim == 1 ? config(1, 8.0, 128, sigma) : config(2, 4.0, 32, sigma, 5);
            const Probe probe{2, {0, 0, 0}};
            const auto est = fd_derivative(c, probe, 1e-4);
            const auto report = cone_report(c, est);
            CAPTURE(sigma.name());
            CAPTURE(dim);
            CHECK(report.pass);
            CHECK(report.max_outside < 1e-10);
            CHECK(report.cone_radius == doctest::Approx(c.grid.horizon - probe.step * c.grid.time_step()));
        }
    }
}

TEST_CASE("one constant bounds the derivative by the kernel") {
    auto c = config(1, 8.0, 64, SigmaSpec::linear(), 200);
    double largest = 0.0;
    for (int s : {0, 2, 5}) {
        const auto est = fd_derivative(c, Probe{s, {3, 0, 0}}, 1e-4);
        const auto report = cone_report(c, est);
        CHECK(std::isfinite(report.fitted_constant));
        CHECK(report.fitted_constant > 0.0);
        largest = std::max(largest, report.fitted_constant);
        for (std::size_t f = 0; f < c.grid.size(); ++f)
            CHECK(est.norm2[f] <= est.norm4[f] * (1.0 + 1e-12));
    }
    CHECK(largest < 10.0);
}

TEST_CASE("derivative probes reject bad requests") {
    auto c = config(3, 4.0, 16, SigmaSpec::linear());
    c.cov = CovarianceSpec::bump(3, 0.5);
    CHECK_THROWS(fd_derivative(c, Probe{0, {0, 0, 0}}, 1e-4));
    const auto d1 = config(1, 4.0, 32, SigmaSpec::linear());
    CHECK_THROWS(fd_derivative(d1, Probe{d1.grid.steps(), {0, 0, 0}}, 1e-4));
    CHECK_THROWS(fd_derivative(d1, Probe{0, {0, 0, 0}}, 2.0));
    CHECK_THROWS(fd_derivative(d1, Probe{0, {0, 0, 0}}, 1e-14));
}

TEST_CASE("Picard iterate support") {
    auto c = config(1, 8.0, 256, SigmaSpec::constant(), 2);
    const Probe probe{0, {128, 0, 0}};
    const int n = 4;
    const double a = kMollifierRadius;

    const auto k0 = picard_support_check(c, n, 0, probe);
    CHECK(k0.max_inside == 0.0);
    CHECK(k0.pass);

    const auto k1 = picard_support_check(c, n, 1, probe);
    CHECK(k1.pass);
    CHECK(k1.measured_radius <= 2.0 * a / n + c.grid.horizon + 2.0 * c.grid.dx());

    c.sigma = SigmaSpec::sine();
    const auto k3 = picard_support_check(c, n, 3, probe);
    CHECK(k3.pass);
    CHECK(k3.bound == doctest::Approx(4.0 * a / n + c.grid.horizon));
    CHECK(k3.max_outside < 1e-8);
}

TEST_CASE("Picard support radius grows by a/n per iteration") {
    auto c = config(1, 8.0, 256, SigmaSpec::sine(), 2);
    const auto slope = picard_support_slope(c, 4, {1, 2, 3, 4}, Probe{0, {128, 0, 0}});
    CHECK(slope.pass);
    CHECK(slope.expected == doctest::Approx(0.25));
    CHECK(slope.relative_error <= 0.25);
}

TEST_CASE("point functionals") {
    const PointFunctional sine{{0, 0, 0}, PointMap::Sine};
    const PointFunctional tanh_map{{0, 0, 0}, PointMap::Tanh};
    for (double u : {-2.0, 0.3, 1.0, 4.0})
        for (double h : {1e-9, 1e-3, 0.5}) {
            CHECK(sine.difference(u, h) == doctest::Approx(std::sin(u + h) - std::sin(u)).epsilon(1e-6));
            CHECK(tanh_map.difference(u, h) == doctest::Approx(std::tanh(u + h) - std::tanh(u)).epsilon(1e-6));
        }
}

TEST_CASE("Poincare inequality on small d=1 grids") {
    PoincareConfig pc;
    pc.grid.dim = 1;
    pc.grid.length = 6.0;
    pc.grid.cells = 48;
    pc.grid.horizon = 1.0;
    pc.cov = CovarianceSpec::white(1);
    pc.lhs_replicas = 4000;
    pc.rhs_replicas = 40;
    pc.threads = 1;

    SUBCASE("F = G = u, additive") {
        const auto r = poincare_check(pc, {{0, 0, 0}, PointMap::Identity}, {{0, 0, 0}, PointMap::Identity});
        CHECK(r.pass);
        CHECK(r.lhs > 0.0);
    }
    SUBCASE("disjoint light cones") {
        // |x_F - x_G| = 3 > 2t: the two values use disjoint noise, LHS ~ 0
        const auto r = poincare_check(pc, {{0, 0, 0}, PointMap::Identity}, {{24, 0, 0}, PointMap::Identity});
        CHECK(r.pass);
        CHECK(std::abs(r.lhs) < 5.0 * r.lhs_stderr);
    }
    SUBCASE("F = u(t, 0), G = sin u(t, 0.25), linear sigma") {
        pc.sigma = SigmaSpec::linear();
        const auto r = poincare_check(pc, {{0, 0, 0}, PointMap::Identity}, {{2, 0, 0}, PointMap::Sine});
        CHECK(r.pass);
        CHECK(r.slack >= -5.0 * r.combined_stderr);
    }
    pc.grid.cells = 512;
    CHECK_THROWS(poincare_check(pc, {}, {}));
}
