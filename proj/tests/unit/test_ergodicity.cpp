#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "swe/ergodicity.hpp"

using namespace swe;

namespace {

GridSpec grid(int dim, double length, int cells, double horizon = 1.0) {
    GridSpec g;
    g.dim = dim;
    g.length = length;
    g.cells = cells;
    g.horizon = horizon;
    return g;
}

ErgodicConfig config(const GridSpec& g, const CovarianceSpec& cov, SigmaSpec sigma) {
    ErgodicConfig c;
    c.grid = g;
    c.cov = cov;
    c.sigma = sigma;
    c.threads = 1;
    return c;
}

double sample_variance(const std::vector<double>& x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TEST_CASE("spatial averages of synthetic fields") {
    const auto g = grid(1, 64.0, 512);
    const std::vector<double> ones(g.size(), 1.0);
    for (double r : {0.3, 2.0, 7.77, 16.0}) CHECK(spatial_average(g, ones, r) == 1.0);

    const double big = 16.0;
    std::vector<double> half(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g.signed_index(static_cast<int>(i)) * g.dx()) <= big / 2.0) half[i] = 1.0;
    CHECK(std::abs(spatial_average(g, half, big) - 0.5) <= g.dx() / (2.0 * big));

    const auto g2 = grid(2, 32.0, 128);
    const std::vector<double> ones2(g2.size(), 1.0);
    CHECK(spatial_average(g2, ones2, 5.0) == doctest::Approx(1.0).epsilon(1e-15));

    CHECK_THROWS(spatial_average(g, ones, 31.5));
}

TEST_CASE("test functionals") {
    TestFunctional f;
    CHECK_NOTHROW(f.validate());
    f.factors = {{LipschitzMap::Tanh, {0, 0, 0}}, {LipschitzMap::Sine, {3, 0, 0}}};
    CHECK_NOTHROW(f.validate());
    const auto g = grid(1, 8.0, 32);
    CHECK(f.reach(g) == doctest::Approx(0.75));
    std::vector<double> u(g.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = 1.0 + 0.1 * static_cast<double>(i);
    const auto v = f.evaluate(g, u);
    CHECK(v[4] == doctest::Approx(std::tanh(0.4) * std::sin(0.7)));
    CHECK(v[31] == doctest::Approx(std::tanh(3.1) * std::sin(0.2)));
    CHECK(apply_lipschitz(LipschitzMap::ClippedIdentity, 12.0) == 10.0);
    CHECK_THROWS(TestFunctional{{}, 10.0}.validate());
    CHECK(parse_lipschitz(lipschitz_name(LipschitzMap::Tanh)) == LipschitzMap::Tanh);
    CHECK_THROWS(parse_lipschitz("cube"));
}

TEST_CASE("report from synthetic samples") {
    const std::vector<double> radii{1.0, 2.0, 4.0};
    std::vector<std::vector<double>> zeros(300, std::vector<double>(3, 0.0));
    CHECK(variance_report(radii, zeros).verdict == Verdict::Decaying);

    // independent columns whose spread halves per radius: V ratio 1/4
    std::vector<std::vector<double>> halving(400, std::vector<double>(3));
    std::vector<std::vector<double>> flat(400, std::vector<double>(3));
    for (int r = 0; r < 400; ++r) {
        const double z = std::sin(1.7 * r) + std::cos(0.3 * r * r);
        for (int i = 0; i < 3; ++i) {
            halving[r][i] = z / std::pow(2.0, i);
            flat[r][i] = z;
        }
    }
    const auto h = variance_report(radii, halving);
    CHECK(h.verdict == Verdict::Decaying);
    CHECK(h.ratio[0] == doctest::Approx(0.25));
    const auto p = variance_report(radii, flat);
    CHECK(p.verdict == Verdict::Plateau);
    CHECK(p.ratio[1] == doctest::Approx(1.0));
}

TEST_CASE("d=1 white noise, linear sigma: decaying and first-order convergence") {
    const auto c = config(grid(1, 40.0, 160), CovarianceSpec::white(1), SigmaSpec::linear());
    const std::vector<double> radii{2.0, 4.0, 8.0, 16.0};
    const auto averages = sample_ball_averages(c, radii, 1000);
    const auto report = variance_report(radii, averages.functional);
    CHECK(report.verdict == Verdict::Decaying);
    for (std::size_t i = 1; i < radii.size(); ++i) CHECK(report.variance[i] < report.variance[i - 1]);
    for (double m : report.mean) CHECK(std::isfinite(m));
    const auto first = first_order_report(radii, averages.identity);
    CHECK(first.decaying);
    for (double r : first.ratio) CHECK(r < 0.75);

    // the identity functional reproduces Var of the average of u - 1 directly
    for (std::size_t i = 0; i < radii.size(); ++i) {
        std::vector<double> direct(averages.identity.size());
        for (std::size_t r = 0; r < direct.size(); ++r) direct[r] = averages.identity[r][i] - 1.0;
        CHECK(std::abs(report.variance[i] - sample_variance(direct)) < 1e-12);
    }
}

TEST_CASE("frozen field: V and the first-order error vanish") {
    const auto c = config(grid(1, 40.0, 160), CovarianceSpec::white(1), SigmaSpec::affine());
    const std::vector<double> radii{2.0, 4.0, 8.0};
    const auto report = variance_curve(c, radii, 200);
    for (double v : report.variance) CHECK(v == 0.0);
    CHECK(report.verdict == Verdict::Decaying);
    const auto first = first_order_check(c, radii, 200);
    for (double m : first.second_moment) CHECK(m == 0.0);
    CHECK(first.decaying);
}

TEST_CASE("atom: constant field, plateau at c t^3 / 3") {
    auto g = grid(1, 40.0, 160);
    g.dt = 1.0 / 32.0;
    const double c = 2.0;
    const auto cfg = config(g, CovarianceSpec::atom(1, c), SigmaSpec::constant());
    const std::vector<double> radii{2.0, 4.0, 8.0, 16.0};
    const auto averages = sample_ball_averages(cfg, radii, 1000);
    for (const auto& row : averages.identity)
        for (double a : row) CHECK(a == doctest::Approx(row[0]).epsilon(1e-12));
    const auto report = variance_report(radii, averages.functional);
    CHECK(report.verdict == Verdict::Plateau);
    for (std::size_t i = 0; i < radii.size(); ++i)
        CHECK(std::abs(report.variance[i] - c / 3.0) < 5.0 * report.variance_stderr[i]);
    CHECK_FALSE(first_order_report(radii, averages.identity).decaying);
}

TEST_CASE("wrap constraint and replica floor") {
    const auto c = config(grid(1, 40.0, 160), CovarianceSpec::white(1), SigmaSpec::linear());
    CHECK_THROWS(sample_ball_averages(c, {2.0, 19.5}, 10));
    CHECK_THROWS(variance_curve(c, {2.0, 4.0}, 100));
    CHECK_THROWS(sample_ball_averages(c, {4.0, 2.0}, 10));
}

TEST_CASE("functional covariance") {
    const auto g = grid(1, 16.0, 64);
    const auto bump = config(g, CovarianceSpec::bump(1, 0.25), SigmaSpec::linear());
    const auto same = functional_covariance(bump, {0, 0, 0}, {0, 0, 0}, 2000);
    CHECK(same.covariance > 5.0 * same.standard_error);
    // |x - y| = 4 > 2t + support of the (numerically compact) bump
    const auto far = functional_covariance(bump, {0, 0, 0}, {16, 0, 0}, 2000);
    CHECK(far.distance == doctest::Approx(4.0));
    CHECK(std::abs(far.covariance) < 5.0 * far.standard_error);

    const auto atom = config(g, CovarianceSpec::atom(1, 1.0), SigmaSpec::constant());
    const auto near = functional_covariance(atom, {0, 0, 0}, {2, 0, 0}, 2000);
    const auto distant = functional_covariance(atom, {0, 0, 0}, {30, 0, 0}, 2000);
    CHECK(near.covariance == doctest::Approx(distant.covariance).epsilon(1e-12));
}

TEST_CASE("gamma average limit") {
    CHECK(gamma_average_vanishes(CovarianceSpec::riesz(1, 0.5)));
    CHECK(gamma_average_vanishes(CovarianceSpec::riesz(3, 1.5)));
    CHECK(gamma_average_vanishes(CovarianceSpec::bump(2, 0.5)));
    CHECK(gamma_average_vanishes(CovarianceSpec::fractional(0.75)));
    CHECK_FALSE(gamma_average_vanishes(CovarianceSpec::atom(2, 1.0)));
    CHECK_THROWS(gamma_average_vanishes(CovarianceSpec::white(1)));
}
