#include "swe/quadrature.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace swe::quad {
namespace {

GaussRule build_rule(int n) {
    GaussRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    if (n == 1) {
        rule.weights[0] = 2.0;
        return rule;
    }
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
    static std::mutex m;
    static std::map<int, std::unique_ptr<GaussRule>> cache;
    std::lock_guard lock(m);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussRule>(build_rule(n));
    return *slot;
}

double fixed(const std::function<double(double)>& f, double a, double b, int points) {
    const auto& rule = gauss_legendre(points);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return sum * half;
}

double finite(const std::function<double(double)>& f, double a, double b, double rel_tol) {
    if (a == b) return 0.0;
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, a, b, rel_tol);
}

double to_infinity(const std::function<double(double)>& f, double a, double rel_tol) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(f, a, std::numeric_limits<double>::infinity(), rel_tol);
}

double panels(const std::function<double(double)>& f, double a, double b, double panel, int points) {
    if (!(b > a)) return 0.0;
    const auto count = static_cast<long>(std::ceil((b - a) / panel));
    const double width = (b - a) / static_cast<double>(count);
    double sum = 0.0;
    for (long i = 0; i < count; ++i) sum += fixed(f, a + i * width, a + (i + 1) * width, points);
    return sum;
}

}  // namespace swe::quad
