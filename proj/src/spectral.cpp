#include "swe/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "swe/quadrature.hpp"

namespace swe {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSeriesLimit = 12.0;

double series_scaled(double p, double x) {
    const double q = 0.25 * x * x;
    double term = 1.0 / (std::pow(2.0, p) * std::tgamma(p + 1.0));
    double sum = term;
    for (int k = 1; k < 200; ++k) {
        term *= -q / (k * (k + p));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum) && k > q) break;
    }
    return sum;
}

double hankel(double p, double x) {
    const double mu = 4.0 * p * p;
    double p_sum = 0.0;
    double q_sum = 0.0;
    double a = 1.0;  // a_k / x^k
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 60; ++k) {
        if (k > 0) {
            const double odd = 2.0 * k - 1.0;
            a *= (mu - odd * odd) / (k * 8.0 * x);
        }
        const double mag = std::abs(a);
        if (mag > previous) break;  // asymptotic series starts diverging
        const double sign = (k / 2) % 2 == 0 ? 1.0 : -1.0;
        if (k % 2 == 0) p_sum += sign * a;
        else q_sum += sign * a;
        if (mag == 0.0 || mag < 1e-17) break;
        previous = mag;
    }
    const double omega = x - p * kPi / 2.0 - kPi / 4.0;
    return std::sqrt(2.0 / (kPi * x)) * (p_sum * std::cos(omega) - q_sum * std::sin(omega));
}

void check_order(double p, double x) {
    if (!(p > 0.0)) throw std::invalid_argument("bessel_j: order must be positive, got " + std::to_string(p));
    if (!(x >= 0.0)) throw std::invalid_argument("bessel_j: argument must be non-negative, got " + std::to_string(x));
}

/// Radial integral sphere * int_0^inf r^{d-1} g(r) dr of an oscillatory
/// integrand with characteristic frequency `omega`: tanh-sinh on the first
/// sub-panel (absorbs an integrable singularity at 0), Gauss panels up to 1,
/// and from 1 to `cutoff`. The tail beyond `cutoff` is supplied by the caller.
template <class G>
double radial_oscillatory(G&& g, double omega, double cutoff) {
    const double panel = std::min(1.0, kPi / (2.0 * omega));
    double total = quad::finite(g, 0.0, panel, 1e-12);
    total += quad::panels(g, panel, 1.0, panel);
    if (cutoff > 1.0) total += quad::panels(g, 1.0, cutoff, panel);
    return total;
}

void require_dalang(const CovarianceSpec& cov) {
    const auto check = dalang_check(cov);
    if (!check.finite) throw std::domain_error("Dalang's condition fails for " + cov.name() + ": " + check.reason);
}

}  // namespace

double bessel_j(double p, double x) {
    check_order(p, x);
    if (x == 0.0) return 0.0;
    if (x <= kSeriesLimit) return series_scaled(p, x) * std::pow(x, p);
    return hankel(p, x);
}

double bessel_j_scaled(double p, double x) {
    check_order(p, x);
    if (x <= kSeriesLimit) return series_scaled(p, x);
    return hankel(p, x) / std::pow(x, p);
}

double ball_indicator_ft_sq_elementary(int dim, double b, double xi_norm) {
    if (dim != 1 && dim != 3) throw std::invalid_argument("elementary ball transform exists for d = 1 and d = 3 only");
    const double r = xi_norm;
    const double z = b * r;
    if (dim == 1) {
        const double v = z < 1e-4 ? 2.0 * b * (1.0 - z * z / 6.0) : 2.0 * std::sin(z) / r;
        return v * v;
    }
    // sin z - z cos z = z^3/3 - z^5/30 + ... cancels badly for small z
    const double v = z < 1e-2 ? 4.0 * kPi * b * b * b * (1.0 / 3.0 - z * z / 30.0 + z * z * z * z / 840.0)
                              : 4.0 * kPi * (std::sin(z) - z * std::cos(z)) / (r * r * r);
    return v * v;
}

double ball_volume(int dim, double b) { return unit_ball_volume(dim) * std::pow(b, dim); }

double ball_indicator_ft_sq(int dim, double b, double xi_norm) {
    if (!(b >= 0.0)) throw std::invalid_argument("ball radius must be non-negative");
    if (b == 0.0) return 0.0;
    // (2 pi b)^d r^-d J_{d/2}(b r)^2 = (2 pi)^d b^{2d} (J_{d/2}(x) / x^{d/2})^2, x = b r
    const double g = bessel_j_scaled(dim / 2.0, b * std::abs(xi_norm));
    return std::pow(2.0 * kPi, dim) * std::pow(b, 2 * dim) * g * g;
}

double ball_indicator_ft_sq(int dim, double b, std::span<const double> xi) {
    if (static_cast<int>(xi.size()) != dim) throw std::invalid_argument("ball_indicator_ft_sq: dimension mismatch");
    double r2 = 0.0;
    for (double x : xi) r2 += x * x;
    return ball_indicator_ft_sq(dim, b, std::sqrt(r2));
}

double u_constant(const CovarianceSpec& cov, double b) {
    require_dalang(cov);
    if (!(b >= 0.0)) throw std::invalid_argument("u_constant: radius must be non-negative");
    if (b == 0.0) return 0.0;
    const int d = cov.dim;
    const double atom = cov.atom_mass() * std::pow(ball_volume(d, b), 2);
    if (cov.model == CovarianceModel::Atom) return atom;

    auto g = [&](double r) {
        if (r == 0.0) return 0.0;
        return ball_indicator_ft_sq(d, b, r) * spectral_radial_weight(cov, r);
    };
    double cutoff;
    double tail = 0.0;
    if (auto law = cov.power_law()) {
        // J^2 averages to 1/(pi x) for large x, leaving C r^{e-2} (2 pi b)^d / (pi b).
        // The dropped oscillation cos(2 b r - (d+1) pi/2) integrates to a
        // multiple of sin(2 b c - (d+1) pi/2); snapping the cutoff c to a zero
        // of that sine removes the leading truncation error.
        const double phase = (d + 1) * kPi / 2.0;
        const double k = std::ceil((2.0 * b * std::max(2.0, 400.0 / b) - phase) / kPi);
        cutoff = (k * kPi + phase) / (2.0 * b);
        const double e = law->exponent;
        tail = std::pow(2.0 * kPi * b, d) * law->coefficient / (kPi * b) * std::pow(cutoff, e - 1.0) / (1.0 - e);
    } else {
        cutoff = std::max(2.0, 12.0 / cov.s);
    }
    const double body = radial_oscillatory(g, b, cutoff);
    return unit_sphere_area(d) * (body + tail) + atom;
}

UConstantSup u_constant_sup(const CovarianceSpec& cov, double horizon, int points) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("u_constant_sup: horizon must be non-negative");
    if (points < 2) throw std::invalid_argument("u_constant_sup: need at least two radii");
    UConstantSup best;
    for (int i = 0; i < points; ++i) {
        const double b = horizon * i / (points - 1);
        const double v = u_constant(cov, b);
        if (v > best.value) {
            best.value = v;
            best.argmax = b;
        }
    }
    return best;
}

std::vector<ProfilePoint> riemann_lebesgue_profile(const CovarianceSpec& cov, double b,
                                                   std::span<const double> radii) {
    require_dalang(cov);
    if (!(b > 0.0)) throw std::invalid_argument("riemann_lebesgue_profile: b must be positive");
    const int d = cov.dim;
    const double unit = std::pow(unit_ball_volume(d), 2);
    std::vector<ProfilePoint> out;
    out.reserve(radii.size());
    for (double radius : radii) {
        if (!(radius > 0.0)) throw std::invalid_argument("riemann_lebesgue_profile: radii must be positive");
        // the atom sits where |F 1_{B_1}(R xi)|^2 = |B_1|^2, so it survives every R
        double value = cov.atom_mass() * std::pow(ball_volume(d, b), 2);
        if (cov.model != CovarianceModel::Atom) {
            auto g = [&](double r) {
                if (r == 0.0) return 0.0;
                return ball_indicator_ft_sq(d, 1.0, radius * r) * ball_indicator_ft_sq(d, b, r) *
                       spectral_radial_weight(cov, r);
            };
            // the product decays like r^{-d-3+e}; truncation error is far below quadrature error
            const double cutoff = cov.power_law() ? std::max(2.0, 200.0 / std::min(radius, b))
                                                  : std::max(2.0, 12.0 / cov.s);
            value = unit_sphere_area(d) * radial_oscillatory(g, radius + b, cutoff) / unit;
        }
        out.push_back({radius, value});
    }
    return out;
}

bool strictly_decreasing(std::span<const ProfilePoint> profile) {
    for (std::size_t i = 1; i < profile.size(); ++i)
        if (!(profile[i].value < profile[i - 1].value)) return false;
    return true;
}

double additive_variance(const CovarianceSpec& cov, double t) {
    require_dalang(cov);
    if (!(t >= 0.0)) throw std::invalid_argument("additive_variance: t must be non-negative");
    const int d = cov.dim;
    const double norm = std::pow(2.0 * kPi, -d);
    // int_0^t s^2 ds against the atom
    const double atom = norm * cov.atom_mass() * t * t * t / 3.0;
    if (cov.model == CovarianceModel::Atom || t == 0.0) return atom;

    // int_0^t sin^2(s r) ds / r^2 = (t/2 - sin(2 t r)/(4 r)) / r^2
    auto time_factor = [t](double r) {
        const double z = 2.0 * t * r;
        if (z < 1e-2) return t * t * t / 3.0 - std::pow(t, 5) * r * r / 15.0;
        return (t / 2.0 - std::sin(z) / (4.0 * r)) / (r * r);
    };
    auto g = [&](double r) {
        if (r == 0.0) return 0.0;
        return time_factor(r) * spectral_radial_weight(cov, r);
    };
    double cutoff;
    double tail = 0.0;
    if (auto law = cov.power_law()) {
        cutoff = std::max(2.0, 2000.0 / t);
        const double e = law->exponent;
        const double q = d - 3.0 + e;  // radial power of the non-oscillatory part
        tail = law->coefficient * (t / 2.0) * std::pow(cutoff, q + 1.0) / (-(q + 1.0));
        // leading asymptotic of -int_X^inf r^{q-1} sin(2 t r) / 4 dr
        tail -= law->coefficient * std::pow(cutoff, q - 1.0) * std::cos(2.0 * t * cutoff) / (2.0 * t) / 4.0;
    } else {
        cutoff = std::max(2.0, 12.0 / cov.s);
    }
    const double body = radial_oscillatory(g, 2.0 * t, cutoff);
    return norm * unit_sphere_area(d) * (body + tail) + atom;
}

}  // namespace swe
