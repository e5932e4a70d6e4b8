#pragma once

#include <span>
#include <vector>

#include "swe/noise.hpp"

namespace swe {

/// Bessel function of the first kind J_p(x) for p > 0, x >= 0.
/// Power series up to x = 12, Hankel asymptotic expansion beyond.
double bessel_j(double p, double x);

/// J_p(x) / x^p, finite at x = 0 where it equals 1 / (2^p Gamma(p + 1)).
double bessel_j_scaled(double p, double x);

/// |F 1_{B_b}(xi)|^2 = (2 pi b)^d |xi|^-d J_{d/2}(b |xi|)^2, equal to |B_b|^2 at xi = 0.
double ball_indicator_ft_sq(int dim, double b, double xi_norm);
double ball_indicator_ft_sq(int dim, double b, std::span<const double> xi);

/// Elementary closed forms of the same quantity for d = 1 and d = 3:
/// (2 sin(b r) / r)^2 and (4 pi (sin(b r) - b r cos(b r)) / r^3)^2.
double ball_indicator_ft_sq_elementary(int dim, double b, double xi_norm);

/// Volume |B_b|.
double ball_volume(int dim, double b);

/// int |F 1_{B_b}(xi)|^2 f(xi) dxi (plus the atom times |B_b|^2).
/// Throws std::domain_error when the covariance fails Dalang's condition.
double u_constant(const CovarianceSpec& cov, double b);

struct UConstantSup {
    double value = 0.0;
    double argmax = 0.0;
};

/// Supremum of u_constant over an equispaced grid of `points` radii in [0, T].
UConstantSup u_constant_sup(const CovarianceSpec& cov, double horizon, int points = 33);

struct ProfilePoint {
    double radius;
    double value;
};

/// D(R) = int |F 1_{B_1}(R xi)|^2 |F 1_{B_b}(xi)|^2 f(xi) dxi / |B_1|^2 for each R.
std::vector<ProfilePoint> riemann_lebesgue_profile(const CovarianceSpec& cov, double b,
                                                   std::span<const double> radii);

/// True when the profile is strictly decreasing.
bool strictly_decreasing(std::span<const ProfilePoint> profile);

/// Var[u(t, x)] for additive forcing: (2 pi)^-d int_0^t int sin^2(s|xi|)/|xi|^2 f(xi) dxi ds.
double additive_variance(const CovarianceSpec& cov, double t);

}  // namespace swe
