#pragma once

#include <functional>
#include <vector>

namespace swe::quad {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Cached n-point rule (n >= 1). Safe to call concurrently.
const GaussRule& gauss_legendre(int n);

/// Fixed-order rule applied on [a, b].
double fixed(const std::function<double(double)>& f, double a, double b, int points);

/// Tanh-sinh on a finite interval; tolerates integrable endpoint singularities.
double finite(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-12);

/// Exp-sinh on [a, inf).
double to_infinity(const std::function<double(double)>& f, double a, double rel_tol = 1e-12);

/// Sum of fixed-order panels of width `panel` over [a, b]; meant for
/// oscillatory integrands where the panel resolves one half-period.
double panels(const std::function<double(double)>& f, double a, double b, double panel, int points = 20);

}  // namespace swe::quad
