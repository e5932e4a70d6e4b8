#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "swe/grid.hpp"
#include "swe/noise.hpp"
#include "swe/solver.hpp"

namespace swe {

/// Perturbed increment Delta W_step(cell).
struct Probe {
    int step = 0;
    std::array<int, 3> cell{0, 0, 0};
};

/// Solution map probed by finite differences. The field is either the
/// convolution scheme (depth < 0) or the Picard iterate u_{n,depth} with
/// mollifier index n >= 1, always evaluated at the horizon.
struct MalliavinConfig {
    GridSpec grid;
    CovarianceSpec cov;
    SigmaSpec sigma = SigmaSpec::linear();
    int mollifier = 0;
    int depth = -1;
    std::uint64_t seed = 1;
    int replicas = 1000;
    unsigned threads = 0;
};

/// Central finite difference of u(T, .) with respect to one raw noise
/// increment, from plus/minus runs on common random numbers. `derivative`
/// is replica 0; the norms are Monte-Carlo estimates over all replicas. In the additive case the derivative equals
/// the scheme's kernel mass K(T - s, x - y) (density times dx^d).
struct MalliavinEstimate {
    Probe probe;
    int target_step = 0;
    double epsilon = 0.0;
    std::vector<double> derivative;
    std::vector<double> norm2;
    std::vector<double> norm4;
    /// max |D_eps - D_{eps/2}| / max |D_eps| over the replica-0 field.
    double halving_change = 0.0;
    bool stable = true;
};

/// Rejects d = 3 (the derivative is measure-valued there), s >= N_t and
/// epsilon outside [1e-10, 1].
MalliavinEstimate fd_derivative(const MalliavinConfig& config, const Probe& probe, double epsilon);

/// Distance |x - y| on the torus between a grid cell and the probe cell.
double probe_distance(const GridSpec& grid, std::size_t flat, const std::array<int, 3>& cell);

struct ConeReport {
    double cone_radius = 0.0;     ///< T - s
    double max_outside = 0.0;     ///< max norm over |x - y| > T - s + 2 dx
    double fitted_constant = 0.0; ///< max over the cone of ||D||_2 / (G(T - s, x - y) dx^d)
    bool pass = false;            ///< max_outside < 1e-10
};

/// Cone support and kernel-shape constant of an estimate (d = 1, 2).
ConeReport cone_report(const MalliavinConfig& config, const MalliavinEstimate& estimate);

struct PicardSupportReport {
    int n = 1;
    int depth = 0;
    double bound = 0.0;            ///< a (k + 1) / n + (T - s)
    double measured_radius = 0.0;  ///< largest |x - y| with norm above `threshold`
    double max_outside = 0.0;      ///< max norm beyond bound + 2 dx
    double max_inside = 0.0;
    /// Difference fields are exactly zero where no kernel chain reaches, so
    /// any nonzero norm counts.
    double threshold = 0.0;
    bool pass = false;             ///< max_outside < 1e-8 and max_inside finite
};

PicardSupportReport picard_support_check(const MalliavinConfig& config, int n, int depth, const Probe& probe,
                                         double epsilon = 1e-4);

struct SupportSlope {
    std::vector<int> depths;
    std::vector<double> radii;
    double slope = 0.0;     ///< least-squares slope of radius against k
    double expected = 0.0;  ///< a / n, or 0 for constant sigma
    double relative_error = 0.0;  ///< |slope - expected| / (a / n)
    std::vector<PicardSupportReport> reports;
    bool pass = false;  ///< every report passes and relative_error <= tolerance
};

SupportSlope picard_support_slope(const MalliavinConfig& config, int n, const std::vector<int>& depths,
                                  const Probe& probe, double epsilon = 1e-4, double tolerance = 0.25);

enum class PointMap { Identity, Sine, Tanh };

/// phi(u(T, cell)) for a Lipschitz phi.
struct PointFunctional {
    std::array<int, 3> cell{0, 0, 0};
    PointMap map = PointMap::Identity;

    double operator()(double u) const;
    /// phi(u + h) - phi(u) without cancellation.
    double difference(double u, double h) const;
    std::string name() const;
};

struct PoincareConfig {
    GridSpec grid;
    CovarianceSpec cov;
    SigmaSpec sigma = SigmaSpec::constant();
    std::uint64_t seed = 1;
    int lhs_replicas = 10000;
    int rhs_replicas = 200;
    int batches = 10;
    double epsilon = 1e-4;
    unsigned threads = 0;
    /// Guard on the number of probed increments N_t * N^d.
    std::size_t max_probes = 8192;
};

struct PoincareReport {
    double lhs = 0.0;  ///< Cov(F, G)
    double lhs_stderr = 0.0;
    double rhs = 0.0;  ///< sum_s sum_{y,z} ||D_{s,y}F||_2 ||D_{s,z}G||_2 |C(y - z)|
    double rhs_stderr = 0.0;
    double slack = 0.0;  ///< rhs - |lhs|
    double combined_stderr = 0.0;
    bool pass = false;   ///< slack >= -5 combined standard errors
};

/// Discrete Gaussian Poincare inequality for the convolution scheme; C is
/// the exact per-step covariance of the sampled increments.
PoincareReport poincare_check(const PoincareConfig& config, const PointFunctional& f, const PointFunctional& g);

}  // namespace swe
