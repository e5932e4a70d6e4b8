#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swe/grid.hpp"
#include "swe/noise.hpp"
#include "swe/solver.hpp"

namespace swe {

enum class LipschitzMap { ClippedIdentity, Tanh, Sine };

/// g(x) for one of the shipped maps; all vanish at 0 with constant 1.
/// ClippedIdentity clamps to [-clip, clip].
double apply_lipschitz(LipschitzMap map, double x, double clip = 10.0);
std::string lipschitz_name(LipschitzMap map);
LipschitzMap parse_lipschitz(const std::string& name);

/// Product of g_j(u(x + zeta_j) - 1) over the factors.
struct TestFunctional {
    struct Factor {
        LipschitzMap map = LipschitzMap::ClippedIdentity;
        std::array<int, 3> shift{0, 0, 0};  ///< zeta_j in grid cells
        bool operator==(const Factor&) const = default;
    };
    std::vector<Factor> factors{Factor{}};
    double clip = 10.0;

    static TestFunctional identity() { return {}; }

    /// Throws unless there is at least one factor, every g_j(0) = 0 and the
    /// spot-checked Lipschitz constant is at most 1.
    void validate() const;
    /// Largest |zeta_j| in physical units.
    double reach(const GridSpec& grid) const;
    /// Value at every cell of a field u.
    std::vector<double> evaluate(const GridSpec& grid, std::span<const double> u) const;
    std::string name() const;

    bool operator==(const TestFunctional&) const = default;
};

/// Cells with centres in the closed ball of radius R about the origin.
std::vector<std::size_t> ball_cells(const GridSpec& grid, double radius);

/// Mean of `field` over the cells with centres in the ball B_R about the
/// origin. This is the midpoint rule normalised by omega_d R^d times the
/// discrete volume correction, so a constant field maps to itself exactly.
/// Throws if R + T > L/2 or the ball holds no cell.
double spatial_average(const GridSpec& grid, std::span<const double> field, double radius);

struct ErgodicConfig {
    GridSpec grid;
    CovarianceSpec cov;
    SigmaSpec sigma = SigmaSpec::linear();
    TestFunctional functional;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    /// Verdict thresholds: decay ratio bound and number of standard errors.
    double decay_ratio = 0.75;
    double sigmas = 3.0;
};

enum class Verdict { Decaying, Plateau, Inconclusive };
std::string verdict_name(Verdict v);

/// Per-replica ball averages on shared paths. functional[r][i] is the
/// average of the test functional over B_{R_i} for replica r and
/// identity[r][i] the average of u itself.
struct BallAverages {
    std::vector<double> radii;
    std::vector<std::vector<double>> functional;
    std::vector<std::vector<double>> identity;
};

/// Checks the wrap constraint R_max + T + reach(zeta) <= L/2 and the
/// ladder, then runs `replicas` independent paths.
BallAverages sample_ball_averages(const ErgodicConfig& config, const std::vector<double>& radii, int replicas);

struct ErgodicReport {
    std::vector<double> radii;
    std::vector<double> mean;         ///< MC mean of A(R)
    std::vector<double> mean_stderr;
    std::vector<double> variance;     ///< V(R), unbiased sample variance
    std::vector<double> variance_stderr;
    std::vector<double> ratio;        ///< V(R_{i+1}) / V(R_i)
    std::vector<double> ratio_stderr; ///< delta method on shared paths
    int replicas = 0;
    Verdict verdict = Verdict::Inconclusive;
};

/// Needs at least 200 replicas. A curve that is identically zero is
/// reported as decaying.
ErgodicReport variance_curve(const ErgodicConfig& config, const std::vector<double>& radii, int replicas);
/// Builds the report from precomputed per-replica values (samples[r][i]).
ErgodicReport variance_report(const std::vector<double>& radii, const std::vector<std::vector<double>>& samples,
                              double decay_ratio = 0.75, double sigmas = 3.0);

struct FirstOrderReport {
    std::vector<double> radii;
    std::vector<double> second_moment;  ///< E[(A(R) - 1)^2]
    std::vector<double> standard_error;
    std::vector<double> ratio;
    std::vector<double> ratio_stderr;
    bool decaying = false;  ///< every ratio + sigmas * stderr < decay_ratio, or identically zero
};

FirstOrderReport first_order_check(const ErgodicConfig& config, const std::vector<double>& radii, int replicas);
/// Same from precomputed averages of u (identity[r][i]).
FirstOrderReport first_order_report(const std::vector<double>& radii, const std::vector<std::vector<double>>& identity,
                                    double decay_ratio = 0.75, double sigmas = 3.0);

struct CovarianceEstimate {
    double covariance = 0.0;
    double standard_error = 0.0;
    double distance = 0.0;  ///< |x - y| on the torus
    int replicas = 0;
};

/// MC covariance of the functional at cells x and y over independent paths.
CovarianceEstimate functional_covariance(const ErgodicConfig& config, const std::array<int, 3>& x,
                                         const std::array<int, 3>& y, int replicas);

/// Whether the ball average of gamma tends to zero, judged on the ladder
/// R = 10^0 .. 10^6 (non-increasing and a final value below 1e-3 of the
/// first). Throws for White, whose gamma is not a function.
bool gamma_average_vanishes(const CovarianceSpec& cov);

}  // namespace swe
