#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swe/fft.hpp"
#include "swe/grid.hpp"
#include "swe/rng.hpp"

namespace swe {

enum class CovarianceModel { White, Riesz, Bump, Atom, Fractional };

/// Spatial covariance gamma together with its spectral density f = F(gamma),
/// F f(xi) = int exp(-i x.xi) f(x) dx. With this transform the spectral
/// measure of the noise is mu(dxi) = (2 pi)^-d f(xi) dxi; every routine that
/// turns spectra back into second moments applies that factor, and nothing
/// else carries a 2 pi.
///
///   White         gamma = delta_0                 f = 1
///   Riesz(beta)   gamma = |x|^-beta               f = c_{d,beta} |xi|^{beta-d}
///   Bump(s)       gamma = N(0, s^2 I) density     f = exp(-s^2 |xi|^2 / 2)
///   Atom(c)       gamma = c                       f = c (2 pi)^d delta_0
///   Fractional(H) gamma = H(2H-1)|x|^{2H-2}, d=1  f = Gamma(2H+1) sin(pi H) |xi|^{1-2H}
struct CovarianceSpec {
    int dim = 1;
    CovarianceModel model = CovarianceModel::White;
    double beta = 0.0;
    double s = 1.0;
    double c = 1.0;
    double hurst = 0.5;

    static CovarianceSpec white(int dim);
    static CovarianceSpec riesz(int dim, double beta);
    static CovarianceSpec bump(int dim, double s);
    static CovarianceSpec atom(int dim, double c);
    static CovarianceSpec fractional(double hurst);

    /// Throws std::invalid_argument if a parameter is outside its range.
    void validate() const;
    std::string name() const;

    /// Mass of the atom at xi = 0 in units of f, i.e. c (2 pi)^d for Atom
    /// and 0 otherwise.
    double atom_mass() const;
    /// True when gamma is an ordinary function (everything except White).
    bool gamma_is_function() const;

    /// f(xi) = coefficient * |xi|^exponent for White, Riesz and Fractional.
    struct PowerLaw {
        double coefficient;
        double exponent;
    };
    std::optional<PowerLaw> power_law() const;

    bool operator==(const CovarianceSpec&) const = default;
};

/// Standard constant with F(|x|^-beta) = c_{d,beta} |xi|^{beta-d}.
double riesz_constant(int dim, double beta);

struct SpectralValue {
    double density = 0.0;  ///< f(xi); +inf at a singular origin
    double atom = 0.0;     ///< point mass reported at xi = 0
};

SpectralValue spectral_density(const CovarianceSpec& cov, std::span<const double> xi);
/// Radial profile f(r) for r = |xi| (density part only).
double spectral_density_radial(const CovarianceSpec& cov, double r);
/// r^{d-1} f(r), evaluated without 0 * inf at tiny r.
double spectral_radial_weight(const CovarianceSpec& cov, double r);

struct DalangResult {
    bool finite = false;
    double value = 0.0;  ///< int f(xi) / (1 + |xi|^2) dxi plus atom mass
    std::string reason;
};

DalangResult dalang_check(const CovarianceSpec& cov);

/// Catalog rule for the same question, without integration: white noise
/// only in d = 1, Riesz iff beta < 2, every other model always.
bool dalang_finite_analytic(const CovarianceSpec& cov);

/// Cell-integrated spectral masses on the r2c half spectrum of a grid.
///
/// mass[m] = integral of f over the frequency cell xi_m + [-pi/L, pi/L]^d,
/// plus the atom at m = 0. The zero cell of an atomless model keeps its
/// (finite-size) density integral.
struct PeriodizedSpectrum {
    GridSpec grid;
    std::vector<double> mass;

    /// Variance weight a_m = mass[m] / (2 pi)^d; sum over the full lattice
    /// of a_m exp(i xi_m . z) is the periodised covariance gamma_per(z).
    double weight(std::size_t m) const;
    double zero_cell() const { return mass.at(0); }
};

PeriodizedSpectrum periodize_spectrum(const CovarianceSpec& cov, const GridSpec& grid);

/// Discrete covariance gamma_per(x_j) on the grid (one time unit).
std::vector<double> periodized_covariance(const PeriodizedSpectrum& spectrum);

struct NoiseSlice {
    int step = 0;
    std::vector<double> values;
};

/// Reusable sampler: owns an FFT plan pair and the per-mode amplitudes.
/// Not thread-safe; use one instance per worker.
class NoiseSampler {
public:
    explicit NoiseSampler(const PeriodizedSpectrum& spectrum);

    /// Writes Delta W_k for the stream (seed, replica, step) into `out`.
    void sample(double dt, std::uint64_t seed, std::uint64_t replica, int step, std::span<double> out);
    /// Same, drawing from a caller-supplied generator.
    void sample(double dt, CounterRng& rng, std::span<double> out);

    const GridSpec& grid() const { return grid_; }

private:
    GridSpec grid_;
    std::vector<double> amplitude_;
    RealFft fft_;
};

NoiseSlice sample_noise_slice(const PeriodizedSpectrum& spectrum, double dt, CounterRng& rng, int step = 0);

/// gamma(|x| = r) for function kernels; throws for White.
double gamma_value(const CovarianceSpec& cov, double r);

/// (1/|B_R|) int_{B_R} gamma(x) dx; 1/|B_R| for White, c for Atom.
double gamma_ball_average(const CovarianceSpec& cov, double radius);

}  // namespace swe
