#include "swe/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "swe/quadrature.hpp"

namespace swe {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double two_pi_pow(int dim) { return std::pow(2.0 * kPi, dim); }

/// int over [-1,1]^{d-1} of (1 + |y|^2)^{e/2}: the angular factor of a
/// power law integrated over a centred cube.
double cube_face_factor(int dim, double e) {
    if (dim == 1) return 1.0;
    const auto& rule = quad::gauss_legendre(48);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double yi = rule.nodes[i];
        if (dim == 2) {
            sum += rule.weights[i] * std::pow(1.0 + yi * yi, e / 2.0);
            continue;
        }
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            const double yj = rule.nodes[j];
            sum += rule.weights[i] * rule.weights[j] * std::pow(1.0 + yi * yi + yj * yj, e / 2.0);
        }
    }
    return sum;
}

/// Tensor Gauss-Legendre integral of the radial density over a cube.
double cube_integral(const CovarianceSpec& cov, const std::array<double, 3>& centre, double half, int points) {
    const auto& rule = quad::gauss_legendre(points);
    const int dim = cov.dim;
    const int q = points;
    const int total = dim == 1 ? q : dim == 2 ? q * q : q * q * q;
    double sum = 0.0;
    for (int flat = 0; flat < total; ++flat) {
        int rest = flat;
        double r2 = 0.0;
        double w = 1.0;
        for (int d = 0; d < dim; ++d) {
            const int i = rest % q;
            rest /= q;
            const double x = centre[d] + half * rule.nodes[static_cast<std::size_t>(i)];
            r2 += x * x;
            w *= rule.weights[static_cast<std::size_t>(i)];
        }
        sum += w * spectral_density_radial(cov, std::sqrt(r2));
    }
    return sum * std::pow(half, dim);
}

double adaptive_cube_integral(const CovarianceSpec& cov, const std::array<double, 3>& centre, double half,
                              int max_points) {
    int q = 4;
    double coarse = cube_integral(cov, centre, half, q);
    while (2 * q <= max_points) {
        const double fine = cube_integral(cov, centre, half, 2 * q);
        if (std::abs(fine - coarse) <= 1e-8 * std::abs(fine)) return fine;
        coarse = fine;
        q *= 2;
    }
    return coarse;
}

}  // namespace

CovarianceSpec CovarianceSpec::white(int dim) {
    CovarianceSpec c;
    c.dim = dim;
    c.model = CovarianceModel::White;
    return c;
}

CovarianceSpec CovarianceSpec::riesz(int dim, double beta) {
    CovarianceSpec c;
    c.dim = dim;
    c.model = CovarianceModel::Riesz;
    c.beta = beta;
    return c;
}

CovarianceSpec CovarianceSpec::bump(int dim, double s) {
    CovarianceSpec c;
    c.dim = dim;
    c.model = CovarianceModel::Bump;
    c.s = s;
    return c;
}

CovarianceSpec CovarianceSpec::atom(int dim, double mass) {
    CovarianceSpec c;
    c.dim = dim;
    c.model = CovarianceModel::Atom;
    c.c = mass;
    return c;
}

CovarianceSpec CovarianceSpec::fractional(double hurst) {
    CovarianceSpec c;
    c.dim = 1;
    c.model = CovarianceModel::Fractional;
    c.hurst = hurst;
    return c;
}

void CovarianceSpec::validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument("noise dimension must be 1, 2 or 3");
    switch (model) {
        case CovarianceModel::White: break;
        case CovarianceModel::Riesz:
            if (!(beta > 0.0 && beta < dim))
                throw std::invalid_argument("riesz beta = " + std::to_string(beta) + " must lie in (0, d)");
            break;
        case CovarianceModel::Bump:
            if (!(s > 0.0)) throw std::invalid_argument("bump width s must be positive");
            break;
        case CovarianceModel::Atom:
            if (!(c > 0.0)) throw std::invalid_argument("atom mass c must be positive");
            break;
        case CovarianceModel::Fractional:
            if (dim != 1) throw std::invalid_argument("fractional noise is defined for d = 1 only");
            if (!(hurst >= 0.5 && hurst < 1.0))
                throw std::invalid_argument("fractional hurst = " + std::to_string(hurst) + " must lie in [1/2, 1)");
            break;
    }
}

std::string CovarianceSpec::name() const {
    std::ostringstream os;
    os.precision(6);
    switch (model) {
        case CovarianceModel::White: os << "white"; break;
        case CovarianceModel::Riesz: os << "riesz(beta=" << beta << ")"; break;
        case CovarianceModel::Bump: os << "bump(s=" << s << ")"; break;
        case CovarianceModel::Atom: os << "atom(c=" << c << ")"; break;
        case CovarianceModel::Fractional: os << "fractional(H=" << hurst << ")"; break;
    }
    os << ",d=" << dim;
    return os.str();
}

double CovarianceSpec::atom_mass() const { return model == CovarianceModel::Atom ? c * two_pi_pow(dim) : 0.0; }

bool CovarianceSpec::gamma_is_function() const {
    if (model == CovarianceModel::White) return false;
    if (model == CovarianceModel::Fractional && hurst == 0.5) return false;
    return true;
}

std::optional<CovarianceSpec::PowerLaw> CovarianceSpec::power_law() const {
    switch (model) {
        case CovarianceModel::White: return PowerLaw{1.0, 0.0};
        case CovarianceModel::Riesz: return PowerLaw{riesz_constant(dim, beta), beta - dim};
        case CovarianceModel::Fractional:
            if (hurst == 0.5) return PowerLaw{1.0, 0.0};
            return PowerLaw{std::tgamma(2.0 * hurst + 1.0) * std::sin(kPi * hurst), 1.0 - 2.0 * hurst};
        default: return std::nullopt;
    }
}

double riesz_constant(int dim, double beta) {
    return std::pow(kPi, dim / 2.0) * std::pow(2.0, dim - beta) * std::tgamma((dim - beta) / 2.0) /
           std::tgamma(beta / 2.0);
}

double spectral_density_radial(const CovarianceSpec& cov, double r) {
    switch (cov.model) {
        case CovarianceModel::Atom: return 0.0;
        case CovarianceModel::Bump: return std::exp(-0.5 * cov.s * cov.s * r * r);
        default: {
            const auto p = *cov.power_law();
            if (p.exponent == 0.0) return p.coefficient;
            if (r == 0.0) return p.exponent < 0.0 ? kInf : 0.0;
            return p.coefficient * std::pow(r, p.exponent);
        }
    }
}

double spectral_radial_weight(const CovarianceSpec& cov, double r) {
    if (r == 0.0) return 0.0;
    if (cov.model == CovarianceModel::Atom) return 0.0;
    if (auto law = cov.power_law()) return law->coefficient * std::pow(r, cov.dim - 1 + law->exponent);
    return std::pow(r, cov.dim - 1) * spectral_density_radial(cov, r);
}

SpectralValue spectral_density(const CovarianceSpec& cov, std::span<const double> xi) {
    cov.validate();
    if (static_cast<int>(xi.size()) != cov.dim) throw std::invalid_argument("spectral_density: dimension mismatch");
    double r2 = 0.0;
    for (double x : xi) {
        if (!std::isfinite(x)) throw std::invalid_argument("spectral_density: frequency must be finite");
        r2 += x * x;
    }
    SpectralValue v;
    v.density = spectral_density_radial(cov, std::sqrt(r2));
    if (r2 == 0.0) v.atom = cov.atom_mass();
    return v;
}

bool dalang_finite_analytic(const CovarianceSpec& cov) {
    switch (cov.model) {
        case CovarianceModel::White: return cov.dim == 1;
        case CovarianceModel::Riesz: return cov.beta < 2.0;
        default: return true;
    }
}

DalangResult dalang_check(const CovarianceSpec& cov) {
    DalangResult out;
    if (cov.model == CovarianceModel::Riesz && cov.beta >= 2.0) {
        // also covers beta >= d, where |x|^-beta is not locally integrable
        out.reason = "riesz beta = " + std::to_string(cov.beta) + " >= 2: tail divergence of |xi|^(beta-d)/(1+|xi|^2)";
        return out;
    }
    cov.validate();
    const int d = cov.dim;
    const double sphere = unit_sphere_area(d);
    if (cov.model == CovarianceModel::Atom) {
        out.finite = true;
        out.value = cov.atom_mass();
        out.reason = "atom at the origin contributes its mass";
        return out;
    }
    if (auto p = cov.power_law()) {
        // radial integrand r^{d-1+e} / (1 + r^2)
        const double origin = d + p->exponent;
        const double tail = d + p->exponent - 2.0;
        if (origin <= 0.0) {
            out.reason = "density not integrable at the origin (radial exponent " + std::to_string(origin - 1.0) + ")";
            return out;
        }
        if (tail >= 0.0) {
            out.reason = "tail divergence: radial integrand decays like r^" + std::to_string(tail - 1.0);
            return out;
        }
    }
    auto inner = [&](double r) {
        if (r == 0.0) return 0.0;
        return spectral_radial_weight(cov, r) / (1.0 + r * r);
    };
    // tail mapped by u = 1/r onto (0, 1]
    const auto law = cov.power_law();
    auto outer = [&](double u) {
        if (u == 0.0) return 0.0;
        if (law) return law->coefficient * std::pow(u, 1.0 - d - law->exponent) / (1.0 + u * u);
        const double f = spectral_density_radial(cov, 1.0 / u);
        if (f == 0.0) return 0.0;
        return std::pow(u, 1 - d) * f / (1.0 + u * u);
    };
    out.finite = true;
    out.value = sphere * (quad::finite(inner, 0.0, 1.0, 1e-13) + quad::finite(outer, 0.0, 1.0, 1e-13));
    out.reason = "integral converges at the origin and in the tail";
    return out;
}

double PeriodizedSpectrum::weight(std::size_t m) const { return mass.at(m) / two_pi_pow(grid.dim); }

PeriodizedSpectrum periodize_spectrum(const CovarianceSpec& cov, const GridSpec& grid) {
    cov.validate();
    grid.validate();
    if (cov.dim != grid.dim) throw std::invalid_argument("periodize_spectrum: covariance and grid dimensions differ");
    PeriodizedSpectrum out;
    out.grid = grid;
    out.mass.assign(grid.spectrum_size(), 0.0);
    const int d = grid.dim;
    const double unit = 2.0 * kPi / grid.length;
    const double h = kPi / grid.length;
    const double cell = std::pow(unit, d);

    if (cov.model == CovarianceModel::Atom) {
        out.mass[0] = cov.atom_mass();
        return out;
    }
    const auto law = cov.power_law();
    if (law && law->exponent == 0.0) {
        std::fill(out.mass.begin(), out.mass.end(), law->coefficient * cell);
        return out;
    }

    const int n = grid.cells;
    const int half = n / 2 + 1;
    const int outer = d >= 2 ? n : 1;
    const int middle = d >= 3 ? n : 1;
    const int near_points = d == 3 ? 32 : 128;
    std::size_t flat = 0;
    for (int a = 0; a < outer; ++a) {
        for (int b = 0; b < middle; ++b) {
            for (int c = 0; c < half; ++c, ++flat) {
                std::array<int, 3> m{0, 0, 0};
                // the r2c last axis holds the halved dimension
                if (d == 1) {
                    m[0] = c;
                } else if (d == 2) {
                    m[0] = grid.signed_index(a);
                    m[1] = c;
                } else {
                    m[0] = grid.signed_index(a);
                    m[1] = grid.signed_index(b);
                    m[2] = c;
                }
                int norm_inf = 0;
                std::array<double, 3> centre{0, 0, 0};
                for (int k = 0; k < d; ++k) {
                    norm_inf = std::max(norm_inf, std::abs(m[k]));
                    centre[k] = unit * m[k];
                }
                if (norm_inf == 0 && law) {
                    const double power = d + law->exponent;
                    if (power <= 0.0)
                        throw std::invalid_argument("periodize_spectrum: spectral density of " + cov.name() +
                                                    " is not integrable over the zero cell");
                    out.mass[flat] = law->coefficient * 2.0 * d * std::pow(h, power) / power *
                                     cube_face_factor(d, law->exponent);
                } else if (norm_inf <= 3) {
                    out.mass[flat] = adaptive_cube_integral(cov, centre, h, near_points);
                } else {
                    out.mass[flat] = cube_integral(cov, centre, h, 6);
                }
                if (!std::isfinite(out.mass[flat]) || out.mass[flat] < 0.0)
                    throw std::runtime_error("periodize_spectrum: non-finite cell mass for " + cov.name());
            }
        }
    }
    return out;
}

std::vector<double> periodized_covariance(const PeriodizedSpectrum& spectrum) {
    RealFft fft(spectrum.grid.dim, spectrum.grid.cells);
    auto spec = fft.spectrum();
    for (std::size_t m = 0; m < spec.size(); ++m) spec[m] = spectrum.weight(m);
    fft.backward();
    auto real = fft.real();
    return {real.begin(), real.end()};
}

NoiseSampler::NoiseSampler(const PeriodizedSpectrum& spectrum)
    : grid_(spectrum.grid), amplitude_(spectrum.mass.size()), fft_(spectrum.grid.dim, spectrum.grid.cells) {
    const double points = static_cast<double>(grid_.size());
    for (std::size_t m = 0; m < amplitude_.size(); ++m) amplitude_[m] = std::sqrt(spectrum.weight(m) / points);
}

void NoiseSampler::sample(double dt, std::uint64_t seed, std::uint64_t replica, int step, std::span<double> out) {
    CounterRng rng(seed, replica, static_cast<std::uint64_t>(step));
    sample(dt, rng, out);
}

void NoiseSampler::sample(double dt, CounterRng& rng, std::span<double> out) {
    if (!(dt > 0.0)) throw std::invalid_argument("noise sampling requires dt > 0");
    if (out.size() != grid_.size()) throw std::invalid_argument("noise sampling: output size mismatch");
    std::normal_distribution<double> normal;
    auto real = fft_.real();
    for (double& x : real) x = normal(rng);
    fft_.forward();
    auto spec = fft_.spectrum();
    const double root_dt = std::sqrt(dt);
    for (std::size_t m = 0; m < spec.size(); ++m) spec[m] *= amplitude_[m] * root_dt;
    fft_.backward();
    std::copy(real.begin(), real.end(), out.begin());
}

NoiseSlice sample_noise_slice(const PeriodizedSpectrum& spectrum, double dt, CounterRng& rng, int step) {
    NoiseSampler sampler(spectrum);
    NoiseSlice slice;
    slice.step = step;
    slice.values.assign(spectrum.grid.size(), 0.0);
    sampler.sample(dt, rng, slice.values);
    return slice;
}

double gamma_value(const CovarianceSpec& cov, double r) {
    cov.validate();
    switch (cov.model) {
        case CovarianceModel::White: throw std::invalid_argument("white noise covariance is the Dirac mass, not a function");
        case CovarianceModel::Riesz: return std::pow(r, -cov.beta);
        case CovarianceModel::Bump: {
            const double var = cov.s * cov.s;
            return std::pow(2.0 * kPi * var, -cov.dim / 2.0) * std::exp(-r * r / (2.0 * var));
        }
        case CovarianceModel::Atom: return cov.c;
        case CovarianceModel::Fractional: {
            const double h = cov.hurst;
            if (h == 0.5) throw std::invalid_argument("fractional H = 1/2 is white noise");
            return h * (2.0 * h - 1.0) * std::pow(r, 2.0 * h - 2.0);
        }
    }
    return 0.0;
}

double gamma_ball_average(const CovarianceSpec& cov, double radius) {
    cov.validate();
    if (!(radius > 0.0)) throw std::invalid_argument("gamma_ball_average requires R > 0");
    const int d = cov.dim;
    const double volume = unit_ball_volume(d) * std::pow(radius, d);
    if (cov.model == CovarianceModel::Atom) return cov.c;
    if (!cov.gamma_is_function()) return 1.0 / volume;
    // power laws in closed form: |S^{d-1}| / omega_d = d
    if (cov.model == CovarianceModel::Riesz) return d * std::pow(radius, -cov.beta) / (d - cov.beta);
    if (cov.model == CovarianceModel::Fractional) return cov.hurst * std::pow(radius, 2.0 * cov.hurst - 2.0);
    // the Gaussian bump is negligible beyond 40 s; integrating further only starves the quadrature
    const double upper = cov.model == CovarianceModel::Bump ? std::min(radius, 40.0 * cov.s) : radius;
    const double radial = quad::finite([&](double r) { return std::pow(r, d - 1) * gamma_value(cov, r); }, 0.0,
                                       upper, 1e-13);
    return unit_sphere_area(d) * radial / volume;
}

}  // namespace swe
