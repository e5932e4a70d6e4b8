#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "swe/grid.hpp"

namespace swe {

/// Value of the wave fundamental solution at (t, x).
///
/// For d = 1, 2 `density` is the pointwise density. For d = 3 the kernel is
/// the normalised surface measure on the sphere of radius t: `density` holds
/// the surface density 1/(4 pi t) and `shell_radius` the sphere radius.
struct GreenValue {
    double density = 0.0;
    std::optional<double> shell_radius;
};

GreenValue green_value(int dim, double t, std::span<const double> x);

/// Total mass G(t, R^d); equals t in every dimension.
double green_mass(int dim, double t);

/// Dense kernel on the (2 half_width + 1)^d box of cells centred at the
/// origin. `values` are densities: the mass carried by a cell is
/// value * dx^d.
struct KernelGrid {
    int dim = 1;
    double dx = 0.0;
    int half_width = 0;
    std::vector<double> values;

    int side() const { return 2 * half_width + 1; }
    std::size_t index(const std::array<int, 3>& offsets) const;
    double at(const std::array<int, 3>& offsets) const { return values[index(offsets)]; }
    std::array<int, 3> offsets(std::size_t flat) const;
    double cell_volume() const;
    double mass() const;
    double max_value() const;
    /// Largest centre distance |x| over cells whose value exceeds `floor`.
    double support_radius(double floor = 0.0) const;
};

/// Grid realisation of G(t, .).
///
/// Cell masses are exact integrals of G over each cell (d = 1 and d = 2,
/// the latter via the arcsine antiderivative in one coordinate) or shell
/// area binned from a fine equal-area partition of the sphere (d = 3). Mass
/// whose cell centre lies outside the closed ball of radius t is moved to
/// the nearest cell centre inside it, so every weight sits at |x| <= t and
/// compositions of kernels never leak past the summed light cone.
struct WaveKernel {
    double time = 0.0;
    KernelGrid grid;
};

WaveKernel discretize_kernel(const GridSpec& grid, double t);

/// Standard bump exp(-1/(1-|x|^2)) on the unit ball, normalised to unit
/// integral (support radius a = 1).
double mollifier(int dim, double r);
double mollifier_normalisation(int dim);
/// sup of psi_n(x) = n^d psi(n x).
double mollifier_sup(int dim, int n);
inline constexpr double kMollifierRadius = 1.0;

/// G_n(t, .) = G(t, .) convolved with psi_n. The discrete psi_n is
/// evaluated at cell centres and rescaled to unit discrete mass, so the
/// mollified kernel keeps the kernel's mass exactly.
struct MollifiedKernel {
    double time = 0.0;
    int index = 1;
    double support_radius_bound = 0.0;  ///< a/n + t
    KernelGrid grid;
};

MollifiedKernel mollify_kernel(const WaveKernel& kernel, int n);

/// Periodic embedding of a kernel's cell masses (value * dx^d) on the torus.
std::vector<double> embed_masses(const GridSpec& grid, const KernelGrid& kernel);

}  // namespace swe
