#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace swe {

/// Periodic lattice of `cells^dim` points on the torus [0, length)^dim plus
/// a uniform time grid on [0, horizon].
///
/// Cell j sits at the minimal-image coordinate of index j, so the origin is
/// cell 0 and coordinates run over (-length/2, length/2]. A requested
/// time step `dt` of zero means "use dx". The effective step is
/// horizon / steps(), which never exceeds the requested one.
struct GridSpec {
    int dim = 1;
    double length = 8.0;
    int cells = 256;
    double dt = 0.0;
    double horizon = 1.0;

    double dx() const { return length / cells; }
    double requested_dt() const { return dt > 0.0 ? dt : dx(); }
    int steps() const;
    double time_step() const { return horizon / steps(); }
    double cell_volume() const;

    std::size_t size() const;
    /// Number of complex coefficients in the r2c half spectrum.
    std::size_t spectrum_size() const;

    /// Minimal-image integer offset of a 1-d index.
    int signed_index(int i) const { return i <= cells / 2 ? i : i - cells; }
    std::size_t wrap_flat(const std::array<int, 3>& offsets) const;
    std::array<int, 3> unflatten(std::size_t flat) const;

    /// Throws std::invalid_argument describing the first violated bound.
    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

/// Euclidean distance of every cell centre from the origin (minimal image).
std::vector<double> cell_radii(const GridSpec& grid);

/// |xi| for every coefficient of the r2c half spectrum, xi = 2 pi m / L with
/// m taken in the symmetric range.
std::vector<double> half_spectrum_wavenumbers(const GridSpec& grid);

/// Volume of the unit ball in dimension d.
double unit_ball_volume(int dim);
/// Surface area of the unit sphere S^{d-1}.
double unit_sphere_area(int dim);

}  // namespace swe
