#include "swe/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace swe {

int GridSpec::steps() const {
    const double ratio = horizon / requested_dt();
    const int n = static_cast<int>(std::ceil(ratio - 1e-9));
    return n < 1 ? 1 : n;
}

double GridSpec::cell_volume() const { return std::pow(dx(), dim); }

std::size_t GridSpec::size() const {
    std::size_t n = 1;
    for (int k = 0; k < dim; ++k) n *= static_cast<std::size_t>(cells);
    return n;
}

std::size_t GridSpec::spectrum_size() const {
    std::size_t n = static_cast<std::size_t>(cells / 2 + 1);
    for (int k = 1; k < dim; ++k) n *= static_cast<std::size_t>(cells);
    return n;
}

std::size_t GridSpec::wrap_flat(const std::array<int, 3>& offsets) const {
    std::size_t flat = 0;
    for (int k = 0; k < dim; ++k) {
        int i = offsets[k] % cells;
        if (i < 0) i += cells;
        flat = flat * static_cast<std::size_t>(cells) + static_cast<std::size_t>(i);
    }
    return flat;
}

std::array<int, 3> GridSpec::unflatten(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int k = dim - 1; k >= 0; --k) {
        idx[k] = static_cast<int>(flat % static_cast<std::size_t>(cells));
        flat /= static_cast<std::size_t>(cells);
    }
    return idx;
}

void GridSpec::validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument("grid.dim must be 1, 2 or 3");
    if (!(length > 0.0)) throw std::invalid_argument("grid.length must be positive");
    if (cells < 2 || cells % 2 != 0) throw std::invalid_argument("grid.cells must be an even number >= 2");
    if (!(horizon > 0.0)) throw std::invalid_argument("grid.horizon must be positive");
    if (dt < 0.0) throw std::invalid_argument("grid.dt must be non-negative (0 selects dx)");
    if (requested_dt() > dx() * (1.0 + 1e-12))
        throw std::invalid_argument("grid.dt = " + std::to_string(requested_dt()) +
                                    " exceeds dx = " + std::to_string(dx()) + " (require dt <= dx)");
}

std::vector<double> cell_radii(const GridSpec& grid) {
    std::vector<double> radii(grid.size());
    const double h = grid.dx();
    for (std::size_t flat = 0; flat < radii.size(); ++flat) {
        const auto idx = grid.unflatten(flat);
        double r2 = 0.0;
        for (int k = 0; k < grid.dim; ++k) {
            const double x = grid.signed_index(idx[k]) * h;
            r2 += x * x;
        }
        radii[flat] = std::sqrt(r2);
    }
    return radii;
}

std::vector<double> half_spectrum_wavenumbers(const GridSpec& grid) {
    const int n = grid.cells;
    const int half = n / 2 + 1;
    const double unit = 2.0 * std::numbers::pi / grid.length;
    std::vector<double> out(grid.spectrum_size());
    std::size_t flat = 0;
    const int outer = grid.dim >= 2 ? n : 1;
    const int middle = grid.dim >= 3 ? n : 1;
    for (int a = 0; a < outer; ++a) {
        for (int b = 0; b < middle; ++b) {
            for (int c = 0; c < half; ++c) {
                double k2 = static_cast<double>(c) * c;
                if (grid.dim >= 2) {
                    const double ma = grid.signed_index(a);
                    k2 += ma * ma;
                }
                if (grid.dim >= 3) {
                    const double mb = grid.signed_index(b);
                    k2 += mb * mb;
                }
                out[flat++] = unit * std::sqrt(k2);
            }
        }
    }
    return out;
}

double unit_ball_volume(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi / 3.0;
        default: throw std::invalid_argument("dimension must be 1, 2 or 3");
    }
}

double unit_sphere_area(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
        default: throw std::invalid_argument("dimension must be 1, 2 or 3");
    }
}

}  // namespace swe
