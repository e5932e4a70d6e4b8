#include "swe/kernels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "swe/quadrature.hpp"

namespace swe {
namespace {

constexpr double kPi = std::numbers::pi;

void check_dim(int dim) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("dimension must be 1, 2 or 3, got " + std::to_string(dim));
}

double box_count(int side, int dim) {
    double n = 1.0;
    for (int k = 0; k < dim; ++k) n *= side;
    return n;
}

double centre_radius(const std::array<int, 3>& o, int dim, double dx) {
    double r2 = 0.0;
    for (int k = 0; k < dim; ++k) r2 += static_cast<double>(o[k]) * o[k];
    return std::sqrt(r2) * dx;
}

/// Signed quadrant primitive of the d = 2 kernel: integral of G(t, .) over
/// [0, x] x [0, y] with orientation signs. The inner integral in the second
/// coordinate is the arcsine antiderivative; the outer one is done by
/// tanh-sinh, which absorbs the square-root endpoint at a = sqrt(t^2 - y^2).
double quadrant_mass_2d(double t, double x, double y) {
    const double sx = x < 0 ? -1.0 : 1.0;
    const double sy = y < 0 ? -1.0 : 1.0;
    x = std::min(std::abs(x), t);
    y = std::abs(y);
    if (x == 0.0 || y == 0.0) return 0.0;
    if (y >= t) return sx * sy * x / 4.0;
    const double a_star = std::sqrt(t * t - y * y);
    const double upper = std::min(x, a_star);
    const double curved = quad::finite(
        [t, y](double a) {
            const double c = std::sqrt(std::max(t * t - a * a, 0.0));
            return c <= y ? kPi / 2.0 : std::asin(y / c);
        },
        0.0, upper, 1e-13);
    const double flat = x > a_star ? (kPi / 2.0) * (x - a_star) : 0.0;
    return sx * sy * (curved + flat) / (2.0 * kPi);
}

/// Moves every weight whose cell centre lies outside the closed ball of
/// radius t to the closest cell centre inside it (mass preserving).
void snap_inside(KernelGrid& k, double t) {
    const double tol = 1e-9 * k.dx;
    const int dim = k.dim;
    for (std::size_t flat = 0; flat < k.values.size(); ++flat) {
        const double w = k.values[flat];
        if (w == 0.0) continue;
        const auto o = k.offsets(flat);
        const double r = centre_radius(o, dim, k.dx);
        if (r <= t + tol) continue;
        // project onto the sphere and search the enclosing cells, stepping
        // further inward until one of them is inside the ball
        double shrink = t / r;
        std::array<int, 3> best{0, 0, 0};
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
            std::array<double, 3> p{0, 0, 0};
            for (int d = 0; d < dim; ++d) p[d] = o[d] * shrink;
            double best_dist = std::numeric_limits<double>::infinity();
            for (int corner = 0; corner < (1 << dim); ++corner) {
                std::array<int, 3> c{0, 0, 0};
                for (int d = 0; d < dim; ++d)
                    c[d] = static_cast<int>((corner >> d) & 1 ? std::ceil(p[d]) : std::floor(p[d]));
                if (centre_radius(c, dim, k.dx) > t + tol) continue;
                double dist = 0.0;
                for (int d = 0; d < dim; ++d) dist += (c[d] - p[d]) * (c[d] - p[d]);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = c;
                    found = true;
                }
            }
            shrink *= 0.9;
        }
        k.values[flat] = 0.0;
        k.values[k.index(best)] += w;
    }
}

KernelGrid make_box(int dim, double dx, int half_width) {
    KernelGrid k;
    k.dim = dim;
    k.dx = dx;
    k.half_width = half_width;
    k.values.assign(static_cast<std::size_t>(box_count(k.side(), dim)), 0.0);
    return k;
}

void fill_1d(KernelGrid& k, double t) {
    const double h = k.dx;
    auto primitive = [t](double x) { return 0.5 * std::clamp(x, -t, t); };
    for (int i = -k.half_width; i <= k.half_width; ++i) {
        const double mass = primitive((i + 0.5) * h) - primitive((i - 0.5) * h);
        k.values[k.index({i, 0, 0})] = mass / h;
    }
}

void fill_2d(KernelGrid& k, double t) {
    const double h = k.dx;
    const int hw = k.half_width;
    // primitive at cell corners (i + 1/2) h for i in [-hw-1, hw]
    const int corners = 2 * hw + 2;
    std::vector<double> positive(static_cast<std::size_t>((hw + 1) * (hw + 1)));
    for (int a = 0; a <= hw; ++a)
        for (int b = 0; b <= hw; ++b)
            positive[static_cast<std::size_t>(a * (hw + 1) + b)] = quadrant_mass_2d(t, (a + 0.5) * h, (b + 0.5) * h);
    auto corner_value = [&](int ci, int cj) {
        // corner index c maps to coordinate (c - hw - 1 + 1/2) h
        const int i = ci - hw - 1;
        const int j = cj - hw - 1;
        const int ai = i >= 0 ? i : -i - 1;
        const int aj = j >= 0 ? j : -j - 1;
        const double sign = (i >= 0 ? 1.0 : -1.0) * (j >= 0 ? 1.0 : -1.0);
        return sign * positive[static_cast<std::size_t>(ai * (hw + 1) + aj)];
    };
    (void)corners;
    const double area = h * h;
    for (int i = -hw; i <= hw; ++i) {
        for (int j = -hw; j <= hw; ++j) {
            const int ci = i + hw + 1;
            const int cj = j + hw + 1;
            const double mass = corner_value(ci, cj) - corner_value(ci - 1, cj) - corner_value(ci, cj - 1) +
                                corner_value(ci - 1, cj - 1);
            k.values[k.index({i, j, 0})] = std::max(mass, 0.0) / area;
        }
    }
}

void fill_3d(KernelGrid& k, double t) {
    const double h = k.dx;
    const int rows = std::max(100, static_cast<int>(std::ceil(16.0 * t / h)));
    const int cols = 2 * rows;
    const double element_mass = t / (static_cast<double>(rows) * cols);
    const double volume = h * h * h;
    for (int i = 0; i < rows; ++i) {
        // equal-area rows: z uniform on [-t, t]
        const double z = -t + (i + 0.5) * (2.0 * t / rows);
        const double rho = std::sqrt(std::max(t * t - z * z, 0.0));
        const double phase = (i % 2) * 0.5;
        for (int j = 0; j < cols; ++j) {
            const double phi = (j + phase) * (2.0 * kPi / cols);
            const std::array<double, 3> p{rho * std::cos(phi), rho * std::sin(phi), z};
            std::array<int, 3> c{};
            for (int d = 0; d < 3; ++d) c[d] = static_cast<int>(std::lround(p[d] / h));
            k.values[k.index(c)] += element_mass / volume;
        }
    }
}

}  // namespace

GreenValue green_value(int dim, double t, std::span<const double> x) {
    check_dim(dim);
    if (!(t > 0.0)) throw std::invalid_argument("green_value requires t > 0");
    if (static_cast<int>(x.size()) != dim) throw std::invalid_argument("green_value: point dimension mismatch");
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    const double r = std::sqrt(r2);
    GreenValue g;
    switch (dim) {
        case 1: g.density = r < t ? 0.5 : 0.0; break;
        case 2: g.density = r < t ? 1.0 / (2.0 * kPi * std::sqrt(t * t - r2)) : 0.0; break;
        case 3:
            g.density = 1.0 / (4.0 * kPi * t);
            g.shell_radius = t;
            break;
    }
    return g;
}

double green_mass(int dim, double t) {
    check_dim(dim);
    if (t < 0.0) throw std::invalid_argument("green_mass requires t >= 0");
    return t;
}

std::size_t KernelGrid::index(const std::array<int, 3>& o) const {
    std::size_t flat = 0;
    const int s = side();
    for (int d = 0; d < dim; ++d) {
        if (o[d] < -half_width || o[d] > half_width) throw std::out_of_range("KernelGrid: offset outside box");
        flat = flat * static_cast<std::size_t>(s) + static_cast<std::size_t>(o[d] + half_width);
    }
    return flat;
}

std::array<int, 3> KernelGrid::offsets(std::size_t flat) const {
    std::array<int, 3> o{0, 0, 0};
    const auto s = static_cast<std::size_t>(side());
    for (int d = dim - 1; d >= 0; --d) {
        o[d] = static_cast<int>(flat % s) - half_width;
        flat /= s;
    }
    return o;
}

double KernelGrid::cell_volume() const { return std::pow(dx, dim); }

double KernelGrid::mass() const {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum * cell_volume();
}

double KernelGrid::max_value() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
}

double KernelGrid::support_radius(double floor) const {
    double r = 0.0;
    for (std::size_t flat = 0; flat < values.size(); ++flat)
        if (values[flat] > floor) r = std::max(r, centre_radius(offsets(flat), dim, dx));
    return r;
}

WaveKernel discretize_kernel(const GridSpec& grid, double t) {
    grid.validate();
    if (t < 0.0) throw std::invalid_argument("discretize_kernel requires t >= 0");
    if (t > grid.length / 2.0 + 1e-12)
        throw std::invalid_argument("discretize_kernel: light cone of radius " + std::to_string(t) +
                                    " wraps around the torus of side " + std::to_string(grid.length) +
                                    " (require t <= L/2)");
    const double h = grid.dx();
    if (grid.dim == 3 && t > 0.0 && h > t / 4.0)
        throw std::invalid_argument("discretize_kernel: dx = " + std::to_string(h) +
                                    " is too coarse to resolve the shell of radius " + std::to_string(t) +
                                    " (require dx <= t/4)");
    const int hw = static_cast<int>(std::ceil(t / h + std::sqrt(static_cast<double>(grid.dim)) / 2.0)) + 1;
    WaveKernel kernel;
    kernel.time = t;
    kernel.grid = make_box(grid.dim, h, hw);
    if (t == 0.0) return kernel;
    switch (grid.dim) {
        case 1: fill_1d(kernel.grid, t); break;
        case 2: fill_2d(kernel.grid, t); break;
        case 3: fill_3d(kernel.grid, t); break;
    }
    snap_inside(kernel.grid, t);
    return kernel;
}

double mollifier_normalisation(int dim) {
    check_dim(dim);
    static const std::array<double, 3> z = [] {
        std::array<double, 3> out{};
        for (int d = 1; d <= 3; ++d) {
            const double radial = quad::finite(
                [d](double r) {
                    const double q = 1.0 - r * r;
                    return q <= 0.0 ? 0.0 : std::pow(r, d - 1) * std::exp(-1.0 / q);
                },
                0.0, 1.0, 1e-14);
            out[d - 1] = unit_sphere_area(d) * radial;
        }
        return out;
    }();
    return z[dim - 1];
}

double mollifier(int dim, double r) {
    const double q = 1.0 - r * r;
    if (q <= 0.0) return 0.0;
    return std::exp(-1.0 / q) / mollifier_normalisation(dim);
}

double mollifier_sup(int dim, int n) {
    if (n < 1) throw std::invalid_argument("mollifier index must be >= 1");
    return std::pow(static_cast<double>(n), dim) * std::exp(-1.0) / mollifier_normalisation(dim);
}

MollifiedKernel mollify_kernel(const WaveKernel& kernel, int n) {
    if (n < 1) throw std::invalid_argument("mollify_kernel: index n must be >= 1");
    const KernelGrid& src = kernel.grid;
    const int dim = src.dim;
    const double h = src.dx;
    const double width = kMollifierRadius / n;
    if (width < 2.0 * h * (1.0 - 1e-12))
        throw std::invalid_argument("mollify_kernel: mollifier width a/n = " + std::to_string(width) +
                                    " is below 2 dx = " + std::to_string(2.0 * h) + " (unresolvable)");
    const int reach = static_cast<int>(std::ceil(width / h));
    KernelGrid stencil = make_box(dim, h, reach);
    const double scale = std::pow(static_cast<double>(n), dim);
    double total = 0.0;
    for (std::size_t f = 0; f < stencil.values.size(); ++f) {
        const double r = centre_radius(stencil.offsets(f), dim, h);
        stencil.values[f] = scale * mollifier(dim, r * n);
        total += stencil.values[f];
    }
    const double discrete_mass = total * stencil.cell_volume();
    for (double& v : stencil.values) v /= discrete_mass;

    MollifiedKernel out;
    out.time = kernel.time;
    out.index = n;
    out.support_radius_bound = width + kernel.time;
    out.grid = make_box(dim, h, src.half_width + reach);
    const double cell = src.cell_volume();
    for (std::size_t f = 0; f < src.values.size(); ++f) {
        const double mass = src.values[f] * cell;
        if (mass == 0.0) continue;
        const auto o = src.offsets(f);
        for (std::size_t g = 0; g < stencil.values.size(); ++g) {
            const double s = stencil.values[g];
            if (s == 0.0) continue;
            const auto q = stencil.offsets(g);
            out.grid.values[out.grid.index({o[0] + q[0], o[1] + q[1], o[2] + q[2]})] += mass * s;
        }
    }
    return out;
}

std::vector<double> embed_masses(const GridSpec& grid, const KernelGrid& kernel) {
    if (kernel.dim != grid.dim) throw std::invalid_argument("embed_masses: dimension mismatch");
    if (std::abs(kernel.dx - grid.dx()) > 1e-12 * grid.dx()) throw std::invalid_argument("embed_masses: dx mismatch");
    std::vector<double> out(grid.size(), 0.0);
    const double cell = kernel.cell_volume();
    for (std::size_t f = 0; f < kernel.values.size(); ++f) {
        const double v = kernel.values[f];
        if (v == 0.0) continue;
        out[grid.wrap_flat(kernel.offsets(f))] += v * cell;
    }
    return out;
}

}  // namespace swe
