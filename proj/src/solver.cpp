#include "swe/solver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "swe/parallel.hpp"

namespace swe {
namespace {

void check_finite(std::span<const double> field, int step, const char* what) {
    for (double x : field) {
        if (!std::isfinite(x)) {
            std::ostringstream os;
            os << "non-finite " << what << " at step " << step;
            throw NonFiniteError(os.str());
        }
    }
}

/// Number of lattice frequencies represented by r2c coefficient `flat`:
/// 1 on the self-conjugate planes c = 0 and c = N/2, 2 elsewhere.
double hermitian_multiplicity(const GridSpec& grid, std::size_t flat) {
    const auto half = static_cast<std::size_t>(grid.cells / 2 + 1);
    const std::size_t c = flat % half;
    return (c == 0 || c == half - 1) ? 1.0 : 2.0;
}

}  // namespace

SigmaSpec SigmaSpec::parse(const std::string& name) {
    if (name == "constant" || name == "additive") return constant(1.0);
    if (name == "zero") return constant(0.0);
    if (name == "affine") return affine();
    if (name == "linear") return linear();
    if (name == "sine" || name == "sin") return sine();
    throw std::invalid_argument("unknown sigma '" + name + "' (expected constant, zero, affine, linear, sine)");
}

double SigmaSpec::derivative(double u) const {
    switch (kind) {
        case SigmaKind::Constant: return 0.0;
        case SigmaKind::Affine:
        case SigmaKind::Linear: return 1.0;
        case SigmaKind::Sine: return std::cos(u);
    }
    return 0.0;
}

double SigmaSpec::lipschitz() const { return kind == SigmaKind::Constant ? 0.0 : 1.0; }

std::string SigmaSpec::name() const {
    switch (kind) {
        case SigmaKind::Constant: return value == 0.0 ? "zero" : value == 1.0 ? "constant" : "constant(" + std::to_string(value) + ")";
        case SigmaKind::Affine: return "affine";
        case SigmaKind::Linear: return "linear";
        case SigmaKind::Sine: return "sine";
    }
    return "?";
}

SolutionState initial_state(const GridSpec& grid) {
    SolutionState s;
    s.grid = grid;
    s.u.assign(grid.size(), 1.0);
    s.v.assign(grid.size(), 0.0);
    return s;
}

// ---------------------------------------------------------------- stepper

SpectralStepper::SpectralStepper(const GridSpec& grid) : grid_(grid), fft_(grid.dim, grid.cells) {
    grid_.validate();
    const double h = grid_.time_step();
    const auto lambda = half_spectrum_wavenumbers(grid_);
    const std::size_t m = lambda.size();
    cos_.resize(m);
    sin_over_.resize(m);
    lam_sin_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double l = lambda[i];
        cos_[i] = std::cos(h * l);
        sin_over_[i] = l == 0.0 ? h : std::sin(h * l) / l;
        lam_sin_[i] = l * std::sin(h * l);
    }
    w_hat_.resize(m);
    v_hat_.resize(m);
    w_real_.resize(grid_.size());
}

void SpectralStepper::load(const SolutionState& state) {
    if (state.u.size() != grid_.size() || state.v.size() != grid_.size())
        throw std::invalid_argument("SpectralStepper: state does not match the grid");
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    for (std::size_t i = 0; i < real.size(); ++i) w_real_[i] = state.u[i] - 1.0;
    std::copy(w_real_.begin(), w_real_.end(), real.begin());
    fft_.forward();
    std::copy(spec.begin(), spec.end(), w_hat_.begin());
    std::copy(state.v.begin(), state.v.end(), real.begin());
    fft_.forward();
    std::copy(spec.begin(), spec.end(), v_hat_.begin());
}

void SpectralStepper::advance(std::span<const double> noise, const SigmaSpec& sigma) {
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    // w_real_ holds the current deviation on entry
    for (std::size_t i = 0; i < real.size(); ++i) real[i] = sigma(1.0 + w_real_[i]) * noise[i];
    fft_.forward();
    for (std::size_t m = 0; m < spec.size(); ++m) {
        const std::complex<double> kick = v_hat_[m] + spec[m];
        const std::complex<double> w = w_hat_[m];
        w_hat_[m] = cos_[m] * w + sin_over_[m] * kick;
        v_hat_[m] = -lam_sin_[m] * w + cos_[m] * kick;
    }
    std::copy(w_hat_.begin(), w_hat_.end(), spec.begin());
    fft_.backward();
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < real.size(); ++i) w_real_[i] = real[i] * scale;
}

void SpectralStepper::store(SolutionState& state) {
    state.grid = grid_;
    state.u.resize(grid_.size());
    state.v.resize(grid_.size());
    for (std::size_t i = 0; i < w_real_.size(); ++i) state.u[i] = 1.0 + w_real_[i];
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    std::copy(v_hat_.begin(), v_hat_.end(), spec.begin());
    fft_.backward();
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < real.size(); ++i) state.v[i] = real[i] * scale;
}

void SpectralStepper::step(SolutionState& state, std::span<const double> noise, const SigmaSpec& sigma) {
    if (noise.size() != grid_.size()) throw std::invalid_argument("SpectralStepper: noise does not match the grid");
    load(state);
    advance(noise, sigma);
    check_finite(w_real_, state.step + 1, "displacement");
    store(state);
    ++state.step;
}

SolutionState SpectralStepper::run(const SolutionState& start, const NoiseFn& noise, const SigmaSpec& sigma,
                                   int steps) {
    load(start);
    std::vector<double> slice(grid_.size());
    for (int k = 0; k < steps; ++k) {
        noise(start.step + k, slice);
        advance(slice, sigma);
        check_finite(w_real_, start.step + k + 1, "displacement");
    }
    SolutionState out = start;
    store(out);
    out.step = start.step + steps;
    return out;
}

Solver::Solver(const PeriodizedSpectrum& spectrum) : stepper_(spectrum.grid), sampler_(spectrum) {}

NoiseFn Solver::noise(std::uint64_t seed, std::uint64_t replica) {
    const double dt = stepper_.grid().time_step();
    return [this, dt, seed, replica](int k, std::span<double> out) { sampler_.sample(dt, seed, replica, k, out); };
}

SolutionState Solver::solve(const SigmaSpec& sigma, std::uint64_t seed, std::uint64_t replica) {
    SolutionState start = initial_state(stepper_.grid());
    start.seed = seed;
    start.replica = replica;
    return stepper_.run(start, noise(seed, replica), sigma, stepper_.grid().steps());
}

SolutionState step(const SolutionState& state, const NoiseSlice& noise, const SigmaSpec& sigma) {
    if (noise.step != state.step)
        throw std::invalid_argument("step: noise slice index " + std::to_string(noise.step) +
                                    " does not match state index " + std::to_string(state.step));
    SpectralStepper stepper(state.grid);
    SolutionState next = state;
    stepper.step(next, noise.values, sigma);
    return next;
}

SolutionState solve(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma, std::uint64_t seed) {
    grid.validate();
    const auto dalang = dalang_check(cov);
    if (!dalang.finite) throw std::invalid_argument("solve: Dalang's condition fails: " + dalang.reason);
    Solver solver(periodize_spectrum(cov, grid));
    return solver.solve(sigma, seed, 0);
}

// ---------------------------------------------------------------- oracle

SolutionState solve_oracle_d1(const GridSpec& grid, const NoiseFn& noise, const SigmaSpec& sigma) {
    grid.validate();
    if (grid.dim != 1) throw std::invalid_argument("solve_oracle_d1: grid must be one-dimensional");
    const int n = grid.cells;
    const int steps = grid.steps();
    if (n > 512 || steps > 512)
        throw std::invalid_argument("solve_oracle_d1: size guard (N <= 512 and N_t <= 512)");
    const double dx = grid.dx();
    const double dt = grid.time_step();
    if (steps * dt > grid.length / 2.0 - dx)
        throw std::invalid_argument("solve_oracle_d1: light cone wraps around the torus");

    std::vector<std::vector<double>> prefix;  // prefix sums of F_j over three periods
    prefix.reserve(static_cast<std::size_t>(steps));
    std::vector<double> u(static_cast<std::size_t>(n), 1.0);
    std::vector<double> slice(static_cast<std::size_t>(n));
    std::vector<double> forcing(static_cast<std::size_t>(n));
    for (int k = 0; k < steps; ++k) {
        noise(k, slice);
        for (int i = 0; i < n; ++i) forcing[i] = sigma(u[i]) * slice[i];
        std::vector<double> p(static_cast<std::size_t>(3 * n + 1), 0.0);
        for (int i = 0; i < 3 * n; ++i) p[i + 1] = p[i] + forcing[i % n];
        prefix.push_back(std::move(p));

        // u(t_{k+1}, x_i) = 1 + sum_{j<=k} sum_o w(tau, o) F_j(x_i - o)
        std::vector<double> next(static_cast<std::size_t>(n), 1.0);
        for (int j = 0; j <= k; ++j) {
            const double q = (k + 1 - j) * dt / dx;  // cone half-width in cells
            const auto& p = prefix[j];
            auto value = [&](int idx) {
                const int w = ((idx % n) + n) % n;
                return p[w + 1] - p[w];
            };
            if (q < 0.5) {
                for (int i = 0; i < n; ++i) next[i] += q * dx * value(i);
                continue;
            }
            const int full = static_cast<int>(std::floor(q - 0.5 + 1e-12));
            const double edge = std::clamp(q - (full + 0.5), 0.0, 1.0);
            for (int i = 0; i < n; ++i) {
                const int lo = i - full + n;
                const int hi = i + full + n;
                double sum = 0.5 * dx * (p[hi + 1] - p[lo]);
                if (edge > 0.0) sum += 0.5 * dx * edge * (value(i - full - 1) + value(i + full + 1));
                next[i] += sum;
            }
        }
        check_finite(next, k + 1, "oracle displacement");
        u = std::move(next);
    }
    SolutionState out;
    out.grid = grid;
    out.u = std::move(u);
    out.v.assign(static_cast<std::size_t>(n), 0.0);  // the direct sum does not track velocity
    out.step = steps;
    return out;
}

SolutionState solve_oracle_d1(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma,
                              std::uint64_t seed) {
    const auto spectrum = periodize_spectrum(cov, grid);
    NoiseSampler sampler(spectrum);
    const double dt = grid.time_step();
    auto out = solve_oracle_d1(
        grid, [&](int k, std::span<double> buf) { sampler.sample(dt, seed, 0, k, buf); }, sigma);
    out.seed = seed;
    return out;
}

// ---------------------------------------------------------------- convolution scheme

ConvolutionSolver::ConvolutionSolver(const GridSpec& grid, int mollifier_index)
    : grid_(grid), index_(mollifier_index), fft_(grid.dim, grid.cells) {
    grid_.validate();
    if (index_ < 0) throw std::invalid_argument("ConvolutionSolver: mollifier index must be >= 0");
    const int steps = grid_.steps();
    const double dt = grid_.time_step();
    const double reach = steps * dt + (index_ > 0 ? kMollifierRadius / index_ : 0.0);
    if (reach > grid_.length / 2.0 + 1e-12)
        throw std::invalid_argument("ConvolutionSolver: kernel support " + std::to_string(reach) +
                                    " exceeds half the torus side " + std::to_string(grid_.length / 2.0));
    kernels_.resize(static_cast<std::size_t>(steps + 1));
    kernel_hat_.resize(static_cast<std::size_t>(steps + 1));
    sparse_.resize(static_cast<std::size_t>(steps + 1));
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    for (int lag = 1; lag <= steps; ++lag) {
        const WaveKernel base = discretize_kernel(grid_, lag * dt);
        kernels_[lag] = index_ > 0 ? mollify_kernel(base, index_).grid : base.grid;
        const KernelGrid& kg = kernels_[lag];
        const double cell_volume = kg.cell_volume();
        for (std::size_t f = 0; f < kg.values.size(); ++f) {
            if (kg.values[f] == 0.0) continue;
            sparse_[lag].offsets.push_back(kg.offsets(f));
            sparse_[lag].masses.push_back(kg.values[f] * cell_volume);
        }
        const auto masses = embed_masses(grid_, kernels_[lag]);
        std::copy(masses.begin(), masses.end(), real.begin());
        fft_.forward();
        kernel_hat_[lag].assign(spec.begin(), spec.end());
    }
}

void ConvolutionSolver::convolve_history(const std::vector<std::vector<std::complex<double>>>& forcing, int m,
                                         std::span<double> out) {
    auto spec = fft_.spectrum();
    std::fill(spec.begin(), spec.end(), std::complex<double>(0.0, 0.0));
    for (int j = 0; j < m; ++j) {
        const auto& k = kernel_hat_[static_cast<std::size_t>(m - j)];
        const auto& f = forcing[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] += k[i] * f[i];
    }
    fft_.backward();
    auto real = fft_.real();
    const double scale = 1.0 / static_cast<double>(grid_.size());
    for (std::size_t i = 0; i < real.size(); ++i) out[i] = 1.0 + real[i] * scale;
}

std::vector<std::vector<double>> ConvolutionSolver::run(const std::vector<std::vector<double>>& noise,
                                                        const SigmaSpec& sigma) {
    const int steps = grid_.steps();
    if (static_cast<int>(noise.size()) < steps) throw std::invalid_argument("ConvolutionSolver: noise too short");
    std::vector<std::vector<double>> fields(static_cast<std::size_t>(steps + 1),
                                            std::vector<double>(grid_.size(), 1.0));
    std::vector<std::vector<std::complex<double>>> forcing;
    forcing.reserve(static_cast<std::size_t>(steps));
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    for (int m = 1; m <= steps; ++m) {
        const auto& u = fields[static_cast<std::size_t>(m - 1)];
        const auto& w = noise[static_cast<std::size_t>(m - 1)];
        for (std::size_t i = 0; i < real.size(); ++i) real[i] = sigma(u[i]) * w[i];
        fft_.forward();
        forcing.emplace_back(spec.begin(), spec.end());
        convolve_history(forcing, m, fields[static_cast<std::size_t>(m)]);
        check_finite(fields[static_cast<std::size_t>(m)], m, "convolution displacement");
    }
    return fields;
}

std::vector<std::vector<double>> ConvolutionSolver::picard_map(const std::vector<std::vector<double>>& previous,
                                                               const std::vector<std::vector<double>>& noise,
                                                               const SigmaSpec& sigma) {
    const int steps = grid_.steps();
    if (static_cast<int>(previous.size()) != steps + 1 || static_cast<int>(noise.size()) < steps)
        throw std::invalid_argument("picard_map: history does not match the grid");
    std::vector<std::vector<std::complex<double>>> forcing;
    forcing.reserve(static_cast<std::size_t>(steps));
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    for (int j = 0; j < steps; ++j) {
        const auto& u = previous[static_cast<std::size_t>(j)];
        const auto& w = noise[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < real.size(); ++i) real[i] = sigma(u[i]) * w[i];
        fft_.forward();
        forcing.emplace_back(spec.begin(), spec.end());
    }
    std::vector<std::vector<double>> next(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 1.0));
    for (int m = 1; m <= steps; ++m) {
        convolve_history(forcing, m, next[static_cast<std::size_t>(m)]);
        check_finite(next[static_cast<std::size_t>(m)], m, "Picard iterate");
    }
    return next;
}

void ConvolutionSolver::scatter_history(const std::vector<std::vector<double>>& forcing, int m,
                                        std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (int j = 0; j < m; ++j) {
        const auto& f = forcing[static_cast<std::size_t>(j)];
        const auto& k = sparse_[static_cast<std::size_t>(m - j)];
        for (std::size_t z = 0; z < f.size(); ++z) {
            if (f[z] == 0.0) continue;
            const auto base = grid_.unflatten(z);
            for (std::size_t q = 0; q < k.offsets.size(); ++q) {
                const auto& o = k.offsets[q];
                out[grid_.wrap_flat({base[0] + o[0], base[1] + o[1], base[2] + o[2]})] += k.masses[q] * f[z];
            }
        }
    }
}

namespace {

/// Forcing difference sigma(u+) W+ - sigma(u-) W- at step j, where the
/// plus run differs by `diff` in the field and by 2 eps in one increment.
void forcing_difference(const SigmaSpec& sigma, std::span<const double> minus, std::span<const double> diff,
                        std::span<const double> noise_minus, bool kicked, std::size_t cell, double eps,
                        std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = diff[i] == 0.0 ? 0.0 : sigma.difference(minus[i], diff[i]) * noise_minus[i];
    if (kicked) out[cell] += sigma(minus[cell] + diff[cell]) * 2.0 * eps;
}

}  // namespace

std::vector<std::vector<double>> ConvolutionSolver::pair_map(const std::vector<std::vector<double>>& minus,
                                                             const std::vector<std::vector<double>>& diff,
                                                             const std::vector<std::vector<double>>& noise,
                                                             int step, std::size_t cell, double eps,
                                                             const SigmaSpec& sigma,
                                                             std::vector<std::vector<double>>& minus_out) {
    const int steps = grid_.steps();
    std::vector<std::vector<std::complex<double>>> forcing;
    std::vector<std::vector<double>> forcing_diff(static_cast<std::size_t>(steps), std::vector<double>(grid_.size()));
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    for (int j = 0; j < steps; ++j) {
        const auto& u = minus[static_cast<std::size_t>(j)];
        const auto& w = noise[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < real.size(); ++i) real[i] = sigma(u[i]) * w[i];
        fft_.forward();
        forcing.emplace_back(spec.begin(), spec.end());
        forcing_difference(sigma, u, diff[static_cast<std::size_t>(j)], w, j == step, cell, eps,
                           forcing_diff[static_cast<std::size_t>(j)]);
    }
    minus_out.assign(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 1.0));
    std::vector<std::vector<double>> diff_out(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 0.0));
    for (int m = 1; m <= steps; ++m) {
        convolve_history(forcing, m, minus_out[static_cast<std::size_t>(m)]);
        scatter_history(forcing_diff, m, diff_out[static_cast<std::size_t>(m)]);
    }
    return diff_out;
}

ConvolutionSolver::Difference ConvolutionSolver::difference(const std::vector<std::vector<double>>& noise, int step,
                                                            std::size_t cell, double eps, const SigmaSpec& sigma,
                                                            int depth) {
    const int steps = grid_.steps();
    if (static_cast<int>(noise.size()) < steps) throw std::invalid_argument("ConvolutionSolver: noise too short");
    if (step < 0 || step >= steps || cell >= grid_.size())
        throw std::invalid_argument("ConvolutionSolver: perturbed increment outside the space-time grid");
    auto noise_minus = noise;
    noise_minus[static_cast<std::size_t>(step)][cell] -= eps;

    if (depth >= 0) {
        std::vector<std::vector<double>> minus(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 1.0));
        std::vector<std::vector<double>> diff(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 0.0));
        for (int k = 0; k < depth; ++k) {
            std::vector<std::vector<double>> next_minus;
            diff = pair_map(minus, diff, noise_minus, step, cell, eps, sigma, next_minus);
            minus = std::move(next_minus);
        }
        return {minus.back(), diff.back()};
    }

    std::vector<std::vector<double>> minus(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 1.0));
    std::vector<std::vector<double>> diff(static_cast<std::size_t>(steps + 1), std::vector<double>(grid_.size(), 0.0));
    std::vector<std::vector<std::complex<double>>> forcing;
    std::vector<std::vector<double>> forcing_diff(static_cast<std::size_t>(steps), std::vector<double>(grid_.size()));
    auto real = fft_.real();
    auto spec = fft_.spectrum();
    for (int m = 1; m <= steps; ++m) {
        const auto j = static_cast<std::size_t>(m - 1);
        for (std::size_t i = 0; i < real.size(); ++i) real[i] = sigma(minus[j][i]) * noise_minus[j][i];
        fft_.forward();
        forcing.emplace_back(spec.begin(), spec.end());
        forcing_difference(sigma, minus[j], diff[j], noise_minus[j], m - 1 == step, cell, eps, forcing_diff[j]);
        convolve_history(forcing, m, minus[static_cast<std::size_t>(m)]);
        scatter_history(forcing_diff, m, diff[static_cast<std::size_t>(m)]);
        check_finite(diff[static_cast<std::size_t>(m)], m, "difference field");
    }
    return {minus.back(), diff.back()};
}

std::vector<std::vector<double>> record_noise(const GridSpec& grid, const NoiseFn& fn) {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(grid.steps()), std::vector<double>(grid.size()));
    for (int k = 0; k < grid.steps(); ++k) fn(k, out[static_cast<std::size_t>(k)]);
    return out;
}

PicardLadder picard_iterate(ConvolutionSolver& solver, const std::vector<std::vector<double>>& noise,
                            const SigmaSpec& sigma, int depth) {
    if (depth < 0) throw std::invalid_argument("picard_iterate: depth must be >= 0");
    const GridSpec& grid = solver.grid();
    PicardLadder ladder;
    ladder.mollifier_index = solver.mollifier_index();
    ladder.iterates.reserve(static_cast<std::size_t>(depth + 1));
    ladder.iterates.emplace_back(static_cast<std::size_t>(grid.steps() + 1), std::vector<double>(grid.size(), 1.0));
    for (int k = 0; k < depth; ++k) ladder.iterates.push_back(solver.picard_map(ladder.iterates.back(), noise, sigma));
    return ladder;
}

PicardLadder picard_iterate(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma, int n,
                            int depth, std::uint64_t seed, std::uint64_t replica, double cost_limit) {
    grid.validate();
    if (n < 1) throw std::invalid_argument("picard_iterate: mollifier index must be >= 1");
    const double steps = grid.steps();
    const double cost = steps * steps * static_cast<double>(grid.size()) * std::max(depth, 1);
    if (cost > cost_limit) {
        std::ostringstream os;
        os << "picard_iterate: cost guard, N_t^2 N^d k = " << cost << " exceeds " << cost_limit;
        throw std::invalid_argument(os.str());
    }
    const auto spectrum = periodize_spectrum(cov, grid);
    NoiseSampler sampler(spectrum);
    const double dt = grid.time_step();
    const auto noise =
        record_noise(grid, [&](int k, std::span<double> out) { sampler.sample(dt, seed, replica, k, out); });
    ConvolutionSolver solver(grid, n);
    return picard_iterate(solver, noise, sigma, depth);
}

PicardConvergence picard_convergence(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma, int n,
                                     int depth, std::uint64_t seed, int replicas, unsigned threads,
                                     double cost_limit) {
    grid.validate();
    if (n < 1) throw std::invalid_argument("picard_convergence: mollifier index must be >= 1");
    if (depth < 2) throw std::invalid_argument("picard_convergence: depth must be >= 2 to form a ratio");
    if (replicas < 1) throw std::invalid_argument("picard_convergence: need at least one replica");
    const double steps = grid.steps();
    const double cost = steps * steps * static_cast<double>(grid.size()) * depth * replicas;
    if (cost > cost_limit) {
        std::ostringstream os;
        os << "picard_convergence: cost guard, N_t^2 N^d k M = " << cost << " exceeds " << cost_limit;
        throw std::invalid_argument(os.str());
    }
    const auto spectrum = periodize_spectrum(cov, grid);
    const double dt = grid.time_step();
    const unsigned workers = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(replicas));
    std::vector<std::unique_ptr<ConvolutionSolver>> solvers(workers);
    std::vector<std::unique_ptr<NoiseSampler>> samplers(workers);
    std::vector<std::vector<double>> sq(static_cast<std::size_t>(replicas), std::vector<double>(depth, 0.0));
    parallel_for(static_cast<std::size_t>(replicas), workers, [&](std::size_t r, unsigned w) {
        if (!solvers[w]) {
            solvers[w] = std::make_unique<ConvolutionSolver>(grid, n);
            samplers[w] = std::make_unique<NoiseSampler>(spectrum);
        }
        const auto noise = record_noise(
            grid, [&](int k, std::span<double> out) { samplers[w]->sample(dt, seed, r, k, out); });
        const auto ladder = picard_iterate(*solvers[w], noise, sigma, depth);
        for (int k = 0; k < depth; ++k) {
            const auto& a = ladder.iterates[static_cast<std::size_t>(k)].back();
            const auto& b = ladder.iterates[static_cast<std::size_t>(k + 1)].back();
            double s2 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) s2 += (b[i] - a[i]) * (b[i] - a[i]);
            sq[r][static_cast<std::size_t>(k)] = s2 / static_cast<double>(a.size());
        }
    });
    PicardConvergence out;
    out.mollifier_index = n;
    for (int k = 0; k < depth; ++k) {
        double s = 0.0;
        for (const auto& row : sq) s += row[static_cast<std::size_t>(k)];
        out.l2_difference.push_back(std::sqrt(s / replicas));
    }
    out.geometric = true;
    for (int k = 0; k + 1 < depth; ++k) {
        const double a = out.l2_difference[static_cast<std::size_t>(k)];
        const double b = out.l2_difference[static_cast<std::size_t>(k + 1)];
        if (a == 0.0) {
            // a vanished difference must stay vanished
            out.ratio.push_back(0.0);
            out.geometric = out.geometric && b == 0.0;
            continue;
        }
        out.ratio.push_back(b / a);
        out.max_ratio = std::max(out.max_ratio, b / a);
        out.geometric = out.geometric && b / a < 1.0;
    }
    return out;
}

NoiseFn coarsened_noise(const PeriodizedSpectrum& fine, std::uint64_t seed, std::uint64_t replica, int factor) {
    if (factor < 1) throw std::invalid_argument("coarsened_noise: factor must be >= 1");
    if (fine.grid.cells % factor != 0) throw std::invalid_argument("coarsened_noise: cells not divisible by factor");
    auto sampler = std::make_shared<NoiseSampler>(fine);
    auto buffer = std::make_shared<std::vector<double>>(fine.grid.size());
    GridSpec coarse = fine.grid;
    coarse.cells = fine.grid.cells / factor;
    const double dt = fine.grid.time_step();
    return [sampler, buffer, coarse, fine_grid = fine.grid, dt, seed, replica, factor](int k, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (int sub = 0; sub < factor; ++sub) {
            sampler->sample(dt, seed, replica, k * factor + sub, *buffer);
            for (std::size_t c = 0; c < out.size(); ++c) {
                auto idx = coarse.unflatten(c);
                for (int d = 0; d < coarse.dim; ++d) idx[d] *= factor;
                out[c] += (*buffer)[fine_grid.wrap_flat(idx)];
            }
        }
    };
}

double stepper_additive_variance(const PeriodizedSpectrum& spectrum) {
    const GridSpec& grid = spectrum.grid;
    const double dt = grid.time_step();
    const int steps = grid.steps();
    const auto lambda = half_spectrum_wavenumbers(grid);
    double total = 0.0;
    for (std::size_t m = 0; m < lambda.size(); ++m) {
        const double a = spectrum.weight(m);
        if (a == 0.0) continue;
        double sum = 0.0;
        for (int i = 1; i <= steps; ++i) {
            const double tau = i * dt;
            const double s = lambda[m] == 0.0 ? tau : std::sin(tau * lambda[m]) / lambda[m];
            sum += s * s;
        }
        total += hermitian_multiplicity(grid, m) * a * dt * sum;
    }
    return total;
}

}  // namespace swe
