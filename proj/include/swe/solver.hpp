#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "swe/fft.hpp"
#include "swe/grid.hpp"
#include "swe/kernels.hpp"
#include "swe/noise.hpp"

namespace swe {

enum class SigmaKind { Constant, Affine, Linear, Sine };

/// Lipschitz nonlinearity sigma. `Constant` carries its value (1 for the
/// additive case, 0 for the degenerate free wave).
struct SigmaSpec {
    SigmaKind kind = SigmaKind::Constant;
    double value = 1.0;

    static SigmaSpec constant(double value = 1.0) { return {SigmaKind::Constant, value}; }
    static SigmaSpec affine() { return {SigmaKind::Affine, 0.0}; }
    static SigmaSpec linear() { return {SigmaKind::Linear, 0.0}; }
    static SigmaSpec sine() { return {SigmaKind::Sine, 0.0}; }
    /// Accepts constant, zero, affine, linear, sine.
    static SigmaSpec parse(const std::string& name);

    double operator()(double u) const {
        switch (kind) {
            case SigmaKind::Constant: return value;
            case SigmaKind::Affine: return u - 1.0;
            case SigmaKind::Linear: return u;
            case SigmaKind::Sine: return std::sin(u);
        }
        return 0.0;
    }
    /// sigma(u + h) - sigma(u) without cancellation for small h.
    double difference(double u, double h) const {
        switch (kind) {
            case SigmaKind::Constant: return 0.0;
            case SigmaKind::Affine:
            case SigmaKind::Linear: return h;
            case SigmaKind::Sine: return 2.0 * std::cos(u + 0.5 * h) * std::sin(0.5 * h);
        }
        return 0.0;
    }
    double derivative(double u) const;
    double lipschitz() const;
    std::string name() const;

    bool operator==(const SigmaSpec&) const = default;
};

struct SolutionState {
    GridSpec grid;
    std::vector<double> u;  ///< displacement
    std::vector<double> v;  ///< velocity
    int step = 0;
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;

    double time() const { return step * grid.time_step(); }
};

/// u = 1, v = 0 on the grid.
SolutionState initial_state(const GridSpec& grid);

/// Supplies Delta W_k for step k into a grid-sized buffer.
using NoiseFn = std::function<void(int step, std::span<double> out)>;

/// Thrown when a replica produces a non-finite value.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Stochastic trigonometric integrator. The state is carried as the
/// deviation w = u - 1 in Fourier space; per step
///   w' = cos(h L) w + L^-1 sin(h L) (v + F),  v' = -L sin(h L) w + cos(h L) (v + F),
/// with F = sigma(u) Delta W evaluated at the left point and L = |xi|.
/// Owns FFT buffers; one instance per worker.
class SpectralStepper {
public:
    explicit SpectralStepper(const GridSpec& grid);

    const GridSpec& grid() const { return grid_; }

    /// One step on a real-space state (converts to and from Fourier space).
    void step(SolutionState& state, std::span<const double> noise, const SigmaSpec& sigma);

    /// Runs `steps` steps from `start` drawing the noise from `noise`.
    SolutionState run(const SolutionState& start, const NoiseFn& noise, const SigmaSpec& sigma, int steps);

private:
    void load(const SolutionState& state);
    void advance(std::span<const double> noise, const SigmaSpec& sigma);
    void store(SolutionState& state);

    GridSpec grid_;
    std::vector<double> cos_, sin_over_, lam_sin_;
    std::vector<std::complex<double>> w_hat_, v_hat_;
    std::vector<double> w_real_;
    RealFft fft_;
};

/// Spectral stepper plus noise sampler for one covariance; one per worker.
class Solver {
public:
    explicit Solver(const PeriodizedSpectrum& spectrum);

    /// Field at the horizon for noise stream (seed, replica).
    SolutionState solve(const SigmaSpec& sigma, std::uint64_t seed, std::uint64_t replica = 0);
    NoiseFn noise(std::uint64_t seed, std::uint64_t replica);

    SpectralStepper& stepper() { return stepper_; }
    NoiseSampler& sampler() { return sampler_; }

private:
    SpectralStepper stepper_;
    NoiseSampler sampler_;
};

SolutionState step(const SolutionState& state, const NoiseSlice& noise, const SigmaSpec& sigma);

/// Field at T for replica 0 of `seed`. Validates Dalang's condition and the grid.
SolutionState solve(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma, std::uint64_t seed);

/// Direct space-time sum of the mild equation in d = 1 with cell-averaged
/// kernel weights (1/2)|cell cap (-tau, tau)|, fed by the same noise stream
/// as `solve`. Box sums use prefix sums, so a step costs O(k N).
SolutionState solve_oracle_d1(const GridSpec& grid, const NoiseFn& noise, const SigmaSpec& sigma);
SolutionState solve_oracle_d1(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma,
                              std::uint64_t seed);

/// Space-time convolution scheme
///   u(t_m) = 1 + sum_{j<m} K(t_m - t_j) * [sigma(u(t_j)) Delta W_j],
/// with K the grid kernel from discretize_kernel (or its mollification).
/// Kernel weights sit inside the closed light cone, so the dependence of
/// u(t_m, x) on Delta W_j(y) vanishes exactly (up to FFT rounding) for
/// |x - y| > t_m - t_j. Used for derivative probes and Picard iterates.
class ConvolutionSolver {
public:
    /// n = 0 uses G itself, n >= 1 the mollified G_n.
    ConvolutionSolver(const GridSpec& grid, int mollifier_index = 0);

    const GridSpec& grid() const { return grid_; }
    int mollifier_index() const { return index_; }

    /// Fields u(t_0..t_N) of the self-consistent scheme.
    std::vector<std::vector<double>> run(const std::vector<std::vector<double>>& noise, const SigmaSpec& sigma);

    /// One Picard map: u_next(t_m) = 1 + sum_{j<m} K * [sigma(prev(t_j)) Delta W_j].
    std::vector<std::vector<double>> picard_map(const std::vector<std::vector<double>>& previous,
                                                const std::vector<std::vector<double>>& noise,
                                                const SigmaSpec& sigma);

    /// Result of a plus/minus pair of runs that differ only in the
    /// increment Delta W_step(cell), shifted by +eps and -eps.
    struct Difference {
        std::vector<double> minus;       ///< u(T) of the minus run
        std::vector<double> difference;  ///< u_plus(T) - u_minus(T)
    };

    /// Propagates the minus run together with the difference field. The
    /// difference is advanced by sparse direct convolution and stable
    /// sigma differences, so it keeps relative precision and is exactly
    /// zero wherever the kernels cannot reach. depth < 0 selects the
    /// self-consistent scheme, depth >= 0 the Picard iterate of that depth.
    Difference difference(const std::vector<std::vector<double>>& noise, int step, std::size_t cell, double eps,
                          const SigmaSpec& sigma, int depth = -1);

    /// Kernel used for lag i (time i * dt).
    const KernelGrid& kernel(int lag) const { return kernels_.at(static_cast<std::size_t>(lag)); }

private:
    struct SparseKernel {
        std::vector<std::array<int, 3>> offsets;
        std::vector<double> masses;
    };

    void convolve_history(const std::vector<std::vector<std::complex<double>>>& forcing, int m, std::span<double> out);
    void scatter_history(const std::vector<std::vector<double>>& forcing, int m, std::span<double> out) const;
    std::vector<std::vector<double>> pair_map(const std::vector<std::vector<double>>& minus,
                                              const std::vector<std::vector<double>>& diff,
                                              const std::vector<std::vector<double>>& noise, int step,
                                              std::size_t cell, double eps, const SigmaSpec& sigma,
                                              std::vector<std::vector<double>>& minus_out);

    GridSpec grid_;
    int index_;
    std::vector<KernelGrid> kernels_;
    std::vector<SparseKernel> sparse_;
    std::vector<std::vector<std::complex<double>>> kernel_hat_;
    RealFft fft_;
};

/// Noise for all steps 0..N_t-1 drawn from `fn`.
std::vector<std::vector<double>> record_noise(const GridSpec& grid, const NoiseFn& fn);

struct PicardLadder {
    int mollifier_index = 1;
    /// iterates[k][m] is the field u_{n,k}(t_m).
    std::vector<std::vector<std::vector<double>>> iterates;
};

/// Default ceiling on N_t^2 * N^d * depth for the Picard ladder.
inline constexpr double kPicardCostLimit = 2.0e9;

PicardLadder picard_iterate(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma, int n,
                            int depth, std::uint64_t seed, std::uint64_t replica = 0,
                            double cost_limit = kPicardCostLimit);
PicardLadder picard_iterate(ConvolutionSolver& solver, const std::vector<std::vector<double>>& noise,
                            const SigmaSpec& sigma, int depth);

/// Successive Picard differences at fixed noise:
/// l2_difference[k] = sqrt(E mean_x |u_{n,k+1}(T, x) - u_{n,k}(T, x)|^2)
/// over `replicas` noise paths, k = 0..depth-1.
struct PicardConvergence {
    int mollifier_index = 1;
    std::vector<double> l2_difference;
    std::vector<double> ratio;  ///< l2_difference[k+1] / l2_difference[k]
    double max_ratio = 0.0;
    /// Every ratio below 1, i.e. the differences shrink at least geometrically
    /// with rate max_ratio. A ladder whose differences vanish from some k on
    /// (sigma constant) also counts.
    bool geometric = false;
};

PicardConvergence picard_convergence(const GridSpec& grid, const CovarianceSpec& cov, const SigmaSpec& sigma, int n,
                                     int depth, std::uint64_t seed, int replicas = 1, unsigned threads = 0,
                                     double cost_limit = kPicardCostLimit);

/// Noise on a coarse grid obtained from a fine stream by summing `factor`
/// consecutive fine increments and keeping every `factor`-th cell. The fine
/// grid must have factor times as many cells and steps as the coarse one.
NoiseFn coarsened_noise(const PeriodizedSpectrum& fine, std::uint64_t seed, std::uint64_t replica, int factor);

/// Exact variance of u(T, x) - 1 produced by the spectral stepper with
/// constant sigma = 1: sum_m a_m dt sum_i (sin(i dt L_m) / L_m)^2.
double stepper_additive_variance(const PeriodizedSpectrum& spectrum);

}  // namespace swe
