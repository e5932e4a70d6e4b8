#include "swe/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <new>
#include <stdexcept>
#include <utility>

namespace swe {
namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

RealFft::RealFft(int dim, int n) {
    if (dim < 1 || dim > 3 || n < 2) throw std::invalid_argument("RealFft: bad shape");
    int dims[3] = {n, n, n};
    real_size_ = 1;
    for (int k = 0; k < dim; ++k) real_size_ *= static_cast<std::size_t>(n);
    spec_size_ = real_size_ / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);

    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * real_size_));
    spec_ = reinterpret_cast<std::complex<double>*>(fftw_malloc(sizeof(fftw_complex) * spec_size_));
    if (real_ == nullptr || spec_ == nullptr) {
        release();
        throw std::bad_alloc();
    }
    std::lock_guard lock(planner_mutex());
    auto* c = reinterpret_cast<fftw_complex*>(spec_);
    forward_plan_ = fftw_plan_dft_r2c(dim, dims, real_, c, FFTW_ESTIMATE);
    backward_plan_ = fftw_plan_dft_c2r(dim, dims, c, real_, FFTW_ESTIMATE);
    if (forward_plan_ == nullptr || backward_plan_ == nullptr) {
        release();
        throw std::runtime_error("RealFft: FFTW planning failed");
    }
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : real_(std::exchange(other.real_, nullptr)),
      spec_(std::exchange(other.spec_, nullptr)),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      backward_plan_(std::exchange(other.backward_plan_, nullptr)),
      real_size_(other.real_size_),
      spec_size_(other.spec_size_) {}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
    if (this != &other) {
        release();
        real_ = std::exchange(other.real_, nullptr);
        spec_ = std::exchange(other.spec_, nullptr);
        forward_plan_ = std::exchange(other.forward_plan_, nullptr);
        backward_plan_ = std::exchange(other.backward_plan_, nullptr);
        real_size_ = other.real_size_;
        spec_size_ = other.spec_size_;
    }
    return *this;
}

void RealFft::forward() { fftw_execute(static_cast<fftw_plan>(forward_plan_)); }
void RealFft::backward() { fftw_execute(static_cast<fftw_plan>(backward_plan_)); }

void RealFft::release() noexcept {
    {
        std::lock_guard lock(planner_mutex());
        if (forward_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
        if (backward_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
    }
    forward_plan_ = backward_plan_ = nullptr;
    if (real_ != nullptr) fftw_free(real_);
    if (spec_ != nullptr) fftw_free(spec_);
    real_ = nullptr;
    spec_ = nullptr;
}

}  // namespace swe
