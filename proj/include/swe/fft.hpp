#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace swe {

/// Owning real-to-complex / complex-to-real FFTW plan pair on an n^dim grid.
///
/// Both directions are unnormalised; backward() overwrites the spectrum
/// buffer. Plan creation is serialised internally (the FFTW planner is not
/// thread-safe); execution is safe on distinct instances.
class RealFft {
public:
    RealFft(int dim, int n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    RealFft(RealFft&& other) noexcept;
    RealFft& operator=(RealFft&& other) noexcept;

    std::span<double> real() { return {real_, real_size_}; }
    std::span<std::complex<double>> spectrum() { return {spec_, spec_size_}; }

    void forward();
    void backward();

    std::size_t real_size() const { return real_size_; }
    std::size_t spectrum_size() const { return spec_size_; }

private:
    void release() noexcept;

    double* real_ = nullptr;
    std::complex<double>* spec_ = nullptr;
    void* forward_plan_ = nullptr;
    void* backward_plan_ = nullptr;
    std::size_t real_size_ = 0;
    std::size_t spec_size_ = 0;
};

}  // namespace swe
