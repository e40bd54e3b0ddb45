#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "core.hpp"
#include "grid.hpp"

namespace ensim {

// Thin RAII wrappers around FFTW. Plans are created with FFTW_ESTIMATE (fully
// deterministic) and FFTW_UNALIGNED so they can be executed on any buffer of
// the planned layout via the new-array interface.

class FftNd {
  public:
    FftNd() = default;
    FftNd(int rank, std::array<std::size_t, 3> shape) { init(rank, shape); }
    explicit FftNd(const Grid& g) { init(g.dim, g.shape); }

    FftNd(const FftNd&) = delete;
    FftNd& operator=(const FftNd&) = delete;
    FftNd(FftNd&& o) noexcept { swap(o); }
    FftNd& operator=(FftNd&& o) noexcept {
        swap(o);
        return *this;
    }
    ~FftNd() {
        if (fwd_) fftw_destroy_plan(fwd_);
        if (bwd_) fftw_destroy_plan(bwd_);
    }

    void init(int rank, std::array<std::size_t, 3> shape) {
        n_ = 1;
        dims_.clear();
        for (int a = 0; a < rank; ++a) {
            dims_.push_back(int(shape[a]));
            n_ *= shape[a];
        }
        std::vector<Complex> tmp(n_);
        auto* d = reinterpret_cast<fftw_complex*>(tmp.data());
        fwd_ = fftw_plan_dft(rank, dims_.data(), d, d, FFTW_FORWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd_ = fftw_plan_dft(rank, dims_.data(), d, d, FFTW_BACKWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
        ENSIM_REQUIRE(fwd_ && bwd_, "FFTW plan creation failed");
    }

    std::size_t size() const { return n_; }

    void forward(Complex* data) const {
        auto* d = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(fwd_, d, d);
    }

    // inverse transform including the 1/N normalization
    void backward(Complex* data) const {
        auto* d = reinterpret_cast<fftw_complex*>(data);
        fftw_execute_dft(bwd_, d, d);
        const Real s = 1.0 / Real(n_);
        for (std::size_t p = 0; p < n_; ++p) data[p] *= s;
    }

  private:
    void swap(FftNd& o) {
        std::swap(fwd_, o.fwd_);
        std::swap(bwd_, o.bwd_);
        std::swap(dims_, o.dims_);
        std::swap(n_, o.n_);
    }
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
    std::vector<int> dims_;
    std::size_t n_ = 0;
};

// DST-I along every axis (Dirichlet box modes), applied to a real array.
// FFTW's RODFT00 is unnormalized: a round trip multiplies by prod 2(n_a+1).
class DstNd {
  public:
    DstNd() = default;
    DstNd(int rank, std::array<std::size_t, 3> shape) { init(rank, shape); }

    DstNd(const DstNd&) = delete;
    DstNd& operator=(const DstNd&) = delete;
    DstNd(DstNd&& o) noexcept { swap(o); }
    DstNd& operator=(DstNd&& o) noexcept {
        swap(o);
        return *this;
    }
    ~DstNd() {
        if (plan_) fftw_destroy_plan(plan_);
    }

    void init(int rank, std::array<std::size_t, 3> shape) {
        n_ = 1;
        dims_.clear();
        norm_ = 1.0;
        for (int a = 0; a < rank; ++a) {
            dims_.push_back(int(shape[a]));
            n_ *= shape[a];
            norm_ *= 2.0 * (Real(shape[a]) + 1.0);
        }
        std::vector<Real> tmp(n_);
        std::vector<fftw_r2r_kind> kind(rank, FFTW_RODFT00);
        plan_ = fftw_plan_r2r(rank, dims_.data(), tmp.data(), tmp.data(), kind.data(),
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
        ENSIM_REQUIRE(plan_, "FFTW DST plan creation failed");
    }

    std::size_t size() const { return n_; }
    Real round_trip_norm() const { return norm_; }

    void execute(Real* data) const { fftw_execute_r2r(plan_, data, data); }

  private:
    void swap(DstNd& o) {
        std::swap(plan_, o.plan_);
        std::swap(dims_, o.dims_);
        std::swap(n_, o.n_);
        std::swap(norm_, o.norm_);
    }
    fftw_plan plan_ = nullptr;
    std::vector<int> dims_;
    std::size_t n_ = 0;
    Real norm_ = 1.0;
};

// wavenumber of the periodic FFT mode j along an axis with n points, step h
inline Real fft_wavenumber(std::size_t j, std::size_t n, Real h) {
    std::ptrdiff_t jj = std::ptrdiff_t(j);
    if (jj > std::ptrdiff_t(n) / 2) jj -= std::ptrdiff_t(n);
    return 2.0 * M_PI * Real(jj) / (Real(n) * h);
}

// wavenumber of the DST-I mode j (j = 0.. n-1) along an axis with n interior
// points and step h; box walls sit half outside the sampled points
inline Real dst_wavenumber(std::size_t j, std::size_t n, Real h) {
    return M_PI * Real(j + 1) / (Real(n + 1) * h);
}

// ---------------------------------------------------------------------------
// Free-space convolution with a radial kernel on a 3D grid (Hockney zero
// padding: the result is the open-boundary sum over grid charges, no periodic
// images). kernel(r) must be finite at r = 0 (pass the self-cell value).
inline std::vector<Real> freespace_convolve3(const Grid& g, const std::vector<Real>& src,
                                             const std::function<Real(Real)>& kernel) {
    ENSIM_REQUIRE(g.dim == 3, "freespace_convolve3 needs a 3D grid");
    const std::size_t nx = g.shape[0], ny = g.shape[1], nz = g.shape[2];
    const std::size_t px = 2 * nx, py = 2 * ny, pz = 2 * nz;
    const std::size_t NP = px * py * pz;
    FftNd fft(3, {px, py, pz});

    std::vector<Complex> S(NP, Complex(0));
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t k = 0; k < nz; ++k)
                S[(i * py + j) * pz + k] = src[g.flat(i, j, k)];

    std::vector<Complex> K(NP);
    for (std::size_t i = 0; i < px; ++i) {
        Real dx = Real(i <= px / 2 ? i : px - i) * g.spacing[0];
        for (std::size_t j = 0; j < py; ++j) {
            Real dy = Real(j <= py / 2 ? j : py - j) * g.spacing[1];
            for (std::size_t k = 0; k < pz; ++k) {
                Real dz = Real(k <= pz / 2 ? k : pz - k) * g.spacing[2];
                K[(i * py + j) * pz + k] = kernel(std::sqrt(dx * dx + dy * dy + dz * dz));
            }
        }
    }

    fft.forward(S.data());
    fft.forward(K.data());
    for (std::size_t p = 0; p < NP; ++p) S[p] *= K[p];
    fft.backward(S.data());

    std::vector<Real> out(g.size());
    const Real dV = g.cell_volume();
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t k = 0; k < nz; ++k)
                out[g.flat(i, j, k)] = S[(i * py + j) * pz + k].real() * dV;
    return out;
}

// self-cell value of the 1/(4 pi r) kernel: average over a sphere of equal
// volume to one grid cell
inline Real coulomb_self_cell(const Grid& g) {
    Real req = std::cbrt(3.0 * g.cell_volume() / (4.0 * M_PI));
    return 1.0 / (4.0 * M_PI) * 1.5 / req;
}

}  // namespace ensim
