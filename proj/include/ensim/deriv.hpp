#pragma once

#include "core.hpp"
#include "field.hpp"
#include "grid.hpp"

namespace ensim {

// Central finite differences, 2nd order by default, 4th order selectable.
// Periodic boundaries wrap; absorbing boundaries switch to one-sided stencils
// of matching order near the edges (2nd-order one-sided at the outermost
// points for the 4th-order operator).

namespace detail {

template <class T>
inline void axis_deriv(const T* f, T* out, std::size_t n, std::ptrdiff_t stride,
                       std::size_t nlines, std::ptrdiff_t line_stride,
                       std::size_t nrepeat, Real h, int order, Boundary bc) {
    ENSIM_REQUIRE(order == 2 || order == 4, "stencil order must be 2 or 4");
    if (n < 3 || (order == 4 && n < 5))
        throw StencilError("grid too small for the requested stencil");
    const Real c1 = 1.0 / (2.0 * h);
    const Real c4a = 8.0 / (12.0 * h), c4b = 1.0 / (12.0 * h);
    for (std::size_t L = 0; L < nlines; ++L) {
        for (std::size_t r = 0; r < nrepeat; ++r) {
            const T* base = f + std::ptrdiff_t(L) * line_stride + std::ptrdiff_t(r);
            T* obase = out + std::ptrdiff_t(L) * line_stride + std::ptrdiff_t(r);
            auto idx = [&](std::ptrdiff_t i) -> const T& { return base[i * stride]; };
            for (std::size_t i = 0; i < n; ++i) {
                std::ptrdiff_t ii = std::ptrdiff_t(i);
                T d;
                if (bc == Boundary::periodic) {
                    auto wrap = [&](std::ptrdiff_t k) {
                        std::ptrdiff_t m = (k % std::ptrdiff_t(n) + std::ptrdiff_t(n)) % std::ptrdiff_t(n);
                        return idx(m);
                    };
                    if (order == 2) {
                        d = (wrap(ii + 1) - wrap(ii - 1)) * c1;
                    } else {
                        d = (wrap(ii + 1) - wrap(ii - 1)) * c4a - (wrap(ii + 2) - wrap(ii - 2)) * c4b;
                    }
                } else {
                    if (order == 2) {
                        if (i == 0)
                            d = (idx(0) * Real(-3) + idx(1) * Real(4) - idx(2)) * c1;
                        else if (i == n - 1)
                            d = (idx(ii) * Real(3) - idx(ii - 1) * Real(4) + idx(ii - 2)) * c1;
                        else
                            d = (idx(ii + 1) - idx(ii - 1)) * c1;
                    } else {
                        if (i == 0)
                            d = (idx(0) * Real(-3) + idx(1) * Real(4) - idx(2)) * c1;
                        else if (i == n - 1)
                            d = (idx(ii) * Real(3) - idx(ii - 1) * Real(4) + idx(ii - 2)) * c1;
                        else if (i == 1 || i == n - 2)
                            d = (idx(ii + 1) - idx(ii - 1)) * c1;
                        else
                            d = (idx(ii + 1) - idx(ii - 1)) * c4a - (idx(ii + 2) - idx(ii - 2)) * c4b;
                    }
                }
                obase[ii * stride] = d;
            }
        }
    }
}

}  // namespace detail

// d/dx_axis of a row-major scalar array on `g` (axis = 0..dim-1)
template <class T>
inline void spatial_deriv(const Grid& g, const T* f, T* out, int axis, int order = 2) {
    ENSIM_REQUIRE(axis >= 0 && axis < g.dim, "axis out of range");
    std::size_t n = g.shape[axis];
    // stride along the axis; lines enumerate the slower axes, repeats the faster
    std::size_t fast = 1;
    for (int a = axis + 1; a < 3; ++a) fast *= g.shape[a];
    std::size_t slow = 1;
    for (int a = 0; a < axis; ++a) slow *= g.shape[a];
    detail::axis_deriv(f, out, n, std::ptrdiff_t(fast), slow,
                       std::ptrdiff_t(n * fast), fast, g.spacing[axis], order, g.boundary);
}

template <class T>
inline std::vector<T> spatial_deriv_v(const Grid& g, const std::vector<T>& f, int axis,
                                      int order = 2) {
    std::vector<T> out(f.size());
    spatial_deriv(g, f.data(), out.data(), axis, order);
    return out;
}

// centered time derivative of a series of flat arrays, evaluated at frame k
template <class T>
inline std::vector<T> time_deriv(const std::vector<std::vector<T>>& frames, std::size_t k,
                                 Real dt, int order = 2) {
    ENSIM_REQUIRE(order == 2 || order == 4, "stencil order must be 2 or 4");
    if (order == 2) {
        ENSIM_REQUIRE(k >= 1 && k + 1 < frames.size(), "time stencil out of range");
        std::vector<T> out(frames[k].size());
        const Real c = 1.0 / (2.0 * dt);
        for (std::size_t p = 0; p < out.size(); ++p)
            out[p] = (frames[k + 1][p] - frames[k - 1][p]) * c;
        return out;
    }
    ENSIM_REQUIRE(k >= 2 && k + 2 < frames.size(), "time stencil out of range");
    std::vector<T> out(frames[k].size());
    const Real ca = 8.0 / (12.0 * dt), cb = 1.0 / (12.0 * dt);
    for (std::size_t p = 0; p < out.size(); ++p)
        out[p] = (frames[k + 1][p] - frames[k - 1][p]) * ca -
                 (frames[k + 2][p] - frames[k - 2][p]) * cb;
    return out;
}

// Laplacian (sum of second derivatives over spatial axes), 2nd order
template <class T>
inline void laplacian(const Grid& g, const T* f, T* out) {
    const std::size_t N = g.size();
    for (std::size_t p = 0; p < N; ++p) out[p] = T(0);
    std::array<std::size_t, 3> stride{g.shape[1] * g.shape[2], g.shape[2], 1};
    for (int a = 0; a < g.dim; ++a) {
        const std::size_t n = g.shape[a];
        if (n < 3) throw StencilError("grid too small for the Laplacian stencil");
        const Real ih2 = 1.0 / (g.spacing[a] * g.spacing[a]);
        std::array<std::size_t, 3> idx;
        for (std::size_t p = 0; p < N; ++p) {
            g.unflat(p, idx);
            std::size_t i = idx[a];
            std::size_t ip, im;
            if (g.boundary == Boundary::periodic) {
                ip = (i + 1) % n;
                im = (i + n - 1) % n;
            } else {
                // absorbing: treat the field as zero outside the box
                ip = i + 1;
                im = i == 0 ? n : i - 1;  // n used as "outside" marker
            }
            T up = (ip < n) ? f[p + (ip - i) * stride[a]] : T(0);
            T dn = (im < n) ? f[p - (i - im) * stride[a]] : T(0);
            out[p] += (up - Real(2) * f[p] + dn) * ih2;
        }
    }
}

}  // namespace ensim
