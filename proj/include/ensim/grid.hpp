#pragma once

#include <array>
#include <cstddef>
#include <numeric>

#include "core.hpp"

namespace ensim {

enum class Boundary { periodic, absorbing };

// Uniform Cartesian lattice for 1, 2 or 3 spatial dimensions. Spatial
// coordinates are centered on the box: x_i = (index_i - (n_i-1)/2) * h_i,
// so the origin sits at the array center (possibly between points for even
// counts). Flat storage is row-major (last axis fastest).
struct Grid {
    int dim = 1;
    std::array<std::size_t, 3> shape{1, 1, 1};
    std::array<Real, 3> spacing{1.0, 1.0, 1.0};
    Real time_step = 0.0;
    Boundary boundary = Boundary::periodic;

    Grid() = default;
    Grid(int d, std::array<std::size_t, 3> n, std::array<Real, 3> h, Real dt,
         Boundary b = Boundary::periodic)
        : dim(d), shape(n), spacing(h), time_step(dt), boundary(b) {
        ENSIM_CONFIG_REQUIRE(dim >= 1 && dim <= 3, "grid dim must be 1, 2 or 3");
        for (int a = 0; a < dim; ++a) {
            ENSIM_CONFIG_REQUIRE(shape[a] > 0, "grid shape must be positive");
            ENSIM_CONFIG_REQUIRE(spacing[a] > 0, "grid spacing must be positive");
        }
        for (int a = dim; a < 3; ++a) { shape[a] = 1; spacing[a] = 1.0; }
    }

    static Grid line(std::size_t n, Real h, Real dt, Boundary b = Boundary::periodic) {
        return Grid(1, {n, 1, 1}, {h, 1.0, 1.0}, dt, b);
    }
    static Grid plane(std::size_t nx, std::size_t ny, Real h, Real dt,
                      Boundary b = Boundary::periodic) {
        return Grid(2, {nx, ny, 1}, {h, h, 1.0}, dt, b);
    }
    static Grid box(std::size_t n, Real h, Real dt, Boundary b = Boundary::periodic) {
        return Grid(3, {n, n, n}, {h, h, h}, dt, b);
    }

    std::size_t size() const { return shape[0] * shape[1] * shape[2]; }

    std::size_t flat(std::size_t i, std::size_t j = 0, std::size_t k = 0) const {
        return (i * shape[1] + j) * shape[2] + k;
    }

    void unflat(std::size_t p, std::array<std::size_t, 3>& idx) const {
        idx[2] = p % shape[2];
        p /= shape[2];
        idx[1] = p % shape[1];
        idx[0] = p / shape[1];
    }

    // coordinate of point `index_a` along axis a, origin at array center
    Real coord(int a, std::size_t index_a) const {
        return (Real(index_a) - 0.5 * Real(shape[a] - 1)) * spacing[a];
    }

    void point(std::size_t p, std::array<Real, 3>& x) const {
        std::array<std::size_t, 3> idx;
        unflat(p, idx);
        for (int a = 0; a < 3; ++a) x[a] = coord(a, idx[a]);
    }

    Real extent(int a) const { return Real(shape[a]) * spacing[a]; }

    Real cell_volume() const {
        Real v = 1.0;
        for (int a = 0; a < dim; ++a) v *= spacing[a];
        return v;
    }

    Real min_spacing() const {
        Real h = spacing[0];
        for (int a = 1; a < dim; ++a) h = std::min(h, spacing[a]);
        return h;
    }

    bool same_layout(const Grid& o) const {
        return dim == o.dim && shape == o.shape;
    }
};

}  // namespace ensim
