#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "grid.hpp"

namespace ensim {

// ---------------------------------------------------------------------------
// metric helpers, signature (+,-,-,-); spacetime index mu = 0..dim

inline Real metric_diag(int mu) { return mu == 0 ? 1.0 : -1.0; }

// number of independent components of an antisymmetric / symmetric rank-2
// tensor in D spacetime dimensions
inline int antisym_count(int D) { return D * (D - 1) / 2; }
inline int sym_count(int D) { return D * (D + 1) / 2; }

inline int antisym_slot(int D, int mu, int nu) {
    // mu < nu required
    int s = 0;
    for (int a = 0; a < mu; ++a) s += D - 1 - a;
    return s + (nu - mu - 1);
}

inline int sym_slot(int D, int mu, int nu) {
    if (mu > nu) std::swap(mu, nu);
    int s = 0;
    for (int a = 0; a < mu; ++a) s += D - a;
    return s + (nu - mu);
}

// ---------------------------------------------------------------------------
// field containers; component-major flat storage (comp c, then row-major grid)

struct ScalarField {
    Grid grid;
    std::vector<Real> v;

    ScalarField() = default;
    explicit ScalarField(const Grid& g, Real fill = 0.0) : grid(g), v(g.size(), fill) {}
    Real& operator[](std::size_t p) { return v[p]; }
    Real operator[](std::size_t p) const { return v[p]; }
    std::size_t size() const { return v.size(); }
};

struct ComplexField {
    Grid grid;
    std::vector<Complex> v;

    ComplexField() = default;
    explicit ComplexField(const Grid& g, Complex fill = {}) : grid(g), v(g.size(), fill) {}
    Complex& operator[](std::size_t p) { return v[p]; }
    const Complex& operator[](std::size_t p) const { return v[p]; }
    std::size_t size() const { return v.size(); }
};

struct MultiField {
    Grid grid;
    int ncomp = 0;
    std::vector<Real> data;

    MultiField() = default;
    MultiField(const Grid& g, int nc) : grid(g), ncomp(nc), data(std::size_t(nc) * g.size(), 0.0) {}
    Real* comp(int c) { return data.data() + std::size_t(c) * grid.size(); }
    const Real* comp(int c) const { return data.data() + std::size_t(c) * grid.size(); }
    Real& at(int c, std::size_t p) { return data[std::size_t(c) * grid.size() + p]; }
    Real at(int c, std::size_t p) const { return data[std::size_t(c) * grid.size() + p]; }
};

// A^mu, mu = 0..dim (contravariant components)
struct FourPotential : MultiField {
    FourPotential() = default;
    explicit FourPotential(const Grid& g) : MultiField(g, g.dim + 1) {}
};

// j^mu plus bookkeeping; `conserved` is set by producers that have checked
// the discrete continuity residual
struct CurrentDensity : MultiField {
    Real total_charge = 0.0;
    bool conserved = false;
    Real continuity_residual = 0.0;

    CurrentDensity() = default;
    explicit CurrentDensity(const Grid& g) : MultiField(g, g.dim + 1) {}
};

// F_{mu nu}, antisymmetric; only mu < nu stored, F(nu,mu) = -F(mu,nu) by
// access convention so antisymmetry is exact at the storage level
struct FaradayTensor : MultiField {
    FaradayTensor() = default;
    explicit FaradayTensor(const Grid& g) : MultiField(g, antisym_count(g.dim + 1)) {}

    int D() const { return grid.dim + 1; }
    Real get(int mu, int nu, std::size_t p) const {
        if (mu == nu) return 0.0;
        if (mu < nu) return at(antisym_slot(D(), mu, nu), p);
        return -at(antisym_slot(D(), nu, mu), p);
    }
    void set(int mu, int nu, std::size_t p, Real val) {
        ENSIM_REQUIRE(mu < nu, "FaradayTensor::set expects mu < nu");
        at(antisym_slot(D(), mu, nu), p) = val;
    }
};

// X^{mu nu}, symmetric by storage (mu <= nu kept)
struct EMTensor : MultiField {
    EMTensor() = default;
    explicit EMTensor(const Grid& g) : MultiField(g, sym_count(g.dim + 1)) {}

    int D() const { return grid.dim + 1; }
    Real get(int mu, int nu, std::size_t p) const { return at(sym_slot(D(), mu, nu), p); }
    void set(int mu, int nu, std::size_t p, Real val) { at(sym_slot(D(), mu, nu), p) = val; }
    void add(int mu, int nu, std::size_t p, Real val) { at(sym_slot(D(), mu, nu), p) += val; }
};

// consecutive snapshots separated by dt (frame 0 earliest)
template <class T>
struct Series {
    std::vector<T> frames;
    Real dt = 0.0;

    std::size_t size() const { return frames.size(); }
    bool empty() const { return frames.empty(); }
    T& operator[](std::size_t k) { return frames[k]; }
    const T& operator[](std::size_t k) const { return frames[k]; }
};

// a grid plus whatever sampled fields a scenario carries around
struct FieldBundle {
    Grid grid;
    Series<FourPotential> A;
    Series<FaradayTensor> F;
    Series<CurrentDensity> j;
    Series<EMTensor> T;
};

// ---------------------------------------------------------------------------
// reductions

inline Real max_abs(const std::vector<Real>& v) {
    Real m = 0.0;
    for (Real x : v) m = std::max(m, std::abs(x));
    return m;
}

inline Real max_abs(const MultiField& f) { return max_abs(f.data); }

inline Real l2_norm(const MultiField& f) {
    Real s = 0.0;
    for (Real x : f.data) s += x * x;
    return std::sqrt(s / std::max<std::size_t>(1, f.data.size()));
}

inline Real integrate(const ScalarField& f) {
    Real s = 0.0;
    for (Real x : f.v) s += x;
    return s * f.grid.cell_volume();
}

inline Real integrate_comp(const MultiField& f, int c) {
    const Real* d = f.comp(c);
    Real s = 0.0;
    for (std::size_t p = 0; p < f.grid.size(); ++p) s += d[p];
    return s * f.grid.cell_volume();
}

}  // namespace ensim
