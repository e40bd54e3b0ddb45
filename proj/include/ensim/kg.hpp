#pragma once

#include <cmath>
#include <functional>

#include "core.hpp"
#include "deriv.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "tensor_ops.hpp"

namespace ensim {

// Klein-Gordon solver in an external four-potential, minimal coupling
// D_mu = hbar d_mu - i q A_mu. Explicit leapfrog on the second-order-in-time
// form; the A^0 cross term is handled with a centered time difference, which
// keeps the update one complex division per point.
//
// Sign conventions: a mode phi ~ exp(+i E t / hbar) carries positive charge
// density for q > 0 (and negative frequency modes carry the opposite sign).

struct WaveParams {
    Real hbar = 1.0;
    Real q = 1.0;
    Real m = 1.0;

    void validate() const {
        ENSIM_CONFIG_REQUIRE(hbar > 0.0, "hbar must be positive");
        ENSIM_CONFIG_REQUIRE(m >= 0.0, "mass must be nonnegative");
    }
};

struct KGState {
    Grid grid;
    WaveParams params;
    // external potential: a static sampled part plus a spatially uniform
    // electric field realized in the gauge A_vec(t) = -E t (periodic-safe)
    FourPotential A_static;
    std::array<Real, 3> uniform_E{0.0, 0.0, 0.0};
    std::vector<Complex> phi_prev;  // t - dt
    std::vector<Complex> phi;       // t
    Real time = 0.0;

    bool has_static_potential() const { return !A_static.data.empty(); }
    Real A0(std::size_t p) const { return has_static_potential() ? A_static.at(0, p) : 0.0; }
    Real Aj(int j, std::size_t p, Real t) const {
        Real a = has_static_potential() ? A_static.at(j + 1, p) : 0.0;
        return a - uniform_E[j] * t;
    }
};

namespace kgdetail {

// spectral positive/negative frequency time derivative: phidot = +-i E_k/hbar phi
inline std::vector<Complex> frequency_derivative(const Grid& g, const std::vector<Complex>& phi,
                                                 const WaveParams& par, int freq_sign) {
    FftNd fft(g);
    std::vector<Complex> w = phi;
    fft.forward(w.data());
    std::array<std::size_t, 3> idx;
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.unflat(p, idx);
        Real k2 = 0.0;
        for (int a = 0; a < g.dim; ++a) k2 += sqr(fft_wavenumber(idx[a], g.shape[a], g.spacing[a]));
        Real E = std::sqrt(sqr(par.hbar) * k2 + sqr(par.m));
        w[p] *= Complex(0.0, Real(freq_sign) * E / par.hbar);
    }
    fft.backward(w.data());
    return w;
}

}  // namespace kgdetail

// d^2/dt^2 phi from the field equation, given phi and an explicit dphi/dt
inline std::vector<Complex> kg_accel(const KGState& s, const std::vector<Complex>& phi,
                                     const std::vector<Complex>& phidot, Real t) {
    const Grid& g = s.grid;
    const Real hbar = s.params.hbar, q = s.params.q, m = s.params.m;
    const std::size_t N = g.size();
    std::vector<Complex> acc(N);
    laplacian(g, phi.data(), acc.data());

    std::vector<std::vector<Complex>> dphi(g.dim, std::vector<Complex>(N));
    for (int a = 0; a < g.dim; ++a) spatial_deriv(g, phi.data(), dphi[a].data(), a, 2);

    std::vector<Real> divA(N, 0.0);
    if (s.has_static_potential()) {
        std::vector<Real> tmp(N);
        for (int a = 0; a < g.dim; ++a) {
            spatial_deriv(g, s.A_static.comp(a + 1), tmp.data(), a, 2);
            for (std::size_t p = 0; p < N; ++p) divA[p] += tmp[p];
        }
    }

    const Complex I(0.0, 1.0);
    for (std::size_t p = 0; p < N; ++p) {
        Real A0 = s.A0(p);
        Real AA = sqr(A0);
        Complex Agrad(0.0, 0.0);
        for (int a = 0; a < g.dim; ++a) {
            Real Aj = s.Aj(a, p, t);
            AA -= sqr(Aj);
            Agrad += Aj * dphi[a][p];
        }
        acc[p] += -sqr(m / hbar) * phi[p] + (I * q / hbar) * (divA[p] * phi[p] + 2.0 * (A0 * phidot[p] + Agrad)) +
                  sqr(q / hbar) * AA * phi[p];
    }
    return acc;
}

// Gaussian packet with mean momentum p0, or a plane wave when width <= 0.
// freq_sign = +1 gives the positive-charge branch.
inline KGState kg_packet(const Grid& g, const WaveParams& par, std::array<Real, 3> center,
                         Real width, std::array<Real, 3> p0, int freq_sign = +1) {
    par.validate();
    ENSIM_CONFIG_REQUIRE(g.time_step > 0.0, "time step must be positive");
    ENSIM_CONFIG_REQUIRE(g.time_step <= g.min_spacing() / std::sqrt(Real(g.dim)) + 1e-15,
                         "leapfrog CFL bound violated: dt <= h_min / sqrt(dim)");
    if (width > 0.0)
        ENSIM_CONFIG_REQUIRE(width >= 3.0 * g.min_spacing(),
                             "packet width floor is 3 grid spacings");

    KGState s;
    s.grid = g;
    s.params = par;
    const std::size_t N = g.size();
    s.phi.assign(N, Complex(0));

    // spatial phase: exp(i(E t - p.x)/hbar) => exp(-i p.x/hbar) at t = 0 on
    // the positive branch
    std::array<Real, 3> x;
    for (std::size_t p = 0; p < N; ++p) {
        g.point(p, x);
        Real r2 = 0.0, px = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            r2 += sqr(x[a] - center[a]);
            px += p0[a] * (x[a] - center[a]);
        }
        Real amp = width > 0.0 ? std::exp(-0.25 * r2 / sqr(width)) : 1.0;
        Real ph = -Real(freq_sign) * px / par.hbar;
        s.phi[p] = amp * Complex(std::cos(ph), std::sin(ph));
    }
    if (width > 0.0) {
        Real n2 = 0.0;
        for (auto& v : s.phi) n2 += std::norm(v);
        Real scale = 1.0 / std::sqrt(n2 * g.cell_volume());
        for (auto& v : s.phi) v *= scale;
    }

    // second time level from a Taylor step backwards, consistent to O(dt^2)
    auto phidot = kgdetail::frequency_derivative(g, s.phi, par, freq_sign);
    auto acc = kg_accel(s, s.phi, phidot, 0.0);
    const Real dt = g.time_step;
    s.phi_prev.resize(N);
    for (std::size_t p = 0; p < N; ++p)
        s.phi_prev[p] = s.phi[p] - dt * phidot[p] + 0.5 * dt * dt * acc[p];
    s.time = 0.0;
    return s;
}

struct KGStepReport {
    Real charge_initial = 0.0;
    Real charge_final = 0.0;
    Real drift_relative = 0.0;
};

// advance n steps; phi(t+dt) (h^2/dt^2 - i q hbar A0/dt) = rhs(phi, phi_prev)
inline void kg_step_once(KGState& s) {
    const Grid& g = s.grid;
    const Real dt = g.time_step;
    const Real hbar = s.params.hbar, q = s.params.q;
    const std::size_t N = g.size();

    // acc evaluated with the centered time derivative folded into the solve
    std::vector<Complex> zero(N, Complex(0));
    auto acc = kg_accel(s, s.phi, zero, s.time);  // A0 phidot term added below

    std::vector<Complex> next(N);
    const Complex I(0.0, 1.0);
    for (std::size_t p = 0; p < N; ++p) {
        Real A0 = s.A0(p);
        // h^2 (next - 2 phi + prev)/dt^2 = h^2 acc + 2 i q hbar A0 (next - prev)/(2 dt)
        Complex lhs_coef = Complex(1.0, 0.0) - I * (q * A0 * dt / hbar);
        Complex rhs = 2.0 * s.phi[p] - s.phi_prev[p] + dt * dt * acc[p] -
                      I * (q * A0 * dt / hbar) * s.phi_prev[p];
        next[p] = rhs / lhs_coef;
    }
    s.phi_prev.swap(s.phi);
    s.phi.swap(next);
    s.time += dt;
}

// frames of phi at consecutive times starting from the state's current level
struct KGFrames {
    const KGState* state = nullptr;
    std::vector<std::vector<Complex>> phi;
    Real t0 = 0.0;
    Real dt = 0.0;
};

inline KGFrames kg_collect(const KGState& s, std::size_t nlevels) {
    ENSIM_REQUIRE(nlevels >= 2, "need at least 2 levels");
    KGFrames fr;
    fr.state = &s;
    fr.t0 = s.time;
    fr.dt = s.grid.time_step;
    KGState w = s;
    fr.phi.push_back(w.phi);
    for (std::size_t k = 1; k < nlevels; ++k) {
        kg_step_once(w);
        fr.phi.push_back(w.phi);
    }
    return fr;
}

// D^mu phi at frame k (contravariant index)
inline std::vector<Complex> kg_Dmu(const KGFrames& fr, std::size_t k, int mu) {
    const KGState& s = *fr.state;
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    const Real hbar = s.params.hbar, q = s.params.q;
    const Real t = fr.t0 + Real(k) * fr.dt;
    const Complex I(0.0, 1.0);
    std::vector<Complex> out(N);
    if (mu == 0) {
        ENSIM_REQUIRE(k >= 1 && k + 1 < fr.phi.size(), "kg_Dmu: time stencil out of range");
        for (std::size_t p = 0; p < N; ++p)
            out[p] = hbar * (fr.phi[k + 1][p] - fr.phi[k - 1][p]) / (2.0 * fr.dt) -
                     I * q * s.A0(p) * fr.phi[k][p];
    } else {
        // D^j = hbar d^j - i q A^j = -hbar d_j - i q A^j
        int a = mu - 1;
        spatial_deriv(g, fr.phi[k].data(), out.data(), a, 2);
        for (std::size_t p = 0; p < N; ++p)
            out[p] = -hbar * out[p] - I * q * s.Aj(a, p, t) * fr.phi[k][p];
    }
    return out;
}

// j^mu = q Im phi* D^mu phi
inline CurrentDensity kg_current_at(const KGFrames& fr, std::size_t k) {
    const KGState& s = *fr.state;
    const Grid& g = s.grid;
    CurrentDensity j(g);
    for (int mu = 0; mu <= g.dim; ++mu) {
        auto D = kg_Dmu(fr, k, mu);
        Real* out = j.comp(mu);
        for (std::size_t p = 0; p < g.size(); ++p)
            out[p] = s.params.q * std::imag(std::conj(fr.phi[k][p]) * D[p]);
    }
    j.total_charge = integrate_comp(j, 0);
    return j;
}

inline CurrentDensity kg_current(const KGState& s) {
    // center the stencil on the current level using the stored previous one
    auto fwd = kg_collect(s, 2);
    KGFrames fr;
    fr.state = &s;
    fr.dt = fwd.dt;
    fr.t0 = s.time - fwd.dt;
    fr.phi = {s.phi_prev, fwd.phi[0], fwd.phi[1]};
    return kg_current_at(fr, 1);
}

// T^{nu mu} = g^{nu mu}/2 (m^2 |phi|^2 - (D phi)*.(D phi)) + Re D^nu phi (D^mu phi)*
inline EMTensor kg_emtensor_at(const KGFrames& fr, std::size_t k) {
    const KGState& s = *fr.state;
    const Grid& g = s.grid;
    const int D = g.dim + 1;
    const std::size_t N = g.size();
    std::vector<std::vector<Complex>> Dphi(D);
    for (int mu = 0; mu < D; ++mu) Dphi[mu] = kg_Dmu(fr, k, mu);

    EMTensor T(g);
    const Real m = s.params.m;
    for (std::size_t p = 0; p < N; ++p) {
        Real kin = 0.0;  // (D^lam phi)* D_lam phi
        for (int lam = 0; lam < D; ++lam) kin += metric_diag(lam) * std::norm(Dphi[lam][p]);
        Real trace_part = 0.5 * (sqr(m) * std::norm(fr.phi[k][p]) - kin);
        for (int nu = 0; nu < D; ++nu)
            for (int mu = nu; mu < D; ++mu) {
                Real gup = (nu == mu) ? metric_diag(nu) : 0.0;
                Real val = gup * trace_part + std::real(Dphi[nu][p] * std::conj(Dphi[mu][p]));
                T.set(nu, mu, p, val);
            }
    }
    return T;
}

inline EMTensor kg_emtensor(const KGState& s) {
    auto fwd = kg_collect(s, 2);
    KGFrames fr;
    fr.state = &s;
    fr.dt = fwd.dt;
    fr.t0 = s.time - fwd.dt;
    fr.phi = {s.phi_prev, fwd.phi[0], fwd.phi[1]};
    return kg_emtensor_at(fr, 1);
}

// external field tensor: static part from A_static plus the uniform E block
inline FaradayTensor kg_external_F(const KGState& s) {
    FaradayTensor F = s.has_static_potential()
                          ? faraday_from_potential(s.A_static)
                          : FaradayTensor(s.grid);
    for (int a = 0; a < s.grid.dim; ++a)
        if (s.uniform_E[a] != 0.0)
            for (std::size_t p = 0; p < s.grid.size(); ++p)
                F.set(0, a + 1, p, F.get(0, a + 1, p) + s.uniform_E[a]);
    return F;
}

// d_nu T^{nu mu} - F_ext^{mu}_{ nu} j^nu evaluated mid-window
struct TenetResidual {
    MultiField residual;
    Real max_norm = 0.0;
    Real l2 = 0.0;
    Real force_scale = 0.0;
    Real relative() const { return max_norm / std::max(force_scale, 1e-300); }
};

inline TenetResidual kg_tenet_residual(const KGState& s) {
    auto fr = kg_collect(s, 5);
    Series<EMTensor> T;
    T.dt = fr.dt;
    for (std::size_t k = 1; k <= 3; ++k) T.frames.push_back(kg_emtensor_at(fr, k));
    auto div = emtensor_divergence(T, 1, 2);
    auto j = kg_current_at(fr, 2);
    auto F = kg_external_F(s);
    auto force = lorentz_force_density(F, j);

    TenetResidual out;
    out.residual = MultiField(s.grid, div.ncomp);
    for (std::size_t q = 0; q < div.data.size(); ++q)
        out.residual.data[q] = div.data[q] - force.data[q];
    out.max_norm = max_abs(out.residual);
    out.l2 = l2_norm(out.residual);
    // scale against the largest term entering the balance
    out.force_scale = std::max(max_abs(div), max_abs(force));
    return out;
}

// total charge, centered at the state's current level
inline Real kg_charge(const KGState& s) { return kg_current(s).total_charge; }

inline KGStepReport kg_step(KGState& s, int n_steps) {
    ENSIM_CONFIG_REQUIRE(s.grid.time_step <= s.grid.min_spacing() / std::sqrt(Real(s.grid.dim)) + 1e-15,
                         "leapfrog CFL bound violated: dt <= h_min / sqrt(dim)");
    KGStepReport rep;
    rep.charge_initial = kg_charge(s);
    for (int i = 0; i < n_steps; ++i) kg_step_once(s);
    rep.charge_final = kg_charge(s);
    rep.drift_relative = std::abs(rep.charge_final - rep.charge_initial) /
                         std::max(std::abs(rep.charge_initial), 1e-300);
    return rep;
}

// gauge check: A -> A + d Lambda, phi -> exp(i q Lambda / hbar) phi for a
// static Lambda(x); returns max deviations of j and T against the original
struct GaugeReport {
    Real max_dev_current = 0.0;
    Real max_dev_emtensor = 0.0;
};

inline GaugeReport kg_gauge_check(const KGState& s, const std::vector<Real>& Lambda) {
    const Grid& g = s.grid;
    ENSIM_REQUIRE(Lambda.size() == g.size(), "Lambda size mismatch");
    KGState t = s;
    if (!t.has_static_potential()) t.A_static = FourPotential(g);
    std::vector<Real> dL(g.size());
    for (int a = 0; a < g.dim; ++a) {
        spatial_deriv(g, Lambda.data(), dL.data(), a, 2);
        // contravariant spatial component: A^j -> A^j + d^j Lambda = A^j - d_j Lambda
        Real* Aj = t.A_static.comp(a + 1);
        for (std::size_t p = 0; p < g.size(); ++p) Aj[p] -= dL[p];
    }
    const Complex I(0.0, 1.0);
    for (std::size_t p = 0; p < g.size(); ++p) {
        Complex ph = std::exp(I * (s.params.q * Lambda[p] / s.params.hbar));
        t.phi[p] *= ph;
        t.phi_prev[p] *= ph;
    }
    auto j0 = kg_current(s), j1 = kg_current(t);
    auto T0 = kg_emtensor(s), T1 = kg_emtensor(t);
    GaugeReport rep;
    for (std::size_t q = 0; q < j0.data.size(); ++q)
        rep.max_dev_current = std::max(rep.max_dev_current, std::abs(j0.data[q] - j1.data[q]));
    for (std::size_t q = 0; q < T0.data.size(); ++q)
        rep.max_dev_emtensor = std::max(rep.max_dev_emtensor, std::abs(T0.data[q] - T1.data[q]));
    return rep;
}

}  // namespace ensim
