#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "deriv.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "kg.hpp"  // WaveParams, TenetResidual
#include "tensor_ops.hpp"

namespace ensim {

// Dirac solver, standard representation:
//   3+1D: beta = diag(1,1,-1,-1), alpha^j = [[0, s_j], [s_j, 0]]  (4 components)
//   1+1D: two-component reduction gamma^0 = s_z, gamma^1 = i s_y, alpha = s_x
// Minimal coupling D_mu = hbar d_mu + i q A_mu, so positive-energy spinors
// carry charge density q psi^dag psi and feel the Lorentz force of charge q;
// the Hamiltonian (from i gamma^mu D_mu psi = m psi) is the textbook
//   i hbar d_t psi = [alpha.(p - q A_vec) + beta m + q A^0] psi.
// Stepping is Strang split-operator: exact kinetic exponential in k space,
// pointwise potential phase in x space; every factor is unitary.

struct SpinorMatrix {
    int n = 0;
    std::array<Complex, 16> a{};

    Complex& at(int r, int c) { return a[std::size_t(r * 4 + c)]; }
    Complex at(int r, int c) const { return a[std::size_t(r * 4 + c)]; }

    static SpinorMatrix zero(int n) {
        SpinorMatrix m;
        m.n = n;
        return m;
    }
    static SpinorMatrix identity(int n) {
        SpinorMatrix m = zero(n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline SpinorMatrix pauli(int j) {
    SpinorMatrix m = SpinorMatrix::zero(2);
    const Complex I(0, 1);
    if (j == 0) {
        m.at(0, 1) = 1;
        m.at(1, 0) = 1;
    } else if (j == 1) {
        m.at(0, 1) = -I;
        m.at(1, 0) = I;
    } else {
        m.at(0, 0) = 1;
        m.at(1, 1) = -1;
    }
    return m;
}

// alpha^j and beta for the requested spinor dimension (2 or 4)
inline SpinorMatrix dirac_alpha(int ncomp, int j) {
    if (ncomp == 2) {
        ENSIM_REQUIRE(j == 0, "1+1D mode has a single alpha");
        return pauli(0);
    }
    SpinorMatrix s = pauli(j);
    SpinorMatrix m = SpinorMatrix::zero(4);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            m.at(r, 2 + c) = s.at(r, c);
            m.at(2 + r, c) = s.at(r, c);
        }
    return m;
}

inline SpinorMatrix dirac_beta(int ncomp) {
    if (ncomp == 2) return pauli(2);
    SpinorMatrix m = SpinorMatrix::zero(4);
    m.at(0, 0) = m.at(1, 1) = 1;
    m.at(2, 2) = m.at(3, 3) = -1;
    return m;
}

struct DiracState {
    Grid grid;
    WaveParams params;
    int ncomp = 4;                  // 2 in 1+1D mode
    std::vector<Complex> psi;       // component-major [c * N + p]
    FourPotential A_static;         // only A^0 may be nonzero (electrostatic)
    std::array<Real, 3> uniform_E{0.0, 0.0, 0.0};  // gauge A_vec(t) = -E t
    Real time = 0.0;

    std::size_t N() const { return grid.size(); }
    Complex& comp(int c, std::size_t p) { return psi[std::size_t(c) * N() + p]; }
    const Complex& comp(int c, std::size_t p) const { return psi[std::size_t(c) * N() + p]; }
    bool has_static_potential() const { return !A_static.data.empty(); }
    Real A0(std::size_t p) const { return has_static_potential() ? A_static.at(0, p) : 0.0; }

    void validate() const {
        params.validate();
        ENSIM_CONFIG_REQUIRE((grid.dim == 1 && ncomp == 2) || (grid.dim == 3 && ncomp == 4),
                             "dirac supports 1+1D (2 comp) and 3+1D (4 comp)");
        if (has_static_potential())
            for (int a = 1; a <= grid.dim; ++a)
                for (std::size_t p = 0; p < grid.size(); ++p)
                    ENSIM_CONFIG_REQUIRE(A_static.at(a, p) == 0.0,
                                         "stepper supports electrostatic static potentials only");
    }
};

inline Real dirac_norm(const DiracState& s) {
    Real n = 0.0;
    for (const auto& v : s.psi) n += std::norm(v);
    return n * s.grid.cell_volume();
}

namespace diracdetail {

// kinetic phase factor exp(-i (a.alpha + m beta) dt / hbar) applied in place
// to the spinor at one k point; closed form via M^2 = (a^2 + m^2) I
inline void apply_kinetic_phase(int ncomp, const std::array<Real, 3>& avec, Real m, Real theta,
                                Complex* spinor /* stride N */, std::size_t stride) {
    Real a2 = avec[0] * avec[0] + avec[1] * avec[1] + avec[2] * avec[2];
    Real E = std::sqrt(a2 + m * m);
    Real c = std::cos(E * theta);
    Real sE = E > 0 ? std::sin(E * theta) / E : theta;
    const Complex I(0, 1);

    Complex in[4], out[4];
    for (int r = 0; r < ncomp; ++r) in[r] = spinor[std::size_t(r) * stride];
    if (ncomp == 2) {
        // M = a_x s_x + m s_z
        out[0] = c * in[0] - I * sE * (m * in[0] + avec[0] * in[1]);
        out[1] = c * in[1] - I * sE * (avec[0] * in[0] - m * in[1]);
    } else {
        // M = sum_j a_j alpha^j + m beta; alpha swaps the 2-blocks with s_j
        const Complex az(avec[2], 0), am(avec[0], -avec[1]), ap(avec[0], avec[1]);
        // s.a acting on a 2-spinor (u0, u1): (az u0 + am u1, ap u0 - az u1)
        Complex su_low0 = az * in[2] + am * in[3];
        Complex su_low1 = ap * in[2] - az * in[3];
        Complex su_up0 = az * in[0] + am * in[1];
        Complex su_up1 = ap * in[0] - az * in[1];
        out[0] = c * in[0] - I * sE * (su_low0 + m * in[0]);
        out[1] = c * in[1] - I * sE * (su_low1 + m * in[1]);
        out[2] = c * in[2] - I * sE * (su_up0 - m * in[2]);
        out[3] = c * in[3] - I * sE * (su_up1 - m * in[3]);
    }
    for (int r = 0; r < ncomp; ++r) spinor[std::size_t(r) * stride] = out[r];
}

}  // namespace diracdetail

// Strang step: half potential phase, exact kinetic exponential, half phase.
// The kinetic momentum at time t in the uniform-E gauge is hbar k - q E t.
inline void dirac_step_once(DiracState& s, const FftNd& fft) {
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    const Real dt = g.time_step;
    const Real hbar = s.params.hbar, q = s.params.q, m = s.params.m;
    const Complex I(0, 1);

    auto half_potential = [&]() {
        if (!s.has_static_potential()) return;
        for (std::size_t p = 0; p < N; ++p) {
            Real V = q * s.A0(p);
            Complex ph = std::exp(-I * (V * 0.5 * dt / hbar));
            for (int c = 0; c < s.ncomp; ++c) s.comp(c, p) *= ph;
        }
    };

    half_potential();
    for (int c = 0; c < s.ncomp; ++c) fft.forward(s.psi.data() + std::size_t(c) * N);
    const Real tmid = s.time + 0.5 * dt;
    std::array<std::size_t, 3> idx;
    for (std::size_t p = 0; p < N; ++p) {
        g.unflat(p, idx);
        std::array<Real, 3> a{0, 0, 0};
        for (int d = 0; d < g.dim; ++d)
            a[d] = hbar * fft_wavenumber(idx[d], g.shape[d], g.spacing[d]) +
                   q * s.uniform_E[d] * tmid;  // p - q A_vec with A_vec = -E t
        diracdetail::apply_kinetic_phase(s.ncomp, a, m, dt / hbar, s.psi.data() + p, N);
    }
    for (int c = 0; c < s.ncomp; ++c) fft.backward(s.psi.data() + std::size_t(c) * N);
    half_potential();
    s.time += dt;
}

struct DiracStepReport {
    Real norm_initial = 0.0;
    Real norm_final = 0.0;
    Real drift_per_step = 0.0;
};

inline DiracStepReport dirac_step(DiracState& s, int n_steps) {
    s.validate();
    ENSIM_CONFIG_REQUIRE(s.grid.time_step > 0.0, "time step must be positive");
    FftNd fft(s.grid);
    DiracStepReport rep;
    rep.norm_initial = dirac_norm(s);
    for (int i = 0; i < n_steps; ++i) dirac_step_once(s, fft);
    rep.norm_final = dirac_norm(s);
    rep.drift_per_step = std::abs(rep.norm_final - rep.norm_initial) /
                         std::max(rep.norm_initial, 1e-300) / std::max(1, n_steps);
    return rep;
}

// split the state into +/- energy branches of the free discrete Hamiltonian
// via the spectral projector P+- = (1 +- H(k)/E(k))/2
inline void dirac_project(DiracState& s, int branch_sign, bool renormalize = true) {
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    FftNd fft(g);
    for (int c = 0; c < s.ncomp; ++c) fft.forward(s.psi.data() + std::size_t(c) * N);
    std::array<std::size_t, 3> idx;
    for (std::size_t p = 0; p < N; ++p) {
        g.unflat(p, idx);
        std::array<Real, 3> a{0, 0, 0};
        Real a2 = 0.0;
        for (int d = 0; d < g.dim; ++d) {
            a[d] = s.params.hbar * fft_wavenumber(idx[d], g.shape[d], g.spacing[d]);
            a2 += a[d] * a[d];
        }
        Real m = s.params.m;
        Real E = std::sqrt(a2 + m * m);
        // P psi = (psi + sign (M/E) psi)/2 with M = a.alpha + m beta
        Complex in[4], Mpsi[4];
        for (int c = 0; c < s.ncomp; ++c) in[c] = s.comp(c, p);
        if (s.ncomp == 2) {
            Mpsi[0] = m * in[0] + a[0] * in[1];
            Mpsi[1] = a[0] * in[0] - m * in[1];
        } else {
            const Complex az(a[2], 0), am(a[0], -a[1]), ap(a[0], a[1]);
            Mpsi[0] = az * in[2] + am * in[3] + m * in[0];
            Mpsi[1] = ap * in[2] - az * in[3] + m * in[1];
            Mpsi[2] = az * in[0] + am * in[1] - m * in[2];
            Mpsi[3] = ap * in[0] - az * in[1] - m * in[3];
        }
        for (int c = 0; c < s.ncomp; ++c)
            s.comp(c, p) = E > 0 ? 0.5 * (in[c] + Real(branch_sign) * Mpsi[c] / E)
                                 : 0.5 * in[c];
    }
    for (int c = 0; c < s.ncomp; ++c) fft.backward(s.psi.data() + std::size_t(c) * N);
    if (renormalize) {
        Real n = dirac_norm(s);
        if (n > 0) {
            Real sc = 1.0 / std::sqrt(n);
            for (auto& v : s.psi) v *= sc;
        }
    }
}

enum class EnergyBranch { mixed, positive, negative };

// Gaussian packet, mean momentum p0, chosen spinor direction, normalized.
inline DiracState dirac_packet(const Grid& g, const WaveParams& par, std::array<Real, 3> center,
                               Real width, std::array<Real, 3> p0,
                               const std::vector<Complex>& spinor,
                               EnergyBranch branch = EnergyBranch::positive) {
    DiracState s;
    s.grid = g;
    s.params = par;
    s.ncomp = g.dim == 1 ? 2 : 4;
    ENSIM_CONFIG_REQUIRE(spinor.size() == std::size_t(s.ncomp), "spinor size mismatch");
    ENSIM_CONFIG_REQUIRE(width >= 3.0 * g.min_spacing(), "packet width floor is 3 grid spacings");
    const std::size_t N = g.size();
    s.psi.assign(std::size_t(s.ncomp) * N, Complex(0));
    std::array<Real, 3> x;
    for (std::size_t p = 0; p < N; ++p) {
        g.point(p, x);
        Real r2 = 0.0, px = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            r2 += sqr(x[a] - center[a]);
            px += p0[a] * (x[a] - center[a]);
        }
        // positive-energy phase exp(i p.x / hbar)
        Complex f = std::exp(-0.25 * r2 / sqr(width)) *
                    std::exp(Complex(0, px / par.hbar));
        for (int c = 0; c < s.ncomp; ++c) s.comp(c, p) = f * spinor[std::size_t(c)];
    }
    if (branch == EnergyBranch::positive) dirac_project(s, +1, false);
    if (branch == EnergyBranch::negative) dirac_project(s, -1, false);
    Real n = dirac_norm(s);
    ENSIM_REQUIRE(n > 0, "projected packet vanished");
    Real sc = 1.0 / std::sqrt(n);
    for (auto& v : s.psi) v *= sc;
    return s;
}

// ---------------------------------------------------------------------------
// observables

// j^mu = q psibar gamma^mu psi (Gamma^0 = 1, Gamma^j = alpha^j; all local)
inline CurrentDensity dirac_current(const DiracState& s) {
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    CurrentDensity j(g);
    const Real q = s.params.q;
    for (std::size_t p = 0; p < N; ++p) {
        Real dens = 0.0;
        for (int c = 0; c < s.ncomp; ++c) dens += std::norm(s.comp(c, p));
        j.at(0, p) = q * dens;
    }
    for (int d = 0; d < g.dim; ++d) {
        SpinorMatrix al = dirac_alpha(s.ncomp, d);
        Real* out = j.comp(d + 1);
        for (std::size_t p = 0; p < N; ++p) {
            Complex v(0, 0);
            for (int r = 0; r < s.ncomp; ++r)
                for (int c = 0; c < s.ncomp; ++c)
                    if (al.at(r, c) != Complex(0, 0))
                        v += std::conj(s.comp(r, p)) * al.at(r, c) * s.comp(c, p);
            out[p] = q * v.real();
        }
    }
    j.total_charge = integrate_comp(j, 0);
    return j;
}

// frames of psi at consecutive times for centered time derivatives
struct DiracFrames {
    const DiracState* state = nullptr;
    std::vector<std::vector<Complex>> psi;
    Real t0 = 0.0;
    Real dt = 0.0;
};

inline DiracFrames dirac_collect(const DiracState& s, std::size_t nlevels) {
    DiracFrames fr;
    fr.state = &s;
    fr.t0 = s.time;
    fr.dt = s.grid.time_step;
    DiracState w = s;
    FftNd fft(s.grid);
    fr.psi.push_back(w.psi);
    for (std::size_t k = 1; k < nlevels; ++k) {
        dirac_step_once(w, fft);
        fr.psi.push_back(w.psi);
    }
    return fr;
}

// D^mu psi at frame k (contravariant), component-major like psi
inline std::vector<Complex> dirac_Dmu(const DiracFrames& fr, std::size_t k, int mu) {
    const DiracState& s = *fr.state;
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    const Real hbar = s.params.hbar, q = s.params.q;
    const Real t = fr.t0 + Real(k) * fr.dt;
    const Complex I(0, 1);
    std::vector<Complex> out(std::size_t(s.ncomp) * N);
    if (mu == 0) {
        ENSIM_REQUIRE(k >= 1 && k + 1 < fr.psi.size(), "dirac_Dmu: time stencil out of range");
        for (std::size_t q2 = 0; q2 < out.size(); ++q2)
            out[q2] = hbar * (fr.psi[k + 1][q2] - fr.psi[k - 1][q2]) / (2.0 * fr.dt);
        for (int c = 0; c < s.ncomp; ++c)
            for (std::size_t p = 0; p < N; ++p)
                out[std::size_t(c) * N + p] += I * q * s.A0(p) * fr.psi[k][std::size_t(c) * N + p];
    } else {
        // D^j = -hbar d_j + i q A^j
        int a = mu - 1;
        Real Aup = -s.uniform_E[a] * t;  // uniform part of A^j
        for (int c = 0; c < s.ncomp; ++c) {
            spatial_deriv(g, fr.psi[k].data() + std::size_t(c) * N,
                          out.data() + std::size_t(c) * N, a, 2);
            for (std::size_t p = 0; p < N; ++p) {
                auto& v = out[std::size_t(c) * N + p];
                v = -hbar * v + I * q * Aup * fr.psi[k][std::size_t(c) * N + p];
            }
        }
    }
    return out;
}

// T^{mu nu} = -1/2 (W_{mu nu} + W_{nu mu}) + g^{mu nu} (sum_l g_ll W_ll + m psibar psi)
// with W_{mu nu} = Im psibar gamma^mu D^nu psi
inline EMTensor dirac_emtensor_at(const DiracFrames& fr, std::size_t k) {
    const DiracState& s = *fr.state;
    const Grid& g = s.grid;
    const int D = g.dim + 1;
    const std::size_t N = g.size();
    const Real m = s.params.m;

    std::vector<std::vector<Complex>> Dpsi(D);
    for (int mu = 0; mu < D; ++mu) Dpsi[mu] = dirac_Dmu(fr, k, mu);

    // Gamma^mu = gamma^0 gamma^mu: identity and alphas
    std::vector<SpinorMatrix> Gam(D);
    Gam[0] = SpinorMatrix::identity(s.ncomp);
    for (int d = 0; d < g.dim; ++d) Gam[d + 1] = dirac_alpha(s.ncomp, d);
    SpinorMatrix beta = dirac_beta(s.ncomp);

    auto bilin = [&](const SpinorMatrix& M, const Complex* left, const Complex* right,
                     std::size_t p) {
        Complex v(0, 0);
        for (int r = 0; r < s.ncomp; ++r)
            for (int c = 0; c < s.ncomp; ++c)
                if (M.at(r, c) != Complex(0, 0))
                    v += std::conj(left[std::size_t(r) * N + p]) * M.at(r, c) *
                         right[std::size_t(c) * N + p];
        return v;
    };

    EMTensor T(g);
    for (std::size_t p = 0; p < N; ++p) {
        Real W[4][4] = {};
        for (int mu = 0; mu < D; ++mu)
            for (int nu = 0; nu < D; ++nu)
                W[mu][nu] = bilin(Gam[mu], fr.psi[k].data(), Dpsi[nu].data(), p).imag();
        Real trace = 0.0;
        for (int lam = 0; lam < D; ++lam) trace += metric_diag(lam) * W[lam][lam];
        Real mbar = m * bilin(beta, fr.psi[k].data(), fr.psi[k].data(), p).real();
        for (int mu = 0; mu < D; ++mu)
            for (int nu = mu; nu < D; ++nu) {
                Real gup = (mu == nu) ? metric_diag(mu) : 0.0;
                T.set(mu, nu, p, -0.5 * (W[mu][nu] + W[nu][mu]) + gup * (trace + mbar));
            }
    }
    return T;
}

inline EMTensor dirac_emtensor(const DiracState& s) {
    auto fr = dirac_collect(s, 3);
    return dirac_emtensor_at(fr, 1);
}

inline FaradayTensor dirac_external_F(const DiracState& s) {
    FaradayTensor F = s.has_static_potential() ? faraday_from_potential(s.A_static)
                                               : FaradayTensor(s.grid);
    for (int a = 0; a < s.grid.dim; ++a)
        if (s.uniform_E[a] != 0.0)
            for (std::size_t p = 0; p < s.grid.size(); ++p)
                F.set(0, a + 1, p, F.get(0, a + 1, p) + s.uniform_E[a]);
    return F;
}

inline TenetResidual dirac_tenet_residual(const DiracState& s) {
    auto fr = dirac_collect(s, 5);
    Series<EMTensor> T;
    T.dt = fr.dt;
    for (std::size_t k = 1; k <= 3; ++k) T.frames.push_back(dirac_emtensor_at(fr, k));
    auto div = emtensor_divergence(T, 1, 2);

    DiracState mid = s;
    {
        FftNd fft(s.grid);
        dirac_step_once(mid, fft);
        dirac_step_once(mid, fft);
    }
    auto j = dirac_current(mid);
    auto F = dirac_external_F(s);
    auto force = lorentz_force_density(F, j);

    TenetResidual out;
    out.residual = MultiField(s.grid, div.ncomp);
    for (std::size_t q = 0; q < div.data.size(); ++q)
        out.residual.data[q] = div.data[q] - force.data[q];
    out.max_norm = max_abs(out.residual);
    out.l2 = l2_norm(out.residual);
    out.force_scale = std::max(max_abs(div), max_abs(force));
    return out;
}

// ---------------------------------------------------------------------------
// energy identity: for electrostatic A^0 in Coulomb gauge, the integrals of
// T^{00} + Theta_int^{00} and of Re psi^dag H psi agree; pointwise they agree
// when A = 0 (the interaction pieces then differ by a divergence only)

struct EnergyIdentityReport {
    Real max_pointwise_dev = 0.0;
    Real integrated_dev = 0.0;       // | int (T00 + Theta_int00 - Re psi H psi) |
    Real energy_total = 0.0;         // int (T00 + Theta_int00)
    Real energy_hamiltonian = 0.0;   // int Re psi^dag H psi
};

// interaction energy density Theta_int^{00} = E_self . E_ext on the line or
// in the box; E_self from the instantaneous free-space Gauss law with source
// j^0, E_ext = -grad A^0
inline std::vector<Real> interaction_energy_density(const Grid& g,
                                                    const std::vector<Real>& charge_density,
                                                    const FourPotential& A_ext) {
    const std::size_t N = g.size();
    std::vector<Real> out(N, 0.0);
    if (A_ext.data.empty()) return out;
    if (g.dim == 1) {
        // E_self(x) = (1/2)(int_{left} rho - int_{right} rho)
        Real dV = g.cell_volume();
        std::vector<Real> prefix(N + 1, 0.0);
        for (std::size_t p = 0; p < N; ++p) prefix[p + 1] = prefix[p] + charge_density[p] * dV;
        Real total = prefix[N];
        std::vector<Real> Eself(N);
        for (std::size_t p = 0; p < N; ++p) {
            Real left = prefix[p] + 0.5 * charge_density[p] * dV;
            Eself[p] = 0.5 * (left - (total - left));
        }
        std::vector<Real> Eext(N);
        spatial_deriv(g, A_ext.comp(0), Eext.data(), 0, 2);
        for (std::size_t p = 0; p < N; ++p) out[p] = Eself[p] * (-Eext[p]);
        return out;
    }
    ENSIM_REQUIRE(g.dim == 3, "interaction energy density needs 1D or 3D");
    const Real self = coulomb_self_cell(g);
    auto kernel = [&](Real r) { return r < 1e-12 ? self : 1.0 / (4.0 * M_PI * r); };
    auto V = freespace_convolve3(g, charge_density, kernel);
    for (int a = 0; a < 3; ++a) {
        std::vector<Real> Eself(N), Eext(N);
        spatial_deriv(g, V.data(), Eself.data(), a, 2);
        spatial_deriv(g, A_ext.comp(0), Eext.data(), a, 2);
        for (std::size_t p = 0; p < N; ++p) out[p] += Eself[p] * Eext[p];  // (-dV)(-dA0)
    }
    return out;
}

inline EnergyIdentityReport energy_identity_check(const DiracState& s,
                                                  Real corrupt_interaction_sign = +1.0) {
    s.validate();
    for (int a = 0; a < 3; ++a)
        ENSIM_CONFIG_REQUIRE(s.uniform_E[a] == 0.0,
                             "energy identity requires a purely electrostatic potential");
    const Grid& g = s.grid;
    const std::size_t N = g.size();
    const Real hbar = s.params.hbar, q = s.params.q, m = s.params.m;

    auto fr = dirac_collect(s, 3);
    auto T = dirac_emtensor_at(fr, 1);

    // Re psi^dag H psi with H = -i Gamma^j (hbar d_j) + beta m + q A^0
    DiracState mid = s;
    {
        FftNd fft(g);
        dirac_step_once(mid, fft);
    }
    const Complex I(0, 1);
    std::vector<Real> hdens(N, 0.0);
    SpinorMatrix beta = dirac_beta(s.ncomp);
    for (int d = 0; d < g.dim; ++d) {
        SpinorMatrix al = dirac_alpha(s.ncomp, d);
        std::vector<Complex> dpsi(std::size_t(s.ncomp) * N);
        for (int c = 0; c < s.ncomp; ++c)
            spatial_deriv(g, mid.psi.data() + std::size_t(c) * N,
                          dpsi.data() + std::size_t(c) * N, d, 2);
        for (std::size_t p = 0; p < N; ++p) {
            Complex v(0, 0);
            for (int r = 0; r < s.ncomp; ++r)
                for (int c = 0; c < s.ncomp; ++c)
                    if (al.at(r, c) != Complex(0, 0))
                        v += std::conj(mid.comp(r, p)) * al.at(r, c) *
                             dpsi[std::size_t(c) * N + p];
            hdens[p] += std::real(-I * hbar * v);
        }
    }
    std::vector<Real> rho(N);
    for (std::size_t p = 0; p < N; ++p) {
        Complex bb(0, 0);
        for (int r = 0; r < s.ncomp; ++r) bb += std::conj(mid.comp(r, p)) * beta.at(r, r) * mid.comp(r, p);
        Real dens = 0.0;
        for (int c = 0; c < s.ncomp; ++c) dens += std::norm(mid.comp(c, p));
        rho[p] = q * dens;
        hdens[p] += m * bb.real() + q * s.A0(p) * dens;
    }

    std::vector<Real> theta_int(N, 0.0);
    if (s.has_static_potential()) theta_int = interaction_energy_density(g, rho, s.A_static);

    EnergyIdentityReport rep;
    Real sum_lhs = 0.0, sum_rhs = 0.0, maxdev = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
        Real lhs = T.get(0, 0, p) + corrupt_interaction_sign * theta_int[p];
        sum_lhs += lhs;
        sum_rhs += hdens[p];
        maxdev = std::max(maxdev, std::abs(lhs - hdens[p]));
    }
    rep.max_pointwise_dev = maxdev;
    rep.energy_total = sum_lhs * g.cell_volume();
    rep.energy_hamiltonian = sum_rhs * g.cell_volume();
    rep.integrated_dev = std::abs(rep.energy_total - rep.energy_hamiltonian);
    return rep;
}

// ---------------------------------------------------------------------------
// Zitterbewegung: spectrum of the space-integrated current

struct SpectrumPeak {
    Real frequency = 0.0;
    Real power = 0.0;
};

// dominant frequencies of <j^i>(t) over a sampling window
inline std::vector<SpectrumPeak> zitterbewegung_spectrum(DiracState s, Real window,
                                                         int axis = 0) {
    const Real m = s.params.m, hbar = s.params.hbar;
    if (m > 0) {
        Real min_window = 20.0 * (2.0 * M_PI * hbar / (2.0 * m));
        if (window < min_window)
            throw ConfigError("zitterbewegung window shorter than 20 oscillation periods");
    }
    FftNd fft(s.grid);
    const Real dt = s.grid.time_step;
    std::size_t steps = std::size_t(window / dt);
    std::vector<Real> series(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        auto j = dirac_current(s);
        series[i] = integrate_comp(j, axis + 1);
        dirac_step_once(s, fft);
    }
    // Hann window, remove mean
    Real mean = 0.0;
    for (Real v : series) mean += v;
    mean /= Real(steps);
    std::vector<Complex> w(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        Real hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * Real(i) / Real(steps - 1));
        w[i] = (series[i] - mean) * hann;
    }
    FftNd fft1(1, {steps, 1, 1});
    fft1.forward(w.data());

    std::vector<SpectrumPeak> peaks;
    std::size_t half = steps / 2;
    for (std::size_t i = 2; i + 1 < half; ++i) {
        Real p0 = std::norm(w[i - 1]), p1 = std::norm(w[i]), p2 = std::norm(w[i + 1]);
        if (p1 > p0 && p1 > p2) {
            // parabolic sub-bin interpolation on log power
            Real l0 = std::log(p0 + 1e-300), l1 = std::log(p1 + 1e-300),
                 l2 = std::log(p2 + 1e-300);
            Real denom = l0 - 2 * l1 + l2;
            Real delta = std::abs(denom) > 1e-12 ? 0.5 * (l0 - l2) / denom : 0.0;
            Real freq = 2.0 * M_PI * (Real(i) + delta) / (Real(steps) * dt);
            peaks.push_back({freq, p1});
        }
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const SpectrumPeak& a, const SpectrumPeak& b) { return a.power > b.power; });
    return peaks;
}

// ---------------------------------------------------------------------------
// Compton-length modulation guard

enum class ModulationFlag { ok, sub_compton };

struct ModulationDiagnostic {
    Real compton_length = 0.0;
    Real min_feature_scale = 0.0;
    ModulationFlag flag = ModulationFlag::ok;
};

namespace diracdetail {
// smallest resolved feature scale 1/k_cut, where the power above k_cut is 1%
inline Real feature_scale_of_power(const Grid& g, const std::vector<Real>& power_by_point) {
    // power_by_point holds |f_hat|^2 on the FFT lattice
    std::vector<std::pair<Real, Real>> by_k;  // (|k|, power)
    std::array<std::size_t, 3> idx;
    Real total = 0.0;
    for (std::size_t p = 0; p < power_by_point.size(); ++p) {
        g.unflat(p, idx);
        Real k2 = 0.0;
        for (int a = 0; a < g.dim; ++a) k2 += sqr(fft_wavenumber(idx[a], g.shape[a], g.spacing[a]));
        by_k.push_back({std::sqrt(k2), power_by_point[p]});
        total += power_by_point[p];
    }
    std::sort(by_k.begin(), by_k.end());
    Real tail = 0.0;
    for (std::size_t i = by_k.size(); i-- > 0;) {
        tail += by_k[i].second;
        if (tail >= 0.01 * total) {
            Real kcut = by_k[i].first;
            return kcut > 0 ? 1.0 / kcut : std::numeric_limits<Real>::infinity();
        }
    }
    return std::numeric_limits<Real>::infinity();
}
}  // namespace diracdetail

inline ModulationDiagnostic modulation_guard_field(const Grid& g, const WaveParams& par,
                                                   const std::vector<Real>& field) {
    FftNd fft(g);
    std::vector<Complex> w(field.begin(), field.end());
    fft.forward(w.data());
    std::vector<Real> pw(w.size());
    for (std::size_t p = 0; p < w.size(); ++p) pw[p] = std::norm(w[p]);
    ModulationDiagnostic d;
    d.compton_length = par.m > 0 ? par.hbar / par.m : 0.0;
    d.min_feature_scale = diracdetail::feature_scale_of_power(g, pw);
    d.flag = (par.m > 0 && d.min_feature_scale < d.compton_length) ? ModulationFlag::sub_compton
                                                                   : ModulationFlag::ok;
    return d;
}

// guard on the wave function
inline ModulationDiagnostic modulation_guard(const DiracState& s) {
    const std::size_t N = s.grid.size();
    FftNd fft(s.grid);
    std::vector<Real> pw(N, 0.0);
    for (int c = 0; c < s.ncomp; ++c) {
        std::vector<Complex> w(s.psi.begin() + std::size_t(c) * N,
                               s.psi.begin() + std::size_t(c + 1) * N);
        fft.forward(w.data());
        for (std::size_t p = 0; p < N; ++p) pw[p] += std::norm(w[p]);
    }
    ModulationDiagnostic d;
    d.compton_length = s.params.m > 0 ? s.params.hbar / s.params.m : 0.0;
    d.min_feature_scale = diracdetail::feature_scale_of_power(s.grid, pw);
    d.flag = (s.params.m > 0 && d.min_feature_scale < d.compton_length)
                 ? ModulationFlag::sub_compton
                 : ModulationFlag::ok;
    return d;
}

// guard on an external potential: judged through its field (the gradient),
// which is the physically modulating quantity and decays at the box ends
inline ModulationDiagnostic modulation_guard_potential(const Grid& g, const WaveParams& par,
                                                       const FourPotential& A) {
    // a step potential does not wrap; differentiate one-sided at the box ends
    Grid gd = g;
    gd.boundary = Boundary::absorbing;
    std::vector<Real> E(g.size(), 0.0), tmp(g.size());
    for (int a = 0; a < g.dim; ++a) {
        spatial_deriv(gd, A.comp(0), tmp.data(), a, 2);
        for (std::size_t p = 0; p < g.size(); ++p) E[p] += sqr(tmp[p]);
    }
    for (auto& v : E) v = std::sqrt(v);
    return modulation_guard_field(g, par, E);
}

// smoothed Klein step A^0 profile: the potential energy q A^0 rises by
// `height` over the given rise length
inline FourPotential klein_step_potential(const Grid& g, const WaveParams& par, Real height,
                                          Real rise, Real x0 = 0.0) {
    FourPotential A(g);
    std::array<Real, 3> x;
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.point(p, x);
        A.at(0, p) = height / par.q * 0.5 * (1.0 + std::tanh((x[0] - x0) / rise));
    }
    return A;
}

}  // namespace ensim
