#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "core.hpp"
#include "deriv.hpp"
#include "field.hpp"
#include "fft.hpp"
#include "grid.hpp"

namespace ensim {

struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(what) {}
};

// 4D Levi-Civita with eps^{0123} = +1
inline int levi_civita4(int a, int b, int c, int d) {
    int idx[4] = {a, b, c, d};
    int sign = 1;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            if (idx[i] == idx[j]) return 0;
            if (idx[i] > idx[j]) {
                std::swap(idx[i], idx[j]);
                sign = -sign;
            }
        }
    return sign;
}

// ---------------------------------------------------------------------------
// F_{mu nu} = d_mu A_nu - d_nu A_mu
//
// The series overload takes consecutive snapshots of A^mu and evaluates F at
// frame k using centered time differences; the single-frame overload treats A
// as time-independent.

inline FaradayTensor faraday_from_potential(const Series<FourPotential>& A, std::size_t k,
                                            int order = 2) {
    const Grid& g = A[k].grid;
    const int D = g.dim + 1;
    for (int a = 0; a < g.dim; ++a)
        if (g.shape[a] < 3) throw StencilError("faraday_from_potential: grid too small");
    FaradayTensor F(g);

    // lowered potential components per frame, A_mu = g_mumu A^mu
    auto lowered = [&](std::size_t frame, int mu) {
        std::vector<Real> out(g.size());
        const Real* src = A[frame].comp(mu);
        const Real s = metric_diag(mu);
        for (std::size_t p = 0; p < g.size(); ++p) out[p] = s * src[p];
        return out;
    };

    std::vector<Real> d(g.size());
    for (int mu = 0; mu < D; ++mu)
        for (int nu = mu + 1; nu < D; ++nu) {
            std::vector<Real> val(g.size(), 0.0);
            // d_mu A_nu
            if (mu == 0) {
                std::vector<std::vector<Real>> fr(A.size());
                for (std::size_t f = 0; f < A.size(); ++f) fr[f] = lowered(f, nu);
                val = time_deriv(fr, k, A.dt, order);
            } else {
                auto Anu = lowered(k, nu);
                spatial_deriv(g, Anu.data(), val.data(), mu - 1, order);
            }
            // - d_nu A_mu  (nu >= 1 here, always spatial)
            auto Amu = lowered(k, mu);
            spatial_deriv(g, Amu.data(), d.data(), nu - 1, order);
            for (std::size_t p = 0; p < g.size(); ++p) val[p] -= d[p];
            std::copy(val.begin(), val.end(), F.comp(antisym_slot(D, mu, nu)));
        }
    return F;
}

inline FaradayTensor faraday_from_potential(const FourPotential& A, int order = 2) {
    Series<FourPotential> s;
    s.dt = 1.0;
    s.frames = {A, A, A};
    if (order == 4) s.frames = {A, A, A, A, A};
    return faraday_from_potential(s, order == 4 ? 2 : 1, order);
}

// ---------------------------------------------------------------------------
// Theta^{nu mu} = 1/4 g^{nu mu} F^{rho lam} F_{rho lam} + F^{nu rho} F_rho^mu

inline EMTensor canonical_tensor(const FaradayTensor& F) {
    const Grid& g = F.grid;
    const int D = g.dim + 1;
    EMTensor Th(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
        // invariant F^{rho lam} F_{rho lam}
        Real FF = 0.0;
        for (int r = 0; r < D; ++r)
            for (int l = 0; l < D; ++l) {
                Real f = F.get(r, l, p);
                FF += metric_diag(r) * metric_diag(l) * f * f;
            }
        for (int nu = 0; nu < D; ++nu)
            for (int mu = nu; mu < D; ++mu) {
                // F^{nu rho} F_rho^{ mu} = g^{nn} g^{mm} sum_rho g^{rr} F_{nu rho} F_{rho mu}
                Real s = 0.0;
                for (int r = 0; r < D; ++r)
                    s += metric_diag(r) * F.get(nu, r, p) * F.get(r, mu, p);
                s *= metric_diag(nu) * metric_diag(mu);
                Real gup = (nu == mu) ? metric_diag(nu) : 0.0;
                Th.set(nu, mu, p, 0.25 * gup * FF + s);
            }
    }
    return Th;
}

// ---------------------------------------------------------------------------
// divergences and residuals

// d_nu X^{nu mu}; X given on consecutive frames, evaluated at frame k
inline MultiField emtensor_divergence(const Series<EMTensor>& X, std::size_t k, int order = 2) {
    const Grid& g = X[k].grid;
    const int D = g.dim + 1;
    MultiField div(g, D);
    std::vector<Real> tmp(g.size());
    for (int mu = 0; mu < D; ++mu) {
        Real* out = div.comp(mu);
        // time part
        {
            std::vector<std::vector<Real>> fr(X.size());
            for (std::size_t f = 0; f < X.size(); ++f) {
                fr[f].assign(g.size(), 0.0);
                const Real* c = X[f].comp(sym_slot(D, 0, mu));
                std::copy(c, c + g.size(), fr[f].begin());
            }
            auto dt = time_deriv(fr, k, X.dt, order);
            for (std::size_t p = 0; p < g.size(); ++p) out[p] = dt[p];
        }
        // spatial parts
        for (int i = 1; i < D; ++i) {
            spatial_deriv(g, X[k].comp(sym_slot(D, i, mu)), tmp.data(), i - 1, order);
            for (std::size_t p = 0; p < g.size(); ++p) out[p] += tmp[p];
        }
    }
    return div;
}

// static (single-frame) overload: time derivatives vanish
inline MultiField emtensor_divergence(const EMTensor& X, int order = 2) {
    Series<EMTensor> s;
    s.dt = 1.0;
    s.frames = {X, X, X};
    if (order == 4) s.frames = {X, X, X, X, X};
    return emtensor_divergence(s, order == 4 ? 2 : 1, order);
}

// force density F^{mu}_{ nu} j^{nu}
inline MultiField lorentz_force_density(const FaradayTensor& F, const CurrentDensity& j) {
    const Grid& g = F.grid;
    const int D = g.dim + 1;
    MultiField f(g, D);
    for (int mu = 0; mu < D; ++mu) {
        Real* out = f.comp(mu);
        for (int nu = 0; nu < D; ++nu) {
            const Real* jc = j.comp(nu);
            const Real gm = metric_diag(mu);
            for (std::size_t p = 0; p < g.size(); ++p)
                out[p] += gm * F.get(mu, nu, p) * jc[p];
        }
    }
    return f;
}

// d_nu F^{nu mu} - j^mu
inline MultiField maxwell_residual(const Series<FaradayTensor>& F, const CurrentDensity& j,
                                   std::size_t k, int order = 2) {
    const Grid& g = F[k].grid;
    const int D = g.dim + 1;
    MultiField res(g, D);
    std::vector<Real> tmp(g.size());
    for (int mu = 0; mu < D; ++mu) {
        Real* out = res.comp(mu);
        // raise both indices of F_{nu mu}: F^{nu mu} = g^{nn} g^{mm} F_{nu mu}
        {
            std::vector<std::vector<Real>> fr(F.size());
            for (std::size_t f = 0; f < F.size(); ++f) {
                fr[f].resize(g.size());
                for (std::size_t p = 0; p < g.size(); ++p)
                    fr[f][p] = metric_diag(0) * metric_diag(mu) * F[f].get(0, mu, p);
            }
            auto dt = time_deriv(fr, k, F.dt, order);
            for (std::size_t p = 0; p < g.size(); ++p) out[p] = dt[p];
        }
        for (int nu = 1; nu < D; ++nu) {
            std::vector<Real> fnu(g.size());
            for (std::size_t p = 0; p < g.size(); ++p)
                fnu[p] = metric_diag(nu) * metric_diag(mu) * F[k].get(nu, mu, p);
            spatial_deriv(g, fnu.data(), tmp.data(), nu - 1, order);
            for (std::size_t p = 0; p < g.size(); ++p) out[p] += tmp[p];
        }
        const Real* jc = j.comp(mu);
        for (std::size_t p = 0; p < g.size(); ++p) out[p] -= jc[p];
    }
    return res;
}

// d_nu Theta^{nu mu} + F^{mu}_{ nu} sum_a j^{(a) nu}
inline MultiField poynting_residual(const Series<FaradayTensor>& F,
                                    const std::vector<const CurrentDensity*>& currents,
                                    std::size_t k, int order = 2) {
    const Grid& g = F[k].grid;
    Series<EMTensor> Th;
    Th.dt = F.dt;
    Th.frames.reserve(F.size());
    for (std::size_t f = 0; f < F.size(); ++f) Th.frames.push_back(canonical_tensor(F[f]));
    MultiField res = emtensor_divergence(Th, k, order);
    if (!currents.empty()) {
        CurrentDensity jt(g);
        for (const CurrentDensity* jc : currents)
            for (std::size_t q = 0; q < jt.data.size(); ++q) jt.data[q] += jc->data[q];
        MultiField f = lorentz_force_density(F[k], jt);
        for (std::size_t q = 0; q < res.data.size(); ++q) res.data[q] += f.data[q];
    }
    return res;
}

// d_nu P^{nu mu} for P = Theta + sum_a T^(a); all inputs on a common grid
inline MultiField total_conservation_residual(const Series<EMTensor>& Theta,
                                              const std::vector<const Series<EMTensor>*>& T_list,
                                              std::size_t k, int order = 2) {
    Series<EMTensor> P;
    P.dt = Theta.dt;
    P.frames = Theta.frames;
    for (const auto* T : T_list) {
        ENSIM_REQUIRE(T->size() == P.size(), "frame count mismatch in total conservation");
        for (std::size_t f = 0; f < P.size(); ++f) {
            ENSIM_REQUIRE((*T)[f].grid.same_layout(P[f].grid), "grid mismatch");
            for (std::size_t q = 0; q < P[f].data.size(); ++q)
                P[f].data[q] += (*T)[f].data[q];
        }
    }
    return emtensor_divergence(P, k, order);
}

// ---------------------------------------------------------------------------
// angular momentum: J^{mu nu rho} = eps^{nu rho lam sig} P^mu_sig x_lam,
// residual d_mu J^{mu nu rho} for the six nu < rho pairs (3+1D only)

// general-tensor version: P given with all 16 components [mu*4 + nu] so that
// the asymmetric negative control is expressible
inline MultiField angular_momentum_residual_general(const Series<MultiField>& P, std::size_t k,
                                                    int order = 2) {
    Grid g = P[k].grid;
    if (g.dim != 3)
        throw ConfigError("angular_momentum_residual requires 3 spatial dimensions");
    ENSIM_REQUIRE(P[k].ncomp == 16, "general P must carry 16 components");
    // J carries an explicit factor of the coordinate, so it is never periodic;
    // its spatial derivatives must not wrap around the box
    g.boundary = Boundary::absorbing;
    const int D = 4;

    // J components for a frame at time t (relative to frame k)
    auto buildJ = [&](const MultiField& Pf, Real t) {
        MultiField J(g, 4 * 6);  // [mu][pair nu<rho]
        std::array<Real, 3> x;
        for (std::size_t p = 0; p < g.size(); ++p) {
            g.point(p, x);
            Real xlow[4] = {t, -x[0], -x[1], -x[2]};  // x_lam = g_ll x^lam
            for (int nu = 0; nu < D; ++nu)
                for (int rho = nu + 1; rho < D; ++rho) {
                    int pair = antisym_slot(D, nu, rho);
                    for (int mu = 0; mu < D; ++mu) {
                        Real s = 0.0;
                        for (int lam = 0; lam < D; ++lam)
                            for (int sig = 0; sig < D; ++sig) {
                                int e = levi_civita4(nu, rho, lam, sig);
                                if (!e) continue;
                                // P^mu_sig = g_{sig sig} P^{mu sig}
                                s += Real(e) * metric_diag(sig) * Pf.at(mu * 4 + sig, p) * xlow[lam];
                            }
                        J.at(mu * 6 + pair, p) = s;
                    }
                }
        }
        return J;
    };

    std::vector<MultiField> J(P.size());
    for (std::size_t f = 0; f < P.size(); ++f)
        J[f] = buildJ(P[f], (Real(f) - Real(k)) * P.dt);

    MultiField res(g, 6);
    std::vector<Real> tmp(g.size());
    for (int pair = 0; pair < 6; ++pair) {
        Real* out = res.comp(pair);
        {
            std::vector<std::vector<Real>> fr(P.size());
            for (std::size_t f = 0; f < P.size(); ++f) {
                const Real* c = J[f].comp(0 * 6 + pair);
                fr[f].assign(c, c + g.size());
            }
            auto dt = time_deriv(fr, k, P.dt, order);
            for (std::size_t p = 0; p < g.size(); ++p) out[p] = dt[p];
        }
        for (int i = 1; i < D; ++i) {
            spatial_deriv(g, J[k].comp(i * 6 + pair), tmp.data(), i - 1, order);
            for (std::size_t p = 0; p < g.size(); ++p) out[p] += tmp[p];
        }
    }
    return res;
}

inline MultiField angular_momentum_residual(const Series<EMTensor>& P, std::size_t k,
                                            int order = 2) {
    Series<MultiField> Pg;
    Pg.dt = P.dt;
    for (std::size_t f = 0; f < P.size(); ++f) {
        if (P[f].grid.dim != 3)
            throw ConfigError("angular_momentum_residual requires 3 spatial dimensions");
        MultiField m(P[f].grid, 16);
        for (int mu = 0; mu < 4; ++mu)
            for (int nu = 0; nu < 4; ++nu) {
                const Real* src = P[f].comp(sym_slot(4, mu, nu));
                Real* dst = m.comp(mu * 4 + nu);
                std::copy(src, src + m.grid.size(), dst);
            }
        Pg.frames.push_back(std::move(m));
    }
    return angular_momentum_residual_general(Pg, k, order);
}

// ---------------------------------------------------------------------------
// covariance transforms

// A -> l^-1 A(l^-1 x), j -> l^-3 j(l^-1 x), T -> l^-4 T(l^-1 x); realized by
// rescaling grid spacings by l so no resampling happens (F picks up l^-2)
inline FieldBundle scale_transform(const FieldBundle& b, Real lambda) {
    if (!(lambda > 0.0)) throw DomainError("scale_transform: lambda must be > 0");
    FieldBundle out = b;
    auto rescale_grid = [&](Grid& g) {
        for (int a = 0; a < 3; ++a) g.spacing[a] *= lambda;
        g.time_step *= lambda;
    };
    rescale_grid(out.grid);
    const Real sA = 1.0 / lambda;
    const Real sF = 1.0 / (lambda * lambda);
    const Real sj = 1.0 / (lambda * lambda * lambda);
    const Real sT = sj / lambda;
    out.A.dt *= lambda;
    out.F.dt *= lambda;
    out.j.dt *= lambda;
    out.T.dt *= lambda;
    for (auto& f : out.A.frames) {
        rescale_grid(f.grid);
        for (Real& v : f.data) v *= sA;
    }
    for (auto& f : out.F.frames) {
        rescale_grid(f.grid);
        for (Real& v : f.data) v *= sF;
    }
    for (auto& f : out.j.frames) {
        rescale_grid(f.grid);
        for (Real& v : f.data) v *= sj;
        f.total_charge *= sj;  // density scale; integral rescales with volume
    }
    for (auto& f : out.T.frames) {
        rescale_grid(f.grid);
        for (Real& v : f.data) v *= sT;
    }
    return out;
}

namespace detail {
// reverse every spatial axis: index i -> n-1-i (reflection about the array
// center, which is the coordinate origin)
inline std::size_t reflect_index(const Grid& g, std::size_t p) {
    std::array<std::size_t, 3> idx;
    g.unflat(p, idx);
    return g.flat(g.shape[0] - 1 - idx[0], g.shape[1] - 1 - idx[1], g.shape[2] - 1 - idx[2]);
}

template <class T>
inline void reflect_multifield(const Grid& g, const T& in, T& out, Real sign) {
    for (int c = 0; c < in.ncomp; ++c) {
        const Real* src = in.comp(c);
        Real* dst = out.comp(c);
        for (std::size_t p = 0; p < g.size(); ++p) dst[reflect_index(g, p)] = sign * src[p];
    }
}
}  // namespace detail

// PT: A(x) -> -A(-x), j(x) -> -j(-x), T(x) -> T(-x); series frames reverse in
// time as part of x -> -x
inline FieldBundle pt_transform(const FieldBundle& b) {
    FieldBundle out = b;
    auto apply = [&](auto& series, Real sign) {
        auto& frames = series.frames;
        std::size_t K = frames.size();
        auto src = frames;
        for (std::size_t f = 0; f < K; ++f)
            detail::reflect_multifield(src[f].grid, src[K - 1 - f], frames[f], sign);
    };
    apply(out.A, -1.0);
    apply(out.F, +1.0);
    apply(out.j, -1.0);
    apply(out.T, +1.0);
    for (auto& f : out.j.frames) f.total_charge = -f.total_charge;
    return out;
}

// ---------------------------------------------------------------------------
// Green-kernel solution of Maxwell's equations in Lorenz gauge

struct GreenKernelConfig {
    Real alpha_ret = 1.0;
    Real alpha_adv = 0.0;

    void validate() const {
        ENSIM_CONFIG_REQUIRE(alpha_ret >= 0.0 && alpha_ret <= 1.0, "alpha_ret outside [0,1]");
        ENSIM_CONFIG_REQUIRE(alpha_adv >= 0.0 && alpha_adv <= 1.0, "alpha_adv outside [0,1]");
        ENSIM_CONFIG_REQUIRE(std::abs(alpha_ret + alpha_adv - 1.0) < 1e-12,
                             "alpha_ret + alpha_adv must equal 1");
    }
};

struct PotentialResult {
    FourPotential A;
    bool source_conserved = true;
    Real continuity_residual = 0.0;
};

// discrete continuity residual max|d_mu j^mu| of a current series at frame k
inline Real continuity_residual(const Series<CurrentDensity>& j, std::size_t k, int order = 2) {
    const Grid& g = j[k].grid;
    std::vector<Real> res(g.size(), 0.0);
    if (j.size() >= 3) {
        std::vector<std::vector<Real>> fr(j.size());
        for (std::size_t f = 0; f < j.size(); ++f) {
            const Real* c = j[f].comp(0);
            fr[f].assign(c, c + g.size());
        }
        res = time_deriv(fr, k, j.dt, order);
    }
    std::vector<Real> tmp(g.size());
    for (int i = 0; i < g.dim; ++i) {
        spatial_deriv(g, j[k].comp(i + 1), tmp.data(), i, order);
        for (std::size_t p = 0; p < g.size(); ++p) res[p] += tmp[p];
    }
    return max_abs(res);
}

// A^mu as the alpha-weighted sum of retarded and advanced light-cone sums of
// the scalar kernel delta(t -+ |x|) / (4 pi |x|). A static source (single
// frame) reduces to the Coulomb sum, evaluated with zero-padded FFTs; time
// series use the direct sum with linear interpolation in retarded time and are
// meant for small grids. The source is assumed static outside the stored
// window.
inline PotentialResult potential_from_current(const Series<CurrentDensity>& j,
                                              const GreenKernelConfig& cfg, std::size_t k_eval,
                                              int order = 2) {
    cfg.validate();
    ENSIM_REQUIRE(!j.empty(), "potential_from_current: empty source series");
    const Grid& g = j[k_eval].grid;
    ENSIM_REQUIRE(g.dim == 3, "potential_from_current implemented for 3 spatial dimensions");

    PotentialResult out;
    out.A = FourPotential(g);
    if (j.size() >= 3 && k_eval >= 1 && k_eval + 1 < j.size())
        out.continuity_residual = continuity_residual(j, k_eval, order);
    Real jscale = 0.0;
    for (int c = 0; c < j[k_eval].ncomp; ++c)
        jscale = std::max(jscale, max_abs(std::vector<Real>(
                                      j[k_eval].comp(c), j[k_eval].comp(c) + g.size())));
    out.source_conserved = out.continuity_residual <= 1e-6 * std::max(jscale, 1e-300) ||
                           j.size() < 3;

    const Real self = coulomb_self_cell(g);
    auto kernel = [&](Real r) { return r < 1e-12 ? self : 1.0 / (4.0 * M_PI * r); };

    if (j.size() == 1) {
        // static source: light-cone sum collapses to the Coulomb sum for any
        // alpha split
        for (int mu = 0; mu < 4; ++mu) {
            std::vector<Real> src(j[0].comp(mu), j[0].comp(mu) + g.size());
            auto pot = freespace_convolve3(g, src, kernel);
            std::copy(pot.begin(), pot.end(), out.A.comp(mu));
        }
        return out;
    }

    // direct light-cone sum
    const Real dt = j.dt;
    auto sample = [&](int mu, std::size_t p, Real frame_pos) -> Real {
        if (frame_pos <= 0.0) return j.frames.front().at(mu, p);
        if (frame_pos >= Real(j.size() - 1)) return j.frames.back().at(mu, p);
        std::size_t f0 = std::size_t(frame_pos);
        Real w = frame_pos - Real(f0);
        return (1.0 - w) * j[f0].at(mu, p) + w * j[f0 + 1].at(mu, p);
    };

    const Real dV = g.cell_volume();
    std::array<Real, 3> x, y;
    for (std::size_t p = 0; p < g.size(); ++p) {
        g.point(p, x);
        for (std::size_t q = 0; q < g.size(); ++q) {
            g.point(q, y);
            Real r = std::sqrt(sqr(x[0] - y[0]) + sqr(x[1] - y[1]) + sqr(x[2] - y[2]));
            Real w = kernel(r) * dV;
            Real fr_ret = Real(k_eval) - r / dt;
            Real fr_adv = Real(k_eval) + r / dt;
            for (int mu = 0; mu < 4; ++mu)
                out.A.at(mu, p) += w * (cfg.alpha_ret * sample(mu, q, fr_ret) +
                                        cfg.alpha_adv * sample(mu, q, fr_adv));
        }
    }
    return out;
}

// convenience: relative max-norm of a residual against a reference scale
inline Real relative_max(const MultiField& res, Real scale) {
    return max_abs(res) / std::max(scale, 1e-300);
}

// dimensionless Maxwell residual: |d F - j| normalized by max(|j|, |F|/h).
// Both numerator and denominator carry the same scaling weight, so the value
// is invariant under the dilatation and PT transforms.
inline Real maxwell_residual_relative(const Series<FaradayTensor>& F, const CurrentDensity& j,
                                      std::size_t k, int order = 2) {
    auto res = maxwell_residual(F, j, k, order);
    Real scale = std::max(max_abs(j), max_abs(F[k]) / F[k].grid.min_spacing());
    return relative_max(res, scale);
}

}  // namespace ensim
