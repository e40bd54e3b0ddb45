#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "core.hpp"
#include "field.hpp"
#include "grid.hpp"
#include "kg.hpp"
#include "rng.hpp"
#include "tensor_ops.hpp"

namespace ensim {

// Point-particle ensembles: Lorentz-force trajectories in proper time,
// mollified current/energy-momentum deposition on the lattice, and transport
// of samples along a wave-equation velocity field j / rho.

struct FieldSample {
    std::array<Real, 3> E{0, 0, 0};
    std::array<Real, 3> B{0, 0, 0};
};

using FieldMap = std::function<FieldSample(Real t, const std::array<Real, 3>& x)>;

inline FieldMap uniform_field_map(std::array<Real, 3> E, std::array<Real, 3> B) {
    return [E, B](Real, const std::array<Real, 3>&) {
        FieldSample f;
        f.E = E;
        f.B = B;
        return f;
    };
}

struct PointTrajectory {
    Real q = 1.0;
    Real m = 1.0;
    std::vector<Real> tau;
    std::vector<std::array<Real, 4>> x;  // (t, x, y, z)
    std::vector<std::array<Real, 4>> u;  // four-velocity
    Real norm_drift = 0.0;               // max |u.u - 1| along the path
    bool truncated = false;

    // lab-frame position at time t by linear interpolation in the samples
    std::array<Real, 3> position_at_time(Real t) const {
        ENSIM_REQUIRE(!x.empty(), "empty trajectory");
        if (t <= x.front()[0]) return {x.front()[1], x.front()[2], x.front()[3]};
        for (std::size_t i = 1; i < x.size(); ++i) {
            if (x[i][0] >= t) {
                Real w = (t - x[i - 1][0]) / (x[i][0] - x[i - 1][0]);
                std::array<Real, 3> out;
                for (int a = 0; a < 3; ++a)
                    out[a] = (1 - w) * x[i - 1][a + 1] + w * x[i][a + 1];
                return out;
            }
        }
        return {x.back()[1], x.back()[2], x.back()[3]};
    }
};

namespace classicaldetail {
inline std::array<Real, 4> lorentz_rhs_u(Real q_over_m, const FieldSample& f,
                                         const std::array<Real, 4>& u) {
    std::array<Real, 4> du;
    du[0] = q_over_m * (f.E[0] * u[1] + f.E[1] * u[2] + f.E[2] * u[3]);
    for (int i = 0; i < 3; ++i) {
        Real uxB = (i == 0) ? u[2] * f.B[2] - u[3] * f.B[1]
                 : (i == 1) ? u[3] * f.B[0] - u[1] * f.B[2]
                            : u[1] * f.B[1] - u[2] * f.B[0];
        du[i + 1] = q_over_m * (f.E[i] * u[0] + uxB);
    }
    return du;
}
}  // namespace classicaldetail

// 4th-order integration of m gamma'' = q F(gamma) gamma' in proper time.
// If `domain` is given, integration stops with a truncation flag when the
// position leaves the box.
inline PointTrajectory lorentz_integrate(std::array<Real, 3> x0, std::array<Real, 3> v0,
                                         Real q, Real m, const FieldMap& field, Real tau_end,
                                         Real dtau, const std::optional<Grid>& domain = {}) {
    ENSIM_CONFIG_REQUIRE(m > 0, "mass must be positive");
    ENSIM_CONFIG_REQUIRE(dtau > 0 && tau_end > 0, "need positive durations");
    Real v2 = v0[0] * v0[0] + v0[1] * v0[1] + v0[2] * v0[2];
    ENSIM_CONFIG_REQUIRE(v2 < 1.0, "initial velocity must be timelike (|v| < 1)");
    Real gamma = 1.0 / std::sqrt(1.0 - v2);

    PointTrajectory tr;
    tr.q = q;
    tr.m = m;
    std::array<Real, 4> x{0.0, x0[0], x0[1], x0[2]};
    std::array<Real, 4> u{gamma, gamma * v0[0], gamma * v0[1], gamma * v0[2]};

    auto inside = [&](const std::array<Real, 4>& xx) {
        if (!domain) return true;
        for (int a = 0; a < domain->dim; ++a) {
            Real half = 0.5 * domain->extent(a);
            if (xx[a + 1] < -half || xx[a + 1] > half) return false;
        }
        return true;
    };

    const Real qm = q / m;
    std::size_t nsteps = std::size_t(std::ceil(tau_end / dtau));
    tr.tau.reserve(nsteps + 1);
    tr.x.reserve(nsteps + 1);
    tr.u.reserve(nsteps + 1);
    Real tau = 0.0;
    for (std::size_t s = 0;; ++s) {
        tr.tau.push_back(tau);
        tr.x.push_back(x);
        tr.u.push_back(u);
        Real uu = u[0] * u[0] - u[1] * u[1] - u[2] * u[2] - u[3] * u[3];
        tr.norm_drift = std::max(tr.norm_drift, std::abs(uu - 1.0));
        if (s >= nsteps) break;
        if (!inside(x)) {
            tr.truncated = true;
            break;
        }
        // classic RK4 on the coupled (x, u) system
        auto deriv = [&](const std::array<Real, 4>& xx, const std::array<Real, 4>& uu4) {
            FieldSample f = field(xx[0], {xx[1], xx[2], xx[3]});
            return std::pair{uu4, classicaldetail::lorentz_rhs_u(qm, f, uu4)};
        };
        auto [k1x, k1u] = deriv(x, u);
        std::array<Real, 4> x2, u2;
        for (int a = 0; a < 4; ++a) {
            x2[a] = x[a] + 0.5 * dtau * k1x[a];
            u2[a] = u[a] + 0.5 * dtau * k1u[a];
        }
        auto [k2x, k2u] = deriv(x2, u2);
        for (int a = 0; a < 4; ++a) {
            x2[a] = x[a] + 0.5 * dtau * k2x[a];
            u2[a] = u[a] + 0.5 * dtau * k2u[a];
        }
        auto [k3x, k3u] = deriv(x2, u2);
        for (int a = 0; a < 4; ++a) {
            x2[a] = x[a] + dtau * k3x[a];
            u2[a] = u[a] + dtau * k3u[a];
        }
        auto [k4x, k4u] = deriv(x2, u2);
        for (int a = 0; a < 4; ++a) {
            x[a] += dtau / 6.0 * (k1x[a] + 2 * k2x[a] + 2 * k3x[a] + k4x[a]);
            u[a] += dtau / 6.0 * (k1u[a] + 2 * k2u[a] + 2 * k3u[a] + k4u[a]);
        }
        tau += dtau;
    }
    return tr;
}

// field sampled from a lattice Faraday tensor, multilinear interpolation;
// E_i = F_{0i}, B_k = -1/2 eps_kij F_ij; out-of-box positions clamp
inline FieldMap field_from_faraday(const FaradayTensor& F) {
    return [F](Real, const std::array<Real, 3>& pos) {
        const Grid& g = F.grid;
        std::array<std::size_t, 3> i0{0, 0, 0};
        std::array<Real, 3> w{0, 0, 0};
        for (int a = 0; a < g.dim; ++a) {
            Real fi = pos[a] / g.spacing[a] + 0.5 * Real(g.shape[a] - 1);
            fi = std::clamp(fi, 0.0, Real(g.shape[a] - 1) - 1e-9);
            i0[a] = std::size_t(fi);
            w[a] = fi - Real(i0[a]);
        }
        FieldSample out;
        int corners = 1 << g.dim;
        for (int c = 0; c < corners; ++c) {
            Real wc = 1.0;
            std::array<std::size_t, 3> idx = i0;
            for (int a = 0; a < g.dim; ++a) {
                bool hi = c & (1 << a);
                wc *= hi ? w[a] : 1.0 - w[a];
                if (hi) idx[a] = std::min(idx[a] + 1, g.shape[a] - 1);
            }
            std::size_t p = g.flat(idx[0], idx[1], idx[2]);
            for (int a = 0; a < g.dim; ++a) out.E[a] += wc * F.get(0, a + 1, p);
            if (g.dim == 3) {
                out.B[0] += wc * (-F.get(2, 3, p));
                out.B[1] += wc * (+F.get(1, 3, p));
                out.B[2] += wc * (-F.get(1, 2, p));
            }
        }
        return out;
    };
}

// ---------------------------------------------------------------------------
// ensemble deposition

struct PointEnsemble {
    std::vector<PointTrajectory> members;
    std::vector<Real> weights;  // discrete d mu(e), normalized to 1
    Real kernel_width = 0.0;

    void normalize_weights() {
        Real s = 0.0;
        for (Real w : weights) s += w;
        ENSIM_REQUIRE(s > 0, "ensemble weights must not all vanish");
        for (Real& w : weights) w /= s;
    }
    void validate() const {
        ENSIM_REQUIRE(members.size() == weights.size(), "member/weight count mismatch");
        Real s = 0.0;
        for (Real w : weights) s += w;
        ENSIM_REQUIRE(std::abs(s - 1.0) < 1e-9, "ensemble weights must sum to 1");
    }
};

struct DepositResult {
    Series<CurrentDensity> j;
    Series<EMTensor> T;
    Real continuity_rel = 0.0;  // relative continuity residual of j mid-window
};

// mollified delta deposition of j^mu and T^{nu mu} along all trajectories on
// nframes around t_center; the mollifier is a truncated Gaussian of width
// `kernel_width` in all dim+1 directions
inline DepositResult deposit_ensemble(const PointEnsemble& ens, const Grid& g, Real t_center,
                                      std::size_t nframes = 3) {
    ens.validate();
    const Real w = ens.kernel_width;
    ENSIM_CONFIG_REQUIRE(w >= 2.0 * g.min_spacing(),
                         "deposition kernel must span at least 2 grid spacings");
    DepositResult out;
    out.j.dt = g.time_step;
    out.T.dt = g.time_step;
    for (std::size_t f = 0; f < nframes; ++f) {
        out.j.frames.emplace_back(g);
        out.T.frames.emplace_back(g);
    }

    const Real cut = 4.0 * w;
    const Real inv2w2 = 1.0 / (2.0 * w * w);
    const Real norm1 = 1.0 / std::sqrt(2.0 * M_PI * w * w);

    for (std::size_t mem = 0; mem < ens.members.size(); ++mem) {
        const auto& tr = ens.members[mem];
        const Real wm = ens.weights[mem];
        for (std::size_t i = 0; i + 1 < tr.tau.size(); ++i) {
            Real dtau = tr.tau[i + 1] - tr.tau[i];
            const auto& xs = tr.x[i];
            const auto& us = tr.u[i];
            for (std::size_t f = 0; f < nframes; ++f) {
                Real tf = t_center + (Real(f) - 0.5 * Real(nframes - 1)) * g.time_step;
                Real dt0 = tf - xs[0];
                if (std::abs(dt0) > cut) continue;
                Real gt = norm1 * std::exp(-dt0 * dt0 * inv2w2);

                // index window around the sample position
                std::array<std::size_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
                bool skip = false;
                for (int a = 0; a < g.dim; ++a) {
                    Real fi = (xs[a + 1]) / g.spacing[a] + 0.5 * Real(g.shape[a] - 1);
                    Real span = cut / g.spacing[a];
                    if (fi + span < 0 || fi - span > Real(g.shape[a] - 1)) {
                        skip = true;
                        break;
                    }
                    lo[a] = std::size_t(std::max(0.0, std::ceil(fi - span)));
                    hi[a] = std::size_t(std::min(Real(g.shape[a] - 1), std::floor(fi + span)));
                }
                if (skip) continue;

                for (std::size_t ix = lo[0]; ix <= hi[0]; ++ix)
                    for (std::size_t iy = lo[1]; iy <= hi[1]; ++iy)
                        for (std::size_t iz = lo[2]; iz <= hi[2]; ++iz) {
                            std::size_t p = g.flat(ix, iy, iz);
                            Real k = gt;
                            std::array<std::size_t, 3> idx{ix, iy, iz};
                            for (int a = 0; a < g.dim; ++a) {
                                Real d = g.coord(a, idx[a]) - xs[a + 1];
                                k *= norm1 * std::exp(-d * d * inv2w2);
                            }
                            Real base = wm * dtau * k;
                            auto& jf = out.j.frames[f];
                            auto& Tf = out.T.frames[f];
                            for (int mu = 0; mu <= g.dim; ++mu) {
                                int cm = mu == 0 ? 0 : mu;
                                jf.at(mu, p) += tr.q * base * us[std::size_t(cm)];
                                for (int nu = mu; nu <= g.dim; ++nu) {
                                    int cn = nu == 0 ? 0 : nu;
                                    Tf.add(mu, nu, p,
                                           tr.m * base * us[std::size_t(cm)] * us[std::size_t(cn)]);
                                }
                            }
                        }
            }
        }
    }
    for (auto& jf : out.j.frames) jf.total_charge = integrate_comp(jf, 0);
    if (nframes >= 3) {
        Real res = continuity_residual(out.j, nframes / 2);
        Real scale = 0.0;
        for (int c = 0; c <= g.dim; ++c)
            scale = std::max(scale, max_abs(std::vector<Real>(
                                        out.j.frames[nframes / 2].comp(c),
                                        out.j.frames[nframes / 2].comp(c) + g.size())));
        out.continuity_rel = res / std::max(scale / g.min_spacing(), 1e-300);
    }
    return out;
}

// ---------------------------------------------------------------------------
// velocity-field transport (Bohm-type sampling)

// density and charge-normalized current sampled on consecutive frames
struct FlowField {
    Grid grid;
    Real t0 = 0.0;
    Real dt = 0.0;
    std::vector<std::vector<Real>> rho;                     // frames
    std::vector<std::array<std::vector<Real>, 3>> current;  // frames x axis

    Real max_rho = 0.0;

    void finalize() {
        max_rho = 0.0;
        for (const auto& fr : rho) max_rho = std::max(max_rho, max_abs(fr));
    }
    Real t_end() const { return t0 + dt * Real(rho.size() - 1); }
};

// rho = j^0/q and v-source current j^i/q from a KG evolution window
inline FlowField flow_from_kg(const KGState& s, std::size_t nframes) {
    auto fr = kg_collect(s, nframes + 2);
    FlowField flow;
    flow.grid = s.grid;
    flow.t0 = s.time + s.grid.time_step;  // first usable centered frame
    flow.dt = s.grid.time_step;
    for (std::size_t k = 1; k + 1 < fr.phi.size(); ++k) {
        auto j = kg_current_at(fr, k);
        std::vector<Real> r(s.grid.size());
        std::array<std::vector<Real>, 3> cur;
        for (std::size_t p = 0; p < s.grid.size(); ++p) r[p] = j.at(0, p) / s.params.q;
        for (int a = 0; a < s.grid.dim; ++a) {
            cur[a].resize(s.grid.size());
            for (std::size_t p = 0; p < s.grid.size(); ++p)
                cur[a][p] = j.at(a + 1, p) / s.params.q;
        }
        flow.rho.push_back(std::move(r));
        flow.current.push_back(std::move(cur));
    }
    flow.finalize();
    return flow;
}

namespace classicaldetail {

template <class Field>
inline Real interp_spatial(const Grid& g, const Field& f, const std::array<Real, 3>& pos) {
    std::array<std::size_t, 3> i0{0, 0, 0};
    std::array<Real, 3> w{0, 0, 0};
    for (int a = 0; a < g.dim; ++a) {
        Real fi = pos[a] / g.spacing[a] + 0.5 * Real(g.shape[a] - 1);
        fi = std::clamp(fi, 0.0, Real(g.shape[a] - 1) - 1e-12);
        i0[a] = std::size_t(fi);
        if (i0[a] + 1 >= g.shape[a]) i0[a] = g.shape[a] - 2;
        w[a] = fi - Real(i0[a]);
    }
    Real out = 0.0;
    int corners = 1 << g.dim;
    for (int c = 0; c < corners; ++c) {
        Real wc = 1.0;
        std::array<std::size_t, 3> idx = i0;
        for (int a = 0; a < g.dim; ++a) {
            bool hi = c & (1 << a);
            wc *= hi ? w[a] : 1.0 - w[a];
            if (hi) ++idx[a];
        }
        out += wc * f[g.flat(idx[0], idx[1], idx[2])];
    }
    return out;
}

}  // namespace classicaldetail

// velocity v = j / rho at (t, x), multilinear in space, linear in time
inline std::array<Real, 3> flow_velocity(const FlowField& flow, Real t,
                                         const std::array<Real, 3>& pos, bool* degenerate,
                                         Real floor_rel = 1e-12) {
    const Grid& g = flow.grid;
    Real ft = (t - flow.t0) / flow.dt;
    ft = std::clamp(ft, 0.0, Real(flow.rho.size() - 1) - 1e-12);
    std::size_t f0 = std::size_t(ft);
    if (f0 + 1 >= flow.rho.size()) f0 = flow.rho.size() - 2;
    Real wt = ft - Real(f0);

    std::array<Real, 3> v{0, 0, 0};
    Real rho = (1 - wt) * classicaldetail::interp_spatial(g, flow.rho[f0], pos) +
               wt * classicaldetail::interp_spatial(g, flow.rho[f0 + 1], pos);
    if (rho < floor_rel * flow.max_rho) {
        if (degenerate) *degenerate = true;
        return v;
    }
    for (int a = 0; a < g.dim; ++a) {
        Real j = (1 - wt) * classicaldetail::interp_spatial(g, flow.current[f0][a], pos) +
                 wt * classicaldetail::interp_spatial(g, flow.current[f0 + 1][a], pos);
        v[a] = j / rho;
    }
    return v;
}

// initial positions drawn from rho(., t0): categorical over cells plus a
// uniform jitter inside the cell; fully counter-based and order-independent
inline std::vector<std::array<Real, 3>> sample_density(const Grid& g,
                                                       const std::vector<Real>& rho,
                                                       std::size_t n, uint64_t seed) {
    std::vector<Real> cum(rho.size());
    Real acc = 0.0;
    for (std::size_t p = 0; p < rho.size(); ++p) {
        acc += std::max(rho[p], 0.0);
        cum[p] = acc;
    }
    ENSIM_REQUIRE(acc > 0, "cannot sample a vanishing density");
    CounterRng rng{seed, 11};
    std::vector<std::array<Real, 3>> out(n);
    std::array<std::size_t, 3> idx;
    for (std::size_t i = 0; i < n; ++i) {
        Real u = rng.uniform(4 * i) * acc;
        std::size_t p = std::size_t(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (p >= rho.size()) p = rho.size() - 1;
        g.unflat(p, idx);
        std::array<Real, 3> x{0, 0, 0};
        for (int a = 0; a < g.dim; ++a)
            x[a] = g.coord(a, idx[a]) + (rng.uniform(4 * i + 1 + std::size_t(a)) - 0.5) * g.spacing[a];
        out[i] = x;
    }
    return out;
}

struct BohmPath {
    std::array<Real, 3> start{0, 0, 0};
    std::vector<std::array<Real, 3>> at_frames;
    bool degenerate = false;
};

struct BohmResult {
    std::vector<BohmPath> paths;
    std::size_t degenerate_count = 0;
    Real tv_final = 0.0;  // total variation between the histogram and rho at t_end
};

// total variation distance between a normalized cell histogram of points and
// a density sampled on the grid
inline Real total_variation_vs_density(const Grid& g, const std::vector<std::array<Real, 3>>& xs,
                                       const std::vector<Real>& rho) {
    std::vector<Real> hist(g.size(), 0.0);
    for (const auto& x : xs) {
        std::array<std::size_t, 3> idx{0, 0, 0};
        bool ok = true;
        for (int a = 0; a < g.dim; ++a) {
            Real fi = x[a] / g.spacing[a] + 0.5 * Real(g.shape[a] - 1) + 0.5;
            if (fi < 0 || fi >= Real(g.shape[a])) {
                ok = false;
                break;
            }
            idx[a] = std::size_t(fi);
        }
        if (ok) hist[g.flat(idx[0], idx[1], idx[2])] += 1.0;
    }
    Real hsum = 0.0, rsum = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        hsum += hist[p];
        rsum += std::max(rho[p], 0.0);
    }
    ENSIM_REQUIRE(hsum > 0 && rsum > 0, "empty histogram or density");
    Real tv = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p)
        tv += std::abs(hist[p] / hsum - std::max(rho[p], 0.0) / rsum);
    return 0.5 * tv;
}

// RK4 transport of sample positions along the flow, recorded at every frame
inline BohmResult bohm_transport(const FlowField& flow,
                                 const std::vector<std::array<Real, 3>>& starts,
                                 Real floor_rel = 1e-12) {
    BohmResult out;
    out.paths.resize(starts.size());
    const Real dt = flow.dt;
    const std::size_t K = flow.rho.size();
    for (std::size_t i = 0; i < starts.size(); ++i) {
        auto& path = out.paths[i];
        path.start = starts[i];
        path.at_frames.resize(K);
        std::array<Real, 3> x = starts[i];
        path.at_frames[0] = x;
        bool degen = false;
        for (std::size_t f = 0; f + 1 < K; ++f) {
            Real t = flow.t0 + dt * Real(f);
            auto v1 = flow_velocity(flow, t, x, &degen, floor_rel);
            std::array<Real, 3> x2;
            for (int a = 0; a < 3; ++a) x2[a] = x[a] + 0.5 * dt * v1[a];
            auto v2 = flow_velocity(flow, t + 0.5 * dt, x2, &degen, floor_rel);
            for (int a = 0; a < 3; ++a) x2[a] = x[a] + 0.5 * dt * v2[a];
            auto v3 = flow_velocity(flow, t + 0.5 * dt, x2, &degen, floor_rel);
            for (int a = 0; a < 3; ++a) x2[a] = x[a] + dt * v3[a];
            auto v4 = flow_velocity(flow, t + dt, x2, &degen, floor_rel);
            for (int a = 0; a < 3; ++a)
                x[a] += dt / 6.0 * (v1[a] + 2 * v2[a] + 2 * v3[a] + v4[a]);
            path.at_frames[f + 1] = x;
        }
        path.degenerate = degen;
        if (degen) ++out.degenerate_count;
    }
    return out;
}

// draw n samples from rho(., t0), transport them along v = j/rho, and compare
// the final ensemble histogram with rho(., t_end)
inline BohmResult bohm_sample(const FlowField& flow, std::size_t n_samples, uint64_t seed,
                              Real floor_rel = 1e-12) {
    ENSIM_REQUIRE(flow.rho.size() >= 2, "flow window too short");
    auto starts = sample_density(flow.grid, flow.rho.front(), n_samples, seed);
    auto res = bohm_transport(flow, starts, floor_rel);
    std::vector<std::array<Real, 3>> finals(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) finals[i] = res.paths[i].at_frames.back();
    res.tv_final = total_variation_vs_density(flow.grid, finals, flow.rho.back());
    return res;
}

}  // namespace ensim
