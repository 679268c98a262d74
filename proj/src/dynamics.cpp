#include "fastflux/dynamics.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unsupported/Eigen/MatrixFunctions>

namespace fastflux {

Trajectory simulate_eps(const Network& net, double eps, const std::vector<double>& rho0,
                        double t_end, int n_steps, const Tolerances& tol) {
    const int n = net.num_nodes();
    if (static_cast<int>(rho0.size()) != n) throw NetworkError("initial datum has wrong length");
    for (double v : rho0)
        if (!std::isfinite(v)) throw NetworkError("non-finite initial datum");

    const RateVector rates = assemble_rates(net, eps);
    const Eigen::MatrixXd l = drift_matrix(net, rates);
    const double dt = t_end / n_steps;
    const Eigen::MatrixXd propagator = (dt * l).exp();
    if (!propagator.allFinite()) throw NetworkError("matrix exponential failed (non-finite)");

    Trajectory traj;
    traj.frame = Frame::Raw;
    traj.epsilon = eps;
    traj.grid = uniform_grid(t_end, n_steps);
    traj.node_density.resize(n, n_steps + 1);
    traj.edge_flux.resize(net.num_edges(), n_steps + 1);

    Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(rho0.data(), n);
    const double mass0 = rho.sum();
    for (int k = 0; k <= n_steps; ++k) {
        if (k > 0) rho = propagator * rho;
        traj.node_density.col(k) = rho;
        for (int r = 0; r < net.num_edges(); ++r)
            traj.edge_flux(r, k) = rates.values[r] * rho(net.edge(r).src);
    }
    const double drift =
        std::abs(traj.node_density.col(n_steps).sum() - mass0) / std::max(1.0, std::abs(mass0));
    if (drift > tol.mass_conservation)
        throw NetworkError("mass conservation violated: relative drift " + std::to_string(drift));
    return traj;
}

Trajectory rescale(const Trajectory& raw, const StationaryDist& pi, const Decomposition& d,
                   const Network& net) {
    if (raw.frame != Frame::Raw) throw NetworkError("rescale expects a Raw-frame trajectory");
    const double eps = raw.epsilon;
    Trajectory out = raw;
    out.frame = Frame::Rescaled;
    for (int x = 0; x < net.num_nodes(); ++x)
        out.node_density.row(x) = raw.node_density.row(x) / pi.pi[x];
    const double sqrt_eps = std::sqrt(eps);
    for (int r = 0; r < net.num_edges(); ++r) {
        if (d.edge_class.kind[r] != EdgeKind::FastCycle) continue;
        const Edge& e = net.edge(r);
        const double keps = e.rate / eps;
        out.edge_flux.row(r) =
            sqrt_eps * (raw.edge_flux.row(r) - keps * pi.pi[e.src] * out.node_density.row(e.src));
    }
    return out;
}

Trajectory unrescale(const Trajectory& rescaled, const StationaryDist& pi, const Decomposition& d,
                     const Network& net) {
    if (rescaled.frame != Frame::Rescaled)
        throw NetworkError("unrescale expects a Rescaled-frame trajectory");
    const double eps = rescaled.epsilon;
    Trajectory out = rescaled;
    out.frame = Frame::Raw;
    for (int x = 0; x < net.num_nodes(); ++x)
        out.node_density.row(x) = rescaled.node_density.row(x) * pi.pi[x];
    const double sqrt_eps = std::sqrt(eps);
    for (int r = 0; r < net.num_edges(); ++r) {
        if (d.edge_class.kind[r] != EdgeKind::FastCycle) continue;
        const Edge& e = net.edge(r);
        const double keps = e.rate / eps;
        out.edge_flux.row(r) = keps * pi.pi[e.src] * rescaled.node_density.row(e.src) +
                               rescaled.edge_flux.row(r) / sqrt_eps;
    }
    return out;
}

int EffectiveSystem::coord_of_node(int x, const Decomposition& d) const {
    for (size_t i = 0; i < v0slow_nodes.size(); ++i)
        if (v0slow_nodes[i] == x) return static_cast<int>(i);
    const int c = d.component_of(x);
    if (c >= 0) return static_cast<int>(v0slow_nodes.size()) + c;
    return -1;  // V1 node
}

Eigen::VectorXd EffectiveSystem::to_coords(const std::vector<double>& u_nodes,
                                           const Decomposition& d) const {
    Eigen::VectorXd z(dim_z());
    for (size_t i = 0; i < v0slow_nodes.size(); ++i) z(i) = u_nodes[v0slow_nodes[i]];
    for (int c = 0; c < num_components; ++c) {
        const auto& comp = d.fast_components.components[c];
        double num = 0, den = 0;
        for (int x : comp) {
            num += d.node_class.pi_limit[x] * u_nodes[x];
            den += d.node_class.pi_limit[x];
        }
        z(static_cast<int>(v0slow_nodes.size()) + c) = num / den;
    }
    return z;
}

std::vector<double> EffectiveSystem::to_nodes(const Eigen::VectorXd& z,
                                              const Decomposition& d) const {
    std::vector<double> u(d.node_class.kind.size(), 0.0);
    for (size_t i = 0; i < v0slow_nodes.size(); ++i) u[v0slow_nodes[i]] = z(i);
    for (int c = 0; c < num_components; ++c)
        for (int x : d.fast_components.components[c])
            u[x] = z(static_cast<int>(v0slow_nodes.size()) + c);
    if (!v1_nodes.empty()) {
        const Eigen::VectorXd v = reconstruct * z;
        for (size_t i = 0; i < v1_nodes.size(); ++i) u[v1_nodes[i]] = v(i);
    }
    return u;
}

EffectiveSystem build_effective(const Network& net, const Decomposition& d) {
    EffectiveSystem sys;
    for (int x = 0; x < net.num_nodes(); ++x) {
        if (d.node_class.kind[x] == NodeKind::V0Slow) sys.v0slow_nodes.push_back(x);
        if (d.node_class.kind[x] == NodeKind::V1) sys.v1_nodes.push_back(x);
    }
    sys.num_components = static_cast<int>(d.fast_components.components.size());
    const int nz = sys.dim_z();
    const int nv = static_cast<int>(sys.v1_nodes.size());

    for (int x : sys.v0slow_nodes) {
        sys.coord_names.push_back(net.node_name(x));
        sys.coord_mass.push_back(d.node_class.pi_limit[x]);
    }
    for (int c = 0; c < sys.num_components; ++c) {
        std::string name = "{";
        for (size_t i = 0; i < d.fast_components.components[c].size(); ++i)
            name += (i ? "," : "") + net.node_name(d.fast_components.components[c][i]);
        sys.coord_names.push_back(name + "}");
        sys.coord_mass.push_back(d.fast_components.pi_c[c]);
    }

    std::vector<int> v_index(net.num_nodes(), -1);
    for (int i = 0; i < nv; ++i) v_index[sys.v1_nodes[i]] = i;

    sys.a00 = Eigen::MatrixXd::Zero(nz, nz);
    sys.a10 = Eigen::MatrixXd::Zero(nz, nv);
    sys.a01 = Eigen::MatrixXd::Zero(nv, nz);
    sys.a11 = Eigen::MatrixXd::Zero(nv, nv);

    const auto& pi = d.node_class.pi_limit;
    const auto& pit = d.node_class.pi_tilde;

    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        const EdgeKind kind = d.edge_class.kind[r];
        if (kind == EdgeKind::FastCycle) continue;  // internal to a component
        const int zsrc = d.in_v1(e.src) ? -1 : sys.coord_of_node(e.src, d);
        const int zdst = d.in_v1(e.dst) ? -1 : sys.coord_of_node(e.dst, d);
        if (kind == EdgeKind::Slow) {
            const double w = e.rate * pi[e.src];  // j_r = kappa pi_{r-} u_{r-}
            if (zdst >= 0) sys.a00(zdst, zsrc) += w / sys.coord_mass[zdst];
            else sys.a01(v_index[e.dst], zsrc) += w / pit[e.dst];
            sys.a00(zsrc, zsrc) -= w / sys.coord_mass[zsrc];
        } else {  // damped: j_r = kappa pi~_{r-} u_{r-}
            const double w = e.rate * pit[e.src];
            const int vi = v_index[e.src];
            if (zdst >= 0) sys.a10(zdst, vi) += w / sys.coord_mass[zdst];
            else sys.a11(v_index[e.dst], vi) += w / pit[e.dst];
            sys.a11(vi, vi) -= e.rate;
        }
    }

    if (nv > 0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.a11);
        const Eigen::MatrixXd& u = lu.matrixLU();
        double min_piv = std::numeric_limits<double>::infinity(), max_piv = 0;
        for (int i = 0; i < nv; ++i) {
            min_piv = std::min(min_piv, std::abs(u(i, i)));
            max_piv = std::max(max_piv, std::abs(u(i, i)));
        }
        sys.a11_min_pivot = min_piv;
        if (!lu.isInvertible() || min_piv <= 1e-12 * std::max(1.0, max_piv))
            throw NetworkError("V1 block of the limit system is numerically singular "
                               "(should be impossible for an accepted network)");
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.a11);
        sys.a11_condition =
            svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
        sys.reconstruct = -lu.solve(sys.a01);
    } else {
        sys.reconstruct = Eigen::MatrixXd::Zero(0, nz);
        sys.a11_condition = 1.0;
        sys.a11_min_pivot = std::numeric_limits<double>::infinity();
    }
    return sys;
}

std::vector<double> well_prepare(const std::vector<double>& u0, const Decomposition& d,
                                 const EffectiveSystem& sys) {
    for (double v : u0)
        if (!std::isfinite(v)) throw NetworkError("non-finite datum");
    const Eigen::VectorXd z = sys.to_coords(u0, d);
    return sys.to_nodes(z, d);
}

Trajectory simulate_effective(const EffectiveSystem& sys, const Network& net,
                              const Decomposition& d, const std::vector<double>& u0, double t_end,
                              int n_steps, const Tolerances& tol) {
    const std::vector<double> wp = well_prepare(u0, d, sys);
    double dev = 0, scale = 0;
    for (size_t x = 0; x < u0.size(); ++x) {
        dev = std::max(dev, std::abs(u0[x] - wp[x]));
        scale = std::max(scale, std::abs(u0[x]));
    }
    if (dev > tol.well_prepared * (1.0 + scale))
        throw NetworkError("initial datum is not well-prepared (deviation " + std::to_string(dev) +
                           ")");

    const double dt = t_end / n_steps;
    const Eigen::MatrixXd m = sys.a00 + sys.a10 * sys.reconstruct;
    const Eigen::MatrixXd prop = (dt * m).exp();

    Trajectory traj;
    traj.frame = Frame::Limit;
    traj.epsilon = 0.0;
    traj.grid = uniform_grid(t_end, n_steps);
    traj.node_density.resize(net.num_nodes(), n_steps + 1);
    traj.edge_flux = Eigen::MatrixXd::Zero(net.num_edges(), n_steps + 1);

    Eigen::VectorXd z = sys.to_coords(wp, d);
    for (int k = 0; k <= n_steps; ++k) {
        if (k > 0) z = prop * z;
        const std::vector<double> u = sys.to_nodes(z, d);
        for (int x = 0; x < net.num_nodes(); ++x) traj.node_density(x, k) = u[x];
        for (int r = 0; r < net.num_edges(); ++r) {
            const Edge& e = net.edge(r);
            switch (d.edge_class.kind[r]) {
                case EdgeKind::Slow:
                    traj.edge_flux(r, k) = e.rate * d.node_class.pi_limit[e.src] * u[e.src];
                    break;
                case EdgeKind::DampedCycle:
                case EdgeKind::DampedNoCycle:
                    traj.edge_flux(r, k) = e.rate * d.node_class.pi_tilde[e.src] * u[e.src];
                    break;
                case EdgeKind::FastCycle:
                    traj.edge_flux(r, k) = 0.0;  // j-tilde vanishes on the limit flow
                    break;
            }
        }
    }
    return traj;
}

double limit_continuity_residual(const Trajectory& traj, const Network& net,
                                 const Decomposition& d) {
    if (traj.frame != Frame::Limit) throw NetworkError("expected a Limit-frame trajectory");
    const int npts = traj.points();
    const auto& pi = d.node_class.pi_limit;
    double resid = 0.0;

    // Atom inflow/outflow per node and half-open interval (t_k, t_{k+1}].
    auto atom_net_inflow = [&](int x, double lo, double hi) {
        double s = 0;
        for (const Atom& a : traj.atoms) {
            if (!(a.time > lo && a.time <= hi) && !(lo == 0.0 && a.time == 0.0)) continue;
            for (const auto& [r, w] : a.edge_weight) {
                if (!is_damped(d.edge_class.kind[r])) continue;
                if (net.edge(r).dst == x) s += w;
                if (net.edge(r).src == x) s -= w;
            }
        }
        return s;
    };

    // V0slow rows and component rows, mild form per interval.
    auto flux_net_inflow_v0 = [&](const std::vector<int>& nodes, int k) {
        double lo = 0, hi = 0;  // trapezoid of slow-in + damped-in - slow-out
        for (int r = 0; r < net.num_edges(); ++r) {
            const Edge& e = net.edge(r);
            const EdgeKind kind = d.edge_class.kind[r];
            if (kind == EdgeKind::FastCycle) continue;
            double sign = 0;
            const bool dst_in = std::find(nodes.begin(), nodes.end(), e.dst) != nodes.end();
            const bool src_in = std::find(nodes.begin(), nodes.end(), e.src) != nodes.end();
            if (dst_in) sign += 1;
            if (src_in && kind == EdgeKind::Slow) sign -= 1;
            if (sign == 0) continue;
            lo += sign * traj.edge_flux(r, k);
            hi += sign * traj.edge_flux(r, k + 1);
        }
        return 0.5 * (traj.grid[k + 1] - traj.grid[k]) * (lo + hi);
    };

    for (int k = 0; k + 1 < npts; ++k) {
        for (int x = 0; x < net.num_nodes(); ++x) {
            if (d.node_class.kind[x] != NodeKind::V0Slow) continue;
            const double lhs = pi[x] * (traj.node_density(x, k + 1) - traj.node_density(x, k));
            const double rhs = flux_net_inflow_v0({x}, k) +
                               atom_net_inflow(x, traj.grid[k], traj.grid[k + 1]);
            resid = std::max(resid, std::abs(lhs - rhs));
        }
        for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
            const auto& comp = d.fast_components.components[c];
            double dlhs = 0;
            for (int x : comp) dlhs += pi[x] * (traj.node_density(x, k + 1) - traj.node_density(x, k));
            double rhs = flux_net_inflow_v0(comp, k);
            for (int x : comp) rhs += atom_net_inflow(x, traj.grid[k], traj.grid[k + 1]);
            resid = std::max(resid, std::abs(dlhs - rhs));
        }
    }

    // u_x = u_c on components; div j-tilde = 0 per V0fcyc node (pointwise).
    for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
        const auto& comp = d.fast_components.components[c];
        for (int k = 0; k < npts; ++k) {
            double num = 0, den = 0;
            for (int x : comp) {
                num += pi[x] * traj.node_density(x, k);
                den += pi[x];
            }
            const double uc = num / den;
            for (int x : comp) resid = std::max(resid, std::abs(traj.node_density(x, k) - uc));
        }
    }
    for (int x = 0; x < net.num_nodes(); ++x) {
        if (d.node_class.kind[x] != NodeKind::V0Fcyc) continue;
        for (int k = 0; k < npts; ++k) {
            double div = 0;
            for (int r = 0; r < net.num_edges(); ++r) {
                if (d.edge_class.kind[r] != EdgeKind::FastCycle) continue;
                if (net.edge(r).src == x) div += traj.edge_flux(r, k);
                if (net.edge(r).dst == x) div -= traj.edge_flux(r, k);
            }
            resid = std::max(resid, std::abs(div));
        }
    }

    // V1 rows: algebraic, density part pointwise plus atom balance per time.
    for (int x = 0; x < net.num_nodes(); ++x) {
        if (!d.in_v1(x)) continue;
        for (int k = 0; k < npts; ++k) {
            double bal = 0;
            for (int r = 0; r < net.num_edges(); ++r) {
                const Edge& e = net.edge(r);
                const EdgeKind kind = d.edge_class.kind[r];
                if (kind == EdgeKind::Slow && e.dst == x) bal += traj.edge_flux(r, k);
                if (is_damped(kind) && e.dst == x) bal += traj.edge_flux(r, k);
                if (is_damped(kind) && e.src == x) bal -= traj.edge_flux(r, k);
            }
            resid = std::max(resid, std::abs(bal));
        }
        for (const Atom& a : traj.atoms) {
            double bal = 0;
            for (const auto& [r, w] : a.edge_weight) {
                if (!is_damped(d.edge_class.kind[r])) continue;
                if (net.edge(r).dst == x) bal += w;
                if (net.edge(r).src == x) bal -= w;
            }
            resid = std::max(resid, std::abs(bal));
        }
    }
    return resid;
}

std::vector<ComponentEquilibration> equilibration_diagnostic(const Trajectory& raw,
                                                             const Network& net,
                                                             const Decomposition& d, double eps,
                                                             double t0) {
    if (raw.frame != Frame::Raw) throw NetworkError("expected a Raw-frame trajectory");
    const int npts = raw.points();
    std::vector<ComponentEquilibration> out;

    for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
        const auto& comp = d.fast_components.components[c];
        const int m = static_cast<int>(comp.size());
        std::vector<int> fcyc_edges;
        for (int r = 0; r < net.num_edges(); ++r)
            if (d.edge_class.kind[r] == EdgeKind::FastCycle &&
                d.component_of(net.edge(r).src) == static_cast<int>(c))
                fcyc_edges.push_back(r);
        const GeneratorMatrix gen = subgraph_generator(net, comp, fcyc_edges);
        ComponentEquilibration ce;
        ce.component = static_cast<int>(c);
        ce.lambda = generator_negativity_bound(gen);

        const Eigen::MatrixXd basis = column_space_basis(gen.entries);
        Eigen::MatrixXd rho(m, npts);
        for (int i = 0; i < m; ++i) rho.row(i) = raw.node_density.row(comp[i]);
        const Eigen::MatrixXd perp = basis * (basis.transpose() * rho);

        ce.perp_norm.resize(npts);
        double max_inf = 0;
        for (int k = 0; k < npts; ++k) {
            ce.perp_norm[k] = perp.col(k).norm();
            max_inf = std::max(max_inf, perp.col(k).lpNorm<Eigen::Infinity>());
            if (raw.grid[k] >= t0) ce.sup_perp = std::max(ce.sup_perp, ce.perp_norm[k]);
        }

        // forcing g(t) = 2 M (|div j|_1 + |div j~|_1 / sqrt(eps)) on the component
        Eigen::VectorXd g = Eigen::VectorXd::Zero(npts);
        const double sqrt_eps = std::sqrt(eps);
        for (int k = 0; k < npts; ++k) {
            double div_slow = 0, div_fast = 0;
            for (int i = 0; i < m; ++i) {
                const int x = comp[i];
                double dj = 0, djt = 0;
                for (int r = 0; r < net.num_edges(); ++r) {
                    const Edge& e = net.edge(r);
                    const EdgeKind kind = d.edge_class.kind[r];
                    if (kind == EdgeKind::Slow) {
                        if (e.src == x) dj += raw.edge_flux(r, k);
                        if (e.dst == x) dj -= raw.edge_flux(r, k);
                    } else if (is_damped(kind)) {
                        if (e.dst == x) dj -= raw.edge_flux(r, k);
                    } else {  // fast cycle: centered flux
                        const double jt = sqrt_eps * (raw.edge_flux(r, k) -
                                                      (e.rate / eps) * raw.node_density(e.src, k));
                        if (e.src == x) djt += jt;
                        if (e.dst == x) djt -= jt;
                    }
                }
                div_slow += std::abs(dj);
                div_fast += std::abs(djt);
            }
            g(k) = 2.0 * max_inf * (div_slow + div_fast / sqrt_eps);
        }

        // |rho_perp(t)|^2 <= |rho_perp(0)|^2 e^{2 lambda t/eps}
        //                    + int_0^t e^{2 lambda (t-s)/eps} g(s) ds
        // (variation-of-constants form of the Gronwall estimate).
        const double rate = 2.0 * ce.lambda / eps;
        double duhamel = 0.0;  // int_0^{t_k} e^{rate (t_k - s)} g(s) ds
        double ratio = 0.0;
        const double head0 = ce.perp_norm[0] * ce.perp_norm[0];
        for (int k = 0; k < npts; ++k) {
            if (k > 0) {
                const double dt = raw.grid[k] - raw.grid[k - 1];
                const double decay = std::exp(rate * dt);
                duhamel = duhamel * decay + 0.5 * dt * (g(k - 1) * decay + g(k));
            }
            const double envelope = head0 * std::exp(rate * raw.grid[k]) + duhamel;
            const double actual = ce.perp_norm[k] * ce.perp_norm[k];
            if (envelope > 1e-300) ratio = std::max(ratio, actual / envelope);
        }
        ce.envelope_max_ratio = ratio;

        // decay-rate fit over the first few e-foldings of |rho_perp|^2
        std::vector<double> ts, ys;
        for (int k = 0; k < npts; ++k) {
            const double v = ce.perp_norm[k] * ce.perp_norm[k];
            if (v < head0 * std::exp(-6.0) || v <= 0) break;
            ts.push_back(raw.grid[k]);
            ys.push_back(std::log(v));
        }
        if (ts.size() >= 3) {
            double st = 0, sy = 0, stt = 0, sty = 0;
            for (size_t i = 0; i < ts.size(); ++i) {
                st += ts[i];
                sy += ys[i];
                stt += ts[i] * ts[i];
                sty += ts[i] * ys[i];
            }
            const double nfit = static_cast<double>(ts.size());
            ce.fitted_rate = (nfit * sty - st * sy) / (nfit * stt - st * st);
        }
        out.push_back(std::move(ce));
    }
    return out;
}

}  // namespace fastflux
