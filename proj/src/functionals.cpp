#include "fastflux/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <nlohmann/json.hpp>

#include "fastflux/dynamics.hpp"

namespace fastflux {

ExtReal rel_entropy(double a, double b) {
    if (a < 0 || b < 0 || std::isnan(a) || std::isnan(b)) return ExtReal::infinity();
    if (a == 0) return ExtReal::of(b);
    if (b == 0) return ExtReal::infinity();
    return ExtReal::of(a * std::log(a / b) - a + b);
}

double young(double a) {
    return a * std::asinh(0.5 * a) - 2.0 * std::sqrt(1.0 + 0.25 * a * a) + 2.0;
}

double young_conjugate(double p) { return 2.0 * (std::cosh(p) - 1.0); }

namespace {

// Amemiya objective (1 + sum int young(a j))/a is unimodal in a > 0.
double golden_min(const std::function<double(double)>& f, double lo, double hi) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        }
    }
    return std::min(f1, f2);
}

}  // namespace

double orlicz_norm(const std::vector<double>& grid, const Eigen::MatrixXd& rows) {
    if (rows.size() == 0 || rows.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    auto objective = [&](double log_a) {
        const double a = std::exp(log_a);
        double acc = 1.0;
        for (int r = 0; r < rows.rows(); ++r) {
            Eigen::VectorXd vals(rows.cols());
            for (int k = 0; k < rows.cols(); ++k) vals(k) = young(a * rows(r, k));
            acc += trapezoid(grid, vals);
        }
        return acc / a;
    };
    return golden_min(objective, -18.0, 18.0);
}

double orlicz_norm(const std::vector<double>& grid, const Eigen::VectorXd& row) {
    return orlicz_norm(grid, Eigen::MatrixXd(row.transpose()));
}

ExtReal eval_I0_eps(const std::vector<double>& u0, const StationaryDist& pi) {
    ExtReal acc = ExtReal::of(0.0);
    for (size_t x = 0; x < u0.size(); ++x) acc += rel_entropy(pi.pi[x] * u0[x], pi.pi[x]);
    return acc;
}

ExtReal eval_I0_limit(const std::vector<double>& u0, const Decomposition& d) {
    ExtReal acc = ExtReal::of(0.0);
    for (size_t x = 0; x < u0.size(); ++x)
        if (d.node_class.kind[x] == NodeKind::V0Slow)
            acc += rel_entropy(d.node_class.pi_limit[x] * u0[x], d.node_class.pi_limit[x]);
    for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
        double num = 0;
        for (int x : d.fast_components.components[c]) num += d.node_class.pi_limit[x] * u0[x];
        acc += rel_entropy(num, d.fast_components.pi_c[c]);
    }
    return acc;
}

namespace {

ExtReal trapezoid_ext(const std::vector<double>& grid, const std::vector<ExtReal>& vals) {
    ExtReal acc = ExtReal::of(0.0);
    for (size_t k = 0; k + 1 < grid.size(); ++k) {
        if (!vals[k].finite() || !vals[k + 1].finite()) return ExtReal::infinity();
        acc += 0.5 * (grid[k + 1] - grid[k]) * (vals[k].value() + vals[k + 1].value());
    }
    return acc;
}

}  // namespace

FunctionalReport eval_J_eps(const Trajectory& traj, const Network& net, const Decomposition& d,
                            const StationaryDist& pi, const Tolerances& tol) {
    if (traj.frame != Frame::Rescaled)
        throw NetworkError("eval_J_eps expects a Rescaled-frame trajectory");
    const double eps = traj.epsilon;
    if (std::abs(pi.epsilon - eps) > 1e-15 * std::max(1.0, eps))
        throw NetworkError("stationary distribution epsilon mismatch");
    const int npts = traj.points();
    const double sqrt_eps = std::sqrt(eps);

    FunctionalReport rep;
    rep.frame = Frame::Rescaled;
    rep.epsilon = eps;
    rep.j_slow = rep.j_damp = rep.j_fcyc = ExtReal::of(0.0);

    // the continuity equations act on the full (unrescaled) fluxes
    Eigen::MatrixXd full_flux(net.num_edges(), npts);
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        if (d.edge_class.kind[r] == EdgeKind::FastCycle) {
            for (int k = 0; k < npts; ++k)
                full_flux(r, k) = (e.rate / eps) * pi.pi[e.src] * traj.node_density(e.src, k) +
                                  traj.edge_flux(r, k) / sqrt_eps;
        } else {
            full_flux.row(r) = traj.edge_flux.row(r);
        }
    }
    // the gate is scaled by the L1 mass of the stored (rescaled) fluxes
    double flux_l1 = 0;
    for (int r = 0; r < net.num_edges(); ++r)
        flux_l1 += trapezoid_abs(traj.grid, traj.edge_flux.row(r).transpose());
    rep.flux_l1 = flux_l1;

    std::vector<ExtReal> vals(npts);
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        switch (d.edge_class.kind[r]) {
            case EdgeKind::Slow:
                for (int k = 0; k < npts; ++k)
                    vals[k] = rel_entropy(traj.edge_flux(r, k),
                                          e.rate * pi.pi[e.src] * traj.node_density(e.src, k));
                rep.j_slow += trapezoid_ext(traj.grid, vals);
                break;
            case EdgeKind::DampedCycle:
            case EdgeKind::DampedNoCycle:
                for (int k = 0; k < npts; ++k)
                    vals[k] = rel_entropy(traj.edge_flux(r, k), (e.rate / eps) * pi.pi[e.src] *
                                                                    traj.node_density(e.src, k));
                rep.j_damp += trapezoid_ext(traj.grid, vals);
                break;
            case EdgeKind::FastCycle:
                for (int k = 0; k < npts; ++k) {
                    const double ref = (e.rate / eps) * pi.pi[e.src] * traj.node_density(e.src, k);
                    vals[k] = rel_entropy(ref + traj.edge_flux(r, k) / sqrt_eps, ref);
                }
                rep.j_fcyc += trapezoid_ext(traj.grid, vals);
                break;
        }
    }

    // mild continuity equations of the rescaled system, per interval
    double resid = 0;
    for (int k = 0; k + 1 < npts; ++k) {
        const double dt = traj.grid[k + 1] - traj.grid[k];
        for (int x = 0; x < net.num_nodes(); ++x) {
            const double lhs = pi.pi[x] * (traj.node_density(x, k + 1) - traj.node_density(x, k));
            double rhs_lo = 0, rhs_hi = 0;
            for (int r = 0; r < net.num_edges(); ++r) {
                const Edge& e = net.edge(r);
                const EdgeKind kind = d.edge_class.kind[r];
                // The per-class sums of the rescaled continuity equations
                // collapse to plain in-minus-out of the full fluxes: the edge
                // classes excluded from each row cannot touch that row's node
                // for an admissible network.
                double sign = 0;
                if (e.dst == x) sign += 1;
                if (e.src == x) sign -= 1;
                if (sign == 0) continue;
                rhs_lo += sign * full_flux(r, k);
                rhs_hi += sign * full_flux(r, k + 1);
            }
            resid = std::max(resid, std::abs(lhs - 0.5 * dt * (rhs_lo + rhs_hi)));
        }
    }
    rep.continuity_residual = resid;

    std::vector<double> u0(net.num_nodes());
    for (int x = 0; x < net.num_nodes(); ++x) u0[x] = traj.node_density(x, 0);
    rep.i0 = eval_I0_eps(u0, pi);
    rep.fisher = fisher_info(traj, net, pi);

    rep.total = rep.i0 + rep.cost_terms();
    if (resid > tol.continuity_rel * (1.0 + flux_l1)) rep.total = ExtReal::infinity();
    return rep;
}

FunctionalReport eval_J_limit(const Trajectory& traj, const Network& net, const Decomposition& d,
                              const Tolerances& tol) {
    if (traj.frame != Frame::Limit)
        throw NetworkError("eval_J_limit expects a Limit-frame trajectory");
    const int npts = traj.points();
    const auto& pi = d.node_class.pi_limit;
    const auto& pit = d.node_class.pi_tilde;

    FunctionalReport rep;
    rep.frame = Frame::Limit;
    rep.j_slow = rep.j_damp = rep.j_fcyc = ExtReal::of(0.0);

    double flux_l1 = 0;
    for (int r = 0; r < net.num_edges(); ++r)
        flux_l1 += trapezoid_abs(traj.grid, traj.edge_flux.row(r).transpose());
    for (const Atom& a : traj.atoms)
        for (const auto& [r, w] : a.edge_weight) flux_l1 += std::abs(w);
    rep.flux_l1 = flux_l1;

    std::vector<ExtReal> vals(npts);
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        switch (d.edge_class.kind[r]) {
            case EdgeKind::Slow:
                for (int k = 0; k < npts; ++k)
                    vals[k] = rel_entropy(traj.edge_flux(r, k),
                                          e.rate * pi[e.src] * traj.node_density(e.src, k));
                rep.j_slow += trapezoid_ext(traj.grid, vals);
                break;
            case EdgeKind::DampedCycle:
            case EdgeKind::DampedNoCycle: {
                for (int k = 0; k < npts; ++k)
                    vals[k] = rel_entropy(traj.edge_flux(r, k),
                                          e.rate * pit[e.src] * traj.node_density(e.src, k));
                rep.j_damp += trapezoid_ext(traj.grid, vals);
                // atoms: per-atom Radon-Nikodym against the source-density atom
                for (const Atom& a : traj.atoms) {
                    const auto jw = a.edge_weight.find(r);
                    const auto uw = a.node_weight.find(e.src);
                    const double wj = (jw == a.edge_weight.end()) ? 0.0 : jw->second;
                    const double wu = (uw == a.node_weight.end()) ? 0.0 : uw->second;
                    if (wj > 0 && wu <= 0) {
                        rep.j_damp = ExtReal::infinity();  // j not << u
                        continue;
                    }
                    if (wu > 0) {
                        const double base = e.rate * pit[e.src] * wu;
                        rep.j_damp += rel_entropy(wj, base);
                    }
                }
                break;
            }
            case EdgeKind::FastCycle:
                for (int k = 0; k < npts; ++k) {
                    const double jt = traj.edge_flux(r, k);
                    const double den = e.rate * pi[e.src] * traj.node_density(e.src, k);
                    if (den > 0)
                        vals[k] = ExtReal::of(0.5 * jt * jt / den);
                    else
                        vals[k] = (jt == 0) ? ExtReal::of(0.0) : ExtReal::infinity();
                }
                rep.j_fcyc += trapezoid_ext(traj.grid, vals);
                break;
        }
    }

    std::vector<double> u0(net.num_nodes());
    for (int x = 0; x < net.num_nodes(); ++x) u0[x] = traj.node_density(x, 0);
    rep.i0 = eval_I0_limit(u0, d);

    rep.continuity_residual = limit_continuity_residual(traj, net, d);
    rep.total = rep.i0 + rep.cost_terms();
    if (rep.continuity_residual > tol.continuity_rel * (1.0 + flux_l1))
        rep.total = ExtReal::infinity();
    return rep;
}

double fisher_info(const Trajectory& traj, const Network& net, const StationaryDist& pi) {
    if (traj.frame != Frame::Rescaled)
        throw NetworkError("fisher_info expects a Rescaled-frame trajectory");
    const RateVector rates = assemble_rates(net, traj.epsilon);
    Eigen::VectorXd vals(traj.points());
    double acc = 0;
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        const double w = rates.values[r] * pi.pi[e.src];
        for (int k = 0; k < traj.points(); ++k) {
            const double a = std::sqrt(std::max(0.0, traj.node_density(e.src, k)));
            const double b = std::sqrt(std::max(0.0, traj.node_density(e.dst, k)));
            vals(k) = (a - b) * (a - b);
        }
        acc += 0.5 * w * trapezoid(traj.grid, vals);
    }
    return acc;
}

double fir_check(const Trajectory& traj, const Network& net, const Decomposition& d,
                 const StationaryDist& pi, const FunctionalReport& rep) {
    (void)d;
    if (!rep.cost_terms().finite()) return HUGE_VAL;
    const int npts = traj.points();
    const RateVector rates = assemble_rates(net, traj.epsilon);

    // running Fisher information FI[0, t_k]
    Eigen::VectorXd fi_rate = Eigen::VectorXd::Zero(npts);
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        const double w = 0.5 * rates.values[r] * pi.pi[e.src];
        for (int k = 0; k < npts; ++k) {
            const double a = std::sqrt(std::max(0.0, traj.node_density(e.src, k)));
            const double b = std::sqrt(std::max(0.0, traj.node_density(e.dst, k)));
            fi_rate(k) += w * (a - b) * (a - b);
        }
    }

    std::vector<double> u(net.num_nodes());
    auto i0_at = [&](int k) {
        for (int x = 0; x < net.num_nodes(); ++x) u[x] = traj.node_density(x, k);
        return eval_I0_eps(u, pi);
    };
    const ExtReal i0_0 = i0_at(0);
    if (!i0_0.finite()) return HUGE_VAL;
    const double head = 0.5 * i0_0.value() + rep.cost_terms().value();

    double margin = HUGE_VAL, fi_accum = 0;
    for (int k = 0; k < npts; ++k) {
        if (k > 0)
            fi_accum +=
                0.5 * (traj.grid[k] - traj.grid[k - 1]) * (fi_rate(k - 1) + fi_rate(k));
        const ExtReal i0_t = i0_at(k);
        if (!i0_t.finite()) return -HUGE_VAL;  // infinite free energy at positive time
        margin = std::min(margin, head - 0.5 * i0_t.value() - fi_accum);
    }
    return margin;
}

std::string report_to_json(const FunctionalReport& rep) {
    nlohmann::json j;
    j["frame"] = to_string(rep.frame);
    if (rep.frame != Frame::Limit) j["eps"] = rep.epsilon;
    auto put = [&](const char* key, const ExtReal& v) {
        if (v.finite())
            j[key] = v.value();
        else
            j[key] = "inf";
    };
    put("i0", rep.i0);
    put("j_slow", rep.j_slow);
    put("j_damp", rep.j_damp);
    put("j_fcyc", rep.j_fcyc);
    j["fisher"] = rep.fisher;
    j["continuity_residual"] = rep.continuity_residual;
    j["flux_l1"] = rep.flux_l1;
    put("total", rep.total);
    return j.dump(2);
}

}  // namespace fastflux
