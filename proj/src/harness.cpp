#include "fastflux/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fastflux {

StudyConfig study_config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    StudyConfig cfg;
    if (j.contains("network")) cfg.network_path = j["network"].get<std::string>();
    if (j.contains("eps")) cfg.eps_list = j["eps"].get<std::vector<double>>();
    if (j.contains("t_end")) cfg.t_end = j["t_end"].get<double>();
    if (j.contains("steps")) cfg.n_steps = j["steps"].get<int>();
    if (j.contains("u0")) cfg.u0 = j["u0"].get<std::vector<double>>();
    if (j.contains("delta_power")) cfg.delta_power = j["delta_power"].get<double>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("continuity_rel")) cfg.tol.continuity_rel = j["continuity_rel"].get<double>();
    for (size_t i = 0; i + 1 < cfg.eps_list.size(); ++i)
        if (!(cfg.eps_list[i] > cfg.eps_list[i + 1] && cfg.eps_list[i + 1] > 0))
            throw NetworkError("eps list must be strictly decreasing and positive");
    return cfg;
}

std::vector<std::vector<double>> test_function_bundle(const std::vector<double>& grid) {
    const double t_end = grid.back();
    auto bump = [](double t, double c, double w) {
        const double y = (t - c) / w;
        return (std::abs(y) < 1.0) ? std::exp(1.0 - 1.0 / (1.0 - y * y)) : 0.0;
    };
    std::vector<std::function<double(double)>> fns = {
        [](double) { return 1.0; },
        [&](double t) { return t / t_end; },
        [&](double t) { return (t / t_end) * (t / t_end); },
        [&](double t) { return std::cos(2 * M_PI * t / t_end); },
        [&](double t) { return std::sin(2 * M_PI * t / t_end); },
        [&](double t) { return std::cos(4 * M_PI * t / t_end); },
        [&](double t) { return std::sin(4 * M_PI * t / t_end); },
        [&](double t) { return std::exp(-3 * t / t_end); },
        [&](double t) { return bump(t, 0.25 * t_end, t_end / 6); },
        [&](double t) { return bump(t, 0.50 * t_end, t_end / 6); },
        [&](double t) { return bump(t, 0.75 * t_end, t_end / 6); },
        [&](double t) { return 1.0 - t / t_end; },
    };
    std::vector<std::vector<double>> out;
    for (auto& f : fns) {
        std::vector<double> row(grid.size());
        for (size_t k = 0; k < grid.size(); ++k) row[k] = f(grid[k]);
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

double pairing_error(const std::vector<double>& grid,
                     const std::vector<std::vector<double>>& bundle, const Eigen::VectorXd& diff) {
    double worst = 0;
    Eigen::VectorXd prod(diff.size());
    for (const auto& phi : bundle) {
        for (int k = 0; k < diff.size(); ++k) prod(k) = phi[k] * diff(k);
        worst = std::max(worst, std::abs(trapezoid(grid, prod)));
    }
    return worst;
}

double loglog_order(const std::vector<double>& eps, const std::vector<double>& err, size_t lo,
                    size_t hi) {
    // slope of log err against log eps over indices [lo, hi)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (size_t i = lo; i < hi; ++i) {
        if (!(err[i] > 0)) continue;
        const double x = std::log(eps[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> default_datum(const Network& net) {
    std::vector<double> u(net.num_nodes());
    for (int x = 0; x < net.num_nodes(); ++x)
        u[x] = 1.0 + 0.5 * std::sin(2.0 * M_PI * (x + 1) / net.num_nodes()) + 0.1 * x;
    return u;
}

}  // namespace

ConvergenceReport convergence_study(const Network& net, const Decomposition& d,
                                    const StudyConfig& cfg) {
    const EffectiveSystem sys = build_effective(net, d);
    std::vector<double> u0 = cfg.u0.empty() ? default_datum(net) : cfg.u0;
    u0 = well_prepare(u0, d, sys);
    const Trajectory eff = simulate_effective(sys, net, d, u0, cfg.t_end, cfg.n_steps, cfg.tol);
    const FunctionalReport limit_rep = eval_J_limit(eff, net, d, cfg.tol);
    const auto bundle = test_function_bundle(eff.grid);

    ConvergenceReport rep;
    const bool write = !cfg.out_dir.empty();
    if (write) std::filesystem::create_directories(cfg.out_dir);
    if (write) {
        std::ofstream f(cfg.out_dir + "/effective.csv");
        f << trajectory_to_csv(net, eff);
    }

    for (double eps : cfg.eps_list) {
        const StationaryDist pi = stationary_distribution(net, eps, cfg.tol);
        std::vector<double> rho0(net.num_nodes());
        for (int x = 0; x < net.num_nodes(); ++x) rho0[x] = pi.pi[x] * u0[x];
        const Trajectory raw = simulate_eps(net, eps, rho0, cfg.t_end, cfg.n_steps, cfg.tol);
        const Trajectory resc = rescale(raw, pi, d, net);
        const FunctionalReport eps_rep = eval_J_eps(resc, net, d, pi, cfg.tol);

        EpsRow row;
        row.eps = eps;
        for (int x = 0; x < net.num_nodes(); ++x) {
            const double err =
                (resc.node_density.row(x) - eff.node_density.row(x)).cwiseAbs().maxCoeff();
            if (d.node_class.kind[x] == NodeKind::V0Slow)
                row.err_v0slow_sup = std::max(row.err_v0slow_sup, err);
            if (d.in_v1(x)) {
                row.err_v1_weak = std::max(
                    row.err_v1_weak,
                    pairing_error(resc.grid, bundle,
                                  (resc.node_density.row(x) - eff.node_density.row(x))
                                      .transpose()));
                row.eps_u_v1_sup = std::max(
                    row.eps_u_v1_sup, eps * resc.node_density.row(x).cwiseAbs().maxCoeff());
            }
        }
        for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
            const Eigen::VectorXd uc = component_density(resc, pi.pi, d.fast_components.components[c]);
            const int rep_node = d.fast_components.components[c][0];
            row.err_comp_sup = std::max(
                row.err_comp_sup,
                (uc - eff.node_density.row(rep_node).transpose()).cwiseAbs().maxCoeff());
        }
        Eigen::MatrixXd jslow(0, resc.points()), jfcyc(0, resc.points());
        for (int r = 0; r < net.num_edges(); ++r) {
            const EdgeKind kind = d.edge_class.kind[r];
            if (kind == EdgeKind::Slow) {
                jslow.conservativeResize(jslow.rows() + 1, Eigen::NoChange);
                jslow.row(jslow.rows() - 1) = resc.edge_flux.row(r);
            } else if (kind == EdgeKind::FastCycle) {
                jfcyc.conservativeResize(jfcyc.rows() + 1, Eigen::NoChange);
                jfcyc.row(jfcyc.rows() - 1) = resc.edge_flux.row(r);
            } else {
                row.l1_jdamp += trapezoid_abs(resc.grid, resc.edge_flux.row(r).transpose());
                row.err_jdamp_weak = std::max(
                    row.err_jdamp_weak,
                    pairing_error(resc.grid, bundle,
                                  (resc.edge_flux.row(r) - eff.edge_flux.row(r)).transpose()));
            }
        }
        row.orlicz_jslow = orlicz_norm(resc.grid, jslow);
        row.orlicz_jfcyc = orlicz_norm(resc.grid, jfcyc);
        row.fir_margin = fir_check(resc, net, d, pi, eps_rep);
        row.cost_gap = std::abs(eps_rep.total.as_double() - limit_rep.total.as_double());
        rep.rows.push_back(row);

        if (write) {
            std::ostringstream name;
            name << cfg.out_dir << "/traj_eps_" << eps << ".csv";
            std::ofstream f(name.str());
            f << trajectory_to_csv(net, resc);
        }
    }

    std::vector<double> epss;
    for (const auto& r : rep.rows) epss.push_back(r.eps);
    auto fit = [&](const std::string& name, auto getter) {
        std::vector<double> errs;
        for (const auto& r : rep.rows) errs.push_back(getter(r));
        rep.order_all[name] = loglog_order(epss, errs, 0, errs.size());
        if (errs.size() >= 2)
            rep.order_tail[name] = loglog_order(epss, errs, errs.size() - 2, errs.size());
    };
    fit("err_v0slow_sup", [](const EpsRow& r) { return r.err_v0slow_sup; });
    fit("err_comp_sup", [](const EpsRow& r) { return r.err_comp_sup; });
    fit("err_v1_weak", [](const EpsRow& r) { return r.err_v1_weak; });
    fit("err_jdamp_weak", [](const EpsRow& r) { return r.err_jdamp_weak; });
    fit("cost_gap", [](const EpsRow& r) { return r.cost_gap; });

    if (write) {
        std::ofstream f(cfg.out_dir + "/report.json");
        f << convergence_report_json(rep);
        std::ofstream g(cfg.out_dir + "/summary.csv");
        g << convergence_summary_csv(rep);
    }
    return rep;
}

std::string convergence_report_json(const ConvergenceReport& rep) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        j["rows"].push_back({{"eps", r.eps},
                             {"err_v0slow_sup", r.err_v0slow_sup},
                             {"err_comp_sup", r.err_comp_sup},
                             {"err_v1_weak", r.err_v1_weak},
                             {"err_jdamp_weak", r.err_jdamp_weak},
                             {"orlicz_jslow", r.orlicz_jslow},
                             {"orlicz_jfcyc", r.orlicz_jfcyc},
                             {"l1_jdamp", r.l1_jdamp},
                             {"fir_margin", r.fir_margin},
                             {"cost_gap", r.cost_gap},
                             {"eps_u_v1_sup", r.eps_u_v1_sup}});
    }
    j["order_all"] = rep.order_all;
    j["order_tail"] = rep.order_tail;
    return j.dump(2);
}

std::string convergence_summary_csv(const ConvergenceReport& rep) {
    std::ostringstream os;
    os.precision(12);
    os << "eps,err_v0slow_sup,err_comp_sup,err_v1_weak,err_jdamp_weak,orlicz_jslow,orlicz_jfcyc,"
          "l1_jdamp,fir_margin,cost_gap\n";
    for (const auto& r : rep.rows)
        os << r.eps << ',' << r.err_v0slow_sup << ',' << r.err_comp_sup << ',' << r.err_v1_weak
           << ',' << r.err_jdamp_weak << ',' << r.orlicz_jslow << ',' << r.orlicz_jfcyc << ','
           << r.l1_jdamp << ',' << r.fir_margin << ',' << r.cost_gap << '\n';
    return os.str();
}

std::vector<BoundednessRow> boundedness_diagnostics(const Network& net, const Decomposition& d,
                                                    const std::vector<Trajectory>& family) {
    std::vector<BoundednessRow> rows;
    for (const Trajectory& traj : family) {
        if (traj.frame != Frame::Rescaled)
            throw NetworkError("boundedness diagnostics expect Rescaled trajectories");
        const StationaryDist pi = stationary_distribution(net, traj.epsilon);
        BoundednessRow row;
        row.eps = traj.epsilon;
        for (int x = 0; x < net.num_nodes(); ++x) {
            const double sup = traj.node_density.row(x).cwiseAbs().maxCoeff();
            switch (d.node_class.kind[x]) {
                case NodeKind::V0Slow: row.sup_u_v0slow = std::max(row.sup_u_v0slow, sup); break;
                case NodeKind::V0Fcyc: row.sup_u_fcyc = std::max(row.sup_u_fcyc, sup); break;
                case NodeKind::V1:
                    row.l1_u_v1 += trapezoid_abs(traj.grid, traj.node_density.row(x).transpose());
                    row.eps_sup_u_v1 = std::max(row.eps_sup_u_v1, traj.epsilon * sup);
                    break;
            }
        }
        for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
            const Eigen::VectorXd uc =
                component_density(traj, pi.pi, d.fast_components.components[c]);
            row.sup_u_comp = std::max(row.sup_u_comp, uc.cwiseAbs().maxCoeff());
        }
        Eigen::MatrixXd jslow(0, traj.points()), jfcyc(0, traj.points());
        for (int r = 0; r < net.num_edges(); ++r) {
            const EdgeKind kind = d.edge_class.kind[r];
            if (kind == EdgeKind::Slow) {
                jslow.conservativeResize(jslow.rows() + 1, Eigen::NoChange);
                jslow.row(jslow.rows() - 1) = traj.edge_flux.row(r);
            } else if (kind == EdgeKind::FastCycle) {
                jfcyc.conservativeResize(jfcyc.rows() + 1, Eigen::NoChange);
                jfcyc.row(jfcyc.rows() - 1) = traj.edge_flux.row(r);
            } else {
                row.l1_jdamp += trapezoid_abs(traj.grid, traj.edge_flux.row(r).transpose());
            }
        }
        row.orlicz_jslow = orlicz_norm(traj.grid, jslow);
        row.orlicz_jfcyc = orlicz_norm(traj.grid, jfcyc);
        rows.push_back(row);
    }
    return rows;
}

double worst_upward_ratio(const std::vector<double>& values) {
    double worst = 0;
    for (size_t i = 0; i + 1 < values.size(); ++i) {
        if (values[i] <= 0) continue;
        worst = std::max(worst, values[i + 1] / values[i]);
    }
    return worst;
}

namespace {

// shortest path (edge list) by BFS in the directed graph
std::vector<int> bfs_path_edges(const Network& net, int from, int to) {
    std::vector<int> prev_edge(net.num_nodes(), -1), prev_node(net.num_nodes(), -1);
    std::deque<int> queue{from};
    std::vector<bool> seen(net.num_nodes(), false);
    seen[from] = true;
    while (!queue.empty()) {
        const int x = queue.front();
        queue.pop_front();
        if (x == to) break;
        for (int r = 0; r < net.num_edges(); ++r) {
            const Edge& e = net.edge(r);
            if (e.src != x || seen[e.dst]) continue;
            seen[e.dst] = true;
            prev_edge[e.dst] = r;
            prev_node[e.dst] = x;
            queue.push_back(e.dst);
        }
    }
    if (!seen[to]) throw NetworkError("no path in a diconnected graph (bug)");
    std::vector<int> path;
    for (int x = to; x != from; x = prev_node[x]) path.push_back(prev_edge[x]);
    std::reverse(path.begin(), path.end());
    return path;
}

// closed walk covering every damped edge at least once; returns per-edge
// multiplicities n(r)
std::vector<int> covering_walk_multiplicity(const Network& net, const Decomposition& d) {
    std::vector<int> mult(net.num_edges(), 0);
    std::vector<int> damped;
    for (int r = 0; r < net.num_edges(); ++r)
        if (is_damped(d.edge_class.kind[r])) damped.push_back(r);
    if (damped.empty()) return mult;
    int cursor = net.edge(damped[0]).src;
    const int start = cursor;
    for (int r : damped) {
        for (int q : bfs_path_edges(net, cursor, net.edge(r).src)) ++mult[q];
        ++mult[r];
        cursor = net.edge(r).dst;
    }
    for (int q : bfs_path_edges(net, cursor, start)) ++mult[q];
    return mult;
}

// convolution with a discrete Gaussian of std `delta` in time units;
// boundary handling per the extension rule (constant or zero)
Eigen::VectorXd mollify_row(const Eigen::VectorXd& row, double dt, double delta,
                            bool constant_extend) {
    if (delta <= 0.5 * dt) return row;
    const int half = std::min<int>(static_cast<int>(std::ceil(5.0 * delta / dt)),
                                   8 * static_cast<int>(row.size()));
    Eigen::VectorXd kern(2 * half + 1);
    for (int m = -half; m <= half; ++m) kern(m + half) = std::exp(-0.5 * (m * dt) * (m * dt) / (delta * delta));
    kern /= kern.sum();
    const int n = static_cast<int>(row.size());
    Eigen::VectorXd out(n);
    for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int m = -half; m <= half; ++m) {
            const int idx = k - m;
            double v;
            if (idx < 0) v = constant_extend ? row(0) : 0.0;
            else if (idx >= n) v = constant_extend ? row(n - 1) : 0.0;
            else v = row(idx);
            acc += kern(m + half) * v;
        }
        out(k) = acc;
    }
    return out;
}

// trapezoid-consistent derivative samples: (dt/2)(d_k + d_{k+1}) telescopes to
// the exact increments of u
std::vector<double> trapezoid_consistent_derivative(const std::vector<double>& grid,
                                                    const Eigen::VectorXd& u) {
    const int n = static_cast<int>(grid.size());
    std::vector<double> d(n);
    d[0] = (u(1) - u(0)) / (grid[1] - grid[0]);
    for (int k = 0; k + 1 < n; ++k)
        d[k + 1] = 2.0 * (u(k + 1) - u(k)) / (grid[k + 1] - grid[k]) - d[k];
    return d;
}

}  // namespace

std::vector<RecoveryResult> build_recovery(const Network& net, const Decomposition& d,
                                           const Trajectory& limit,
                                           const std::vector<double>& eps_list,
                                           const std::function<double(double)>& delta_of_eps,
                                           const Tolerances& tol) {
    if (limit.frame != Frame::Limit) throw NetworkError("build_recovery expects a Limit pair");
    const int n = net.num_nodes(), m = net.num_edges(), npts = limit.points();
    const double dt = limit.grid[1] - limit.grid[0];
    const FunctionalReport limit_rep = eval_J_limit(limit, net, d, tol);

    // x_hat: a V0slow node, else any V0 node (reported)
    int x_hat = -1;
    std::string x_hat_note;
    for (int x = 0; x < n && x_hat < 0; ++x)
        if (d.node_class.kind[x] == NodeKind::V0Slow) x_hat = x;
    if (x_hat < 0) {
        for (int x = 0; x < n && x_hat < 0; ++x)
            if (d.in_v0(x)) x_hat = x;
        x_hat_note = "no V0slow node; routing from a fast-cycle node";
    }
    std::vector<int> v1_nodes;
    for (int x = 0; x < n; ++x)
        if (d.in_v1(x)) v1_nodes.push_back(x);
    std::map<int, std::vector<int>> chains;  // frozen per study
    for (int y : v1_nodes) chains[y] = bfs_path_edges(net, x_hat, y);
    const std::vector<int> walk_mult = covering_walk_multiplicity(net, d);

    std::vector<RecoveryResult> out;
    for (double eps : eps_list) {
        const double delta = delta_of_eps(eps);
        RecoveryResult res;
        res.eps = eps;
        res.delta = delta;
        res.note = x_hat_note;

        // Step 1+2: mollified pair with all densities shifted up by delta.
        Eigen::MatrixXd u_delta(n, npts);
        for (int x = 0; x < n; ++x)
            u_delta.row(x) =
                mollify_row(limit.node_density.row(x).transpose(), dt, delta, d.in_v0(x))
                    .transpose()
                    .array() +
                delta;
        Eigen::MatrixXd j_delta(m, npts);
        for (int r = 0; r < m; ++r)
            j_delta.row(r) =
                mollify_row(limit.edge_flux.row(r).transpose(), dt, delta, false).transpose();

        // Step 3: divergence-free floor fluxes along the covering walk.
        std::vector<std::vector<double>> du(n);  // trapezoid-consistent du/dt on V1
        double floor_c = 0;
        for (int y : v1_nodes) {
            du[y] = trapezoid_consistent_derivative(limit.grid, u_delta.row(y).transpose());
            double sup = 0;
            for (double v : du[y]) sup = std::max(sup, std::abs(v));
            floor_c += delta * d.node_class.pi_tilde[y] * sup;
        }
        for (int r = 0; r < m; ++r)
            if (walk_mult[r] > 0 && d.edge_class.kind[r] != EdgeKind::FastCycle)
                j_delta.row(r).array() += walk_mult[r] * floor_c;

        // Step 4: eps-level corrections routing pi^eps_y u_y from x_hat.
        const StationaryDist pi = stationary_distribution(net, eps, tol);
        const double sqrt_eps = std::sqrt(eps);
        Eigen::MatrixXd flux(m, npts);  // stored fluxes: j on slow/damped, j~ on fcyc
        for (int r = 0; r < m; ++r) {
            if (d.edge_class.kind[r] == EdgeKind::FastCycle)
                flux.row(r).setConstant(sqrt_eps * walk_mult[r] * floor_c);
            else
                flux.row(r) = j_delta.row(r);
        }
        for (int y : v1_nodes) {
            for (int r : chains.at(y)) {
                for (int k = 0; k < npts; ++k) {
                    const double corr = pi.pi[y] * du[y][k];
                    // raw-flux correction corr on every chain edge; the
                    // stored centered flux therefore moves by sqrt(eps) corr
                    if (d.edge_class.kind[r] == EdgeKind::FastCycle)
                        flux(r, k) += corr * sqrt_eps;
                    else
                        flux(r, k) += corr;
                }
            }
        }
        bool negative = false;
        for (int r = 0; r < m && !negative; ++r)
            if (d.edge_class.kind[r] != EdgeKind::FastCycle && flux.row(r).minCoeff() < 0)
                negative = true;
        if (negative) {
            res.dropped = true;
            res.note += (res.note.empty() ? "" : "; ") +
                        std::string("negative corrected flux; eps too large for this delta");
            out.push_back(std::move(res));
            continue;
        }

        // Reconstruct densities from the eps-continuity equations.
        Trajectory traj;
        traj.frame = Frame::Rescaled;
        traj.epsilon = eps;
        traj.grid = limit.grid;
        traj.node_density.resize(n, npts);
        traj.edge_flux = flux;

        // V1 nodes keep the limit densities (corrections end there).
        for (int y : v1_nodes) traj.node_density.row(y) = u_delta.row(y);

        // V0slow: explicit mild recursion (residual vanishes by construction).
        for (int x = 0; x < n; ++x) {
            if (d.node_class.kind[x] != NodeKind::V0Slow) continue;
            double rho = d.node_class.pi_limit[x] * u_delta(x, 0);
            traj.node_density(x, 0) = rho / pi.pi[x];
            for (int k = 0; k + 1 < npts; ++k) {
                double lo = 0, hi = 0;
                for (int r = 0; r < m; ++r) {
                    const Edge& e = net.edge(r);
                    double sign = 0;
                    if (e.dst == x) sign += 1;
                    if (e.src == x) sign -= 1;
                    if (sign == 0) continue;
                    lo += sign * flux(r, k);
                    hi += sign * flux(r, k + 1);
                }
                rho += 0.5 * (traj.grid[k + 1] - traj.grid[k]) * (lo + hi);
                traj.node_density(x, k + 1) = rho / pi.pi[x];
            }
        }

        // Components: Crank-Nicolson on rho|_c with the fast-cycle generator.
        for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
            const auto& comp = d.fast_components.components[c];
            const int mc = static_cast<int>(comp.size());
            std::vector<int> fcyc_edges;
            for (int r = 0; r < m; ++r)
                if (d.edge_class.kind[r] == EdgeKind::FastCycle &&
                    d.component_of(net.edge(r).src) == static_cast<int>(c))
                    fcyc_edges.push_back(r);
            const Eigen::MatrixXd at =
                subgraph_generator(net, comp, fcyc_edges).entries.transpose();
            // g = divergence of slow/damped j plus the centered fast fluxes
            Eigen::MatrixXd g(mc, npts);
            for (int i = 0; i < mc; ++i) {
                const int x = comp[i];
                for (int k = 0; k < npts; ++k) {
                    double acc = 0;
                    for (int r = 0; r < m; ++r) {
                        const Edge& e = net.edge(r);
                        if (e.src != x && e.dst != x) continue;
                        const double sign = (e.dst == x ? 1.0 : 0.0) - (e.src == x ? 1.0 : 0.0);
                        if (sign == 0) continue;
                        if (d.edge_class.kind[r] == EdgeKind::FastCycle)
                            acc += sign * flux(r, k) / sqrt_eps;
                        else
                            acc += sign * flux(r, k);
                    }
                    g(i, k) = acc;
                }
            }
            Eigen::VectorXd rho(mc);
            for (int i = 0; i < mc; ++i) rho(i) = pi.pi[comp[i]] * u_delta(comp[i], 0);
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(mc, mc);
            const double step = 0.5 * dt / eps;
            const Eigen::PartialPivLU<Eigen::MatrixXd> lhs(eye - step * at);
            const Eigen::MatrixXd rhs = eye + step * at;
            for (int i = 0; i < mc; ++i) traj.node_density(comp[i], 0) = rho(i) / pi.pi[comp[i]];
            for (int k = 0; k + 1 < npts; ++k) {
                rho = lhs.solve(rhs * rho + 0.5 * dt * (g.col(k) + g.col(k + 1)));
                for (int i = 0; i < mc; ++i)
                    traj.node_density(comp[i], k + 1) = rho(i) / pi.pi[comp[i]];
            }
        }

        res.report = eval_J_eps(traj, net, d, pi, tol);
        res.residual = res.report.continuity_residual;
        res.traj = std::move(traj);
        res.cost_gap =
            std::abs(res.report.total.as_double() - limit_rep.total.as_double());
        if (res.residual > tol.recovery_residual)
            throw NetworkError("recovery trajectory violates the eps-continuity equations "
                               "(residual " + std::to_string(res.residual) + ")");
        out.push_back(std::move(res));
    }
    return out;
}

std::vector<ProbeRow> lower_bound_probe(const std::vector<std::pair<double, double>>& eps_costs,
                                        double limit_cost) {
    std::vector<ProbeRow> rows;
    for (const auto& [eps, cost] : eps_costs) {
        ProbeRow row;
        row.eps = eps;
        row.cost_eps = cost;
        row.cost_limit = limit_cost;
        row.margin = cost - limit_cost;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace fastflux
