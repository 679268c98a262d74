#include "fastflux/spike.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fastflux {

double PiecewiseLinear::eval(double t) const {
    if (t <= knots.front()) return a.front() + b.front() * (t - knots.front());
    if (t >= knots.back()) {
        const size_t i = a.size() - 1;
        return a[i] + b[i] * (t - knots[i]);
    }
    for (size_t i = 0; i + 1 < knots.size(); ++i) {
        if (t < knots[i + 1]) {
            const double v = a[i] + b[i] * (t - knots[i]);
            if (t == knots[i] && i > 0) {
                const double left = a[i - 1] + b[i - 1] * (t - knots[i - 1]);
                return 0.5 * (left + v);
            }
            return v;
        }
    }
    return a.back();
}

double PiecewiseLinear::integral(double t0, double t1) const {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double lo = std::max(t0, knots[i]);
        const double hi = std::min(t1, knots[i + 1]);
        if (hi <= lo) continue;
        const double mid_lo = lo - knots[i], mid_hi = hi - knots[i];
        acc += a[i] * (hi - lo) + 0.5 * b[i] * (mid_hi * mid_hi - mid_lo * mid_lo);
    }
    return acc;
}

PiecewiseLinear PiecewiseLinear::zero(double t_end) {
    return PiecewiseLinear{{0.0, t_end}, {0.0}, {0.0}};
}

double spike_triangle(double t, double t_end, double eps) {
    const double h = 0.5 * std::sqrt(eps);
    const double mid = 0.5 * t_end;
    if (t <= mid - h || t >= mid + h) return 0.0;
    return (t <= mid) ? t - (mid - h) : (mid + h) - t;
}

Network canonical_spike_network(const SpikeConfig& cfg) {
    const int k = cfg.cycle_len;
    if (k < 2) throw SpikeError("cycle length must be >= 2");
    if (cfg.exit_index < 1 || cfg.exit_index > k) throw SpikeError("exit index out of range");
    if (!(std::sqrt(cfg.eps) < cfg.t_end)) throw SpikeError("need sqrt(eps) < T");
    std::vector<double> kc = cfg.kappa_cycle;
    if (kc.empty()) kc.assign(k, 1.0);
    if (static_cast<int>(kc.size()) != k) throw SpikeError("kappa_cycle must have K entries");

    std::vector<std::string> names;
    names.push_back("x0");
    for (int i = 1; i <= k; ++i) names.push_back("x" + std::to_string(i));
    names.push_back("x" + std::to_string(k + 1));

    std::vector<Edge> edges;
    edges.push_back({0, 1, cfg.kappa_in, Speed::Slow});
    for (int i = 1; i <= k; ++i) edges.push_back({i, (i == k) ? 1 : i + 1, kc[i - 1], Speed::Fast});
    edges.push_back({cfg.exit_index, k + 1, cfg.kappa_out, Speed::Fast});
    edges.push_back({k + 1, 0, cfg.kappa_return, Speed::Slow});
    return Network(std::move(names), std::move(edges));
}

SpikeTrajectory build_spike(const SpikeConfig& cfg, int n_grid_steps) {
    SpikeTrajectory spike{cfg, canonical_spike_network(cfg),
                          StationaryDist{}, {}, {}, Trajectory{}};
    const Network& net = spike.net;
    spike.pi = stationary_distribution(net, cfg.eps);

    const int k_len = cfg.cycle_len, l = cfg.exit_index;
    const double t_end = cfg.t_end, eps = cfg.eps;
    const double h = 0.5 * std::sqrt(eps);
    const double mid = 0.5 * t_end;
    const std::vector<double> knots = {0.0, mid - h, mid, mid + h, t_end};

    auto plateau = [&](double v1, double v2) {  // constants on the two windows
        return PiecewiseLinear{knots, {0.0, v1, v2, 0.0}, {0.0, 0.0, 0.0, 0.0}};
    };

    spike.flux.assign(net.num_edges(), PiecewiseLinear::zero(t_end));
    spike.density.assign(net.num_nodes(), PiecewiseLinear::zero(t_end));

    const double big_k = static_cast<double>(k_len);
    spike.flux[spike.edge_in()] = plateau(big_k, 0.0);
    spike.flux[spike.edge_out()] = plateau(0.0, big_k);
    for (int k = 1; k <= k_len; ++k) {
        const double a_k = big_k - k;
        const double b_k = k - l + (k < l ? big_k : 0.0);
        // a_k + triangle/eps on the rising window, b_k + triangle/eps on the
        // falling one; the triangle is divergence-free around the cycle
        spike.flux[spike.edge_cycle(k)] =
            PiecewiseLinear{knots, {0.0, a_k, b_k + h / eps, 0.0}, {0.0, 1.0 / eps, -1.0 / eps, 0.0}};
        spike.density[k] = PiecewiseLinear{knots, {0.0, 0.0, h, 0.0}, {0.0, 1.0, -1.0, 0.0}};
    }
    spike.density[0] =
        PiecewiseLinear{knots, {1.0, 1.0, 1.0 - big_k * h, 1.0 - big_k * h}, {0.0, -big_k, 0.0, 0.0}};
    spike.density[k_len + 1] =
        PiecewiseLinear{knots, {0.0, 0.0, big_k * h, big_k * h}, {0.0, big_k, 0.0, 0.0}};

    // kink-aligned sampled view in the rescaled frame (no fast-cycle edges
    // here, so fluxes are stored as-is)
    std::vector<double> grid = uniform_grid(t_end, n_grid_steps);
    grid.insert(grid.end(), {mid - h, mid, mid + h});
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [&](double a, double b) { return std::abs(a - b) < 1e-15 * t_end; }),
               grid.end());
    Trajectory& tr = spike.sampled;
    tr.frame = Frame::Rescaled;
    tr.epsilon = eps;
    tr.grid = grid;
    tr.node_density.resize(net.num_nodes(), grid.size());
    tr.edge_flux.resize(net.num_edges(), grid.size());
    for (size_t kk = 0; kk < grid.size(); ++kk) {
        for (int x = 0; x < net.num_nodes(); ++x)
            tr.node_density(x, kk) = spike.density[x].eval(grid[kk]) / spike.pi.pi[x];
        for (int r = 0; r < net.num_edges(); ++r) tr.edge_flux(r, kk) = spike.flux[r].eval(grid[kk]);
    }
    return spike;
}

Trajectory spike_limit_trajectory(const SpikeTrajectory& spike, const Decomposition& d) {
    const Network& net = spike.net;
    const SpikeConfig& cfg = spike.cfg;
    Trajectory tr;
    tr.frame = Frame::Limit;
    tr.epsilon = 0.0;
    tr.grid = uniform_grid(cfg.t_end, 256);
    tr.node_density = Eigen::MatrixXd::Zero(net.num_nodes(), tr.grid.size());
    tr.edge_flux = Eigen::MatrixXd::Zero(net.num_edges(), tr.grid.size());
    tr.node_density.row(0).setConstant(1.0 / d.node_class.pi_limit[0]);

    Atom atom;
    atom.time = 0.5 * cfg.t_end;
    for (int k = 1; k <= cfg.cycle_len; ++k) {
        atom.node_weight[k] = 0.25 / d.node_class.pi_tilde[k];
        atom.edge_weight[spike.edge_cycle(k)] = 0.25;
    }
    tr.atoms.push_back(std::move(atom));
    return tr;
}

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double abs_tol, int max_depth) {
    struct Impl {
        const std::function<double(double)>& f;
        int max_depth;
        double recurse(double a, double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) const {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = f(lm), frm = f(rm);
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth >= max_depth || std::abs(delta) <= 15.0 * tol)
                return left + right + delta / 15.0;
            return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
                   recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
        }
    };
    const double m = 0.5 * (lo + hi);
    const double fa = f(lo), fm = f(m), fb = f(hi);
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    return Impl{f, max_depth}.recurse(lo, hi, fa, fm, fb, whole, abs_tol, 0);
}

namespace {

// Panel integral with endpoints nudged inward; the s-integrands may carry
// integrable log singularities at panel boundaries where the reference
// density vanishes.
double integrate_panel(const std::function<double(double)>& f, double lo, double hi) {
    const double eta = (hi - lo) * 1e-12;
    if (hi - lo <= 0) return 0.0;
    return adaptive_simpson(f, lo + eta, hi - eta, 1e-13);
}

double s_val(double a, double b) { return rel_entropy(a, b).as_double(); }

}  // namespace

SpikeCostTable spike_cost(const SpikeTrajectory& spike, double rel_tol) {
    const SpikeConfig& cfg = spike.cfg;
    const Network& net = spike.net;
    const double t_end = cfg.t_end, eps = cfg.eps;
    const double w = 0.5 * std::sqrt(eps);
    const double mid = 0.5 * t_end;
    const double big_k = static_cast<double>(cfg.cycle_len);
    std::vector<double> kc = cfg.kappa_cycle;
    if (kc.empty()) kc.assign(cfg.cycle_len, 1.0);

    SpikeCostTable table;

    // (I): entry edge against the draining source mass.
    table.analytic[0] = cfg.kappa_in * (t_end - 0.5 * big_k * w * w - 0.5 * big_k * w * t_end) +
                        w * big_k * std::log(big_k / cfg.kappa_in) +
                        rel_entropy(1.0 - big_k * w, 1.0).value() - big_k * w;

    // (II): cycle edges; each window contributes the closed form below.
    auto window_half = [&](double c, double kappa) {
        if (c == 0.0) return 0.125 * (kappa - 1.0 - std::log(kappa));
        const double ce = c * eps;
        return (0.5 / eps) * ((ce + w) * (ce + w) * std::log(ce + w) - ce * ce * std::log(ce)) -
               (c * w + 0.125) * std::log(kappa * w) - 0.5 * c * w - 0.125 + 0.125 * kappa;
    };
    double term2 = 0;
    for (int k = 1; k <= cfg.cycle_len; ++k) {
        const double a_k = big_k - k;
        const double b_k = k - cfg.exit_index + (k < cfg.exit_index ? big_k : 0.0);
        term2 += window_half(a_k, kc[k - 1]) + window_half(b_k, kc[k - 1]);
    }
    table.analytic[1] = term2;

    // (III): exit edge against the vanishing triangle mass.
    table.analytic[2] =
        big_k * w * std::log(big_k * eps / (cfg.kappa_out * w)) + 0.25 * cfg.kappa_out;

    // (IV): no further slow edges leave x0 in the canonical network.
    table.analytic[3] = 0.0;

    // (V): the slow return edge against the accumulated exit mass.
    table.analytic[4] = cfg.kappa_return * big_k * (0.5 * w * w + 0.5 * w * t_end);

    // Quadrature of the same integrands on the built path.
    const std::vector<double> panels = {0.0, mid - w, mid, mid + w, t_end};
    auto integrate_edge = [&](int edge, int node, double rate_eps_factor) {
        auto f = [&](double t) {
            return s_val(spike.flux[edge].eval(t),
                         rate_eps_factor * spike.density[node].eval(t));
        };
        double acc = 0;
        for (size_t i = 0; i + 1 < panels.size(); ++i) acc += integrate_panel(f, panels[i], panels[i + 1]);
        return acc;
    };
    table.numeric[0] = integrate_edge(spike.edge_in(), 0, cfg.kappa_in);
    double num2 = 0;
    for (int k = 1; k <= cfg.cycle_len; ++k)
        num2 += integrate_edge(spike.edge_cycle(k), k, kc[k - 1] / eps);
    table.numeric[1] = num2;
    table.numeric[2] = integrate_edge(spike.edge_out(), cfg.exit_index, cfg.kappa_out / eps);
    table.numeric[3] = 0.0;
    table.numeric[4] = integrate_edge(spike.edge_return(), cfg.cycle_len + 1, cfg.kappa_return);

    table.i0_eps = rel_entropy(1.0, spike.pi.pi[0]).value();
    for (int x = 1; x < net.num_nodes(); ++x) table.i0_eps += spike.pi.pi[x];
    table.total_eps = table.i0_eps;
    for (double v : table.analytic) table.total_eps += v;

    for (int i = 0; i < 5; ++i) {
        const double scale = std::max(std::abs(table.analytic[i]), std::abs(table.numeric[i]));
        const double err = std::abs(table.analytic[i] - table.numeric[i]);
        const double rel = (err <= 1e-12) ? 0.0 : err / std::max(scale, 1e-12);
        table.max_rel_err = std::max(table.max_rel_err, rel);
    }
    if (table.max_rel_err > rel_tol)
        throw SpikeError("spike cost closed forms disagree with quadrature (rel err " +
                         std::to_string(table.max_rel_err) + ")");
    return table;
}

NarrowPairingReport narrow_limit_check(const SpikeTrajectory& spike) {
    const double t_end = spike.cfg.t_end;
    const double mid = 0.5 * t_end;
    auto bump = [](double t, double center, double width) {
        const double y = (t - center) / width;
        if (std::abs(y) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - y * y));
    };
    std::vector<std::pair<std::string, std::function<double(double)>>> tests;
    tests.emplace_back("1", [](double) { return 1.0; });
    tests.emplace_back("t", [](double t) { return t; });
    tests.emplace_back("cos(2pi t/T)",
                       [t_end](double t) { return std::cos(2.0 * M_PI * t / t_end); });
    tests.emplace_back("bump@T/2", [=](double t) { return bump(t, mid, 0.25 * t_end); });
    tests.emplace_back("bump@T/4", [=](double t) { return bump(t, 0.25 * t_end, 0.2 * t_end); });

    const double h = 0.5 * std::sqrt(spike.cfg.eps);
    const std::vector<double> panels = {0.0, mid - h, mid, mid + h, t_end};
    NarrowPairingReport rep;
    for (auto& [name, phi] : tests) rep.test_names.push_back(name);
    for (int k = 1; k <= spike.cfg.cycle_len; ++k) {
        const PiecewiseLinear& j = spike.flux[spike.edge_cycle(k)];
        std::vector<double> errs;
        for (auto& [name, phi] : tests) {
            double pairing = 0;
            for (size_t i = 0; i + 1 < panels.size(); ++i)
                pairing += integrate_panel([&](double t) { return phi(t) * j.eval(t); }, panels[i],
                                           panels[i + 1]);
            errs.push_back(std::abs(pairing - 0.25 * phi(mid)));
        }
        rep.errors.push_back(std::move(errs));
    }
    return rep;
}

std::vector<DnocycCertificate> no_spike_certificate(const Trajectory& limit, const Network& net,
                                                    const Decomposition& d) {
    if (limit.frame != Frame::Limit)
        throw NetworkError("no_spike_certificate expects a Limit-frame trajectory");
    std::vector<DnocycCertificate> out;
    for (int r0 = 0; r0 < net.num_edges(); ++r0) {
        if (d.edge_class.kind[r0] != EdgeKind::DampedNoCycle) continue;
        DnocycCertificate cert;
        cert.edge = r0;

        // expand the V1 stationarity relation from the source node until only
        // slow fluxes remain; a revisited damped edge means a damped cycle
        // feeds this edge and the recursion cannot terminate
        std::set<int> appeared;
        std::vector<std::pair<int, int>> work;  // (damped edge, multiplicity)
        work.emplace_back(r0, 1);
        appeared.insert(r0);
        while (!work.empty() && cert.applicable) {
            auto [r, mult] = work.back();
            work.pop_back();
            const int x = net.edge(r).src;
            for (int q = 0; q < net.num_edges(); ++q) {
                if (net.edge(q).dst != x) continue;
                if (d.edge_class.kind[q] == EdgeKind::Slow) {
                    cert.slow_multiplicity[q] += mult;
                } else if (is_damped(d.edge_class.kind[q])) {
                    if (appeared.count(q)) {
                        cert.applicable = false;
                        break;
                    }
                    appeared.insert(q);
                    work.emplace_back(q, mult);
                }
            }
        }

        for (const Atom& a : limit.atoms) {
            const auto it = a.edge_weight.find(r0);
            if (it != a.edge_weight.end() && it->second != 0.0) {
                cert.atom_free = false;
                cert.atom_mass += it->second;
            }
        }

        if (cert.applicable) {
            Eigen::VectorXd bound = Eigen::VectorXd::Zero(limit.points());
            for (const auto& [q, mult] : cert.slow_multiplicity)
                bound += static_cast<double>(mult) * limit.edge_flux.row(q).transpose();
            cert.orlicz_bound = orlicz_norm(limit.grid, Eigen::VectorXd(bound));
            double dom = 0;
            for (int k = 0; k < limit.points(); ++k)
                dom = std::max(dom, limit.edge_flux(r0, k) - bound(k));
            cert.domination_residual = std::max(0.0, dom);
        }
        out.push_back(std::move(cert));
    }
    return out;
}

}  // namespace fastflux
