#pragma once

#include <array>
#include <functional>
#include <map>

#include "fastflux/functionals.hpp"
#include "fastflux/trajectory.hpp"

namespace fastflux {

/// The canonical damped-cycle network: a slow entry edge x0 -> x1, a fast
/// cycle x1 -> ... -> xK -> x1 of V1 nodes, a fast exit xl -> x{K+1}, and a
/// slow return edge x{K+1} -> x0 closing the graph.
struct SpikeConfig {
    int cycle_len = 2;                 // K >= 2
    int exit_index = 1;                // l in [1, K]
    double t_end = 1.0;                // T
    double eps = 1e-2;                 // requires sqrt(eps) < T
    double kappa_in = 1.0;
    std::vector<double> kappa_cycle;   // per cycle edge; defaults to all 1
    double kappa_out = 1.0;
    double kappa_return = 1.0;
};

/// Piecewise-linear function of time: on [knots[i], knots[i+1]) the value is
/// a[i] + b[i] (t - knots[i]). Evaluation at an interior knot returns the
/// average of the two one-sided limits.
struct PiecewiseLinear {
    std::vector<double> knots;
    std::vector<double> a, b;

    double eval(double t) const;
    double integral(double t0, double t1) const;  // exact
    static PiecewiseLinear zero(double t_end);
};

/// Mass-1 spike path on the canonical network, held in exact closed form
/// (all profiles are piecewise linear) plus a kink-aligned sampled view.
struct SpikeTrajectory {
    SpikeConfig cfg;
    Network net;
    StationaryDist pi;                      // at cfg.eps
    std::vector<PiecewiseLinear> flux;      // raw j per edge
    std::vector<PiecewiseLinear> density;   // rho per node
    Trajectory sampled;                     // Rescaled frame

    int edge_in() const { return 0; }
    int edge_cycle(int k) const { return k; }        // k = 1..K
    int edge_out() const { return cfg.cycle_len + 1; }
    int edge_return() const { return cfg.cycle_len + 2; }
};

class SpikeError : public NetworkError {
  public:
    explicit SpikeError(const std::string& msg) : NetworkError(msg) {}
};

Network canonical_spike_network(const SpikeConfig& cfg);

/// Tent of half-width sqrt(eps)/2 and peak sqrt(eps)/2 centered at T/2.
double spike_triangle(double t, double t_end, double eps);

/// Exact spike path: entry plateau K on the rising window, cycle fluxes
/// a_k + triangle/eps + b_k, exit plateau K on the falling window; densities
/// from the mild continuity equations in closed form.
SpikeTrajectory build_spike(const SpikeConfig& cfg, int n_grid_steps = 512);

/// Narrow limit of the spike family: quarter-mass atoms at T/2 on the cycle
/// edges and the matching V1 density atoms.
Trajectory spike_limit_trajectory(const SpikeTrajectory& spike, const Decomposition& d);

struct SpikeCostTable {
    // index 0..4 = terms (I)..(V); analytic closed forms vs adaptive quadrature
    std::array<double, 5> analytic{};
    std::array<double, 5> numeric{};
    double i0_eps = 0.0;       // initial cost at this eps
    double total_eps = 0.0;    // i0 + sum of terms
    double max_rel_err = 0.0;
};

/// Evaluates the five cost integrals in closed form and by adaptive quadrature
/// of the s-integrands on the built path; throws SpikeError when they disagree
/// beyond rel_tol (implementation bug signal).
SpikeCostTable spike_cost(const SpikeTrajectory& spike, double rel_tol = 1e-6);

struct NarrowPairingReport {
    std::vector<std::string> test_names;
    // per cycle edge k (0-based), per test function: |int phi j^eps - phi(T/2)/4|
    std::vector<std::vector<double>> errors;
};

/// Dual pairings of the cycle fluxes against fixed bounded test functions,
/// compared with the quarter-atom at T/2.
NarrowPairingReport narrow_limit_check(const SpikeTrajectory& spike);

struct DnocycCertificate {
    int edge = -1;
    bool applicable = true;              // false: a damped cycle feeds this edge
    std::map<int, int> slow_multiplicity;  // bounding slow edges with multiplicity
    double orlicz_bound = 0.0;           // L^C norm of the bounding slow-flux sum
    bool atom_free = true;
    double atom_mass = 0.0;              // total atom weight on this edge
    double domination_residual = 0.0;    // max (j - bound)_+ over the grid
};

/// Iterated substitution of the V1 stationarity relation until only slow
/// fluxes remain; certifies absolute continuity of each no-cycle damped flux
/// and reports the resulting Orlicz bound.
std::vector<DnocycCertificate> no_spike_certificate(const Trajectory& limit, const Network& net,
                                                    const Decomposition& d);

/// Adaptive Simpson; f may blow up at isolated panel endpoints (log-type
/// singularities), which callers handle by nudging the endpoints.
double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double abs_tol, int max_depth = 60);

}  // namespace fastflux
