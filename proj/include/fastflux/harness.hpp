#pragma once

#include "fastflux/dynamics.hpp"
#include "fastflux/functionals.hpp"

namespace fastflux {

struct StudyConfig {
    std::string network_path;
    std::vector<double> eps_list = {1e-1, 1e-2, 1e-3, 1e-4};  // strictly decreasing
    double t_end = 1.0;
    int n_steps = 2000;
    std::vector<double> u0;          // per-node densities; empty -> built-in generic datum
    double delta_power = 1.0;        // recovery regularization delta = eps^delta_power
    std::string out_dir;             // empty -> no files written
    Tolerances tol;
};

StudyConfig study_config_from_json(const std::string& text);

struct EpsRow {
    double eps = 0;
    double err_v0slow_sup = 0;   // sup_t |u^eps_x - u^eff_x| over V0slow
    double err_comp_sup = 0;     // same for the component densities
    double err_v1_weak = 0;      // max dual pairing error over the test bundle
    double err_jdamp_weak = 0;
    double orlicz_jslow = 0;
    double orlicz_jfcyc = 0;
    double l1_jdamp = 0;
    double fir_margin = 0;
    double cost_gap = 0;         // |(I0+J)^eps - (I0+J)^0|
    double eps_u_v1_sup = 0;     // eps * sup_t |u_V1|_inf
};

struct ConvergenceReport {
    std::vector<EpsRow> rows;
    // least-squares log-log orders: all eps points / the two smallest only
    std::map<std::string, double> order_all;
    std::map<std::string, double> order_tail;
};

/// The fixed 12-function dual-pairing bundle discretizing the narrow and
/// weak-* convergence modes (documented in the README).
std::vector<std::vector<double>> test_function_bundle(const std::vector<double>& grid);

ConvergenceReport convergence_study(const Network& net, const Decomposition& d,
                                    const StudyConfig& cfg);

std::string convergence_report_json(const ConvergenceReport& rep);
std::string convergence_summary_csv(const ConvergenceReport& rep);

struct BoundednessRow {
    double eps = 0;
    double sup_u_v0slow = 0;  // C-norm
    double sup_u_comp = 0;    // C-norm of the component densities
    double sup_u_fcyc = 0;    // L^inf of the per-node fcyc densities
    double l1_u_v1 = 0;
    double eps_sup_u_v1 = 0;  // must vanish along the sweep
    double orlicz_jslow = 0;
    double l1_jdamp = 0;
    double orlicz_jfcyc = 0;
};

/// Tabulates the boundedness lemmas' quantities for a family of Rescaled
/// trajectories at decreasing eps.
std::vector<BoundednessRow> boundedness_diagnostics(const Network& net, const Decomposition& d,
                                                    const std::vector<Trajectory>& family);

/// max over consecutive rows of value ratios (>1 means an upward trend).
double worst_upward_ratio(const std::vector<double>& values);

struct RecoveryResult {
    double eps = 0;
    double delta = 0;
    bool dropped = false;      // negative corrected flux at this eps
    std::string note;
    Trajectory traj;           // Rescaled frame
    double residual = 0;       // trapezoid mild-equation residual (hard <= 1e-8)
    FunctionalReport report;
    double cost_gap = 0;       // |total^eps - limit total|
};

/// Recovery-sequence builder: mollify, push densities up by delta, add
/// divergence-free floor fluxes along a covering walk, then route the V1 mass
/// corrections along frozen BFS chains and reconstruct all densities from the
/// eps-continuity equations (trapezoid-consistent recursion).
std::vector<RecoveryResult> build_recovery(const Network& net, const Decomposition& d,
                                           const Trajectory& limit, const std::vector<double>& eps_list,
                                           const std::function<double(double)>& delta_of_eps,
                                           const Tolerances& tol = default_tolerances());

struct ProbeRow {
    double eps = 0;
    double cost_eps = 0;
    double cost_limit = 0;
    double margin = 0;  // cost_eps - cost_limit, >= -tol by the Gamma lower bound
};

std::vector<ProbeRow> lower_bound_probe(const std::vector<std::pair<double, double>>& eps_costs,
                                        double limit_cost);

}  // namespace fastflux
