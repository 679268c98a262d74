#pragma once

#include "fastflux/trajectory.hpp"

namespace fastflux {

/// Reduced limit dynamics in coordinates z = (u_x : x in V0slow, u_c : c in C)
/// with the V1 densities recovered algebraically: u_V1 = reconstruct * z.
/// Assembled from the limit continuity equations; the V1->V1 block is
/// invertible for every admissible network (its graveyard chain argument),
/// which build_effective re-verifies by LU pivots.
struct EffectiveSystem {
    std::vector<int> v0slow_nodes;      // node index per leading z coordinate
    int num_components = 0;             // trailing z coordinates, one per c
    std::vector<int> v1_nodes;          // node index per v coordinate
    std::vector<std::string> coord_names;
    std::vector<double> coord_mass;     // pi_x / pi_c per z coordinate

    Eigen::MatrixXd a00;  // z drift
    Eigen::MatrixXd a10;  // v -> z coupling
    Eigen::MatrixXd a01;  // z -> v constraint coupling
    Eigen::MatrixXd a11;  // v -> v constraint block
    Eigen::MatrixXd reconstruct;  // -a11^{-1} a01
    double a11_condition = 0.0;
    double a11_min_pivot = 0.0;

    int dim_z() const { return static_cast<int>(v0slow_nodes.size()) + num_components; }
    int coord_of_node(int x, const Decomposition& d) const;

    /// Per-node vector -> z coordinates (component entries must agree).
    Eigen::VectorXd to_coords(const std::vector<double>& u_nodes, const Decomposition& d) const;
    /// z (+ reconstructed v) -> per-node vector.
    std::vector<double> to_nodes(const Eigen::VectorXd& z, const Decomposition& d) const;
};

/// Exact linear propagation of rho_dot = -div(kappa^eps (x) rho) by matrix
/// exponential steps; stiffness-proof, the grid only controls sampling.
Trajectory simulate_eps(const Network& net, double eps, const std::vector<double>& rho0,
                        double t_end, int n_steps,
                        const Tolerances& tol = default_tolerances());

/// Raw -> Rescaled: u = rho/pi^eps; fast-cycle fluxes are re-centered,
/// j-tilde = sqrt(eps) (j - kappa^eps pi^eps u).
Trajectory rescale(const Trajectory& raw, const StationaryDist& pi, const Decomposition& d,
                   const Network& net);
Trajectory unrescale(const Trajectory& rescaled, const StationaryDist& pi, const Decomposition& d,
                     const Network& net);

EffectiveSystem build_effective(const Network& net, const Decomposition& d);

/// Projects onto well-prepared data: pi-weighted equalization on each fast
/// component, then u_V1 from the algebraic constraint. Idempotent.
std::vector<double> well_prepare(const std::vector<double>& u0, const Decomposition& d,
                                 const EffectiveSystem& sys);

/// Limit-frame trajectory of the effective equations; u0 must be well-prepared.
Trajectory simulate_effective(const EffectiveSystem& sys, const Network& net,
                              const Decomposition& d, const std::vector<double>& u0, double t_end,
                              int n_steps, const Tolerances& tol = default_tolerances());

/// Residuals of the four limit continuity equations on a Limit trajectory:
/// mild form per grid interval for the ODE rows, pointwise for the V1 row.
/// Returns the max absolute residual.
double limit_continuity_residual(const Trajectory& traj, const Network& net,
                                 const Decomposition& d);

struct ComponentEquilibration {
    int component = -1;
    double lambda = 0.0;              // generator negativity bound of the cycle
    double sup_perp = 0.0;            // sup_{t>=t0} |rho_perp(t)|_2
    double fitted_rate = 0.0;         // slope of log |rho_perp|^2, approx 2 lambda/eps
    double envelope_max_ratio = 0.0;  // max_t |rho_perp(t)|^2 / Gronwall envelope
    std::vector<double> perp_norm;    // |rho_perp(t_k)|_2
};

/// Null/column-space split of the densities on each fast component, with the
/// Gronwall envelope check of the strengthened-equilibration estimate.
std::vector<ComponentEquilibration> equilibration_diagnostic(const Trajectory& raw,
                                                             const Network& net,
                                                             const Decomposition& d, double eps,
                                                             double t0 = 0.0);

}  // namespace fastflux
