#pragma once

#include "fastflux/extreal.hpp"
#include "fastflux/trajectory.hpp"

namespace fastflux {

/// Relative-entropy integrand s(a|b) = a log(a/b) - a + b with the boundary
/// conventions s(0|b) = b and +infinity whenever a > 0, b = 0 or either
/// argument is negative. 0 log 0 = 0 is hard-coded.
ExtReal rel_entropy(double a, double b);

/// The N-function defining the Orlicz space of fluxes:
/// young(a) = inf_{p-q=a} s(p|1)+s(q|1) = a asinh(a/2) - 2 sqrt(1+a^2/4) + 2.
double young(double a);
/// Convex conjugate, young_conjugate(p) = 2 (cosh p - 1).
double young_conjugate(double p);

/// Amemiya form of the Orlicz norm over an edge family of grid functions:
/// inf_{a>0} (1/a)(1 + sum_r int young(a j_r)). One-dimensional golden-section
/// search over log a in [-18, 18]; exact 0 for identically zero input.
double orlicz_norm(const std::vector<double>& grid, const Eigen::MatrixXd& rows);
double orlicz_norm(const std::vector<double>& grid, const Eigen::VectorXd& row);

/// Initial cost at eps: sum_x s(pi^eps_x u_x | pi^eps_x).
ExtReal eval_I0_eps(const std::vector<double>& u0, const StationaryDist& pi);
/// Limit initial cost: V0slow nodes plus one term per fast component; V1
/// values do not enter.
ExtReal eval_I0_limit(const std::vector<double>& u0, const Decomposition& d);

struct FunctionalReport {
    Frame frame = Frame::Rescaled;
    double epsilon = 0.0;
    ExtReal i0;
    ExtReal j_slow, j_damp, j_fcyc;
    double fisher = 0.0;
    double continuity_residual = 0.0;
    double flux_l1 = 0.0;  // scale used by the continuity gate
    ExtReal total;         // i0 + terms, or infinity past the gate

    ExtReal cost_terms() const { return j_slow + j_damp + j_fcyc; }
};

std::string report_to_json(const FunctionalReport& rep);

/// Rescaled-frame rate functional: the three s-terms of the rescaled cost plus
/// the mild-continuity gate (total = infinity when the residual exceeds
/// tol.continuity_rel * (1 + flux_l1); the raw residual is always reported).
FunctionalReport eval_J_eps(const Trajectory& traj, const Network& net, const Decomposition& d,
                            const StationaryDist& pi, const Tolerances& tol = default_tolerances());

/// Limit-frame functional with measure-valued V1 densities / damped fluxes
/// ("grid density + atoms"): slow term as at eps with the limit weights,
/// damped term by Radon-Nikodym evaluation on density and atom parts
/// separately, quadratic fast-cycle term with the 0/0 -> 0 convention.
FunctionalReport eval_J_limit(const Trajectory& traj, const Network& net, const Decomposition& d,
                              const Tolerances& tol = default_tolerances());

/// (1/2) sum_r int kappa^eps_r pi^eps_{r-} (sqrt u_{r-} - sqrt u_{r+})^2 dt.
double fisher_info(const Trajectory& traj, const Network& net, const StationaryDist& pi);

/// Minimum over the grid of the free-energy / Fisher-information / rate
/// margin; nonnegative (up to quadrature) by the FIR inequality.
double fir_check(const Trajectory& traj, const Network& net, const Decomposition& d,
                 const StationaryDist& pi, const FunctionalReport& rep);

}  // namespace fastflux
