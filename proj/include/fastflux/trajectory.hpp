#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "fastflux/decomp.hpp"
#include "fastflux/network.hpp"

namespace fastflux {

enum class Frame { Raw, Rescaled, Limit };

const char* to_string(Frame f);

/// Point mass at a single time, carried by V1 densities and damped fluxes in
/// the Limit frame.
struct Atom {
    double time = 0.0;
    std::map<int, double> node_weight;  // node index -> weight >= 0
    std::map<int, double> edge_weight;  // edge index -> weight >= 0
};

/// Time grid plus per-node densities and per-edge fluxes.
///
/// Value semantics per frame:
///   Raw(eps):      node = rho, edge = j (all raw fluxes)
///   Rescaled(eps): node = u = rho/pi^eps; edge = j on slow/damped edges and
///                  the centered fast flux (j-tilde) on fast-cycle edges
///   Limit:         node = u (u_x = u_c on components, density part on V1);
///                  edge = j density part on slow/damped, j-tilde on fcyc;
///                  atoms hold the singular parts
struct Trajectory {
    Frame frame = Frame::Raw;
    double epsilon = 0.0;  // 0 in the Limit frame
    std::vector<double> grid;
    Eigen::MatrixXd node_density;  // num_nodes x grid.size()
    Eigen::MatrixXd edge_flux;     // num_edges x grid.size()
    std::vector<Atom> atoms;

    int points() const { return static_cast<int>(grid.size()); }
    double total_time() const { return grid.empty() ? 0.0 : grid.back(); }
};

/// Uniform grid 0..T with n steps (n+1 points).
std::vector<double> uniform_grid(double t_end, int n_steps);

/// Trapezoid rule of one row of a trajectory-shaped matrix over the grid.
double trapezoid(const std::vector<double>& grid, const Eigen::VectorXd& values);
double trapezoid_abs(const std::vector<double>& grid, const Eigen::VectorXd& values);

/// pi^eps-weighted component density u_c(t_k) = sum pi_x u_x / sum pi_x.
Eigen::VectorXd component_density(const Trajectory& traj, const std::vector<double>& pi,
                                  const std::vector<int>& component);

/// CSV with `time,u:<node>...,j:<src>-><dst>...` columns; frame/eps in a
/// leading comment, atoms as `# atom` comment lines.
std::string trajectory_to_csv(const Network& net, const Trajectory& traj);
Trajectory trajectory_from_csv(const Network& net, const std::string& csv);

}  // namespace fastflux
