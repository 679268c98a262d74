#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fastflux/harness.hpp"
#include "fastflux/spike.hpp"

namespace py = pybind11;
using namespace fastflux;

namespace {

std::vector<std::vector<double>> matrix_to_list(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
        for (int k = 0; k < m.cols(); ++k) out[i][k] = m(i, k);
    return out;
}

py::dict trajectory_to_dict(const Network& net, const Trajectory& traj) {
    py::dict d;
    d["frame"] = std::string(to_string(traj.frame));
    d["eps"] = traj.epsilon;
    d["grid"] = traj.grid;
    py::dict u, j;
    for (int x = 0; x < net.num_nodes(); ++x) {
        std::vector<double> row(traj.points());
        for (int k = 0; k < traj.points(); ++k) row[k] = traj.node_density(x, k);
        u[py::str(net.node_name(x))] = row;
    }
    for (int r = 0; r < net.num_edges(); ++r) {
        std::vector<double> row(traj.points());
        for (int k = 0; k < traj.points(); ++k) row[k] = traj.edge_flux(r, k);
        j[py::str(net.node_name(net.edge(r).src) + "->" + net.node_name(net.edge(r).dst))] = row;
    }
    d["u"] = u;
    d["j"] = j;
    return d;
}

py::dict report_to_dict(const FunctionalReport& rep) {
    py::dict d;
    auto put = [&](const char* key, const ExtReal& v) {
        if (v.finite())
            d[key] = v.value();
        else
            d[key] = std::string("inf");
    };
    put("i0", rep.i0);
    put("j_slow", rep.j_slow);
    put("j_damp", rep.j_damp);
    put("j_fcyc", rep.j_fcyc);
    put("total", rep.total);
    d["fisher"] = rep.fisher;
    d["continuity_residual"] = rep.continuity_residual;
    return d;
}

}  // namespace

PYBIND11_MODULE(_fastflux, m) {
    m.doc() = "fast-reaction network toolkit (C++ core bindings)";

    py::register_exception<NetworkError>(m, "NetworkError");

    py::class_<Network>(m, "Network")
        .def_property_readonly("nodes", &Network::nodes)
        .def_property_readonly("num_edges", &Network::num_edges)
        .def("__repr__", [](const Network& n) {
            return "<Network " + std::to_string(n.num_nodes()) + " nodes, " +
                   std::to_string(n.num_edges()) + " edges>";
        });

    m.def("load_network", &load_network);
    m.def("parse_net_text", &parse_net_text);
    m.def("serialize_net_text", &serialize_net_text);

    m.def("stationary", [](const Network& net, double eps) {
        return stationary_distribution(net, eps).pi;
    });

    m.def("analyze", [](const Network& net) {
        const Decomposition d = decompose(net);
        py::dict out;
        py::dict nodes, edges;
        for (int x = 0; x < net.num_nodes(); ++x) {
            py::dict e;
            e["class"] = std::string(to_string(d.node_class.kind[x]));
            if (d.in_v1(x))
                e["pi_tilde"] = d.node_class.pi_tilde[x];
            else
                e["pi"] = d.node_class.pi_limit[x];
            nodes[py::str(net.node_name(x))] = e;
        }
        for (int r = 0; r < net.num_edges(); ++r)
            edges[py::str(net.node_name(net.edge(r).src) + "->" +
                          net.node_name(net.edge(r).dst))] =
                std::string(to_string(d.edge_class.kind[r]));
        out["nodes"] = nodes;
        out["edges"] = edges;
        std::vector<std::vector<std::string>> comps;
        for (const auto& comp : d.fast_components.components) {
            std::vector<std::string> names;
            for (int x : comp) names.push_back(net.node_name(x));
            comps.push_back(names);
        }
        out["fast_components"] = comps;
        out["has_damped_cycle"] = has_damped_cycle(d);
        return out;
    });

    m.def("simulate_eps", [](const Network& net, double eps, const std::vector<double>& rho0,
                             double t_end, int steps) {
        return trajectory_to_dict(net, simulate_eps(net, eps, rho0, t_end, steps));
    });

    m.def("simulate_effective",
          [](const Network& net, const std::vector<double>& u0, double t_end, int steps) {
              const Decomposition d = decompose(net);
              const EffectiveSystem sys = build_effective(net, d);
              const auto wp = well_prepare(u0, d, sys);
              return trajectory_to_dict(net, simulate_effective(sys, net, d, wp, t_end, steps));
          });

    m.def("well_prepare", [](const Network& net, const std::vector<double>& u0) {
        const Decomposition d = decompose(net);
        return well_prepare(u0, d, build_effective(net, d));
    });

    m.def("effective_blocks", [](const Network& net) {
        const Decomposition d = decompose(net);
        const EffectiveSystem sys = build_effective(net, d);
        py::dict out;
        out["coords"] = sys.coord_names;
        out["A00"] = matrix_to_list(sys.a00);
        out["A10"] = matrix_to_list(sys.a10);
        out["A01"] = matrix_to_list(sys.a01);
        out["A11"] = matrix_to_list(sys.a11);
        out["reconstruct_V1"] = matrix_to_list(sys.reconstruct);
        out["A11_condition"] = sys.a11_condition;
        return out;
    });

    m.def("rate_functional_eps", [](const Network& net, double eps,
                                    const std::vector<double>& rho0, double t_end, int steps) {
        const Decomposition d = decompose(net);
        const StationaryDist pi = stationary_distribution(net, eps);
        const Trajectory raw = simulate_eps(net, eps, rho0, t_end, steps);
        return report_to_dict(eval_J_eps(rescale(raw, pi, d, net), net, d, pi));
    });

    m.def("rel_entropy", [](double a, double b) { return rel_entropy(a, b).as_double(); });
    m.def("young", &young);
    m.def("young_conjugate", &young_conjugate);

    m.def("spike_report", [](int cycle_len, int exit_index, double t_end, double eps) {
        SpikeConfig cfg;
        cfg.cycle_len = cycle_len;
        cfg.exit_index = exit_index;
        cfg.t_end = t_end;
        cfg.eps = eps;
        const SpikeTrajectory spike = build_spike(cfg);
        const SpikeCostTable table = spike_cost(spike);
        py::dict out;
        out["analytic"] = std::vector<double>(table.analytic.begin(), table.analytic.end());
        out["numeric"] = std::vector<double>(table.numeric.begin(), table.numeric.end());
        out["i0"] = table.i0_eps;
        out["total"] = table.total_eps;
        out["max_rel_err"] = table.max_rel_err;
        return out;
    });
}
