#include "fastflux/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

namespace fastflux {

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::V0Slow: return "V0slow";
        case NodeKind::V0Fcyc: return "V0fcyc";
        case NodeKind::V1: return "V1";
    }
    return "?";
}

const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Slow: return "slow";
        case EdgeKind::FastCycle: return "fcyc";
        case EdgeKind::DampedCycle: return "dcyc";
        case EdgeKind::DampedNoCycle: return "dnocyc";
    }
    return "?";
}

NodeClass classify_nodes(const Network& net, double eps1, double eps2, const Tolerances& tol) {
    if (!(eps1 > eps2 && eps2 > 0))
        throw NetworkError("probe epsilons must satisfy eps1 > eps2 > 0");
    const StationaryDist p1 = stationary_distribution(net, eps1, tol);
    const StationaryDist p2 = stationary_distribution(net, eps2, tol);
    const int n = net.num_nodes();

    NodeClass nc;
    nc.kind.resize(n);
    nc.pi_limit.assign(n, 0.0);
    nc.pi_tilde.assign(n, 0.0);
    nc.exponent.resize(n);

    const double logratio = std::log(eps1 / eps2);
    for (int x = 0; x < n; ++x) {
        const double k = std::log(p1.pi[x] / p2.pi[x]) / logratio;
        nc.exponent[x] = k;
        const long rounded = std::lround(k);
        if (std::abs(k - static_cast<double>(rounded)) > tol.exponent_round || rounded < 0 ||
            rounded > 1)
            throw LeakError("node '" + net.node_name(x) + "' has stationary scaling exponent " +
                            std::to_string(k) +
                            "; leak or higher-order network rejected (standing assumption)");
        if (rounded == 0) {
            // pi^eps analytic in eps: first-order Richardson extrapolation to eps=0.
            nc.pi_limit[x] = p2.pi[x] + (p2.pi[x] - p1.pi[x]) * eps2 / (eps1 - eps2);
            nc.kind[x] = NodeKind::V0Slow;  // refined below
        } else {
            const double t1 = p1.pi[x] / eps1, t2 = p2.pi[x] / eps2;
            nc.pi_tilde[x] = t2 + (t2 - t1) * eps2 / (eps1 - eps2);
            nc.kind[x] = NodeKind::V1;
        }
    }
    for (const Edge& e : net.edges())
        if (e.speed == Speed::Fast && nc.kind[e.src] == NodeKind::V0Slow)
            nc.kind[e.src] = NodeKind::V0Fcyc;
    for (int x = 0; x < n; ++x) {
        if (nc.kind[x] != NodeKind::V1 && !(nc.pi_limit[x] > 0))
            throw NetworkError("nonpositive extrapolated pi at node '" + net.node_name(x) + "'");
        if (nc.kind[x] == NodeKind::V1 && !(nc.pi_tilde[x] > 0))
            throw NetworkError("nonpositive extrapolated pi~ at node '" + net.node_name(x) + "'");
    }
    return nc;
}

NodeClass classify_nodes(const Network& net, const Tolerances& tol) {
    return classify_nodes(net, tol.probe_eps_1, tol.probe_eps_2, tol);
}

EdgeClass classify_edges(const Network& net, const NodeClass& nodes) {
    EdgeClass ec;
    ec.kind.resize(net.num_edges());
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        const bool src_v1 = nodes.kind[e.src] == NodeKind::V1;
        if (e.speed == Speed::Fast) {
            ec.kind[r] = src_v1 ? EdgeKind::DampedNoCycle : EdgeKind::FastCycle;
        } else {
            if (src_v1)
                throw LeakError("leak flux: slow edge " + net.node_name(e.src) + "->" +
                                net.node_name(e.dst) + " leaves the O(eps) node '" +
                                net.node_name(e.src) + "'");
            ec.kind[r] = EdgeKind::Slow;
        }
    }
    return ec;
}

FastComponents fast_components(const Network& net, const NodeClass& nodes, const EdgeClass& edges) {
    const int n = net.num_nodes();
    std::vector<std::vector<int>> adj(n);
    for (int r = 0; r < net.num_edges(); ++r)
        if (edges.kind[r] == EdgeKind::FastCycle) adj[net.edge(r).src].push_back(net.edge(r).dst);

    int ncomp = 0;
    const std::vector<int> label = strongly_connected_components(adj, &ncomp);

    FastComponents fc;
    fc.comp_of.assign(n, -1);
    std::vector<int> remap(ncomp, -1);
    for (int x = 0; x < n; ++x) {
        if (nodes.kind[x] != NodeKind::V0Fcyc) continue;
        int& slot = remap[label[x]];
        if (slot < 0) {
            slot = static_cast<int>(fc.components.size());
            fc.components.emplace_back();
        }
        fc.components[slot].push_back(x);
        fc.comp_of[x] = slot;
    }
    // Lemma "fast cycles": the fcyc subgraph consists purely of cycles — every
    // fcyc edge stays inside one SCC and every V0fcyc node has fast in/out
    // degree >= 1 within it.
    for (int r = 0; r < net.num_edges(); ++r) {
        if (edges.kind[r] != EdgeKind::FastCycle) continue;
        const Edge& e = net.edge(r);
        if (fc.comp_of[e.src] < 0 || fc.comp_of[e.src] != fc.comp_of[e.dst])
            throw NetworkError("fast edge " + net.node_name(e.src) + "->" + net.node_name(e.dst) +
                               " is not inside a fast cycle component (structural inconsistency)");
    }
    std::vector<int> indeg(n, 0), outdeg(n, 0);
    for (int r = 0; r < net.num_edges(); ++r)
        if (edges.kind[r] == EdgeKind::FastCycle) {
            ++outdeg[net.edge(r).src];
            ++indeg[net.edge(r).dst];
        }
    for (const auto& comp : fc.components) {
        if (comp.size() < 2)
            throw NetworkError("fast cycle component of node '" + net.node_name(comp[0]) +
                               "' is a singleton (structural inconsistency)");
        for (int x : comp)
            if (indeg[x] == 0 || outdeg[x] == 0)
                throw NetworkError("node '" + net.node_name(x) +
                                   "' lacks fast in/out degree within its component");
    }
    fc.pi_c.resize(fc.components.size());
    for (size_t c = 0; c < fc.components.size(); ++c) {
        double s = 0;
        for (int x : fc.components[c]) s += nodes.pi_limit[x];
        fc.pi_c[c] = s;
    }
    return fc;
}

void damped_cycle_partition(const Network& net, EdgeClass& edges) {
    const int n = net.num_nodes();
    std::vector<std::vector<int>> adj(n);
    for (int r = 0; r < net.num_edges(); ++r)
        if (is_damped(edges.kind[r])) adj[net.edge(r).src].push_back(net.edge(r).dst);
    int ncomp = 0;
    const std::vector<int> label = strongly_connected_components(adj, &ncomp);
    for (int r = 0; r < net.num_edges(); ++r) {
        if (!is_damped(edges.kind[r])) continue;
        const Edge& e = net.edge(r);
        edges.kind[r] =
            (label[e.src] == label[e.dst]) ? EdgeKind::DampedCycle : EdgeKind::DampedNoCycle;
    }
}

Decomposition decompose(const Network& net, const Tolerances& tol) {
    Decomposition d;
    d.node_class = classify_nodes(net, tol);
    d.edge_class = classify_edges(net, d.node_class);
    d.fast_components = fast_components(net, d.node_class, d.edge_class);
    damped_cycle_partition(net, d.edge_class);
    verify_structure(net, d);
    return d;
}

void verify_structure(const Network& net, const Decomposition& d) {
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        const NodeKind src = d.node_class.kind[e.src];
        const NodeKind dst = d.node_class.kind[e.dst];
        const EdgeKind ek = d.edge_class.kind[r];
        auto fail = [&](const std::string& what) {
            throw NetworkError("lemma check failed on edge " + net.node_name(e.src) + "->" +
                               net.node_name(e.dst) + ": " + what);
        };
        if (src == NodeKind::V0Slow && ek != EdgeKind::Slow)
            fail("V0slow nodes have only slow outgoing edges");
        if (src == NodeKind::V0Fcyc && !(ek == EdgeKind::Slow || ek == EdgeKind::FastCycle))
            fail("V0fcyc outgoing edges must be slow or fast-cycle");
        if (src == NodeKind::V1 && !is_damped(ek)) fail("V1 outgoing edges must be damped");
        if (dst == NodeKind::V1 && ek == EdgeKind::FastCycle)
            fail("V1 nodes cannot receive fast-cycle edges");
        if (dst == NodeKind::V0Slow && ek == EdgeKind::FastCycle)
            fail("V0slow nodes cannot receive fast-cycle edges");
    }
    // partition sanity
    for (int x = 0; x < net.num_nodes(); ++x) {
        const bool in_comp = d.fast_components.comp_of[x] >= 0;
        if ((d.node_class.kind[x] == NodeKind::V0Fcyc) != in_comp)
            throw NetworkError("node '" + net.node_name(x) +
                               "' component membership inconsistent with its class");
    }
}

bool has_damped_cycle(const Decomposition& d) {
    return std::any_of(d.edge_class.kind.begin(), d.edge_class.kind.end(),
                       [](EdgeKind k) { return k == EdgeKind::DampedCycle; });
}

std::string decomposition_report_json(const Network& net, const Decomposition& d) {
    nlohmann::json j;
    auto& nodes = j["nodes"];
    for (int x = 0; x < net.num_nodes(); ++x) {
        nlohmann::json e;
        e["id"] = net.node_name(x);
        e["class"] = to_string(d.node_class.kind[x]);
        e["exponent"] = d.node_class.exponent[x];
        if (d.in_v1(x))
            e["pi_tilde"] = d.node_class.pi_tilde[x];
        else
            e["pi"] = d.node_class.pi_limit[x];
        nodes.push_back(e);
    }
    auto& edges = j["edges"];
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        edges.push_back({{"src", net.node_name(e.src)},
                         {"dst", net.node_name(e.dst)},
                         {"rate", e.rate},
                         {"class", to_string(d.edge_class.kind[r])}});
    }
    auto& comps = j["fast_components"];
    comps = nlohmann::json::array();
    for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
        nlohmann::json e;
        e["nodes"] = nlohmann::json::array();
        for (int x : d.fast_components.components[c]) e["nodes"].push_back(net.node_name(x));
        e["pi"] = d.fast_components.pi_c[c];
        comps.push_back(e);
    }
    j["has_damped_cycle"] = has_damped_cycle(d);
    j["structure_verified"] = true;  // decompose() throws otherwise
    return j.dump(2);
}

}  // namespace fastflux
