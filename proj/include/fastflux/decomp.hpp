#pragma once

#include <string>
#include <vector>

#include "fastflux/network.hpp"

namespace fastflux {

enum class NodeKind { V0Slow, V0Fcyc, V1 };
enum class EdgeKind { Slow, FastCycle, DampedCycle, DampedNoCycle };

inline bool is_damped(EdgeKind k) {
    return k == EdgeKind::DampedCycle || k == EdgeKind::DampedNoCycle;
}

const char* to_string(NodeKind k);
const char* to_string(EdgeKind k);

/// Scaling class per node, with the extrapolated stationary limits:
/// pi_limit on V0 nodes, pi_tilde (= lim pi^eps/eps) on V1 nodes.
struct NodeClass {
    std::vector<NodeKind> kind;      // per node
    std::vector<double> pi_limit;    // valid on V0 nodes, 0 elsewhere
    std::vector<double> pi_tilde;    // valid on V1 nodes, 0 elsewhere
    std::vector<double> exponent;    // fitted k_x, diagnostics
};

struct EdgeClass {
    std::vector<EdgeKind> kind;  // per edge
};

/// Strongly connected components of (V0fcyc, Rfcyc) with their limit masses.
struct FastComponents {
    std::vector<std::vector<int>> components;  // node indices per component
    std::vector<double> pi_c;                  // sum of pi_limit over the component
    std::vector<int> comp_of;                  // per node: component index or -1
};

struct Decomposition {
    NodeClass node_class;
    EdgeClass edge_class;
    FastComponents fast_components;

    bool in_v1(int x) const { return node_class.kind[x] == NodeKind::V1; }
    bool in_v0(int x) const { return !in_v1(x); }
    int component_of(int x) const { return fast_components.comp_of[x]; }
};

class LeakError : public NetworkError {
  public:
    explicit LeakError(const std::string& msg) : NetworkError(msg) {}
};

/// Numeric scaling classification from two eps probes; rejects networks whose
/// stationary weights decay like eps^2 or faster (the no-leak assumption).
NodeClass classify_nodes(const Network& net, double eps1, double eps2,
                         const Tolerances& tol = default_tolerances());
NodeClass classify_nodes(const Network& net, const Tolerances& tol = default_tolerances());

/// Fast+source-in-V0 -> FastCycle, fast+source-in-V1 -> Damped (cycle status
/// unresolved until damped_cycle_partition), slow-from-V0 -> Slow; a slow edge
/// out of V1 is a leak and raises LeakError.
EdgeClass classify_edges(const Network& net, const NodeClass& nodes);

FastComponents fast_components(const Network& net, const NodeClass& nodes, const EdgeClass& edges);

/// Splits Damped into DampedCycle / DampedNoCycle by SCCs of the damped subgraph.
void damped_cycle_partition(const Network& net, EdgeClass& edges);

/// Full pipeline: classify, partition, and verify the structural lemmas.
Decomposition decompose(const Network& net, const Tolerances& tol = default_tolerances());

/// Node/edge-category consistency checks ("node categorisation" and "fast
/// cycles"); throws NetworkError with a diagnostic when violated.
void verify_structure(const Network& net, const Decomposition& d);

bool has_damped_cycle(const Decomposition& d);

/// JSON report for the `analyze` CLI subcommand.
std::string decomposition_report_json(const Network& net, const Decomposition& d);

}  // namespace fastflux
