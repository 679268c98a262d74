#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "fastflux/tolerances.hpp"

namespace fastflux {

enum class Speed { Slow, Fast };

struct Edge {
    int src = -1;
    int dst = -1;
    double rate = 0.0;  // base rate kappa_r > 0
    Speed speed = Speed::Slow;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, int line, int col)
        : std::runtime_error("parse error at line " + std::to_string(line) + ", col " +
                             std::to_string(col) + ": " + msg),
          line(line),
          col(col) {}
    int line;
    int col;
};

class NetworkError : public std::runtime_error {
  public:
    explicit NetworkError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Directed graph with slow/fast base rates. Immutable after construction;
/// construction validates positivity, no self-loops, per-(src,dst,speed)
/// uniqueness and strong connectivity (every node reaches every node).
class Network {
  public:
    Network(std::vector<std::string> node_ids, std::vector<Edge> edge_list);

    int num_nodes() const { return static_cast<int>(nodes_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int r) const { return edges_.at(r); }
    const std::string& node_name(int x) const { return nodes_.at(x); }
    int node_index(const std::string& id) const;
    /// Index of the edge src->dst with the given speed, or -1.
    int find_edge(int src, int dst, Speed speed) const;

  private:
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
};

/// Per-edge rates kappa^eps (slow: kappa, fast: kappa/eps).
struct RateVector {
    std::vector<double> values;
    double epsilon = 1.0;
};

/// Normalized positive stationary distribution of the eps-dynamics.
struct StationaryDist {
    std::vector<double> pi;
    double epsilon = 1.0;
};

/// Markov generator in the row convention: entries[x][y] = jump rate x->y for
/// x != y, rows sum to zero. The density drift is entries^T * rho, so the
/// columns of the applied (transposed) matrix sum to zero.
struct GeneratorMatrix {
    Eigen::MatrixXd entries;
};

// --- parsing / serialization -------------------------------------------------

/// Line-oriented text format: a `nodes:` header then one `src -> dst
/// rate=<float> speed=<slow|fast>` line per edge; `#` starts a comment.
Network parse_net_text(const std::string& text);
Network parse_net_json(const std::string& text);
/// Auto-detects by extension (.net text, .json mirror).
Network load_network(const std::string& path);
std::string serialize_net_text(const Network& net);
std::string serialize_net_json(const Network& net);

// --- operations ---------------------------------------------------------------

RateVector assemble_rates(const Network& net, double eps);

/// (div A)_x = sum_{r-=x} A_r - sum_{r+=x} A_r.
std::vector<double> divergence(const Network& net, const std::vector<double>& edge_values);

/// Drift matrix L = generator transpose for the given rates: rho_dot = L rho.
Eigen::MatrixXd drift_matrix(const Network& net, const RateVector& rates);

/// Generator (row convention) of the given rates.
GeneratorMatrix generator(const Network& net, const RateVector& rates);

/// Generator of a node-subset subgraph keeping only the listed edges.
GeneratorMatrix subgraph_generator(const Network& net, const std::vector<int>& node_set,
                                   const std::vector<int>& edge_set);

/// Unique stationary distribution, dense least-squares solve of the augmented
/// (drift rows + normalization row) system.
StationaryDist stationary_distribution(const Network& net, double eps,
                                       const Tolerances& tol = default_tolerances());

/// Largest nonzero eigenvalue of the symmetrized generator restricted to
/// Col(A); satisfies v^T A v <= lambda |v|^2 for all v in Col(A).
double generator_negativity_bound(const GeneratorMatrix& gen);

/// Orthonormal basis of Col(A) (the orthogonal complement of Null(A^T)).
Eigen::MatrixXd column_space_basis(const Eigen::MatrixXd& a, double rank_tol = 1e-12);

/// Tarjan SCC labels per node; component count in *ncomp when non-null.
std::vector<int> strongly_connected_components(const std::vector<std::vector<int>>& adj,
                                               int* ncomp);

}  // namespace fastflux
