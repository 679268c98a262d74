#include "fastflux/network.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fastflux {

namespace {

// Tarjan strongly connected components over an adjacency list.
struct Tarjan {
    const std::vector<std::vector<int>>& adj;
    std::vector<int> index, low, comp;
    std::vector<bool> on_stack;
    std::vector<int> stack;
    int counter = 0, ncomp = 0;

    explicit Tarjan(const std::vector<std::vector<int>>& adj)
        : adj(adj),
          index(adj.size(), -1),
          low(adj.size(), 0),
          comp(adj.size(), -1),
          on_stack(adj.size(), false) {}

    void run() {
        for (int v = 0; v < static_cast<int>(adj.size()); ++v)
            if (index[v] < 0) strongconnect(v);
    }

    void strongconnect(int v) {
        // Iterative DFS; the recursion depth could exceed the stack on long chains.
        struct Frame {
            int v;
            size_t next = 0;
        };
        std::vector<Frame> frames{{v}};
        visit(v);
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.next < adj[f.v].size()) {
                int w = adj[f.v][f.next++];
                if (index[w] < 0) {
                    visit(w);
                    frames.push_back({w});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    while (true) {
                        int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if (w == f.v) break;
                    }
                    ++ncomp;
                }
                int child = f.v;
                frames.pop_back();
                if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[child]);
            }
        }
    }

    void visit(int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
    }
};

}  // namespace

std::vector<int> strongly_connected_components(const std::vector<std::vector<int>>& adj, int* ncomp) {
    Tarjan t(adj);
    t.run();
    if (ncomp) *ncomp = t.ncomp;
    return t.comp;
}

Network::Network(std::vector<std::string> node_ids, std::vector<Edge> edge_list)
    : nodes_(std::move(node_ids)), edges_(std::move(edge_list)) {
    const int n = num_nodes();
    if (n == 0) throw NetworkError("empty node list");
    {
        std::map<std::string, int> seen;
        for (int i = 0; i < n; ++i)
            if (!seen.emplace(nodes_[i], i).second)
                throw NetworkError("duplicate node id '" + nodes_[i] + "'");
    }
    std::map<std::tuple<int, int, int>, int> dedup;
    for (size_t r = 0; r < edges_.size(); ++r) {
        const Edge& e = edges_[r];
        if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
            throw NetworkError("edge endpoint out of range");
        if (e.src == e.dst)
            throw NetworkError("self-loop on node '" + nodes_[e.src] + "'");
        if (!(e.rate > 0.0) || !std::isfinite(e.rate))
            throw NetworkError("nonpositive rate on edge " + nodes_[e.src] + "->" + nodes_[e.dst]);
        if (!dedup.emplace(std::make_tuple(e.src, e.dst, static_cast<int>(e.speed)), 1).second)
            throw NetworkError("duplicate edge " + nodes_[e.src] + "->" + nodes_[e.dst] +
                               " in the same speed class");
    }
    std::vector<std::vector<int>> adj(n);
    for (const Edge& e : edges_) adj[e.src].push_back(e.dst);
    int ncomp = 0;
    strongly_connected_components(adj, &ncomp);
    if (ncomp != 1)
        throw NetworkError("graph is not diconnected (" + std::to_string(ncomp) +
                           " strongly connected components)");
}

int Network::node_index(const std::string& id) const {
    for (int i = 0; i < num_nodes(); ++i)
        if (nodes_[i] == id) return i;
    throw NetworkError("unknown node id '" + id + "'");
}

int Network::find_edge(int src, int dst, Speed speed) const {
    for (int r = 0; r < num_edges(); ++r)
        if (edges_[r].src == src && edges_[r].dst == dst && edges_[r].speed == speed) return r;
    return -1;
}

// --- parsing -------------------------------------------------------------------

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream iss(line);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

double parse_rate(const std::string& tok, int lineno, int col) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ParseError("bad rate value '" + tok + "'", lineno, col);
    }
    if (pos != tok.size()) throw ParseError("trailing characters in rate '" + tok + "'", lineno, col);
    return v;
}

}  // namespace

Network parse_net_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> node_ids;
    std::map<std::string, int> idx;
    std::vector<Edge> edges;
    bool have_nodes = false;

    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
        auto toks = tokenize(line);
        if (toks.empty()) continue;
        if (!have_nodes) {
            if (toks[0] != "nodes:")
                throw ParseError("expected 'nodes:' header, got '" + toks[0] + "'", lineno, 1);
            for (size_t i = 1; i < toks.size(); ++i) {
                if (!idx.emplace(toks[i], static_cast<int>(node_ids.size())).second)
                    throw ParseError("duplicate node id '" + toks[i] + "'", lineno,
                                     static_cast<int>(i));
                node_ids.push_back(toks[i]);
            }
            if (node_ids.empty()) throw ParseError("empty node list", lineno, 1);
            have_nodes = true;
            continue;
        }
        // edge line: src -> dst rate=<v> speed=<slow|fast>
        if (toks.size() != 5 || toks[1] != "->")
            throw ParseError("expected 'src -> dst rate=<v> speed=<slow|fast>'", lineno, 1);
        Edge e;
        auto it = idx.find(toks[0]);
        if (it == idx.end()) throw ParseError("unknown source node '" + toks[0] + "'", lineno, 1);
        e.src = it->second;
        it = idx.find(toks[2]);
        if (it == idx.end()) throw ParseError("unknown target node '" + toks[2] + "'", lineno, 3);
        e.dst = it->second;
        if (toks[3].rfind("rate=", 0) != 0) throw ParseError("expected rate=<v>", lineno, 4);
        e.rate = parse_rate(toks[3].substr(5), lineno, 4);
        if (toks[4] == "speed=slow")
            e.speed = Speed::Slow;
        else if (toks[4] == "speed=fast")
            e.speed = Speed::Fast;
        else
            throw ParseError("expected speed=slow or speed=fast", lineno, 5);
        edges.push_back(e);
    }
    if (!have_nodes) throw ParseError("missing 'nodes:' header", lineno, 1);
    return Network(std::move(node_ids), std::move(edges));
}

Network parse_net_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), 1, static_cast<int>(e.byte));
    }
    std::vector<std::string> node_ids = j.at("nodes").get<std::vector<std::string>>();
    std::map<std::string, int> idx;
    for (size_t i = 0; i < node_ids.size(); ++i) idx[node_ids[i]] = static_cast<int>(i);
    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
        Edge e;
        const std::string src = je.at("src").get<std::string>();
        const std::string dst = je.at("dst").get<std::string>();
        if (!idx.count(src)) throw NetworkError("unknown source node '" + src + "'");
        if (!idx.count(dst)) throw NetworkError("unknown target node '" + dst + "'");
        e.src = idx[src];
        e.dst = idx[dst];
        e.rate = je.at("rate").get<double>();
        const std::string sp = je.at("speed").get<std::string>();
        if (sp == "slow")
            e.speed = Speed::Slow;
        else if (sp == "fast")
            e.speed = Speed::Fast;
        else
            throw NetworkError("bad speed '" + sp + "'");
        edges.push_back(e);
    }
    return Network(std::move(node_ids), std::move(edges));
}

Network load_network(const std::string& path) {
    std::ifstream ifs;
    std::ostringstream buf;
    {
        std::ifstream f(path);
        if (!f) throw NetworkError("cannot open '" + path + "'");
        buf << f.rdbuf();
    }
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
        return parse_net_json(buf.str());
    return parse_net_text(buf.str());
}

std::string serialize_net_text(const Network& net) {
    std::ostringstream os;
    os.precision(17);
    os << "nodes:";
    for (const auto& id : net.nodes()) os << ' ' << id;
    os << '\n';
    for (const Edge& e : net.edges()) {
        os << net.node_name(e.src) << " -> " << net.node_name(e.dst) << "  rate=" << e.rate
           << "  speed=" << (e.speed == Speed::Slow ? "slow" : "fast") << '\n';
    }
    return os.str();
}

std::string serialize_net_json(const Network& net) {
    nlohmann::json j;
    j["nodes"] = net.nodes();
    j["edges"] = nlohmann::json::array();
    for (const Edge& e : net.edges()) {
        j["edges"].push_back({{"src", net.node_name(e.src)},
                              {"dst", net.node_name(e.dst)},
                              {"rate", e.rate},
                              {"speed", e.speed == Speed::Slow ? "slow" : "fast"}});
    }
    return j.dump(2);
}

// --- operations ------------------------------------------------------------------

RateVector assemble_rates(const Network& net, double eps) {
    if (!(eps > 0)) throw NetworkError("epsilon must be positive");
    RateVector rv;
    rv.epsilon = eps;
    rv.values.resize(net.num_edges());
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        rv.values[r] = (e.speed == Speed::Fast) ? e.rate / eps : e.rate;
    }
    return rv;
}

std::vector<double> divergence(const Network& net, const std::vector<double>& edge_values) {
    if (static_cast<int>(edge_values.size()) != net.num_edges())
        throw NetworkError("edge value vector has wrong length");
    std::vector<double> div(net.num_nodes(), 0.0);
    for (int r = 0; r < net.num_edges(); ++r) {
        div[net.edge(r).src] += edge_values[r];
        div[net.edge(r).dst] -= edge_values[r];
    }
    return div;
}

Eigen::MatrixXd drift_matrix(const Network& net, const RateVector& rates) {
    const int n = net.num_nodes();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (int r = 0; r < net.num_edges(); ++r) {
        const Edge& e = net.edge(r);
        l(e.dst, e.src) += rates.values[r];
        l(e.src, e.src) -= rates.values[r];
    }
    return l;
}

GeneratorMatrix generator(const Network& net, const RateVector& rates) {
    return GeneratorMatrix{drift_matrix(net, rates).transpose()};
}

GeneratorMatrix subgraph_generator(const Network& net, const std::vector<int>& node_set,
                                   const std::vector<int>& edge_set) {
    const int m = static_cast<int>(node_set.size());
    std::vector<int> local(net.num_nodes(), -1);
    for (int i = 0; i < m; ++i) local[node_set[i]] = i;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (int r : edge_set) {
        const Edge& e = net.edge(r);
        const int s = local[e.src], d = local[e.dst];
        if (s < 0 || d < 0) throw NetworkError("subgraph edge leaves the node set");
        a(s, d) += e.rate;
        a(s, s) -= e.rate;
    }
    return GeneratorMatrix{a};
}

StationaryDist stationary_distribution(const Network& net, double eps, const Tolerances& tol) {
    const int n = net.num_nodes();
    const RateVector rates = assemble_rates(net, eps);
    const Eigen::MatrixXd l = drift_matrix(net, rates);
    Eigen::MatrixXd aug(n + 1, n);
    aug.topRows(n) = l;
    aug.row(n).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
    b(n) = 1.0;
    Eigen::VectorXd pi = aug.colPivHouseholderQr().solve(b);

    const double max_rate = *std::max_element(rates.values.begin(), rates.values.end());
    const double resid = (l * pi).lpNorm<Eigen::Infinity>();
    if (resid > tol.stationary_residual * max_rate)
        throw NetworkError("stationary solve residual " + std::to_string(resid) +
                           " exceeds tolerance (network invariant violated upstream?)");
    StationaryDist sd;
    sd.epsilon = eps;
    sd.pi.resize(n);
    for (int i = 0; i < n; ++i) {
        if (!(pi(i) > 0))
            throw NetworkError("stationary distribution not strictly positive at node '" +
                               net.node_name(i) + "'");
        sd.pi[i] = pi(i);
    }
    return sd;
}

Eigen::MatrixXd column_space_basis(const Eigen::MatrixXd& a, double rank_tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    const double cutoff = rank_tol * std::max(1.0, sv(0));
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) ++rank;
    return svd.matrixU().leftCols(rank);
}

double generator_negativity_bound(const GeneratorMatrix& gen) {
    const Eigen::MatrixXd& a = gen.entries;
    if (a.rows() == 0 || a.norm() == 0.0) throw NetworkError("zero generator matrix");
    const Eigen::MatrixXd s = 0.5 * (a + a.transpose());
    const Eigen::MatrixXd p = column_space_basis(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.transpose() * s * p);
    return es.eigenvalues().maxCoeff();
}

}  // namespace fastflux
