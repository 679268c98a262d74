#include "fastflux/trajectory.hpp"

#include <cmath>
#include <sstream>

namespace fastflux {

const char* to_string(Frame f) {
    switch (f) {
        case Frame::Raw: return "raw";
        case Frame::Rescaled: return "rescaled";
        case Frame::Limit: return "limit";
    }
    return "?";
}

std::vector<double> uniform_grid(double t_end, int n_steps) {
    if (n_steps < 1) throw NetworkError("need at least one time step");
    std::vector<double> g(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) g[k] = t_end * static_cast<double>(k) / n_steps;
    return g;
}

double trapezoid(const std::vector<double>& grid, const Eigen::VectorXd& values) {
    double s = 0;
    for (size_t k = 0; k + 1 < grid.size(); ++k)
        s += 0.5 * (grid[k + 1] - grid[k]) * (values(k) + values(k + 1));
    return s;
}

double trapezoid_abs(const std::vector<double>& grid, const Eigen::VectorXd& values) {
    double s = 0;
    for (size_t k = 0; k + 1 < grid.size(); ++k)
        s += 0.5 * (grid[k + 1] - grid[k]) * (std::abs(values(k)) + std::abs(values(k + 1)));
    return s;
}

Eigen::VectorXd component_density(const Trajectory& traj, const std::vector<double>& pi,
                                  const std::vector<int>& component) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(traj.points());
    double mass = 0;
    for (int x : component) {
        out += pi[x] * traj.node_density.row(x).transpose();
        mass += pi[x];
    }
    return out / mass;
}

std::string trajectory_to_csv(const Network& net, const Trajectory& traj) {
    std::ostringstream os;
    os.precision(17);
    os << "# fastflux trajectory frame=" << to_string(traj.frame);
    if (traj.frame != Frame::Limit) os << " eps=" << traj.epsilon;
    os << "\n";
    for (const Atom& a : traj.atoms) {
        os << "# atom t=" << a.time;
        for (const auto& [x, w] : a.node_weight) os << " u:" << net.node_name(x) << "=" << w;
        for (const auto& [r, w] : a.edge_weight)
            os << " j:" << net.node_name(net.edge(r).src) << "->" << net.node_name(net.edge(r).dst)
               << "=" << w;
        os << "\n";
    }
    os << "time";
    for (int x = 0; x < net.num_nodes(); ++x) os << ",u:" << net.node_name(x);
    for (int r = 0; r < net.num_edges(); ++r)
        os << ",j:" << net.node_name(net.edge(r).src) << "->" << net.node_name(net.edge(r).dst);
    os << "\n";
    for (int k = 0; k < traj.points(); ++k) {
        os << traj.grid[k];
        for (int x = 0; x < net.num_nodes(); ++x) os << ',' << traj.node_density(x, k);
        for (int r = 0; r < net.num_edges(); ++r) os << ',' << traj.edge_flux(r, k);
        os << "\n";
    }
    return os.str();
}

namespace {

// "u:<node>" or "j:<src>-><dst>" -> (is_node, index)
std::pair<bool, int> parse_column(const Network& net, const std::string& name) {
    if (name.rfind("u:", 0) == 0) return {true, net.node_index(name.substr(2))};
    if (name.rfind("j:", 0) == 0) {
        const std::string rest = name.substr(2);
        const auto arrow = rest.find("->");
        if (arrow == std::string::npos) throw NetworkError("bad flux column '" + name + "'");
        const int s = net.node_index(rest.substr(0, arrow));
        const int d = net.node_index(rest.substr(arrow + 2));
        // the same ordered pair may carry one slow and one fast edge; the CSV
        // column order matches the network edge order, so resolve ambiguity by
        // first unclaimed match at the call site
        for (int r = 0; r < net.num_edges(); ++r)
            if (net.edge(r).src == s && net.edge(r).dst == d) return {false, r};
        throw NetworkError("no edge " + rest + " in the network");
    }
    throw NetworkError("bad column '" + name + "'");
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream iss(line);
    while (std::getline(iss, cur, sep)) out.push_back(cur);
    return out;
}

}  // namespace

Trajectory trajectory_from_csv(const Network& net, const std::string& csv) {
    Trajectory traj;
    std::istringstream in(csv);
    std::string line;
    std::vector<std::pair<bool, int>> columns;  // excluding "time"
    std::vector<std::vector<double>> rows;
    std::vector<int> claimed_edge_count;  // distinguish duplicate (src,dst) pairs

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string tok;
            ls >> tok;
            if (tok == "fastflux") {
                std::string word;
                while (ls >> word) {
                    if (word.rfind("frame=", 0) == 0) {
                        const std::string f = word.substr(6);
                        traj.frame = f == "raw"      ? Frame::Raw
                                     : f == "rescaled" ? Frame::Rescaled
                                                       : Frame::Limit;
                    } else if (word.rfind("eps=", 0) == 0) {
                        traj.epsilon = std::stod(word.substr(4));
                    }
                }
            } else if (tok == "atom") {
                Atom a;
                std::string word;
                while (ls >> word) {
                    const auto eq = word.find('=');
                    if (eq == std::string::npos) continue;
                    const std::string key = word.substr(0, eq);
                    const double val = std::stod(word.substr(eq + 1));
                    if (key == "t") {
                        a.time = val;
                    } else {
                        auto [is_node, idx] = parse_column(net, key);
                        if (is_node)
                            a.node_weight[idx] = val;
                        else
                            a.edge_weight[idx] = val;
                    }
                }
                traj.atoms.push_back(a);
            }
            continue;
        }
        if (columns.empty()) {
            auto names = split(line, ',');
            if (names.empty() || names[0] != "time")
                throw NetworkError("trajectory CSV must start with a 'time' column");
            std::vector<bool> edge_used(net.num_edges(), false);
            for (size_t i = 1; i < names.size(); ++i) {
                auto col = parse_column(net, names[i]);
                if (!col.first) {
                    // skip to the next unclaimed edge with the same endpoints
                    int r = col.second;
                    while (edge_used[r]) {
                        const Edge& e = net.edge(r);
                        int next = -1;
                        for (int q = r + 1; q < net.num_edges(); ++q)
                            if (net.edge(q).src == e.src && net.edge(q).dst == e.dst) {
                                next = q;
                                break;
                            }
                        if (next < 0) throw NetworkError("duplicate flux column " + names[i]);
                        r = next;
                    }
                    edge_used[r] = true;
                    col.second = r;
                }
                columns.push_back(col);
            }
            continue;
        }
        auto vals = split(line, ',');
        if (vals.size() != columns.size() + 1)
            throw NetworkError("trajectory CSV row has wrong number of fields");
        std::vector<double> row(vals.size());
        for (size_t i = 0; i < vals.size(); ++i) row[i] = std::stod(vals[i]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw NetworkError("trajectory CSV has no data rows");

    const int npts = static_cast<int>(rows.size());
    traj.grid.resize(npts);
    traj.node_density = Eigen::MatrixXd::Zero(net.num_nodes(), npts);
    traj.edge_flux = Eigen::MatrixXd::Zero(net.num_edges(), npts);
    for (int k = 0; k < npts; ++k) {
        traj.grid[k] = rows[k][0];
        for (size_t i = 0; i < columns.size(); ++i) {
            if (columns[i].first)
                traj.node_density(columns[i].second, k) = rows[k][i + 1];
            else
                traj.edge_flux(columns[i].second, k) = rows[k][i + 1];
        }
    }
    return traj;
}

}  // namespace fastflux
