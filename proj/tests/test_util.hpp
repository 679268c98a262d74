#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "fastflux/network.hpp"

namespace testutil {

inline std::string data_path(const std::string& name) {
    return std::string(FASTFLUX_DATA_DIR) + "/" + name;
}

inline std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline fastflux::Network fig1() { return fastflux::load_network(data_path("fig1.net")); }
inline fastflux::Network fig3() { return fastflux::load_network(data_path("fig3.net")); }

// Independent stationary-distribution oracle: Gaussian elimination with
// partial pivoting on the drift matrix with the last row replaced by the
// normalization. Deliberately unrelated to the library's least-squares path.
inline std::vector<double> stationary_oracle(const fastflux::Network& net, double eps) {
    const int n = net.num_nodes();
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (int r = 0; r < net.num_edges(); ++r) {
        const auto& e = net.edge(r);
        const double k = (e.speed == fastflux::Speed::Fast) ? e.rate / eps : e.rate;
        a[e.dst][e.src] += k;
        a[e.src][e.src] -= k;
    }
    for (int c = 0; c < n; ++c) a[n - 1][c] = 1.0;
    a[n - 1][n] = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int row = col + 1; row < n; ++row)
            if (std::abs(a[row][col]) > std::abs(a[piv][col])) piv = row;
        std::swap(a[col], a[piv]);
        for (int row = 0; row < n; ++row) {
            if (row == col || a[col][col] == 0.0) continue;
            const double f = a[row][col] / a[col][col];
            for (int c2 = col; c2 <= n; ++c2) a[row][c2] -= f * a[col][c2];
        }
    }
    std::vector<double> pi(n);
    for (int i = 0; i < n; ++i) pi[i] = a[i][n] / a[i][i];
    return pi;
}

}  // namespace testutil
