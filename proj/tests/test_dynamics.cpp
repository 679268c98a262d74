#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastflux/dynamics.hpp"
#include "test_util.hpp"

using namespace fastflux;
using testutil::fig1;
using testutil::fig3;

namespace {

Network two_node_slow() {
    return parse_net_text("nodes: 1 2\n"
                          "1 -> 2 rate=1 speed=slow\n"
                          "2 -> 1 rate=1 speed=slow\n");
}

}  // namespace

TEST_CASE("stationary initial datum stays put, fluxes equal the steady flux") {
    const Network net = fig1();
    const double eps = 1e-2;
    const StationaryDist pi = stationary_distribution(net, eps);
    const Trajectory traj = simulate_eps(net, eps, pi.pi, 1.0, 200);
    const RateVector rv = assemble_rates(net, eps);
    for (int k = 0; k < traj.points(); ++k) {
        for (int x = 0; x < net.num_nodes(); ++x)
            CHECK(traj.node_density(x, k) == doctest::Approx(pi.pi[x]).epsilon(1e-10));
        for (int r = 0; r < net.num_edges(); ++r)
            CHECK(traj.edge_flux(r, k) ==
                  doctest::Approx(rv.values[r] * pi.pi[net.edge(r).src]).epsilon(1e-10));
    }
}

TEST_CASE("two-node relaxation matches the closed-form exponential") {
    const Network net = two_node_slow();
    const Trajectory traj = simulate_eps(net, 1.0, {1.0, 0.0}, 2.0, 400);
    for (int k = 0; k < traj.points(); ++k) {
        const double expect = 0.5 * (1.0 + std::exp(-2.0 * traj.grid[k]));
        CHECK(traj.node_density(0, k) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("a point mass on the hub equilibrates over the fast cycle in O(eps) time") {
    const Network net = fig1();
    const double eps = 1e-3;
    std::vector<double> rho0(5, 0.0);
    rho0[net.node_index("4")] = 1.0;
    const Trajectory traj = simulate_eps(net, eps, rho0, 1.0, 4000);
    const StationaryDist pi = stationary_distribution(net, eps);
    // the freshly injected mass carries a relative skew of order eps/t
    auto relative_spread_at = [&](double t) {
        int k = 0;
        while (traj.grid[k] < t) ++k;
        double lo = HUGE_VAL, hi = 0;
        for (const char* id : {"1", "2", "3"}) {
            const int x = net.node_index(id);
            const double ratio = traj.node_density(x, k) / pi.pi[x];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        return (hi - lo) / hi;
    };
    const double at_layer = relative_spread_at(10 * eps);
    const double at_mid = relative_spread_at(100 * eps);
    const double at_late = relative_spread_at(1000 * eps);
    CHECK(at_layer < 0.5);
    CHECK(at_mid < 0.05);
    CHECK(at_late < 0.005);
    CHECK(at_mid < at_layer);
    CHECK(at_late < at_mid);
}

TEST_CASE("mass is conserved to 1e-10 relative") {
    const Network net = fig1();
    const Trajectory traj = simulate_eps(net, 1e-4, {0.2, 0.1, 0.3, 0.25, 0.15}, 1.0, 500);
    const double m0 = traj.node_density.col(0).sum();
    for (int k = 0; k < traj.points(); ++k)
        CHECK(std::abs(traj.node_density.col(k).sum() - m0) <= 1e-10 * m0);
}

TEST_CASE("rescale: stationary data become unit densities with vanishing centered flux") {
    const Network net = fig1();
    const double eps = 1e-3;
    const StationaryDist pi = stationary_distribution(net, eps);
    const Decomposition d = decompose(net);
    const Trajectory raw = simulate_eps(net, eps, pi.pi, 0.5, 100);
    const Trajectory resc = rescale(raw, pi, d, net);
    for (int k = 0; k < resc.points(); ++k) {
        for (int x = 0; x < net.num_nodes(); ++x)
            CHECK(resc.node_density(x, k) == doctest::Approx(1.0).epsilon(1e-9));
        for (int r = 0; r < net.num_edges(); ++r)
            if (d.edge_class.kind[r] == EdgeKind::FastCycle)
                CHECK(std::abs(resc.edge_flux(r, k)) <= 1e-9);
    }
}

TEST_CASE("rescale round-trips to the raw frame") {
    const Network net = fig1();
    const double eps = 1e-2;
    const StationaryDist pi = stationary_distribution(net, eps);
    const Decomposition d = decompose(net);
    const Trajectory raw = simulate_eps(net, eps, {0.3, 0.1, 0.2, 0.25, 0.15}, 1.0, 100);
    const Trajectory back = unrescale(rescale(raw, pi, d, net), pi, d, net);
    CHECK((back.node_density - raw.node_density).cwiseAbs().maxCoeff() <=
          1e-12 * raw.node_density.cwiseAbs().maxCoeff());
    CHECK((back.edge_flux - raw.edge_flux).cwiseAbs().maxCoeff() <=
          1e-12 * raw.edge_flux.cwiseAbs().maxCoeff());
}

TEST_CASE("component equilibration error shrinks with eps") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    std::vector<double> u0 = {2.0, 2.0, 2.0, 1.0, 1.0};  // well-prepared on the component
    double prev = HUGE_VAL;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const StationaryDist pi = stationary_distribution(net, eps);
        std::vector<double> rho0(5);
        for (int x = 0; x < 5; ++x) rho0[x] = pi.pi[x] * u0[x];
        const Trajectory resc =
            rescale(simulate_eps(net, eps, rho0, 1.0, 1000), pi, d, net);
        const Eigen::VectorXd uc = component_density(resc, pi.pi, d.fast_components.components[0]);
        double sup = 0;
        for (int x : d.fast_components.components[0])
            sup = std::max(sup,
                           (resc.node_density.row(x).transpose() - uc).cwiseAbs().maxCoeff());
        CHECK(sup < prev);
        prev = sup;
    }
}

TEST_CASE("effective system blocks for figure-1 match the hand reduction") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const EffectiveSystem sys = build_effective(net, d);
    REQUIRE(sys.dim_z() == 2);
    REQUIRE(sys.v1_nodes.size() == 1);

    const double pi4 = d.node_class.pi_limit[net.node_index("4")];
    const double pi2 = d.node_class.pi_limit[net.node_index("2")];
    const double pic = d.fast_components.pi_c[0];
    const double pit5 = d.node_class.pi_tilde[net.node_index("5")];

    // coordinates: z = (u_4, u_c); v = (u_5)
    // pi_4 du_4 = pi~_5 u_5 - 2 pi_4 u_4 ; pi_c du_c = pi_4 u_4 - pi_2 u_c
    CHECK(sys.a00(0, 0) == doctest::Approx(-2.0));
    CHECK(sys.a00(0, 1) == doctest::Approx(0.0));
    CHECK(sys.a10(0, 0) == doctest::Approx(pit5 / pi4));
    CHECK(sys.a00(1, 0) == doctest::Approx(pi4 / pic));
    CHECK(sys.a00(1, 1) == doctest::Approx(-pi2 / pic));
    // 0 = (pi_2 u_c + pi_4 u_4)/pi~_5 - u_5
    CHECK(sys.a11(0, 0) == doctest::Approx(-1.0));
    CHECK(sys.a01(0, 0) == doctest::Approx(pi4 / pit5));
    CHECK(sys.a01(0, 1) == doctest::Approx(pi2 / pit5));
    CHECK(sys.reconstruct(0, 0) == doctest::Approx(pi4 / pit5));
    CHECK(sys.reconstruct(0, 1) == doctest::Approx(pi2 / pit5));
    CHECK(sys.a11_condition == doctest::Approx(1.0));
}

TEST_CASE("figure-3 has an invertible 3x3 V1 block") {
    const Network net = fig3();
    const Decomposition d = decompose(net);
    const EffectiveSystem sys = build_effective(net, d);
    REQUIRE(sys.v1_nodes.size() == 3);
    CHECK(sys.a11_min_pivot > 0.1);
    // hand determinant of [[-1,0,1/2],[2,-2,0],[0,1,-1]] is -1
    CHECK(std::abs(sys.a11.determinant()) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("well_prepare: idempotent, fixes stationarity, matches hand values") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const EffectiveSystem sys = build_effective(net, d);

    const std::vector<double> ones(5, 1.0);
    const auto wp_ones = well_prepare(ones, d, sys);
    for (double v : wp_ones) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<double> u0 = {2.0, 0.0, 0.0, 1.0, 7.0};
    const auto wp = well_prepare(u0, d, sys);
    // component average pulls (2,0,0) to pi_1*2/pi_c = 2/3 for equal weights
    for (const char* id : {"1", "2", "3"})
        CHECK(wp[net.node_index(id)] == doctest::Approx(2.0 / 3).epsilon(1e-4));
    CHECK(wp[net.node_index("4")] == doctest::Approx(1.0));
    // u_5 = (pi_2 u_c + pi_4 u_4) / pi~_5 = (1/4*2/3 + 1/4)/(1/2) = 5/6
    CHECK(wp[net.node_index("5")] == doctest::Approx(5.0 / 6).epsilon(1e-4));
    const auto wp2 = well_prepare(wp, d, sys);
    for (int x = 0; x < 5; ++x) CHECK(wp2[x] == doctest::Approx(wp[x]).epsilon(1e-13));
}

TEST_CASE("effective flow: stationarity, conservation, and continuity residuals") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const EffectiveSystem sys = build_effective(net, d);

    const Trajectory constant = simulate_effective(sys, net, d, std::vector<double>(5, 1.0), 1.0, 100);
    for (int k = 0; k < constant.points(); ++k)
        for (int x = 0; x < 5; ++x)
            CHECK(constant.node_density(x, k) == doctest::Approx(1.0).epsilon(1e-10));

    std::vector<double> u0 = well_prepare({2.0, 0.0, 0.0, 1.0, 7.0}, d, sys);
    const Trajectory eff = simulate_effective(sys, net, d, u0, 1.0, 2000);
    CHECK(limit_continuity_residual(eff, net, d) <= 1e-9);

    double m0 = 0;
    for (size_t i = 0; i < sys.coord_mass.size(); ++i) m0 += sys.coord_mass[i];
    auto mass_at = [&](int k) {
        double m = 0;
        for (int x = 0; x < 5; ++x) {
            if (d.node_class.kind[x] == NodeKind::V0Slow)
                m += d.node_class.pi_limit[x] * eff.node_density(x, k);
        }
        for (size_t c = 0; c < d.fast_components.components.size(); ++c) {
            const int rep = d.fast_components.components[c][0];
            m += d.fast_components.pi_c[c] * eff.node_density(rep, k);
        }
        return m;
    };
    const double mass0 = mass_at(0);
    for (int k = 0; k < eff.points(); ++k)
        CHECK(std::abs(mass_at(k) - mass0) <= 1e-10 * std::abs(mass0));

    CHECK_THROWS_WITH_AS(simulate_effective(sys, net, d, {2.0, 0.0, 0.0, 1.0, 7.0}, 1.0, 10),
                         doctest::Contains("well-prepared"), NetworkError);
}

TEST_CASE("equilibration diagnostic: stationary data give zero, transients decay") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const double eps = 1e-3;
    const StationaryDist pi = stationary_distribution(net, eps);

    // pi^eps carries an O(eps) skew against the pure-cycle equilibrium, so
    // the column-space part is eps-small and constant rather than zero
    const Trajectory flat = simulate_eps(net, eps, pi.pi, 0.1, 100);
    const auto quiet = equilibration_diagnostic(flat, net, d, eps);
    REQUIRE(quiet.size() == 1);
    CHECK(quiet[0].sup_perp <= eps);
    CHECK(quiet[0].perp_norm.front() ==
          doctest::Approx(quiet[0].perp_norm.back()).epsilon(1e-9));

    std::vector<double> rho0(5, 0.0);
    rho0[net.node_index("1")] = 1.0;
    const Trajectory traj = simulate_eps(net, eps, rho0, 0.05, 2000);
    const auto diag = equilibration_diagnostic(traj, net, d, eps);
    REQUIRE(diag.size() == 1);
    CHECK(diag[0].lambda == doctest::Approx(-1.5).epsilon(1e-9));
    // fitted decay of |rho_perp|^2 is about 2 lambda / eps (reported, not exact)
    CHECK(diag[0].fitted_rate < 0);
    CHECK(diag[0].fitted_rate ==
          doctest::Approx(2.0 * diag[0].lambda / eps).epsilon(0.2));
    CHECK(diag[0].envelope_max_ratio <= 1.0 + 1e-6);
}
