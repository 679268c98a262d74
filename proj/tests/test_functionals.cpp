#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fastflux/dynamics.hpp"
#include "fastflux/functionals.hpp"
#include "test_util.hpp"

using namespace fastflux;
using testutil::fig1;
using testutil::fig3;

namespace {

// plain fixed-panel Simpson, independent of the library quadrature
double simpson_oracle(const std::function<double(double)>& f, double lo, double hi, int panels) {
    double acc = 0;
    const double h = (hi - lo) / panels;
    for (int i = 0; i < panels; ++i) {
        const double a = lo + i * h, b = a + h;
        acc += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
    }
    return acc;
}

Trajectory exact_rescaled_flow(const Network& net, const Decomposition& d, double eps,
                               const std::vector<double>& u0, double t_end, int steps,
                               StationaryDist* pi_out = nullptr) {
    const StationaryDist pi = stationary_distribution(net, eps);
    std::vector<double> rho0(net.num_nodes());
    for (int x = 0; x < net.num_nodes(); ++x) rho0[x] = pi.pi[x] * u0[x];
    if (pi_out) *pi_out = pi;
    return rescale(simulate_eps(net, eps, rho0, t_end, steps), pi, d, net);
}

// adds a constant raw flux around the directed cycle 4 -> 1 -> 2 -> 5 -> 4,
// which leaves every divergence unchanged
void add_cycle_flux(Trajectory& traj, const Network& net, const Decomposition& d, double c) {
    const double se = std::sqrt(traj.epsilon);
    for (const auto& [src, dst] : std::vector<std::pair<const char*, const char*>>{
             {"4", "1"}, {"1", "2"}, {"2", "5"}, {"5", "4"}}) {
        int r = net.find_edge(net.node_index(src), net.node_index(dst), Speed::Slow);
        if (r < 0) r = net.find_edge(net.node_index(src), net.node_index(dst), Speed::Fast);
        REQUIRE(r >= 0);
        const double add = d.edge_class.kind[r] == EdgeKind::FastCycle ? se * c : c;
        traj.edge_flux.row(r).array() += add;
    }
}

}  // namespace

TEST_CASE("relative entropy boundary conventions") {
    CHECK(rel_entropy(0.0, 3.5).value() == doctest::Approx(3.5));
    CHECK(rel_entropy(0.0, 0.0).value() == 0.0);
    for (double b : {0.5, 1.0, 7.0}) CHECK(rel_entropy(b, b).value() == doctest::Approx(0.0));
    CHECK(rel_entropy(1.0, std::exp(1.0)).value() == doctest::Approx(std::exp(1.0) - 2.0));
    CHECK_FALSE(rel_entropy(1.0, 0.0).finite());
    CHECK_FALSE(rel_entropy(-1.0, 1.0).finite());
    CHECK_FALSE(rel_entropy(1.0, -1.0).finite());
    CHECK_FALSE(rel_entropy(-1.0, -1.0).finite());
}

TEST_CASE("extended reals propagate infinity through sums") {
    ExtReal a = ExtReal::of(1.0);
    a += ExtReal::infinity();
    CHECK_FALSE(a.finite());
    CHECK((ExtReal::of(2.0) + ExtReal::of(3.0)).value() == doctest::Approx(5.0));
    CHECK(std::isinf(ExtReal::infinity().as_double()));
}

TEST_CASE("young function closed form against quadrature of asinh") {
    CHECK(young(0.0) == doctest::Approx(0.0));
    CHECK(young_conjugate(0.0) == doctest::Approx(0.0));
    CHECK(young(2.0) == doctest::Approx(2.0 * std::asinh(1.0) - 2.0 * std::sqrt(2.0) + 2.0));
    for (double a : {0.5, 1.0, 2.0, 3.0, 7.0}) {
        const double oracle =
            simpson_oracle([](double q) { return std::asinh(0.5 * q); }, 0.0, a, 2000);
        CHECK(young(a) == doctest::Approx(oracle).epsilon(1e-10));
        CHECK(young(-a) == doctest::Approx(young(a)).epsilon(1e-13));  // even
    }
}

TEST_CASE("fenchel conjugacy on a grid") {
    for (double a = -3.0; a <= 3.0; a += 0.25) {
        double best = -HUGE_VAL;
        for (double p = -15.0; p <= 15.0; p += 1e-4)
            best = std::max(best, p * a - young_conjugate(p));
        CHECK(young(a) == doctest::Approx(best).epsilon(1e-6));
        // equality point of C(a) + C*(p) >= a p
        const double p_star = std::asinh(0.5 * a);
        CHECK(young(a) + young_conjugate(p_star) == doctest::Approx(a * p_star).epsilon(1e-9));
    }
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ua(-5, 5), up(-4, 4);
    for (int i = 0; i < 1000; ++i) {
        const double a = ua(rng), p = up(rng);
        CHECK(young(a) + young_conjugate(p) >= a * p - 1e-12);
    }
}

TEST_CASE("inequality suite on random inputs") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uab(0.0, 10.0), udelta(0.0, 1.0), up(-8.0, 8.0);
    for (int i = 0; i < 100000; ++i) {
        const double a = uab(rng), b = uab(rng) + 1e-12;
        const double s = rel_entropy(a, b).value();
        for (double alpha : {0.5, 1.0, 2.0})
            CHECK(s >= (1.0 - alpha) * b + a * std::log(alpha) - 1e-10);
        CHECK(s <= a * a / b - 2.0 * a + b + 1e-10);
        CHECK(s >= b * young((a - b) / b) - 1e-10);
        const double p = up(rng), delta = udelta(rng);
        CHECK(young(delta * p) >= delta * delta * young(p) - 1e-10);
        CHECK(young(delta * p) <= delta * young(p) + 1e-10);
        CHECK(young(2.0 * p) <= 4.0 * young(p) + 1e-10);  // Delta_2
    }
}

TEST_CASE("joint convexity of the relative entropy") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.01, 10.0), ul(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double a1 = u(rng), b1 = u(rng), a2 = u(rng), b2 = u(rng), lam = ul(rng);
        const double lhs =
            rel_entropy(lam * a1 + (1 - lam) * a2, lam * b1 + (1 - lam) * b2).value();
        const double rhs =
            lam * rel_entropy(a1, b1).value() + (1 - lam) * rel_entropy(a2, b2).value();
        CHECK(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("orlicz norm: zero input, norm axioms, and a dense-scan oracle") {
    const auto grid = uniform_grid(1.0, 64);
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 65);
    CHECK(orlicz_norm(grid, zero) == 0.0);

    Eigen::MatrixXd one_edge(1, 65);
    for (double c : {0.25, 1.0, 4.0}) {
        one_edge.setConstant(c);
        const double nrm = orlicz_norm(grid, one_edge);
        one_edge.setConstant(2.0 * c);
        const double nrm2 = orlicz_norm(grid, one_edge);
        CHECK(nrm2 <= 2.0 * nrm + 1e-10);
        CHECK(nrm2 >= nrm - 1e-10);

        // dense scan over log a as the independent minimizer
        one_edge.setConstant(c);
        double best = HUGE_VAL;
        for (int i = 0; i <= 10000; ++i) {
            const double a = std::exp(-18.0 + 36.0 * i / 10000.0);
            best = std::min(best, (1.0 + young(a * c)) / a);
        }
        CHECK(nrm == doctest::Approx(best).epsilon(1e-6));

        // Amemiya duality bound holds for sampled a
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> ua(-6.0, 6.0);
        for (int i = 0; i < 50; ++i) {
            const double a = std::exp(ua(rng));
            CHECK(a * nrm <= 1.0 + young(a * c) + 1e-9);
        }
    }
}

TEST_CASE("initial cost: unit density minimizes, constants integrate, V1 ignored in limit") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const StationaryDist pi = stationary_distribution(net, 1e-3);

    CHECK(eval_I0_eps(std::vector<double>(5, 1.0), pi).value() == doctest::Approx(0.0));
    CHECK(eval_I0_limit(std::vector<double>(5, 1.0), d).value() ==
          doctest::Approx(0.0).epsilon(1e-9));

    // sum pi = 1 collapses u = 2 to a single s(2|1)
    CHECK(eval_I0_eps(std::vector<double>(5, 2.0), pi).value() ==
          doctest::Approx(2.0 * std::log(2.0) - 1.0).epsilon(1e-12));

    std::vector<double> u0 = {1.3, 1.3, 1.3, 0.7, 0.1};
    const double base = eval_I0_limit(u0, d).value();
    u0[net.node_index("5")] = 42.0;
    CHECK(eval_I0_limit(u0, d).value() == doctest::Approx(base));
}

TEST_CASE("rate functional vanishes on the exact flow") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        StationaryDist pi;
        const Trajectory resc =
            exact_rescaled_flow(net, d, eps, {1.5, 1.5, 1.5, 0.8, 1.0}, 1.0, 2000, &pi);
        const FunctionalReport rep = eval_J_eps(resc, net, d, pi);
        CHECK(rep.cost_terms().finite());
        CHECK(rep.cost_terms().value() <= 1e-8);
        CHECK(rep.total.finite());  // continuity gate accepts the exact flow
    }
}

TEST_CASE("perturbed slow flux raises the cost monotonically") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    StationaryDist pi;
    const Trajectory base =
        exact_rescaled_flow(net, d, 1e-2, {1.5, 1.5, 1.5, 0.8, 1.0}, 1.0, 500, &pi);
    double prev = 0.0;
    for (double c : {0.05, 0.1, 0.2}) {
        Trajectory perturbed = base;
        add_cycle_flux(perturbed, net, d, c);
        const FunctionalReport rep = eval_J_eps(perturbed, net, d, pi);
        REQUIRE(rep.total.finite());
        CHECK(rep.j_slow.value() > prev);
        prev = rep.j_slow.value();
    }
}

TEST_CASE("one percent continuity violation sends the total to infinity") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    StationaryDist pi;
    Trajectory traj = exact_rescaled_flow(net, d, 1e-2, {1.5, 1.5, 1.5, 0.8, 1.0}, 1.0, 500, &pi);
    traj.edge_flux *= 1.01;  // scales every stored flux, breaking the mild equations
    const FunctionalReport rep = eval_J_eps(traj, net, d, pi);
    CHECK_FALSE(rep.total.finite());
    CHECK(rep.continuity_residual > 0);
}

TEST_CASE("limit functional: the effective flow is the minimizer") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const EffectiveSystem sys = build_effective(net, d);
    const std::vector<double> u0 = well_prepare({2.0, 2.0, 2.0, 0.5, 1.0}, d, sys);
    const Trajectory eff = simulate_effective(sys, net, d, u0, 1.0, 2000);
    const FunctionalReport rep = eval_J_limit(eff, net, d);
    REQUIRE(rep.total.finite());
    CHECK(rep.cost_terms().value() <= 1e-8);
    CHECK(rep.total.value() == doctest::Approx(eval_I0_limit(u0, d).value()).epsilon(1e-9));
}

TEST_CASE("constant centered fast flux pays the quadratic price") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const EffectiveSystem sys = build_effective(net, d);
    const Trajectory eff = simulate_effective(sys, net, d, std::vector<double>(5, 1.0), 1.0, 200);
    const double c = 0.3;
    Trajectory with_flux = eff;
    for (int r = 0; r < net.num_edges(); ++r)
        if (d.edge_class.kind[r] == EdgeKind::FastCycle)
            with_flux.edge_flux.row(r).setConstant(c);
    const FunctionalReport rep = eval_J_limit(with_flux, net, d);
    REQUIRE(rep.total.finite());
    // per edge: c^2 T / (2 kappa pi_{r-} u) with pi = 1/4, u = 1
    CHECK(rep.j_fcyc.value() == doctest::Approx(3.0 * 0.5 * c * c / 0.25).epsilon(1e-4));
    CHECK(rep.j_slow.value() <= 1e-10);
}

TEST_CASE("damped atoms need matching source atoms") {
    const Network net = fig3();
    const Decomposition d = decompose(net);
    const int nodes = net.num_nodes();

    Trajectory traj;
    traj.frame = Frame::Limit;
    traj.grid = uniform_grid(1.0, 50);
    traj.node_density = Eigen::MatrixXd::Zero(nodes, 51);
    traj.edge_flux = Eigen::MatrixXd::Zero(net.num_edges(), 51);
    traj.node_density.row(net.node_index("4"))
        .setConstant(1.0 / d.node_class.pi_limit[net.node_index("4")]);

    Atom atom;
    atom.time = 0.5;
    for (const auto& [src, dst] : std::vector<std::pair<const char*, const char*>>{
             {"1", "2"}, {"2", "3"}, {"3", "1"}}) {
        const int r = net.find_edge(net.node_index(src), net.node_index(dst), Speed::Fast);
        atom.edge_weight[r] = 0.25;
        const int x = net.node_index(src);
        atom.node_weight[x] = 0.5 / d.node_class.pi_tilde[x];  // twice the matched size
    }
    // per-atom Radon-Nikodym sum over every damped edge whose source carries a
    // mass atom, including the exit edge with zero flux atom (s(0|b) = b)
    double expect = 0;
    for (int r = 0; r < net.num_edges(); ++r) {
        if (!is_damped(d.edge_class.kind[r])) continue;
        const int x = net.edge(r).src;
        if (!atom.node_weight.count(x)) continue;
        const double wj = atom.edge_weight.count(r) ? atom.edge_weight[r] : 0.0;
        expect += rel_entropy(wj, net.edge(r).rate * d.node_class.pi_tilde[x] *
                                       atom.node_weight[x])
                      .value();
    }
    traj.atoms.push_back(atom);
    const FunctionalReport rep = eval_J_limit(traj, net, d);
    REQUIRE(rep.j_damp.finite());
    CHECK(rep.j_damp.value() == doctest::Approx(expect).epsilon(1e-9));
    CHECK(rep.total.finite());

    Trajectory bare = traj;
    bare.atoms[0].node_weight.clear();  // flux atom with no mass atom underneath
    const FunctionalReport rep2 = eval_J_limit(bare, net, d);
    CHECK_FALSE(rep2.j_damp.finite());
}

TEST_CASE("unbalanced atom flags the continuity residual") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    Trajectory traj;
    traj.frame = Frame::Limit;
    traj.grid = uniform_grid(1.0, 20);
    traj.node_density = Eigen::MatrixXd::Zero(5, 21);
    traj.edge_flux = Eigen::MatrixXd::Zero(7, 21);
    Atom atom;
    atom.time = 0.5;
    atom.edge_weight[net.find_edge(net.node_index("5"), net.node_index("4"), Speed::Fast)] = 0.25;
    traj.atoms.push_back(atom);
    CHECK(limit_continuity_residual(traj, net, d) >= 0.25 - 1e-12);
}

TEST_CASE("fisher information: constants vanish, two-node hand value") {
    const Network two = parse_net_text("nodes: 1 2\n"
                                       "1 -> 2 rate=1 speed=slow\n"
                                       "2 -> 1 rate=1 speed=slow\n");
    Trajectory traj;
    traj.frame = Frame::Rescaled;
    traj.epsilon = 1.0;
    traj.grid = uniform_grid(1.0, 10);
    traj.node_density = Eigen::MatrixXd::Zero(2, 11);
    traj.edge_flux = Eigen::MatrixXd::Zero(2, 11);
    const StationaryDist pi = stationary_distribution(two, 1.0);

    for (double c : {1.0, 2.5}) {
        traj.node_density.setConstant(c);
        CHECK(fisher_info(traj, two, pi) == doctest::Approx(0.0));
    }
    traj.node_density.row(0).setConstant(4.0);
    traj.node_density.row(1).setConstant(1.0);
    CHECK(fisher_info(traj, two, pi) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("FIR margin: zero at stationarity, nonnegative on exact flows") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    const double eps = 1e-2;
    StationaryDist pi;
    {
        const Trajectory flat =
            exact_rescaled_flow(net, d, eps, std::vector<double>(5, 1.0), 1.0, 300, &pi);
        const FunctionalReport rep = eval_J_eps(flat, net, d, pi);
        CHECK(fir_check(flat, net, d, pi, rep) == doctest::Approx(0.0).epsilon(1e-12));
    }
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> u0(5);
        for (auto& v : u0) v = u(rng);
        const Trajectory traj = exact_rescaled_flow(net, d, eps, u0, 1.0, 2000, &pi);
        const FunctionalReport rep = eval_J_eps(traj, net, d, pi);
        CHECK(fir_check(traj, net, d, pi, rep) >= -1e-6);
    }
}

TEST_CASE("FIR margin survives continuity-respecting perturbations") {
    const Network net = fig1();
    const Decomposition d = decompose(net);
    StationaryDist pi;
    const Trajectory base =
        exact_rescaled_flow(net, d, 1e-2, {1.5, 1.5, 1.5, 0.8, 1.0}, 1.0, 500, &pi);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uc(0.0, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        Trajectory perturbed = base;
        add_cycle_flux(perturbed, net, d, uc(rng));
        const FunctionalReport rep = eval_J_eps(perturbed, net, d, pi);
        REQUIRE(rep.total.finite());
        CHECK(fir_check(perturbed, net, d, pi, rep) >= -1e-6);
    }
}

TEST_CASE("report serializes to json with infinity spelled out") {
    FunctionalReport rep;
    rep.i0 = ExtReal::of(1.5);
    rep.j_slow = rep.j_damp = rep.j_fcyc = ExtReal::of(0.0);
    rep.total = ExtReal::infinity();
    const std::string j = report_to_json(rep);
    CHECK(j.find("\"total\": \"inf\"") != std::string::npos);
    CHECK(j.find("\"i0\": 1.5") != std::string::npos);
}
