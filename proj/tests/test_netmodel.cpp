#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastflux/network.hpp"
#include "test_util.hpp"

using namespace fastflux;
using testutil::fig1;

namespace {

Network three_cycle_fast() {
    return parse_net_text("nodes: a b c\n"
                          "a -> b rate=1 speed=fast\n"
                          "b -> c rate=1 speed=fast\n"
                          "c -> a rate=1 speed=fast\n");
}

Network two_node_slow(double a, double b) {
    std::ostringstream os;
    os << "nodes: 1 2\n1 -> 2 rate=" << a << " speed=slow\n2 -> 1 rate=" << b << " speed=slow\n";
    return parse_net_text(os.str());
}

}  // namespace

TEST_CASE("parse figure-1 document") {
    const Network net = fig1();
    CHECK(net.num_nodes() == 5);
    CHECK(net.num_edges() == 7);
    CHECK(net.edge(net.find_edge(net.node_index("5"), net.node_index("4"), Speed::Fast)).rate == 1.0);
}

TEST_CASE("two-node network is the smallest diconnected graph") {
    CHECK(two_node_slow(1, 1).num_edges() == 2);
}

TEST_CASE("parse errors carry positions and reasons") {
    CHECK_THROWS_AS(parse_net_text("nodes: 1 2\n1 -> 2 rate=1 speed=slow\n"), NetworkError);
    CHECK_THROWS_WITH_AS(parse_net_text("edges first\n"),
                         doctest::Contains("expected 'nodes:'"), ParseError);
    CHECK_THROWS_AS(parse_net_text("nodes: 1 2\n1 -> 2 rate=-1 speed=slow\n2 -> 1 rate=1 speed=slow\n"),
                    NetworkError);
    CHECK_THROWS_WITH_AS(
        parse_net_text("nodes: 1 2\n1 -> 1 rate=1 speed=slow\n2 -> 1 rate=1 speed=slow\n"),
        doctest::Contains("self-loop"), NetworkError);
    CHECK_THROWS_WITH_AS(parse_net_text("nodes: 1 2\n1 -> 2 rate=x speed=slow\n"),
                         doctest::Contains("bad rate"), ParseError);
}

TEST_CASE("duplicate edges per speed class are rejected, cross-class allowed") {
    CHECK_THROWS_WITH_AS(parse_net_text("nodes: 1 2\n"
                                        "1 -> 2 rate=1 speed=slow\n"
                                        "1 -> 2 rate=2 speed=slow\n"
                                        "2 -> 1 rate=1 speed=slow\n"),
                         doctest::Contains("duplicate edge"), NetworkError);
    const Network net = parse_net_text("nodes: 1 2\n"
                                       "1 -> 2 rate=1 speed=slow\n"
                                       "1 -> 2 rate=2 speed=fast\n"
                                       "2 -> 1 rate=1 speed=slow\n");
    CHECK(net.num_edges() == 3);
}

TEST_CASE("assemble_rates scales fast edges only") {
    const Network net = parse_net_text("nodes: 1 2\n"
                                       "1 -> 2 rate=2 speed=fast\n"
                                       "2 -> 1 rate=3 speed=slow\n");
    const RateVector rv = assemble_rates(net, 0.1);
    CHECK(rv.values[0] == doctest::Approx(20.0));
    CHECK(rv.values[1] == doctest::Approx(3.0));

    const Network f1 = fig1();
    const RateVector r1 = assemble_rates(f1, 1e-3);
    for (int r = 0; r < f1.num_edges(); ++r) {
        const double expect = f1.edge(r).speed == Speed::Fast ? 1e3 * f1.edge(r).rate
                                                              : f1.edge(r).rate;
        CHECK(r1.values[r] == doctest::Approx(expect));
    }
}

TEST_CASE("divergence definition and cycle cancellation") {
    const Network net = parse_net_text("nodes: 1 2 3\n"
                                       "1 -> 2 rate=1 speed=slow\n"
                                       "2 -> 3 rate=1 speed=slow\n"
                                       "3 -> 1 rate=1 speed=slow\n");
    std::vector<double> unit = {1.0, 0.0, 0.0};
    const auto div = divergence(net, unit);
    CHECK(div[0] == doctest::Approx(1.0));
    CHECK(div[1] == doctest::Approx(-1.0));
    CHECK(div[2] == doctest::Approx(0.0));

    const auto cyc = divergence(net, {2.5, 2.5, 2.5});
    for (double v : cyc) CHECK(v == doctest::Approx(0.0));

    CHECK_THROWS_AS(divergence(net, {1.0}), NetworkError);
}

TEST_CASE("figure-1 steady flux is divergence-free against the elimination oracle") {
    const Network net = fig1();
    for (double eps : {1e-2, 1e-3}) {
        const auto pi = testutil::stationary_oracle(net, eps);
        const RateVector rv = assemble_rates(net, eps);
        std::vector<double> flux(net.num_edges());
        for (int r = 0; r < net.num_edges(); ++r) flux[r] = rv.values[r] * pi[net.edge(r).src];
        double max_rate = 0;
        for (double v : rv.values) max_rate = std::max(max_rate, v);
        for (double v : divergence(net, flux)) CHECK(std::abs(v) <= 1e-12 * max_rate);
    }
}

TEST_CASE("stationary distribution: symmetric cycle and two-node detailed balance") {
    const Network cyc = three_cycle_fast();
    for (double eps : {1.0, 1e-2, 1e-4}) {
        const StationaryDist sd = stationary_distribution(cyc, eps);
        for (double p : sd.pi) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
    const Network two = two_node_slow(2.0, 3.0);
    const StationaryDist sd = stationary_distribution(two, 0.5);
    CHECK(sd.pi[0] == doctest::Approx(3.0 / 5).epsilon(1e-12));
    CHECK(sd.pi[1] == doctest::Approx(2.0 / 5).epsilon(1e-12));
}

TEST_CASE("figure-1 has an O(eps) node whose rescaled mass stabilizes") {
    const Network net = fig1();
    const int relay = net.node_index("5");
    const StationaryDist p3 = stationary_distribution(net, 1e-3);
    const StationaryDist p4 = stationary_distribution(net, 1e-4);
    CHECK(p3.pi[relay] / 1e-3 == doctest::Approx(p4.pi[relay] / 1e-4).epsilon(2e-3));
    // hand solve: pi~_5 = pi_2 + pi_4 = 1/2 for unit rates
    CHECK(p4.pi[relay] / 1e-4 == doctest::Approx(0.5).epsilon(1e-2));
    for (const StationaryDist* sd : {&p3, &p4}) {
        double sum = 0;
        for (double p : sd->pi) {
            CHECK(p > 0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("generator negativity bound") {
    const Network two = two_node_slow(1.0, 1.0);
    const GeneratorMatrix gen = generator(two, assemble_rates(two, 1.0));
    // characteristic polynomial of [[-1,1],[1,-1]]: eigenvalues 0 and -2
    CHECK(generator_negativity_bound(gen) == doctest::Approx(-2.0).epsilon(1e-12));

    // nullspace direction gives exactly zero
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(2);
    CHECK(std::abs(ones.dot(gen.entries * ones)) <= 1e-14);

    const Network cyc = three_cycle_fast();
    const GeneratorMatrix gc = generator(cyc, assemble_rates(cyc, 1.0));
    const double lambda = generator_negativity_bound(gc);
    CHECK(lambda == doctest::Approx(-1.5).epsilon(1e-12));

    const Eigen::MatrixXd basis = column_space_basis(gc.entries);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd w(basis.cols());
        for (int i = 0; i < w.size(); ++i) w(i) = normal(rng);
        const Eigen::VectorXd v = basis * w;
        CHECK(v.dot(gc.entries * v) <= (lambda + 1e-9) * v.squaredNorm());
        Eigen::VectorXd any(3);
        for (int i = 0; i < 3; ++i) any(i) = normal(rng);
        CHECK(any.dot(gc.entries * any) <= 1e-12);
    }
    CHECK_THROWS_AS(generator_negativity_bound(GeneratorMatrix{Eigen::MatrixXd::Zero(2, 2)}),
                    NetworkError);
}

TEST_CASE("parse -> serialize -> parse round-trips identically") {
    for (const std::string file : {"fig1.net", "fig3.net"}) {
        const Network net = load_network(testutil::data_path(file));
        const Network back = parse_net_text(serialize_net_text(net));
        REQUIRE(back.num_nodes() == net.num_nodes());
        REQUIRE(back.num_edges() == net.num_edges());
        for (int x = 0; x < net.num_nodes(); ++x) CHECK(back.node_name(x) == net.node_name(x));
        for (int r = 0; r < net.num_edges(); ++r) {
            CHECK(back.edge(r).src == net.edge(r).src);
            CHECK(back.edge(r).dst == net.edge(r).dst);
            CHECK(back.edge(r).rate == net.edge(r).rate);
            CHECK(back.edge(r).speed == net.edge(r).speed);
        }
        const Network json_back = parse_net_json(serialize_net_json(net));
        CHECK(json_back.num_edges() == net.num_edges());
    }
}

TEST_CASE("json mirror agrees with the text format") {
    const Network a = load_network(testutil::data_path("fig1.net"));
    const Network b = load_network(testutil::data_path("fig1.json"));
    REQUIRE(a.num_edges() == b.num_edges());
    for (int r = 0; r < a.num_edges(); ++r) {
        CHECK(a.edge(r).src == b.edge(r).src);
        CHECK(a.edge(r).dst == b.edge(r).dst);
    }
}
