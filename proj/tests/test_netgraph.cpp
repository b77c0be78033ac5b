#include "pipeflow/netgraph.hpp"

#include "pipeflow/errors.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <random>

using namespace pipeflow;

TEST_CASE("single-pipe graph builds with the published parameters") {
    Network net = test::single_pipe_network();
    CHECK(net.graph.vertex_count() == 2);
    CHECK(net.graph.edge_count() == 1);
    CHECK(net.graph.is_slack(1));
    CHECK_FALSE(net.graph.is_slack(2));
    CHECK(net.graph.edge(0).pipe.length == doctest::Approx(20000.0));
    CHECK(net.graph.edge(0).pipe.area == doctest::Approx(0.25 * M_PI * 0.9144 * 0.9144));
}

TEST_CASE("five-node topology builds") {
    Network net = test::five_node_network();
    CHECK(net.graph.vertex_count() == 5);
    CHECK(net.graph.edge_count() == 5);
    CHECK(net.graph.slack_set() == std::vector<VertexId>{1});
    CHECK(net.graph.flow_set() == std::vector<VertexId>{2, 3, 4, 5});
}

TEST_CASE("graph validation rejects bad inputs") {
    EdgeSpec e{1, 2, test::paper_pipe()};

    SUBCASE("empty slack set") {
        CHECK_THROWS_WITH_AS(MetricGraph::build({1, 2}, {e}, {}), doctest::Contains("EmptySlackSet"),
                             Error);
    }
    SUBCASE("duplicate edge") {
        CHECK_THROWS_AS(MetricGraph::build({1, 2}, {e, e}, {1}), Error);
        EdgeSpec rev{2, 1, test::paper_pipe()};
        try {
            MetricGraph::build({1, 2}, {e, rev}, {1});
            FAIL("expected DuplicateEdge");
        } catch (const Error& err) {
            CHECK(err.code() == Errc::duplicate_edge);
        }
    }
    SUBCASE("non-positive parameter") {
        EdgeSpec bad = e;
        bad.pipe.length = 0.0;
        try {
            MetricGraph::build({1, 2}, {bad}, {1});
            FAIL("expected NonPositiveParameter");
        } catch (const Error& err) {
            CHECK(err.code() == Errc::non_positive_parameter);
        }
    }
    SUBCASE("disconnected") {
        EdgeSpec e34{3, 4, test::paper_pipe()};
        try {
            MetricGraph::build({1, 2, 3, 4}, {e, e34}, {1});
            FAIL("expected DisconnectedGraph");
        } catch (const Error& err) {
            CHECK(err.code() == Errc::disconnected_graph);
        }
    }
}

TEST_CASE("refinement: 20 km pipe at eps = 5000 gives four equal segments") {
    Network net = test::single_pipe_network();
    RefinedGraph rg = refine(net.graph, 5000.0);
    const auto& segs = rg.segments(0);
    REQUIRE(segs.size() == 4);
    for (int e : segs) CHECK(rg.graph().edge(e).pipe.length == doctest::Approx(5000.0));
    // Subdivision bound: eps L / (eps + L) < Lhat <= eps.
    double lower = 5000.0 * 20000.0 / (5000.0 + 20000.0);
    CHECK(lower == doctest::Approx(4000.0));
    for (int e : segs) {
        double lhat = rg.graph().edge(e).pipe.length;
        CHECK(lhat > lower);
        CHECK(lhat <= 5000.0);
    }
}

TEST_CASE("refinement: eps larger than the pipe keeps it whole") {
    Network net = test::single_pipe_network();
    RefinedGraph rg = refine(net.graph, 30000.0);
    CHECK(rg.graph().edge_count() == 1);
    CHECK(rg.graph().edge(0).pipe.length == doctest::Approx(20000.0));
}

TEST_CASE("refinement: eps = 5999 still gives four segments and honors the bound") {
    Network net = test::single_pipe_network();
    RefinedGraph rg = refine(net.graph, 5999.0);
    REQUIRE(rg.segments(0).size() == 4);
    double lower = 5999.0 * 20000.0 / (5999.0 + 20000.0);
    CHECK(lower == doctest::Approx(4614.79).epsilon(1e-4));
    for (int e : rg.segments(0)) {
        double lhat = rg.graph().edge(e).pipe.length;
        CHECK(lhat == doctest::Approx(5000.0));
        CHECK(lhat > lower);
        CHECK(lhat <= 5999.0);
    }
}

TEST_CASE("refinement rejects non-positive eps") {
    Network net = test::single_pipe_network();
    try {
        refine(net.graph, 0.0);
        FAIL("expected NonPositiveEpsilon");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::non_positive_epsilon);
    }
}

TEST_CASE("refinement properties over random graphs") {
    std::mt19937_64 rng(20240811);
    std::uniform_real_distribution<double> eps_d(1500.0, 90000.0);
    for (int trial = 0; trial < 40; ++trial) {
        auto rn = test::random_network(rng, 6);
        const MetricGraph& g = rn.net.graph;
        double eps = eps_d(rng);
        RefinedGraph rg = refine(g, eps);

        for (int pe = 0; pe < g.edge_count(); ++pe) {
            double L = g.edge(pe).pipe.length;
            double sum = 0.0;
            for (int e : rg.segments(pe)) {
                double lhat = rg.graph().edge(e).pipe.length;
                sum += lhat;
                CHECK(lhat > eps * L / (eps + L));
                CHECK(lhat <= eps * (1.0 + 1e-12));
            }
            CHECK(sum == doctest::Approx(L).epsilon(1e-12));
        }
        // Parent vertices keep their slack/flow role; interior vertices are
        // flow vertices located strictly inside their parent edge.
        for (VertexId pv : g.vertices()) {
            VertexId rv = rg.refined_of_parent(pv);
            CHECK(rg.graph().is_slack(rv) == g.is_slack(pv));
            CHECK(rg.coord(rv).at_parent_node());
        }
        for (VertexId rv : rg.graph().vertices()) {
            const auto& c = rg.coord(rv);
            if (c.at_parent_node()) continue;
            CHECK_FALSE(rg.graph().is_slack(rv));
            double L = g.edge(c.parent_edge).pipe.length;
            CHECK(c.arclength > 0.0);
            CHECK(c.arclength < L);
        }
    }
}
