#include "pipeflow/scenario.hpp"

#include "pipeflow/errors.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

using namespace pipeflow;

TEST_CASE("lift: uniform initial state stays uniform at interior vertices") {
    Network net = test::single_pipe_network();
    RefinedGraph rg = refine(net.graph, 5000.0);

    Scenario s;
    s.horizon = 3600.0;
    s.slack_density[1] = TimeFunction::constant(50.0);
    s.injections[2] = TimeFunction::constant(0.0);
    std::map<VertexId, double> init{{1, 50.0}, {2, 50.0}};
    s.initial = InitialState::per_vertex(init);

    Scenario lifted = lift_scenario(s, rg);
    CHECK(lifted.initial.values.size() == 5);
    for (const auto& [v, rho] : lifted.initial.values) CHECK(rho == doctest::Approx(50.0));
}

TEST_CASE("lift: linear interpolation between endpoint densities") {
    Network net = test::single_pipe_network();
    RefinedGraph rg = refine(net.graph, 10000.0); // one interior vertex at the midpoint

    Scenario s;
    s.horizon = 3600.0;
    s.slack_density[1] = TimeFunction::constant(55.0);
    s.injections[2] = TimeFunction::constant(0.0);
    s.initial = InitialState::per_vertex({{1, 55.0}, {2, 45.0}});

    Scenario lifted = lift_scenario(s, rg);
    VertexId mid = 0;
    for (VertexId v : rg.graph().vertices())
        if (!rg.coord(v).at_parent_node()) mid = v;
    CHECK(lifted.initial.values.at(mid) == doctest::Approx(50.0));
}

TEST_CASE("lift preserves parent injections and schedules; interior vertices stay passive") {
    Network net = test::five_node_network();
    RefinedGraph rg = refine(net.graph, 20000.0);
    Scenario s = test::five_node_base_scenario();

    Scenario lifted = lift_scenario(s, rg);

    // Restriction back to parent vertices is the identity on injections.
    for (const auto& [pv, fn] : s.injections) {
        VertexId rv = rg.refined_of_parent(pv);
        REQUIRE(lifted.injections.count(rv) == 1);
        for (double t : {0.0, 1000.0, 40000.0})
            CHECK(lifted.injections.at(rv).value(t) == doctest::Approx(fn.value(t)));
    }
    // No injection entries besides the parents'.
    CHECK(lifted.injections.size() == s.injections.size());

    // Parent compression schedules land on the outermost segments only.
    for (int pe = 0; pe < net.graph.edge_count(); ++pe) {
        const auto& segs = rg.segments(pe);
        const auto& pc = s.compat[static_cast<std::size_t>(pe)];
        CHECK(lifted.compat[static_cast<std::size_t>(segs.front())].inlet.kind == pc.inlet.kind);
        CHECK(lifted.compat[static_cast<std::size_t>(segs.back())].outlet.kind == pc.outlet.kind);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const auto& ec = lifted.compat[static_cast<std::size_t>(segs[i])];
            if (i != 0) CHECK(ec.inlet.kind == CompatSchedule::Kind::identity);
            if (i + 1 != segs.size()) CHECK(ec.outlet.kind == CompatSchedule::Kind::identity);
        }
    }
}

TEST_CASE("validate rejects an explicit initial state that contradicts the slack boundary") {
    Network net = test::single_pipe_network();
    Scenario s;
    s.horizon = 3600.0;
    s.slack_density[1] = TimeFunction::constant(50.0);
    s.initial = InitialState::per_vertex({{1, 49.0}, {2, 50.0}}); // 49 != 50 at t = 0
    try {
        validate_scenario(net.graph, s);
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::bad_argument);
    }
}

TEST_CASE("validate rejects non-positive densities and misplaced injections") {
    Network net = test::single_pipe_network();
    Scenario s;
    s.horizon = 3600.0;
    s.slack_density[1] = TimeFunction::constant(-1.0);
    CHECK_THROWS_AS(validate_scenario(net.graph, s), Error);

    s.slack_density[1] = TimeFunction::constant(50.0);
    s.injections[1] = TimeFunction::constant(1.0); // slack vertex cannot take an injection
    CHECK_THROWS_AS(validate_scenario(net.graph, s), Error);
}
