#include <doctest.h>

#include <cmath>

#include "flexmap/distflow.hpp"
#include "flexmap/errors.hpp"
#include "flexmap/grid.hpp"

using namespace flexmap;
using distflow::ActivationContext;
using distflow::InterfaceWindow;
using distflow::ObjectiveDirection;

namespace {

std::string fixture_path() { return std::string(FLEXMAP_DATA_DIR) + "/case33.json"; }

grid::Network case33() {
    static grid::Network net = grid::load_network(fixture_path());
    return net;
}

grid::Network two_bus(double r_ohm, double x_ohm, bool with_unit, double cap_kw = 200.0,
                      double cap_kvar = 200.0) {
    grid::Network net;
    net.base_mva = 10.0;
    net.base_kv = 11.0;
    net.buses.push_back({1, 0.0, 0.0, 0.9, 1.1, true});
    net.buses.push_back({2, 500.0, 300.0, 0.9, 1.1, false});
    net.branches.push_back({1, 2, r_ohm, x_ohm, 5000.0, false});
    if (with_unit) net.flex_units.push_back({1, 2, -cap_kw, cap_kw, -cap_kvar, cap_kvar, 0.95});
    grid::validate_network(net);
    return net;
}

} // namespace

TEST_SUITE("distflow") {

TEST_CASE("lossless two-bus program pins the interface to the demand") {
    grid::Network net = two_bus(0.0, 0.0, false);
    auto pt = distflow::solve_opf(net, {+1, 0}, ActivationContext::off(), {});
    REQUIRE(pt.has_value());
    CHECK(pt->interface_p == doctest::Approx(500.0).epsilon(1e-7));
    CHECK(pt->interface_q == doctest::Approx(300.0).epsilon(1e-7));
    CHECK(pt->exactness_residual <= 1e-6);
}

TEST_CASE("build_opf structure: active boxes and the cardinality row") {
    grid::Network net = case33();
    conic::Problem fixed =
        distflow::build_opf(net, {-1, 0}, ActivationContext::all_units(net), {});
    // Five active units contribute ten box-bounded output variables.
    int boxed = 0;
    for (int v = 0; v < fixed.num_variables(); ++v)
        if (fixed.lower()[v] == net.kw_to_pu(-200.0) && fixed.upper()[v] == net.kw_to_pu(200.0))
            ++boxed;
    CHECK(boxed == 10);

    conic::Problem relaxed_nolimit =
        distflow::build_opf(net, {-1, 0}, ActivationContext::relaxed(std::nullopt), {});
    conic::Problem relaxed_limit2 =
        distflow::build_opf(net, {-1, 0}, ActivationContext::relaxed(2), {});
    // The cardinality limit adds exactly one row (plus its slack).
    CHECK(relaxed_limit2.equalities().size() == relaxed_nolimit.equalities().size() + 1);
    CHECK(relaxed_limit2.num_variables() == relaxed_nolimit.num_variables() + 1);
}

TEST_CASE("all units off reproduces the initial operating point in every direction") {
    grid::Network net = case33();
    const auto sweep = distflow::sweep_power_flow(net);

    for (ObjectiveDirection dir : {ObjectiveDirection{+1, 0}, ObjectiveDirection{-1, 0},
                                   ObjectiveDirection{0, +1}, ObjectiveDirection{0, -1}}) {
        auto pt = distflow::solve_opf(net, dir, ActivationContext::off(), {});
        REQUIRE(pt.has_value());
        CHECK(pt->exactness_residual <= 1e-6);
        CHECK(pt->interface_p ==
              doctest::Approx(sweep.point.interface_p).epsilon(1e-6).scale(1000));
        CHECK(pt->interface_q ==
              doctest::Approx(sweep.point.interface_q).epsilon(1e-6).scale(1000));
    }
}

TEST_CASE("lossless two-bus with one unit: closed-form interface range") {
    grid::Network net = two_bus(0.0, 0.0, true);
    ActivationContext act = ActivationContext::fixed({1});

    auto min_p = distflow::solve_opf(net, {+1, 0}, act, {});
    auto max_p = distflow::solve_opf(net, {-1, 0}, act, {});
    REQUIRE(min_p.has_value());
    REQUIRE(max_p.has_value());
    // r = x = 0: interface = demand - unit output, no losses anywhere.
    CHECK(min_p->interface_p == doctest::Approx(300.0).epsilon(1e-6));
    CHECK(max_p->interface_p == doctest::Approx(700.0).epsilon(1e-6));
}

TEST_CASE("infeasible window reports an empty slice") {
    grid::Network net = case33();
    InterfaceWindow win;
    win.q_lo = 50000.0;  // far beyond anything reachable
    win.q_hi = 60000.0;
    auto pt = distflow::solve_opf(net, {+1, 0}, ActivationContext::all_units(net), win);
    CHECK_FALSE(pt.has_value());
}

TEST_CASE("max-consumption direction returns a cone-tight physical point") {
    grid::Network net = case33();
    auto pt = distflow::solve_opf(net, {-1, 0}, ActivationContext::all_units(net), {});
    REQUIRE(pt.has_value());
    CHECK(pt->exactness_residual <= 1e-6);

    // Re-run the dispatch through the sweep oracle.
    std::vector<double> inj_p(net.buses.size(), 0.0), inj_q(net.buses.size(), 0.0);
    for (const auto& fo : pt->flex_outputs) {
        const int bi = net.bus_index(net.flex_units[&fo - pt->flex_outputs.data()].bus);
        inj_p[bi] += fo.p_kw;
        inj_q[bi] += fo.q_kvar;
    }
    auto sweep = distflow::sweep_power_flow(net, inj_p, inj_q);
    CHECK(std::abs(sweep.point.interface_p - pt->interface_p) <= 1e-5 * 10000.0);
    CHECK(std::abs(sweep.point.interface_q - pt->interface_q) <= 1e-5 * 10000.0);
    CHECK(sweep.feasible(1e-6));

    // And it must actually increase consumption over the initial point.
    auto initial = distflow::sweep_power_flow(net);
    CHECK(pt->interface_p > initial.point.interface_p + 500.0);
}

TEST_CASE("sweep: zero demand gives a flat profile") {
    grid::Network net = two_bus(0.5, 0.5, false);
    net.buses[1].demand_p = 0.0;
    net.buses[1].demand_q = 0.0;
    auto sweep = distflow::sweep_power_flow(net);
    CHECK(sweep.point.voltages[0] == doctest::Approx(1.0));
    CHECK(sweep.point.voltages[1] == doctest::Approx(1.0));
    CHECK(sweep.point.interface_p == doctest::Approx(0.0));
    CHECK(sweep.point.losses_p == doctest::Approx(0.0));
}

TEST_CASE("sweep matches the conic initial operating point on the fixture") {
    grid::Network net = case33();
    auto sweep = distflow::sweep_power_flow(net);
    auto conic_pt = distflow::solve_opf(net, {+1, 0}, ActivationContext::off(), {});
    REQUIRE(conic_pt.has_value());
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        CHECK(std::abs(sweep.point.voltages[i] - conic_pt->voltages[i]) <= 1e-6);
    // The famous case33 voltage sag at the feeder end.
    const int far_end = net.bus_index(18);
    CHECK(sweep.point.voltages[far_end] > 0.90);
    CHECK(sweep.point.voltages[far_end] < 0.92);
}

TEST_CASE("absurd injection diverges or flags violations") {
    grid::Network net = case33();
    std::vector<double> inj_p(net.buses.size(), 0.0), inj_q(net.buses.size(), 0.0);
    for (std::size_t i = 1; i < net.buses.size(); ++i) {
        inj_p[i] = -100.0 * net.buses[i].demand_p;
        inj_q[i] = -100.0 * net.buses[i].demand_q;
    }
    bool diverged = false;
    bool flagged = false;
    try {
        auto sweep = distflow::sweep_power_flow(net, inj_p, inj_q);
        flagged = !sweep.feasible(1e-6);
    } catch (const NumericalError&) {
        diverged = true;
    }
    CHECK((diverged || flagged));
}

TEST_CASE("loss sign: total active losses stay nonnegative") {
    grid::Network net = case33();
    for (ObjectiveDirection dir : {ObjectiveDirection{+1, 0}, ObjectiveDirection{-1, 0},
                                   ObjectiveDirection{0, -1}}) {
        auto pt = distflow::solve_opf(net, dir, ActivationContext::all_units(net), {});
        REQUIRE(pt.has_value());
        CHECK(pt->losses_p >= -1e-9);
    }
}

TEST_CASE("monotone relaxation: relaxed bound never exceeds fixed-subset optima") {
    grid::Network net = grid::generate_radial(9, 3, 5);
    const ObjectiveDirection dir{-1, 0};

    auto relaxed = distflow::solve_relaxation(net, dir, 2, {}, {}, {});
    REQUIRE(relaxed.status == conic::SolveStatus::Optimal);

    double best_fixed = std::numeric_limits<double>::infinity();
    const std::vector<std::set<int>> subsets = {{},     {1},    {2},    {3},   {1, 2},
                                                {1, 3}, {2, 3}};
    for (const auto& s : subsets) {
        auto pt = distflow::solve_opf(net, dir, ActivationContext::fixed(s), {});
        REQUIRE(pt.has_value());
        best_fixed = std::min(best_fixed, pt->objective_pu);
    }
    CHECK(relaxed.bound_pu <= best_fixed + 1e-6);
}

TEST_CASE("oracle agreement on exact optima") {
    grid::Network net = grid::generate_radial(12, 3, 21);
    for (ObjectiveDirection dir : {ObjectiveDirection{+1, 0}, ObjectiveDirection{0, -1}}) {
        auto pt = distflow::solve_opf(net, dir, ActivationContext::all_units(net), {});
        REQUIRE(pt.has_value());
        REQUIRE(pt->exactness_residual <= 1e-6);
        std::vector<double> inj_p(net.buses.size(), 0.0), inj_q(net.buses.size(), 0.0);
        for (std::size_t u = 0; u < net.flex_units.size(); ++u) {
            const int bi = net.bus_index(net.flex_units[u].bus);
            inj_p[bi] += pt->flex_outputs[u].p_kw;
            inj_q[bi] += pt->flex_outputs[u].q_kvar;
        }
        auto sweep = distflow::sweep_power_flow(net, inj_p, inj_q);
        CHECK(std::abs(sweep.point.interface_p - pt->interface_p) <= 1e-5 * 10000.0);
        CHECK(sweep.feasible(1e-6));
    }
}

} // TEST_SUITE
