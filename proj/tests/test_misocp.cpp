#include <doctest.h>

#include <cmath>
#include <sstream>

#include "flexmap/errors.hpp"
#include "flexmap/grid.hpp"
#include "flexmap/misocp.hpp"
#include "support/brute_force.hpp"

using namespace flexmap;
using distflow::ActivationContext;
using distflow::ObjectiveDirection;

namespace {

grid::Network case33() {
    static grid::Network net =
        grid::load_network(std::string(FLEXMAP_DATA_DIR) + "/case33.json");
    return net;
}

} // namespace

TEST_SUITE("misocp") {

TEST_CASE("non-binding cardinality equals the all-units fixed solve") {
    grid::Network net = case33();
    const ObjectiveDirection dir{-1, 0};
    auto bb = misocp::solve_misocp(net, dir, 5, {});
    REQUIRE(bb.has_value());
    auto fixed = distflow::solve_opf(net, dir, ActivationContext::all_units(net), {});
    REQUIRE(fixed.has_value());
    CHECK(std::abs(bb->objective_pu - fixed->objective_pu) <= 1e-5);
}

TEST_CASE("cardinality zero returns the initial operating point") {
    grid::Network net = case33();
    auto bb = misocp::solve_misocp(net, {+1, 0}, 0, {});
    REQUIRE(bb.has_value());
    CHECK(bb->activation.empty());
    auto initial = distflow::sweep_power_flow(net);
    CHECK(bb->point.interface_p ==
          doctest::Approx(initial.point.interface_p).epsilon(1e-6).scale(1000));
}

TEST_CASE("limit 1 on the fixture finds the best singleton") {
    grid::Network net = case33();
    const ObjectiveDirection dir{+1, 0};
    auto bb = misocp::solve_misocp(net, dir, 1, {});
    REQUIRE(bb.has_value());
    CHECK(bb->activation.size() <= 1);

    auto oracle = testsupport::brute_force_misocp(net, dir, 1);
    REQUIRE(oracle.found);
    CHECK(std::abs(bb->objective_pu - oracle.objective_pu) <= 1e-5);
    CHECK(bb->activation == oracle.subset);
}

TEST_CASE("oracle equivalence across limits and directions on a synthetic network") {
    grid::Network net = grid::generate_radial(10, 3, 3);
    misocp::SubsetCache cache;
    misocp::MisocpOptions opts;
    opts.cache = &cache;
    for (ObjectiveDirection dir :
         {ObjectiveDirection{+1, 0}, ObjectiveDirection{-1, 0}, ObjectiveDirection{0, +1},
          ObjectiveDirection{0, -1}}) {
        for (int limit = 1; limit <= 3; ++limit) {
            auto bb = misocp::solve_misocp(net, dir, limit, {}, {}, {}, opts);
            auto oracle = testsupport::brute_force_misocp(net, dir, limit);
            REQUIRE(bb.has_value());
            REQUIRE(oracle.found);
            CHECK_MESSAGE(std::abs(bb->objective_pu - oracle.objective_pu) <= 1e-5, "dir (",
                          dir.pi_p, ",", dir.pi_q, ") limit ", limit);
        }
    }
}

TEST_CASE("monotonicity in the cardinality limit") {
    grid::Network net = grid::generate_radial(10, 4, 9);
    misocp::SubsetCache cache;
    misocp::MisocpOptions opts;
    opts.cache = &cache;
    const ObjectiveDirection dir{-1, 0};
    double prev = std::numeric_limits<double>::infinity();
    for (int limit = 0; limit <= 4; ++limit) {
        auto bb = misocp::solve_misocp(net, dir, limit, {}, {}, {}, opts);
        REQUIRE(bb.has_value());
        CHECK(bb->objective_pu <= prev + 1e-6);
        prev = bb->objective_pu;
    }
}

TEST_CASE("forced units are honored") {
    grid::Network net = grid::generate_radial(10, 3, 3);
    auto bb = misocp::solve_misocp(net, {-1, 0}, 2, {}, {2}, {1});
    REQUIRE(bb.has_value());
    CHECK(bb->activation.count(2) == 1);
    CHECK(bb->activation.count(1) == 0);
    CHECK(bb->activation.size() <= 2);

    CHECK_THROWS_AS(misocp::solve_misocp(net, {-1, 0}, 2, {}, {1}, {1}), ValidationError);
    CHECK_THROWS_AS(misocp::solve_misocp(net, {-1, 0}, 1, {}, {1, 2}, {}), ValidationError);
}

TEST_CASE("infeasible window returns nullopt") {
    grid::Network net = case33();
    distflow::InterfaceWindow win;
    win.p_lo = 90000.0;
    win.p_hi = 95000.0;
    auto bb = misocp::solve_misocp(net, {+1, 0}, 5, win);
    CHECK_FALSE(bb.has_value());
}

TEST_CASE("determinism and the node-log audit") {
    grid::Network net = grid::generate_radial(10, 3, 12);
    std::ostringstream log;
    misocp::MisocpOptions opts;
    opts.node_log = &log;
    auto a = misocp::solve_misocp(net, {-1, 0}, 2, {}, {}, {}, opts);
    auto b = misocp::solve_misocp(net, {-1, 0}, 2, {});
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK(a->activation == b->activation);
    CHECK(a->objective_pu == b->objective_pu);

    // Bound validity audit: every prune-bound line must respect the
    // incumbent recorded at pruning time (minus the gap tolerance).
    std::istringstream in(log.str());
    std::string word;
    int audited = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("prune-bound") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string tok;
        double bound = 0, incumbent = 0;
        while (ls >> tok) {
            if (tok == "bound") ls >> bound;
            if (tok == "incumbent") ls >> incumbent;
        }
        CHECK(bound >= incumbent - 9e-7 - 1e-12);
        ++audited;
    }
    CHECK(audited > 0);
    (void)word;
}

} // TEST_SUITE
