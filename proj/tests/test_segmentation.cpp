#include <doctest.h>

#include <cmath>

#include "flexmap/errors.hpp"
#include "flexmap/grid.hpp"
#include "flexmap/segmentation.hpp"

using namespace flexmap;

namespace {

grid::Network two_unit_colocated(double r1, double r2) {
    grid::Network net;
    net.base_mva = 1.0;
    net.base_kv = 11.0;
    net.buses.push_back({1, 0.0, 0.0, 0.9, 1.1, true});
    net.buses.push_back({2, 400.0, 200.0, 0.9, 1.1, false});
    net.branches.push_back({1, 2, 0.3, 0.3, 3000.0, false});
    net.flex_units.push_back({1, 2, -150.0, 150.0, -150.0, 150.0, r1});
    net.flex_units.push_back({2, 2, -150.0, 150.0, -150.0, 150.0, r2});
    grid::validate_network(net);
    return net;
}

grid::Network with_reliabilities(grid::Network net, const std::vector<double>& r) {
    for (std::size_t i = 0; i < net.flex_units.size() && i < r.size(); ++i)
        net.flex_units[i].reliability = r[i];
    return net;
}

} // namespace

TEST_SUITE("segmentation") {

TEST_CASE("subset probability arithmetic") {
    grid::Network net = two_unit_colocated(0.9, 0.8);
    CHECK(seg::subset_probability({}, net) == 1.0);
    CHECK(seg::subset_probability({1}, net) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(seg::subset_probability({1, 2}, net) == doctest::Approx(0.72).epsilon(1e-15));
    CHECK_THROWS_AS(seg::subset_probability({99}, net), ValidationError);
}

TEST_CASE("rank_subsets n=2 ordering") {
    grid::Network net = two_unit_colocated(0.9, 0.8);
    auto ranked = seg::rank_subsets(net);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0] == std::set<int>{1});
    CHECK(ranked[1] == std::set<int>{2});
    CHECK(ranked[2] == std::set<int>{1, 2});
}

TEST_CASE("rank_subsets: n=10 gives 1023 combinations; capped matches prefix") {
    grid::Network net = grid::generate_radial(24, 10, 17);
    auto all = seg::rank_subsets(net);
    CHECK(all.size() == 1023);
    for (std::size_t i = 1; i < all.size(); ++i)
        CHECK(seg::subset_probability(all[i - 1], net) >=
              seg::subset_probability(all[i], net) - 1e-15);
    auto top5 = seg::rank_subsets(net, 5);
    REQUIRE(top5.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(top5[i] == all[i]);
}

TEST_CASE("rank_subsets tie-breaks by cardinality then ids") {
    grid::Network net = two_unit_colocated(0.9, 0.9);
    auto ranked = seg::rank_subsets(net);
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0] == std::set<int>{1});
    CHECK(ranked[1] == std::set<int>{2});
    CHECK(ranked[2] == std::set<int>{1, 2});
    auto top2 = seg::rank_subsets(net, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0] == std::set<int>{1});
    CHECK(top2[1] == std::set<int>{2});
}

TEST_CASE("probability bounds: min over members >= R_f >= product of all") {
    grid::Network net = grid::generate_radial(16, 6, 23);
    double prod_all = 1.0;
    std::set<int> all;
    for (const auto& u : net.flex_units) {
        prod_all *= u.reliability;
        all.insert(u.id);
    }
    auto ranked = seg::rank_subsets(net);
    for (const auto& s : ranked) {
        const double p = seg::subset_probability(s, net);
        double member_min = 1.0;
        for (int id : s) member_min = std::min(member_min, net.find_unit(id)->reliability);
        CHECK(p <= member_min + 1e-12);
        CHECK(p >= prod_all - 1e-12);
    }
    // The full activation has the minimum probability over all supersets.
    CHECK(seg::subset_probability(all, net) == doctest::Approx(prod_all).epsilon(1e-12));
    for (const auto& s : ranked)
        CHECK(seg::subset_probability(s, net) >= prod_all - 1e-15);
}

TEST_CASE("paper consistency interval contains 0.718") {
    const double lo = 0.99 * std::pow(0.945, 9);
    const double hi = 0.99 * std::pow(0.985, 9);
    CHECK(lo <= 0.718);
    CHECK(0.718 <= hi);
}

TEST_CASE("by-count: single unit yields the reference point plus one area") {
    grid::Network net = two_unit_colocated(0.9, 0.8);
    net.flex_units.pop_back();
    grid::validate_network(net);
    seg::SegmentationOptions opts;
    auto s = seg::segment_by_count(net, 4, opts);
    REQUIRE(s.segments.size() == 2);
    CHECK(s.segments[0].cardinality == 0);
    CHECK(s.segments[0].polygon.degenerate());
    CHECK(s.segments[1].cardinality == 1);
    CHECK(geom::area(s.segments[1].polygon) > 1000.0);
    CHECK(geom::point_in(s.segments[1].polygon, s.reference_point, 1e-6));
}

TEST_CASE("by-count levels nest on a synthetic network") {
    grid::Network net = grid::generate_radial(10, 3, 5);
    auto s = seg::segment_by_count(net, 6);
    REQUIRE(s.segments.size() == 4);
    for (std::size_t m = 0; m + 1 < s.segments.size(); ++m) {
        CHECK(geom::area(s.segments[m].polygon) <=
              geom::area(s.segments[m + 1].polygon) + 1e-9);
        CHECK(geom::contains(s.segments[m + 1].polygon, s.segments[m].polygon, 1e-6));
    }
}

TEST_CASE("probabilistic: single unit gives one segment with its reliability") {
    grid::Network net = two_unit_colocated(0.87, 0.8);
    net.flex_units.pop_back();
    grid::validate_network(net);
    auto s = seg::segment_probabilistic(net, 4, 8);
    REQUIRE(s.segments.size() == 1);
    CHECK(s.segments[0].probability == doctest::Approx(0.87).epsilon(1e-12));
    CHECK(s.segments[0].subset == std::set<int>{1});
    CHECK(s.discarded_count == 0);
}

TEST_CASE("co-located duplicate with lower reliability gets discarded") {
    grid::Network net = two_unit_colocated(0.95, 0.9);
    auto s = seg::segment_probabilistic(net, 6, 8);
    // {1} retained; {2} covers the same area and is discarded; {1,2} adds.
    REQUIRE(s.segments.size() >= 1);
    CHECK(s.segments[0].subset == std::set<int>{1});
    bool unit2_discarded = false;
    for (const auto& d : s.discarded)
        if (d.subset == std::set<int>{2}) unit2_discarded = true;
    CHECK(unit2_discarded);
    CHECK(s.discarded_count == static_cast<int>(s.discarded.size()));
}

TEST_CASE("discard soundness: every discarded subset is covered by retained union") {
    grid::Network net = grid::generate_radial(12, 4, 31);
    auto s = seg::segment_probabilistic(net, 6, 20);
    geom::PolygonSet retained;
    for (const auto& seg : s.segments) retained = geom::unite(retained, geom::to_set(seg.polygon));
    for (const auto& d : s.discarded) CHECK(geom::contains(retained, d.polygon, 1e-5));
    // No retained segment is contained in the union of the EARLIER retained.
    geom::PolygonSet prefix;
    for (const auto& seg : s.segments) {
        if (!prefix.empty()) CHECK_FALSE(geom::contains(prefix, seg.polygon, 1e-6));
        prefix = geom::unite(prefix, geom::to_set(seg.polygon));
    }
}

TEST_CASE("threshold envelope shrinks when a reliability drops") {
    grid::Network base = grid::generate_radial(12, 4, 8);
    grid::Network before = with_reliabilities(base, {0.99, 0.97, 0.96, 0.95});
    grid::Network after = with_reliabilities(base, {0.92, 0.97, 0.96, 0.95});

    auto sb = seg::segment_probabilistic(before, 6, 32, 0.9);
    auto sa = seg::segment_probabilistic(after, 6, 32, 0.9);
    REQUIRE(sb.ranking_exhausted);
    REQUIRE(sa.ranking_exhausted);
    CHECK(geom::area(sa.envelope) <= geom::area(sb.envelope) + 1e-9);

    // Per-segment probabilities never increase either.
    for (const auto& seg_after : sa.segments) {
        for (const auto& seg_before : sb.segments)
            if (seg_after.subset == seg_before.subset)
                CHECK(seg_after.probability <= seg_before.probability + 1e-15);
    }
}

} // TEST_SUITE
