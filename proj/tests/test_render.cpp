#include <doctest.h>

#include <cmath>
#include <regex>

#include "flexmap/grid.hpp"
#include "flexmap/render.hpp"
#include "flexmap/segmentation.hpp"

using namespace flexmap;

namespace {

grid::Network path_graph(int n) {
    grid::Network net;
    net.base_mva = 10.0;
    net.base_kv = 11.0;
    for (int i = 1; i <= n; ++i)
        net.buses.push_back({i, i > 1 ? 50.0 : 0.0, 20.0, 0.9, 1.1, i == 1});
    for (int i = 2; i <= n; ++i)
        net.branches.push_back({i - 1, i, 0.2, 0.2, 2000.0, false});
    grid::validate_network(net);
    return net;
}

int count_occurrences(const std::string& text, const std::string& needle) {
    int count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

bool segments_cross(geom::Point a, geom::Point b, geom::Point c, geom::Point d) {
    auto orient = [](geom::Point p, geom::Point q, geom::Point r) {
        const double v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        return v > 0 ? 1 : (v < 0 ? -1 : 0);
    };
    return orient(a, b, c) != orient(a, b, d) && orient(c, d, a) != orient(c, d, b);
}

} // namespace

TEST_SUITE("render") {

TEST_CASE("two-bus layout settles at a finite spacing, deterministically") {
    grid::Network net = path_graph(2);
    auto a = render::layout_force(net, 400, 11);
    auto bsame = render::layout_force(net, 400, 11);
    auto c = render::layout_force(net, 400, 12);
    REQUIRE(a.positions.size() == 2);
    const double d = std::hypot(a.positions[1].x - a.positions[0].x,
                                a.positions[1].y - a.positions[0].y);
    CHECK(d > 0.2);
    CHECK(d < 10.0);
    CHECK(a.positions[1].x == bsame.positions[1].x);
    CHECK(a.positions[1].y == bsame.positions[1].y);
    CHECK((a.positions[1].x != c.positions[1].x || a.positions[1].y != c.positions[1].y));
}

TEST_CASE("path graph lays out without crossings") {
    grid::Network net = path_graph(5);
    auto layout = render::layout_force(net, 600, 3);
    int crossings = 0;
    for (std::size_t i = 0; i + 1 < 4; ++i)
        for (std::size_t j = i + 2; j < 4; ++j)
            if (segments_cross(layout.positions[i], layout.positions[i + 1],
                               layout.positions[j], layout.positions[j + 1]))
                ++crossings;
    CHECK(crossings == 0);
}

TEST_CASE("network diagram carries the fixture's element counts") {
    grid::Network net =
        grid::load_network(std::string(FLEXMAP_DATA_DIR) + "/case33.json");
    auto layout = render::layout_force(net, 300, 1);
    auto sweep = distflow::sweep_power_flow(net);
    const std::string svg = render::render_network(net, layout, sweep.point);
    CHECK(count_occurrences(svg, "class=\"bus\"") == 33);
    CHECK(count_occurrences(svg, "class=\"branch\"") == 32);
    CHECK(count_occurrences(svg, "class=\"unit\"") == 5);
    CHECK(svg.find("voltage") != std::string::npos);

    // Determinism: identical inputs give identical bytes.
    const std::string again = render::render_network(net, layout, sweep.point);
    CHECK(svg == again);
}

TEST_CASE("zero-demand network draws every node at the minimum radius") {
    grid::Network net = path_graph(4);
    for (auto& b : net.buses) b.demand_p = 0.0;
    auto layout = render::layout_force(net, 200, 5);
    distflow::OperatingPoint op;
    op.voltages.assign(4, 1.0);
    const std::string svg = render::render_network(net, layout, op);
    CHECK(count_occurrences(svg, "r=\"3.000\"") == 4);
}

TEST_CASE("voltage at v_min paints the darkest bin") {
    grid::Network net = path_graph(2);
    auto layout = render::layout_force(net, 200, 5);
    distflow::OperatingPoint op;
    op.voltages = {1.0, 0.9};  // exactly v_min at bus 2
    const std::string svg = render::render_network(net, layout, op);
    // darkest ramp value: 25% lightness = 0.25 * 255 = 64 -> #404040
    CHECK(svg.find("fill=\"#404040\"") != std::string::npos);
}

TEST_CASE("segmentation chart: single segment plus reference cross") {
    grid::Network net = grid::generate_radial(8, 1, 2);
    auto s = seg::segment_probabilistic(net, 4, 4);
    const std::string svg = render::render_segmentation(s);
    CHECK(count_occurrences(svg, "class=\"segment\"") == 1);
    CHECK(count_occurrences(svg, "class=\"reference\"") == 1);
    CHECK(svg.find("P, kW") != std::string::npos);
    CHECK(svg.find("Q, kVAr") != std::string::npos);
    CHECK(render::render_segmentation(s) == svg);
}

TEST_CASE("by-count shades run light-to-dark outward and all vertices fit the viewbox") {
    grid::Network net = grid::generate_radial(10, 3, 5);
    auto s = seg::segment_by_count(net, 5);
    const std::string svg = render::render_segmentation(s);
    // Non-degenerate levels 1..3 drawn as polygons.
    CHECK(count_occurrences(svg, "class=\"segment\"") == 3);

    // Shades appear darkest-first (outermost drawn first).
    std::regex fill_re("class=\"segment\"[^/]*fill=\"#([0-9a-f]{2})");
    std::vector<int> shades;
    for (std::sregex_iterator it(svg.begin(), svg.end(), fill_re), end; it != end; ++it)
        shades.push_back(std::stoi((*it)[1].str(), nullptr, 16));
    REQUIRE(shades.size() == 3);
    CHECK(shades[0] < shades[1]);
    CHECK(shades[1] < shades[2]);

    // Every emitted coordinate lies inside the viewbox.
    std::regex view_re("viewBox=\"0 0 ([0-9.]+) ([0-9.]+)\"");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, view_re));
    const double w = std::stod(m[1]), h = std::stod(m[2]);
    std::regex pt_re("([0-9.]+),([0-9.]+) ");
    for (std::sregex_iterator it(svg.begin(), svg.end(), pt_re), end; it != end; ++it) {
        CHECK(std::stod((*it)[1].str()) >= 0.0);
        CHECK(std::stod((*it)[1].str()) <= w);
        CHECK(std::stod((*it)[2].str()) >= 0.0);
        CHECK(std::stod((*it)[2].str()) <= h);
    }
}

TEST_CASE("thresholded probabilistic chart carries a dashed envelope") {
    grid::Network net = grid::generate_radial(10, 3, 5);
    auto s = seg::segment_probabilistic(net, 4, 8, 0.9);
    const std::string svg = render::render_segmentation(s);
    CHECK(svg.find("stroke-dasharray=\"8 5\"") != std::string::npos);
    CHECK(count_occurrences(svg, "class=\"envelope\"") >= 1);
}

} // TEST_SUITE
