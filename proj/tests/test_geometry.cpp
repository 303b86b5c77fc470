#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "flexmap/geometry.hpp"
#include "support/rasterize.hpp"

using namespace flexmap::geom;

namespace {

Polygon square(double x0, double y0, double side) {
    return Polygon({{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}});
}

Polygon random_convex(std::mt19937_64& rng, double cx, double cy, double radius) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Point> pts;
    const int n = 5 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
        const double ang = 2.0 * M_PI * unif(rng);
        const double r = radius * (0.3 + 0.7 * unif(rng));
        pts.push_back({cx + r * std::cos(ang), cy + r * std::sin(ang)});
    }
    return convex_hull(pts);
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("convex hull of square corners plus center") {
    std::vector<Point> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
    Polygon hull = convex_hull(pts);
    CHECK(hull.vertices().size() == 4);
    CHECK(area(hull) == doctest::Approx(1.0));
}

TEST_CASE("hull of one point is degenerate") {
    std::vector<Point> pts = {{2.0, 3.0}};
    Polygon hull = convex_hull(pts);
    CHECK(hull.degenerate());
    CHECK(area(hull) == 0.0);
}

TEST_CASE("hull contains 1000 random points in a disc") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<Point> pts;
    while (pts.size() < 1000) {
        const double x = unif(rng), y = unif(rng);
        if (x * x + y * y <= 1.0) pts.push_back({x, y});
    }
    Polygon hull = convex_hull(pts);
    CHECK(area(hull) <= M_PI);
    for (const Point& p : pts) CHECK(point_in(hull, p, 1e-12));
}

TEST_CASE("shoelace closed forms") {
    CHECK(area(square(0, 0, 1)) == doctest::Approx(1.0));
    CHECK(area(Polygon::point({3, 4})) == 0.0);
    Polygon tri({{0, 0}, {3, 0}, {3, 4}});
    CHECK(area(tri) == doctest::Approx(6.0));
}

TEST_CASE("orientation is corrected to counterclockwise") {
    Polygon cw(std::vector<Point>{{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    double acc = 0.0;
    const auto& v = cw.vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        acc += a.x * b.y - b.x * a.y;
    }
    CHECK(acc > 0.0);
}

TEST_CASE("containment basics") {
    CHECK(contains(square(-0.5, -0.5, 2), square(0, 0, 1), 1e-9));
    CHECK_FALSE(contains(square(0, 0, 1), square(5, 5, 1), 1e-9));
}

TEST_CASE("containment under tolerance matches rasterization oracle") {
    const double tol = 1e-3;
    Polygon outer = square(0, 0, 1);
    Polygon inner = square(tol / 10.0, 0, 1);  // shifted by tol/10

    // Rasterization oracle at a 1000 x 1000 grid over the inner polygon.
    const auto box = testsupport::bounding_box({inner.vertices()});
    const double residual = testsupport::raster_area(box, 1000, [&](double x, double y) {
        return testsupport::pip(inner.vertices(), x, y) &&
               !testsupport::pip(outer.vertices(), x, y);
    });
    CHECK(residual / area(inner) < tol);
    CHECK(contains(outer, inner, tol));
}

TEST_CASE("union and intersection closed forms") {
    auto two = unite(square(0, 0, 1), square(3, 3, 1));
    CHECK(area(two) == doctest::Approx(2.0));
    CHECK(two.pieces().size() == 2);

    auto same = unite(square(0, 0, 1), square(0, 0, 1));
    CHECK(area(same) == doctest::Approx(1.0));

    auto overlap = unite(square(0, 0, 1), square(0.5, 0, 1));
    CHECK(area(overlap) == doctest::Approx(1.5));

    auto inter = intersect(square(0, 0, 1), square(0.5, 0, 1));
    CHECK(area(inter) == doctest::Approx(0.5));
}

TEST_CASE("degenerate polygons act as empty sets in boolean ops") {
    auto u = unite(square(0, 0, 1), Polygon::point({5, 5}));
    CHECK(area(u) == doctest::Approx(1.0));
    auto i = intersect(square(0, 0, 1), Polygon::point({0.5, 0.5}));
    CHECK(area(i) == 0.0);
}

TEST_CASE("degenerate inner containment falls back to point membership") {
    CHECK(contains(square(0, 0, 1), Polygon::point({0.5, 0.5}), 1e-6));
    CHECK_FALSE(contains(square(0, 0, 1), Polygon::point({2.5, 0.5}), 1e-6));
}

TEST_CASE("inclusion-exclusion identity on 1000 random pairs") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        Polygon a = random_convex(rng, unif(rng), unif(rng), 0.4 + 0.6 * unif(rng));
        Polygon b = random_convex(rng, unif(rng), unif(rng), 0.4 + 0.6 * unif(rng));
        if (a.degenerate() || b.degenerate()) continue;
        const double au = area(unite(a, b));
        const double ai = area(intersect(a, b));
        const double lhs = au;
        const double rhs = area(a) + area(b) - ai;
        CHECK_MESSAGE(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, rhs), "trial ", trial);
    }
}

TEST_CASE("boolean ops agree with rasterization oracle on random convex pairs") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        Polygon a = random_convex(rng, unif(rng), unif(rng), 0.5 + 0.5 * unif(rng));
        Polygon b = random_convex(rng, 0.3 + unif(rng), unif(rng), 0.5 + 0.5 * unif(rng));
        if (a.degenerate() || b.degenerate()) continue;

        const auto u = unite(a, b);
        const auto box = testsupport::bounding_box({a.vertices(), b.vertices()});
        const double union_raster = testsupport::raster_area(box, 700, [&](double x, double y) {
            return testsupport::pip(a.vertices(), x, y) || testsupport::pip(b.vertices(), x, y);
        });
        CHECK_MESSAGE(std::abs(area(u) - union_raster) <= 0.005 * std::max(area(u), 1e-9),
                      "trial ", trial);

        const auto i = intersect(a, b);
        const double inter_raster = testsupport::raster_area(box, 700, [&](double x, double y) {
            return testsupport::pip(a.vertices(), x, y) && testsupport::pip(b.vertices(), x, y);
        });
        const double scale = std::max({area(u), 1.0});
        CHECK_MESSAGE(std::abs(area(i) - inter_raster) <= 0.005 * scale, "trial ", trial);
    }
}

TEST_CASE("contains is reflexive and antisymmetric up to tolerance") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        Polygon a = random_convex(rng, unif(rng), unif(rng), 0.5 + unif(rng));
        if (a.degenerate()) continue;
        CHECK(contains(a, a, 1e-9));
        Polygon b = random_convex(rng, unif(rng) + 2.5, unif(rng), 0.5 + unif(rng));
        if (b.degenerate()) continue;
        // Disjoint supports: neither contains the other.
        CHECK_FALSE(contains(a, b, 1e-6));
        CHECK_FALSE(contains(b, a, 1e-6));
    }
}

} // TEST_SUITE
