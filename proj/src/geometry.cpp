#include "flexmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Pure floating-point overlay; the integer-snapping robustness layer costs
// far more area accuracy than the degeneracies it papers over. Exactly
// coincident inputs go through the perturb-and-retry path instead.
#define BOOST_GEOMETRY_NO_ROBUSTNESS
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "flexmap/errors.hpp"

namespace bg = boost::geometry;

namespace flexmap::geom {
namespace {

using BoostPoint = bg::model::d2::point_xy<double>;
// Counterclockwise outer rings, closed representation.
using BoostPolygon = bg::model::polygon<BoostPoint, false, true>;
using BoostMulti = bg::model::multi_polygon<BoostPolygon>;

double signed_area(const std::vector<Point>& ring) {
    double acc = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return 0.5 * acc;
}

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

BoostPolygon to_boost(const std::vector<Point>& outer,
                      const std::vector<std::vector<Point>>& holes = {}) {
    BoostPolygon poly;
    for (const Point& p : outer) bg::append(poly.outer(), BoostPoint(p.x, p.y));
    if (!outer.empty())
        bg::append(poly.outer(), BoostPoint(outer.front().x, outer.front().y));
    poly.inners().resize(holes.size());
    for (std::size_t h = 0; h < holes.size(); ++h) {
        for (const Point& p : holes[h]) bg::append(poly.inners()[h], BoostPoint(p.x, p.y));
        if (!holes[h].empty())
            bg::append(poly.inners()[h],
                       BoostPoint(holes[h].front().x, holes[h].front().y));
    }
    bg::correct(poly);
    return poly;
}

BoostMulti to_boost(const PolygonSet& set) {
    BoostMulti multi;
    for (const auto& piece : set.pieces()) multi.push_back(to_boost(piece.outer, piece.holes));
    return multi;
}

std::vector<Point> ring_to_points(const BoostPolygon::ring_type& ring) {
    std::vector<Point> out;
    out.reserve(ring.size());
    for (const auto& p : ring) out.push_back({bg::get<0>(p), bg::get<1>(p)});
    // Drop the explicit closing vertex.
    if (out.size() > 1 && out.front().x == out.back().x && out.front().y == out.back().y)
        out.pop_back();
    return out;
}

PolygonSet from_boost(const BoostMulti& multi) {
    std::vector<PolygonSet::Piece> pieces;
    for (const auto& poly : multi) {
        PolygonSet::Piece piece;
        piece.outer = ring_to_points(poly.outer());
        if (piece.outer.size() < 3) continue;
        for (const auto& hole : poly.inners()) {
            auto h = ring_to_points(hole);
            if (h.size() >= 3) piece.holes.push_back(std::move(h));
        }
        pieces.push_back(std::move(piece));
    }
    return PolygonSet(std::move(pieces));
}

double multi_diameter(const BoostMulti& multi) {
    if (multi.empty()) return 0.0;
    bg::model::box<BoostPoint> box;
    bg::envelope(multi, box);
    const double dx = bg::get<bg::max_corner, 0>(box) - bg::get<bg::min_corner, 0>(box);
    const double dy = bg::get<bg::max_corner, 1>(box) - bg::get<bg::min_corner, 1>(box);
    return std::hypot(dx, dy);
}

BoostMulti perturbed(const BoostMulti& multi, double eps) {
    BoostMulti out = multi;
    double jitter = eps;
    for (auto& poly : out) {
        for (auto& p : poly.outer()) {
            bg::set<0>(p, bg::get<0>(p) + jitter);
            bg::set<1>(p, bg::get<1>(p) - jitter);
            jitter = -jitter;
        }
        for (auto& ring : poly.inners()) {
            for (auto& p : ring) {
                bg::set<0>(p, bg::get<0>(p) + jitter);
                jitter = -jitter;
            }
        }
        bg::correct(poly);
    }
    return out;
}

enum class BoolOp { Union, Intersection, Difference };

BoostMulti run_op(const BoostMulti& a, const BoostMulti& b, BoolOp op) {
    BoostMulti out;
    switch (op) {
        case BoolOp::Union: bg::union_(a, b, out); break;
        case BoolOp::Intersection: bg::intersection(a, b, out); break;
        case BoolOp::Difference: bg::difference(a, b, out); break;
    }
    return out;
}

PolygonSet boolean_op(const PolygonSet& a, const PolygonSet& b, BoolOp op) {
    const BoostMulti ma = to_boost(a);
    const BoostMulti mb = to_boost(b);
    try {
        BoostMulti out = run_op(ma, mb, op);
        if (bg::is_valid(out)) return from_boost(out);
    } catch (const std::exception&) {
        // fall through to the perturbed retry
    }
    const double scale = std::max(multi_diameter(ma), multi_diameter(mb));
    const double eps = 1e-12 * std::max(scale, 1.0);
    try {
        BoostMulti out = run_op(perturbed(ma, eps), mb, op);
        if (!bg::is_valid(out)) throw NumericalError("polygon clipping produced an invalid result");
        return from_boost(out);
    } catch (const NumericalError&) {
        throw;
    } catch (const std::exception& e) {
        throw NumericalError(std::string("polygon clipping degeneracy: ") + e.what());
    }
}

} // namespace

Polygon::Polygon(std::vector<Point> vertices) {
    // Drop consecutive duplicates (including the wrap-around pair).
    std::vector<Point> cleaned;
    cleaned.reserve(vertices.size());
    const double eps = 1e-12 * std::max(1.0, diameter(std::span<const Point>(vertices)));
    for (const Point& p : vertices) {
        if (!cleaned.empty() && std::abs(cleaned.back().x - p.x) <= eps &&
            std::abs(cleaned.back().y - p.y) <= eps)
            continue;
        cleaned.push_back(p);
    }
    while (cleaned.size() > 1 && std::abs(cleaned.front().x - cleaned.back().x) <= eps &&
           std::abs(cleaned.front().y - cleaned.back().y) <= eps)
        cleaned.pop_back();

    verts_ = std::move(cleaned);
    if (verts_.size() < 3) {
        degenerate_ = true;
        return;
    }
    if (signed_area(verts_) < 0.0) std::reverse(verts_.begin(), verts_.end());
    degenerate_ = std::abs(signed_area(verts_)) == 0.0;
}

Polygon convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) {
                              return a.x == b.x && a.y == b.y;
                          }),
              pts.end());
    if (pts.size() < 3) return Polygon(std::move(pts));

    // Andrew monotone chain; strict turns drop collinear boundary points.
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0.0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return Polygon(std::move(hull));
}

double area(const Polygon& polygon) {
    if (polygon.degenerate()) return 0.0;
    return std::abs(signed_area(polygon.vertices()));
}

double area(const PolygonSet& set) {
    double total = 0.0;
    for (const auto& piece : set.pieces()) {
        total += std::abs(signed_area(piece.outer));
        for (const auto& hole : piece.holes) total -= std::abs(signed_area(hole));
    }
    return total;
}

double diameter(std::span<const Point> points) {
    if (points.empty()) return 0.0;
    double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const Point& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    return std::hypot(xmax - xmin, ymax - ymin);
}

double diameter(const Polygon& polygon) {
    return diameter(std::span<const Point>(polygon.vertices()));
}

bool point_in(const Polygon& polygon, Point p, double slack) {
    if (polygon.empty()) return false;
    if (polygon.degenerate()) {
        for (const Point& v : polygon.vertices())
            if (std::hypot(v.x - p.x, v.y - p.y) <= slack) return true;
        if (polygon.vertices().size() == 2) {
            BoostPolygon seg;  // treat the segment as a linestring via distance
            bg::model::segment<BoostPoint> s(
                BoostPoint(polygon.vertices()[0].x, polygon.vertices()[0].y),
                BoostPoint(polygon.vertices()[1].x, polygon.vertices()[1].y));
            return bg::distance(BoostPoint(p.x, p.y), s) <= slack;
        }
        return false;
    }
    const BoostPolygon poly = to_boost(polygon.vertices());
    const BoostPoint bp(p.x, p.y);
    if (bg::covered_by(bp, poly)) return true;
    return slack > 0.0 && bg::distance(bp, poly) <= slack;
}

bool point_in(const PolygonSet& set, Point p, double slack) {
    const BoostMulti multi = to_boost(set);
    const BoostPoint bp(p.x, p.y);
    if (bg::covered_by(bp, multi)) return true;
    return slack > 0.0 && bg::distance(bp, multi) <= slack;
}

bool contains(const PolygonSet& outer, const Polygon& inner, double tol) {
    if (inner.empty()) return true;
    if (inner.degenerate()) {
        const double slack = tol * std::max(1.0, multi_diameter(to_boost(outer)));
        for (const Point& v : inner.vertices())
            if (!point_in(outer, v, slack)) return false;
        return true;
    }
    const double inner_area = area(inner);
    const PolygonSet residual = difference(to_set(inner), outer);
    return area(residual) < tol * inner_area;
}

bool contains(const Polygon& outer, const Polygon& inner, double tol) {
    return contains(to_set(outer), inner, tol);
}

PolygonSet to_set(const Polygon& polygon) {
    if (polygon.degenerate()) return PolygonSet();
    return PolygonSet({PolygonSet::Piece{polygon.vertices(), {}}});
}

PolygonSet unite(const PolygonSet& a, const PolygonSet& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    return boolean_op(a, b, BoolOp::Union);
}

PolygonSet intersect(const PolygonSet& a, const PolygonSet& b) {
    if (a.empty() || b.empty()) return PolygonSet();
    return boolean_op(a, b, BoolOp::Intersection);
}

PolygonSet difference(const PolygonSet& a, const PolygonSet& b) {
    if (a.empty()) return PolygonSet();
    if (b.empty()) return a;
    return boolean_op(a, b, BoolOp::Difference);
}

PolygonSet unite(const Polygon& a, const Polygon& b) { return unite(to_set(a), to_set(b)); }

PolygonSet intersect(const Polygon& a, const Polygon& b) {
    return intersect(to_set(a), to_set(b));
}

} // namespace flexmap::geom
