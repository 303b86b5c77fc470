#pragma once

#include <span>
#include <vector>

namespace flexmap::geom {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Simple polygon in the plane. Vertices are stored counterclockwise and
/// the closing edge is implicit. Construction repairs orientation and
/// drops consecutive duplicates; inputs that collapse to fewer than three
/// distinct vertices are kept as degenerate point/segment polygons with
/// zero area.
class Polygon {
public:
    Polygon() = default;
    explicit Polygon(std::vector<Point> vertices);

    static Polygon point(Point p) { return Polygon({p}); }

    const std::vector<Point>& vertices() const { return verts_; }
    bool degenerate() const { return degenerate_; }
    bool empty() const { return verts_.empty(); }

private:
    std::vector<Point> verts_;
    bool degenerate_ = true;
};

/// Union-of-polygons region: disjoint outer rings, each with optional holes.
class PolygonSet {
public:
    struct Piece {
        std::vector<Point> outer;               // counterclockwise
        std::vector<std::vector<Point>> holes;  // clockwise
    };

    PolygonSet() = default;
    explicit PolygonSet(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {}

    const std::vector<Piece>& pieces() const { return pieces_; }
    bool empty() const { return pieces_.empty(); }

private:
    std::vector<Piece> pieces_;
};

/// Minimal convex polygon containing all points; collinear boundary points
/// are dropped. One or two distinct points yield a degenerate polygon.
Polygon convex_hull(std::span<const Point> points);

/// Shoelace area (>= 0). Degenerate polygons have zero area.
double area(const Polygon& polygon);
double area(const PolygonSet& set);

/// Axis-aligned bounding-box diagonal; 0 for empty input.
double diameter(const Polygon& polygon);
double diameter(std::span<const Point> points);

/// Point membership (boundary counts as inside). `slack` expands the
/// region by an absolute distance, which absorbs trace noise.
bool point_in(const Polygon& polygon, Point p, double slack = 0.0);
bool point_in(const PolygonSet& set, Point p, double slack = 0.0);

/// Containment by residual area: true iff area(inner \ outer) < tol * area(inner).
/// A degenerate inner polygon falls back to point membership with slack
/// tol * diameter(outer pieces).
bool contains(const Polygon& outer, const Polygon& inner, double tol);
bool contains(const PolygonSet& outer, const Polygon& inner, double tol);

/// Boolean operations via polygon clipping. Degenerate operands behave as
/// empty sets. Exactly coincident edges that break the clipper are retried
/// once with inputs perturbed by 1e-12 of their diameter; a second failure
/// raises NumericalError.
PolygonSet unite(const PolygonSet& a, const PolygonSet& b);
PolygonSet intersect(const PolygonSet& a, const PolygonSet& b);
PolygonSet difference(const PolygonSet& a, const PolygonSet& b);

PolygonSet to_set(const Polygon& polygon);
PolygonSet unite(const Polygon& a, const Polygon& b);
PolygonSet intersect(const Polygon& a, const Polygon& b);

} // namespace flexmap::geom
