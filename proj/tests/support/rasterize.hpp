#pragma once

// Grid-sampling oracles for polygon areas and containment, independent of
// the clipping library used by the geometry module.

#include <algorithm>
#include <cmath>
#include <vector>

#include "flexmap/geometry.hpp"

namespace testsupport {

using flexmap::geom::Point;

/// Crossing-number point-in-polygon over a raw vertex ring.
inline bool pip(const std::vector<Point>& ring, double x, double y) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > y) != (b.y > y)) {
            const double t = (y - a.y) / (b.y - a.y);
            if (x < a.x + t * (b.x - a.x)) inside = !inside;
        }
    }
    return inside;
}

inline bool pip(const flexmap::geom::PolygonSet& set, double x, double y) {
    for (const auto& piece : set.pieces()) {
        if (!pip(piece.outer, x, y)) continue;
        bool in_hole = false;
        for (const auto& hole : piece.holes)
            if (pip(hole, x, y)) in_hole = true;
        if (!in_hole) return true;
    }
    return false;
}

struct Box {
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
};

inline Box bounding_box(const std::vector<std::vector<Point>>& rings) {
    Box b{1e300, -1e300, 1e300, -1e300};
    for (const auto& ring : rings)
        for (const Point& p : ring) {
            b.xmin = std::min(b.xmin, p.x);
            b.xmax = std::max(b.xmax, p.x);
            b.ymin = std::min(b.ymin, p.y);
            b.ymax = std::max(b.ymax, p.y);
        }
    return b;
}

/// Monte-Carlo-free raster area of a predicate over a box.
template <typename Pred>
double raster_area(const Box& box, int grid, Pred&& inside) {
    if (box.xmax <= box.xmin || box.ymax <= box.ymin) return 0.0;
    const double dx = (box.xmax - box.xmin) / grid;
    const double dy = (box.ymax - box.ymin) / grid;
    long count = 0;
    for (int i = 0; i < grid; ++i) {
        const double x = box.xmin + (i + 0.5) * dx;
        for (int j = 0; j < grid; ++j) {
            const double y = box.ymin + (j + 0.5) * dy;
            if (inside(x, y)) ++count;
        }
    }
    return count * dx * dy;
}

} // namespace testsupport
