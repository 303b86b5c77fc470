#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexmap/distflow.hpp"
#include "flexmap/geometry.hpp"
#include "flexmap/grid.hpp"
#include "flexmap/segmentation.hpp"

namespace flexmap::render {

struct LayoutResult {
    std::vector<geom::Point> positions;  // by bus position
    int iterations = 0;
    double residual = 0.0;  // final force norm
};

/// Spring-electric layout with attraction scaled by branch admittance, so
/// low-impedance neighbors sit close together. Deterministic per seed.
LayoutResult layout_force(const grid::Network& net, int iterations, std::uint64_t seed);

/// Single-line diagram: node size proportional to demand (with a floor),
/// fill binned by voltage between v_min and v_max (darkest at v_min),
/// square markers on flexible-unit buses, and a legend. Pure function of
/// its inputs; byte-identical output for identical inputs.
std::string render_network(const grid::Network& net, const LayoutResult& layout,
                           const distflow::OperatingPoint& op);

/// Grayscale P-Q chart of a segmentation: segments drawn innermost-last,
/// shaded by cardinality (by-count) or probability (probabilistic), a
/// cross at the reference point, and a dashed envelope outline when the
/// segmentation was thresholded.
std::string render_segmentation(const seg::Segmentation& segmentation);

} // namespace flexmap::render
