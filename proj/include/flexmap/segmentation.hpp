#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flexmap/geometry.hpp"
#include "flexmap/grid.hpp"
#include "flexmap/tracer.hpp"

namespace flexmap::seg {

/// One flexibility segment: the P-Q area attainable by a unit subset (or
/// by any subset of bounded size in by-count mode).
struct Segment {
    std::set<int> subset;   // empty in by-count mode
    int cardinality = 0;
    geom::Polygon polygon;
    double probability = 1.0;  // product of reliabilities, 1.0 for empty subset
    tracer::FlexArea area;     // the trace behind the polygon
};

enum class SegMode { ByCount, Probabilistic };
std::string to_string(SegMode mode);

struct Segmentation {
    SegMode mode = SegMode::ByCount;
    std::vector<Segment> segments;  // by-count: cardinality ascending;
                                    // probabilistic: probability descending
    std::vector<Segment> discarded;  // probabilistic mode: covered subsets
    int discarded_count = 0;
    std::optional<double> threshold;
    geom::PolygonSet envelope;  // union of retained segments above threshold
    geom::Point reference_point{};
    double lowest_processed_probability = 1.0;
    bool ranking_exhausted = true;
    std::vector<std::set<int>> failed_subsets;  // traces that errored out
};

struct SegmentationOptions {
    tracer::TraceOptions trace{};
    /// Residual-area fraction below which a candidate counts as covered.
    double containment_tol = 1e-6;
};

/// One segment per activation count 0..n, each traced with the
/// cardinality-constrained MISOCP; level m is verified to nest inside
/// level m+1 (throws NumericalError naming the level otherwise).
Segmentation segment_by_count(const grid::Network& net, int k,
                              const SegmentationOptions& opts = {});

/// Product of the subset's unit reliabilities (1.0 for the empty set).
double subset_probability(const std::set<int>& subset, const grid::Network& net);

/// All non-empty unit subsets in decreasing probability (ties: smaller
/// cardinality, then lexicographic ids). Uncapped enumeration guards
/// against blowup (CapacityError for n > 20); the capped form returns the
/// exact top-max_subsets by best-first lattice expansion.
std::vector<std::set<int>> rank_subsets(const grid::Network& net,
                                        std::optional<int> max_subsets = std::nullopt);

/// Walks subsets in rank order, traces each, and retains only segments
/// whose polygon adds area not covered by the retained union (the
/// containment-discard rule). Stops after max_segments retained segments.
Segmentation segment_probabilistic(const grid::Network& net, int k, int max_segments,
                                   std::optional<double> threshold = std::nullopt,
                                   const SegmentationOptions& opts = {});

} // namespace flexmap::seg
