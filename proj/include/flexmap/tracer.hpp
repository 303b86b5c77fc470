#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "flexmap/distflow.hpp"
#include "flexmap/geometry.hpp"
#include "flexmap/misocp.hpp"

namespace flexmap::tracer {

enum class TraceMethod { Epsilon, Radial, MonteCarloHull };
std::string to_string(TraceMethod method);

struct BoundaryPoint {
    int slot = 0;              // interval index (epsilon) or ray index (radial)
    std::string side;          // "max", "min" or "ray"
    double p_kw = 0.0;
    double q_kvar = 0.0;
    bool empty = false;        // slice admits no operating point
    bool inexact = false;      // relaxation residual above tolerance
    bool oracle_ok = false;    // sweep re-verification outcome
    double oracle_gap_kw = 0.0;
    std::set<int> activation;  // units active at this point
};

/// Ordered polygonal boundary of feasible interface exchanges.
struct FlexArea {
    TraceMethod method = TraceMethod::Epsilon;
    int k = 0;
    distflow::ActivationContext context;
    geom::Point reference_point{};
    std::vector<BoundaryPoint> points;   // per slot, including empty slices
    std::vector<geom::Point> boundary;   // counterclockwise, empties skipped

    geom::Polygon polygon() const { return geom::Polygon(boundary); }
};

struct TraceOptions {
    distflow::SolveOptions solve{};
    double misocp_gap_tol = 9e-7;
    misocp::SubsetCache* cache = nullptr;
    unsigned workers = 0;  // 0 -> hardware concurrency
    bool verify_with_sweep = true;
};

/// The initial operating state: all units off, loss-minimal dispatch.
geom::Point reference_point(const grid::Network& net, const TraceOptions& opts = {});

struct Extremes {
    double q_min = 0.0, q_max = 0.0;  // kVAr
    double p_min = 0.0, p_max = 0.0;  // kW
    distflow::OperatingPoint q_min_point, q_max_point, p_min_point, p_max_point;
};

/// Four directional optima of the interface exchange under `act`.
/// Throws ModelError if the network admits no operating point at all.
Extremes extreme_points(const grid::Network& net, const distflow::ActivationContext& act,
                        const TraceOptions& opts = {});

/// Epsilon-constraint boundary: k reactive-power bands between q_min and
/// q_max, each probed for minimal and maximal active power (with a
/// lexicographic outward push in Q to resolve flat optimal faces). 2k
/// points, ordered counterclockwise; empty slices are flagged and skipped.
FlexArea trace_epsilon(const grid::Network& net, const distflow::ActivationContext& act, int k,
                       const TraceOptions& opts = {});

/// Radial reconstruction: 2k equally spaced rays from the reference point,
/// each solved for maximal displacement. Fixed activation contexts only.
FlexArea trace_radial(const grid::Network& net, const distflow::ActivationContext& act, int k,
                      const TraceOptions& opts = {});

/// Uniform box sampling of the active units' outputs, classified by the
/// sweep oracle against voltage and thermal limits. Diverged samples carry
/// NaN coordinates. Deterministic per seed.
struct CloudSample {
    double p_kw = 0.0;
    double q_kvar = 0.0;
    bool feasible = false;
};
std::vector<CloudSample> monte_carlo_cloud(const grid::Network& net,
                                           const distflow::ActivationContext& act, int n_samples,
                                           std::uint64_t seed, const TraceOptions& opts = {});

} // namespace flexmap::tracer
