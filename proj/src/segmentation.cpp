#include "flexmap/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "flexmap/errors.hpp"
#include "flexmap/misocp.hpp"

namespace flexmap::seg {

namespace {

struct RankedSubset {
    double probability;
    std::set<int> ids;
};

bool rank_less(const RankedSubset& a, const RankedSubset& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.ids.size() != b.ids.size()) return a.ids.size() < b.ids.size();
    return a.ids < b.ids;
}

} // namespace

std::string to_string(SegMode mode) {
    return mode == SegMode::ByCount ? "by-count" : "probabilistic";
}

double subset_probability(const std::set<int>& subset, const grid::Network& net) {
    double product = 1.0;
    for (int id : subset) {
        const grid::FlexUnit* unit = net.find_unit(id);
        if (!unit)
            throw ValidationError("subset references unknown flex unit " + std::to_string(id));
        product *= unit->reliability;
    }
    return product;
}

std::vector<std::set<int>> rank_subsets(const grid::Network& net,
                                        std::optional<int> max_subsets) {
    const int n = static_cast<int>(net.flex_units.size());
    if (n < 1) throw ValidationError("rank_subsets requires at least one flex unit");

    if (!max_subsets) {
        if (n > 20)
            throw CapacityError("uncapped subset ranking limited to 20 units; pass a cap");
        std::vector<RankedSubset> all;
        all.reserve((1u << n) - 1);
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            RankedSubset rs;
            for (int i = 0; i < n; ++i)
                if (mask & (1u << i)) rs.ids.insert(net.flex_units[i].id);
            rs.probability = subset_probability(rs.ids, net);
            all.push_back(std::move(rs));
        }
        std::sort(all.begin(), all.end(), rank_less);
        std::vector<std::set<int>> out;
        out.reserve(all.size());
        for (auto& rs : all) out.push_back(std::move(rs.ids));
        return out;
    }

    const int cap = *max_subsets;
    if (cap < 1) throw ValidationError("max_subsets must be positive");

    // Best-first expansion over units sorted by decreasing reliability:
    // from a subset whose largest sorted index is j, generate "extend"
    // (add j+1) and "shift" (replace j by j+1). Every non-empty subset is
    // reached exactly once and never before a higher-probability one.
    std::vector<const grid::FlexUnit*> sorted;
    for (const auto& u : net.flex_units) sorted.push_back(&u);
    std::sort(sorted.begin(), sorted.end(), [](const grid::FlexUnit* a, const grid::FlexUnit* b) {
        if (a->reliability != b->reliability) return a->reliability > b->reliability;
        return a->id < b->id;
    });

    struct Node {
        double probability;
        std::vector<int> indices;  // ascending positions into `sorted`
    };
    auto node_rank = [&](const Node& a, const Node& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        if (a.indices.size() != b.indices.size()) return a.indices.size() < b.indices.size();
        std::set<int> ia, ib;
        for (int i : a.indices) ia.insert(sorted[i]->id);
        for (int i : b.indices) ib.insert(sorted[i]->id);
        return ia < ib;
    };
    auto heap_cmp = [&](const Node& a, const Node& b) { return node_rank(b, a); };
    std::priority_queue<Node, std::vector<Node>, decltype(heap_cmp)> heap(heap_cmp);
    heap.push({sorted[0]->reliability, {0}});

    std::vector<RankedSubset> emitted;
    const std::size_t gather_cap = std::max<std::size_t>(4096, 8u * static_cast<unsigned>(cap));
    while (!heap.empty()) {
        // Enough gathered and no tie left that could reorder the tail.
        if (static_cast<int>(emitted.size()) >= cap &&
            heap.top().probability < emitted.back().probability)
            break;
        if (emitted.size() > gather_cap)
            throw CapacityError("subset ranking tie volume exceeds the gather budget");
        Node node = heap.top();
        heap.pop();
        RankedSubset rs;
        rs.probability = node.probability;
        for (int i : node.indices) rs.ids.insert(sorted[i]->id);
        emitted.push_back(std::move(rs));

        const int j = node.indices.back();
        if (j + 1 < n) {
            Node extend = node;
            extend.indices.push_back(j + 1);
            extend.probability = node.probability * sorted[j + 1]->reliability;
            heap.push(std::move(extend));
            Node shift = node;
            shift.indices.back() = j + 1;
            shift.probability =
                node.probability / sorted[j]->reliability * sorted[j + 1]->reliability;
            heap.push(std::move(shift));
        }
    }
    std::sort(emitted.begin(), emitted.end(), rank_less);
    if (static_cast<int>(emitted.size()) > cap) emitted.resize(cap);
    std::vector<std::set<int>> out;
    out.reserve(emitted.size());
    for (auto& rs : emitted) out.push_back(std::move(rs.ids));
    return out;
}

Segmentation segment_by_count(const grid::Network& net, int k, const SegmentationOptions& opts) {
    if (net.flex_units.empty())
        throw ValidationError("segment_by_count requires at least one flex unit");
    const int n = static_cast<int>(net.flex_units.size());

    Segmentation out;
    out.mode = SegMode::ByCount;
    out.reference_point = tracer::reference_point(net, opts.trace);

    // Level zero is the initial operating point.
    Segment level0;
    level0.cardinality = 0;
    level0.polygon = geom::Polygon::point(out.reference_point);
    level0.area.method = tracer::TraceMethod::Epsilon;
    level0.area.k = k;
    level0.area.reference_point = out.reference_point;
    level0.area.boundary = {out.reference_point};
    out.segments.push_back(std::move(level0));

    misocp::SubsetCache cache;
    tracer::TraceOptions topts = opts.trace;
    if (!topts.cache) topts.cache = &cache;
    for (int m = 1; m <= n; ++m) {
        try {
            auto area =
                tracer::trace_epsilon(net, distflow::ActivationContext::relaxed(m), k, topts);
            Segment s;
            s.cardinality = m;
            s.polygon = area.polygon();
            s.area = std::move(area);
            out.segments.push_back(std::move(s));
        } catch (const Error& e) {
            throw NumericalError("by-count level " + std::to_string(m) +
                                 " failed: " + e.what());
        }
    }

    for (int m = 0; m < n; ++m) {
        if (!geom::contains(out.segments[m + 1].polygon, out.segments[m].polygon,
                            opts.containment_tol))
            throw NumericalError("by-count nesting violated between levels " +
                                 std::to_string(m) + " and " + std::to_string(m + 1));
    }
    return out;
}

Segmentation segment_probabilistic(const grid::Network& net, int k, int max_segments,
                                   std::optional<double> threshold,
                                   const SegmentationOptions& opts) {
    if (max_segments < 1) throw ValidationError("max_segments must be at least 1");
    if (threshold && !(*threshold > 0.0 && *threshold <= 1.0))
        throw ValidationError("threshold must lie in (0, 1]");

    Segmentation out;
    out.mode = SegMode::Probabilistic;
    out.threshold = threshold;
    out.reference_point = tracer::reference_point(net, opts.trace);

    const auto ranked = rank_subsets(net, std::nullopt);
    geom::PolygonSet retained_union;

    for (const auto& subset : ranked) {
        if (static_cast<int>(out.segments.size()) >= max_segments) {
            out.ranking_exhausted = false;
            break;
        }
        Segment s;
        s.subset = subset;
        s.cardinality = static_cast<int>(subset.size());
        s.probability = subset_probability(subset, net);
        out.lowest_processed_probability = s.probability;
        try {
            s.area = tracer::trace_epsilon(net, distflow::ActivationContext::fixed(subset), k,
                                           opts.trace);
            s.polygon = s.area.polygon();
        } catch (const Error&) {
            out.failed_subsets.push_back(subset);
            continue;
        }
        if (geom::contains(retained_union, s.polygon, opts.containment_tol)) {
            ++out.discarded_count;
            out.discarded.push_back(std::move(s));
            continue;
        }
        retained_union = geom::unite(retained_union, geom::to_set(s.polygon));
        out.segments.push_back(std::move(s));
    }

    if (threshold) {
        geom::PolygonSet envelope;
        for (const Segment& s : out.segments)
            if (s.probability >= *threshold)
                envelope = geom::unite(envelope, geom::to_set(s.polygon));
        out.envelope = std::move(envelope);
    }
    return out;
}

} // namespace flexmap::seg
