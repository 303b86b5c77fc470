#include "flexmap/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>

#include "flexmap/errors.hpp"

namespace flexmap::render {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4b289ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Lightness ramp used for both charts: t = 0 -> 90% (light), t = 1 -> 25%.
std::string gray(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int level = static_cast<int>(std::lround(255.0 * (0.90 - 0.65 * t)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", level, level, level);
    return buf;
}

struct Bounds {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    void add(double x, double y) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    void pad(double fraction) {
        const double dx = std::max(xmax - xmin, 1e-9) * fraction;
        const double dy = std::max(ymax - ymin, 1e-9) * fraction;
        xmin -= dx;
        xmax += dx;
        ymin -= dy;
        ymax += dy;
    }
};

} // namespace

LayoutResult layout_force(const grid::Network& net, int iterations, std::uint64_t seed) {
    const int n = static_cast<int>(net.buses.size());
    LayoutResult out;
    out.positions.assign(n, {});

    // BFS layering from the reference seeds a crossing-free skeleton.
    std::vector<std::vector<std::pair<int, double>>> adj(n);  // (bus, admittance)
    double mean_y = 0.0;
    int in_service = 0;
    for (const auto& br : net.branches) {
        if (br.normally_open) continue;
        const double z = std::hypot(br.r, br.x);
        const double y = 1.0 / std::max(z, 1e-6);
        const int i = net.bus_index(br.from_bus);
        const int j = net.bus_index(br.to_bus);
        adj[i].push_back({j, y});
        adj[j].push_back({i, y});
        mean_y += y;
        ++in_service;
    }
    mean_y = in_service ? mean_y / in_service : 1.0;

    const int ref = net.bus_index(net.reference_bus());
    std::vector<int> depth(n, -1), lane(n, 0);
    std::queue<int> q;
    q.push(ref);
    depth[ref] = 0;
    std::vector<int> lane_counter(n + 1, 0);
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        lane[u] = lane_counter[depth[u]]++;
        for (auto [w, y] : adj[u])
            if (depth[w] < 0) {
                depth[w] = depth[u] + 1;
                q.push(w);
            }
    }

    std::uint64_t state = seed;
    auto jitter = [&] {
        state = splitmix64(state);
        return (static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5) * 0.2;
    };
    for (int i = 0; i < n; ++i)
        out.positions[i] = {static_cast<double>(depth[i]) + jitter(),
                            static_cast<double>(lane[i]) - 0.5 * lane_counter[depth[i]] + jitter()};

    // Spring-electric refinement: attraction along branches scales with
    // normalized admittance, all node pairs repel.
    const double k_attract = 0.08;
    const double k_repulse = 0.4;
    double step = 0.1;
    std::vector<geom::Point> force(n);
    for (int it = 0; it < iterations; ++it) {
        out.iterations = it + 1;
        for (auto& f : force) f = {0.0, 0.0};
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double dx = out.positions[i].x - out.positions[j].x;
                double dy = out.positions[i].y - out.positions[j].y;
                const double d2 = std::max(dx * dx + dy * dy, 1e-6);
                const double f_r = k_repulse / d2;
                const double d = std::sqrt(d2);
                dx /= d;
                dy /= d;
                force[i].x += f_r * dx;
                force[i].y += f_r * dy;
                force[j].x -= f_r * dx;
                force[j].y -= f_r * dy;
            }
        for (const auto& br : net.branches) {
            if (br.normally_open) continue;
            const int i = net.bus_index(br.from_bus);
            const int j = net.bus_index(br.to_bus);
            const double w = (1.0 / std::max(std::hypot(br.r, br.x), 1e-6)) / mean_y;
            double dx = out.positions[j].x - out.positions[i].x;
            double dy = out.positions[j].y - out.positions[i].y;
            const double d = std::max(std::hypot(dx, dy), 1e-9);
            const double f_a = k_attract * w * d;
            dx /= d;
            dy /= d;
            force[i].x += f_a * dx;
            force[i].y += f_a * dy;
            force[j].x -= f_a * dx;
            force[j].y -= f_a * dy;
        }
        force[ref] = {0.0, 0.0};  // pin the interface bus
        double fmax = 0.0;
        for (int i = 0; i < n; ++i) {
            const double norm = std::hypot(force[i].x, force[i].y);
            fmax = std::max(fmax, norm);
            const double cap = std::min(norm, step);
            if (norm > 1e-12) {
                out.positions[i].x += force[i].x / norm * cap;
                out.positions[i].y += force[i].y / norm * cap;
            }
        }
        out.residual = fmax;
        step *= 0.995;
        if (fmax < 1e-3) break;
    }
    for (const auto& p : out.positions)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw NumericalError("layout diverged to non-finite coordinates");
    return out;
}

std::string render_network(const grid::Network& net, const LayoutResult& layout,
                           const distflow::OperatingPoint& op) {
    const int n = static_cast<int>(net.buses.size());
    if (static_cast<int>(layout.positions.size()) != n)
        throw ValidationError("layout does not cover all buses");

    const double view = 720.0;
    Bounds b;
    for (const auto& p : layout.positions) b.add(p.x, p.y);
    b.pad(0.10);
    const double sx = view / (b.xmax - b.xmin);
    const double sy = view / (b.ymax - b.ymin);
    auto X = [&](double x) { return (x - b.xmin) * sx; };
    auto Y = [&](double y) { return (y - b.ymin) * sy; };

    double max_demand = 0.0;
    for (const auto& bus : net.buses) max_demand = std::max(max_demand, bus.demand_p);
    const double r_min = 3.0, r_max = 13.0;

    constexpr int kBins = 8;
    auto voltage_fill = [&](int bus_idx) {
        const grid::Bus& bus = net.buses[bus_idx];
        const double v =
            bus_idx < static_cast<int>(op.voltages.size()) ? op.voltages[bus_idx] : 1.0;
        double t = (v - bus.v_min) / std::max(bus.v_max - bus.v_min, 1e-9);
        t = std::clamp(t, 0.0, 1.0);
        const int bin = std::min(kBins - 1, static_cast<int>(t * kBins));
        // darkest at v_min
        return gray(1.0 - static_cast<double>(bin) / (kBins - 1));
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt(view + 170.0) +
           " " + fmt(view) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (const auto& br : net.branches) {
        const int i = net.bus_index(br.from_bus);
        const int j = net.bus_index(br.to_bus);
        const double w = 1.0 / std::max(std::hypot(br.r, br.x), 1e-6);
        const double stroke = std::clamp(0.5 + 0.15 * w, 0.6, 3.5);
        svg += "<line class=\"branch\" x1=\"" + fmt(X(layout.positions[i].x)) + "\" y1=\"" +
               fmt(Y(layout.positions[i].y)) + "\" x2=\"" + fmt(X(layout.positions[j].x)) +
               "\" y2=\"" + fmt(Y(layout.positions[j].y)) + "\" stroke=\"" +
               (br.normally_open ? std::string("#bbbbbb\" stroke-dasharray=\"6 4")
                                 : std::string("#555555")) +
               "\" stroke-width=\"" + fmt(stroke) + "\"/>\n";
    }

    for (const auto& unit : net.flex_units) {
        const int i = net.bus_index(unit.bus);
        const double x = X(layout.positions[i].x), y = Y(layout.positions[i].y);
        svg += "<rect class=\"unit\" x=\"" + fmt(x - 10) + "\" y=\"" + fmt(y - 10) +
               "\" width=\"20\" height=\"20\" fill=\"none\" stroke=\"#111111\" "
               "stroke-width=\"1.4\"/>\n";
    }

    for (int i = 0; i < n; ++i) {
        const grid::Bus& bus = net.buses[i];
        const double frac = max_demand > 0.0 ? bus.demand_p / max_demand : 0.0;
        const double radius = r_min + (r_max - r_min) * std::sqrt(frac);
        svg += "<circle class=\"bus\" cx=\"" + fmt(X(layout.positions[i].x)) + "\" cy=\"" +
               fmt(Y(layout.positions[i].y)) + "\" r=\"" + fmt(radius) + "\" fill=\"" +
               voltage_fill(i) + "\" stroke=\"#222222\" stroke-width=\"0.8\"/>\n";
        if (bus.is_reference)
            svg += "<circle cx=\"" + fmt(X(layout.positions[i].x)) + "\" cy=\"" +
                   fmt(Y(layout.positions[i].y)) + "\" r=\"" + fmt(radius + 3.5) +
                   "\" fill=\"none\" stroke=\"#222222\" stroke-width=\"1.2\"/>\n";
    }

    // Voltage legend.
    svg += "<text x=\"" + fmt(view + 12) + "\" y=\"24\" font-size=\"13\">voltage</text>\n";
    for (int bin = 0; bin < kBins; ++bin) {
        const double y0 = 36.0 + 18.0 * bin;
        svg += "<rect x=\"" + fmt(view + 12) + "\" y=\"" + fmt(y0) +
               "\" width=\"16\" height=\"16\" fill=\"" + gray(static_cast<double>(bin) / (kBins - 1)) +
               "\" stroke=\"#444444\" stroke-width=\"0.5\"/>\n";
    }
    svg += "<text x=\"" + fmt(view + 34) + "\" y=\"48\" font-size=\"11\">v_max</text>\n";
    svg += "<text x=\"" + fmt(view + 34) + "\" y=\"" + fmt(36.0 + 18.0 * kBins - 4.0) +
           "\" font-size=\"11\">v_min</text>\n";
    svg += "<rect x=\"" + fmt(view + 12) + "\" y=\"" + fmt(36.0 + 18.0 * kBins + 14.0) +
           "\" width=\"16\" height=\"16\" fill=\"none\" stroke=\"#111111\" "
           "stroke-width=\"1.4\"/>\n";
    svg += "<text x=\"" + fmt(view + 34) + "\" y=\"" + fmt(36.0 + 18.0 * kBins + 27.0) +
           "\" font-size=\"11\">flexible unit</text>\n";
    svg += "</svg>\n";
    return svg;
}

std::string render_segmentation(const seg::Segmentation& segmentation) {
    if (segmentation.segments.empty())
        throw ValidationError("cannot render an empty segmentation");

    Bounds b;
    b.add(segmentation.reference_point.x, segmentation.reference_point.y);
    for (const auto& s : segmentation.segments)
        for (const auto& v : s.polygon.vertices()) b.add(v.x, v.y);
    b.pad(0.08);

    const double view = 700.0, margin = 70.0;
    const double sx = view / (b.xmax - b.xmin);
    const double sy = view / (b.ymax - b.ymin);
    auto X = [&](double x) { return margin + (x - b.xmin) * sx; };
    auto Y = [&](double y) { return margin + view - (y - b.ymin) * sy; };  // Q up

    double pmin = 1.0, pmax = 0.0;
    int cmax = 0;
    for (const auto& s : segmentation.segments) {
        pmin = std::min(pmin, s.probability);
        pmax = std::max(pmax, s.probability);
        cmax = std::max(cmax, s.cardinality);
    }
    auto shade = [&](const seg::Segment& s) {
        if (segmentation.mode == seg::SegMode::ByCount)
            return gray(cmax > 0 ? static_cast<double>(s.cardinality) / cmax : 0.0);
        // high probability (central) light, low probability dark
        const double span = std::max(pmax - pmin, 1e-12);
        return gray((pmax - s.probability) / span);
    };

    // Draw outermost first so inner segments stay visible on top.
    std::vector<const seg::Segment*> order;
    for (const auto& s : segmentation.segments) order.push_back(&s);
    if (segmentation.mode == seg::SegMode::ByCount)
        std::sort(order.begin(), order.end(),
                  [](const seg::Segment* a, const seg::Segment* b) {
                      return a->cardinality > b->cardinality;
                  });
    else
        std::sort(order.begin(), order.end(),
                  [](const seg::Segment* a, const seg::Segment* b) {
                      if (a->probability != b->probability) return a->probability < b->probability;
                      return a->subset > b->subset;
                  });

    std::string svg;
    const double width = view + 2 * margin, height = view + 2 * margin;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt(width) + " " +
           fmt(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (const seg::Segment* s : order) {
        if (s->polygon.degenerate()) continue;
        svg += "<polygon class=\"segment\" points=\"";
        for (const auto& v : s->polygon.vertices())
            svg += fmt(X(v.x)) + "," + fmt(Y(v.y)) + " ";
        svg += "\" fill=\"" + shade(*s) + "\" stroke=\"#333333\" stroke-width=\"0.7\"/>\n";
    }

    for (const auto& piece : segmentation.envelope.pieces()) {
        svg += "<polygon class=\"envelope\" points=\"";
        for (const auto& v : piece.outer) svg += fmt(X(v.x)) + "," + fmt(Y(v.y)) + " ";
        svg += "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.6\" "
               "stroke-dasharray=\"8 5\"/>\n";
    }

    // Reference cross.
    const double cx = X(segmentation.reference_point.x);
    const double cy = Y(segmentation.reference_point.y);
    svg += "<path class=\"reference\" d=\"M " + fmt(cx - 8) + " " + fmt(cy) + " H " +
           fmt(cx + 8) + " M " + fmt(cx) + " " + fmt(cy - 8) + " V " + fmt(cy + 8) +
           "\" stroke=\"#000000\" stroke-width=\"2\"/>\n";

    // Axes with a handful of ticks.
    svg += "<rect x=\"" + fmt(margin) + "\" y=\"" + fmt(margin) + "\" width=\"" + fmt(view) +
           "\" height=\"" + fmt(view) + "\" fill=\"none\" stroke=\"#000000\" "
           "stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = b.xmin + (b.xmax - b.xmin) * t / 4.0;
        const double fy = b.ymin + (b.ymax - b.ymin) * t / 4.0;
        svg += "<text x=\"" + fmt(X(fx)) + "\" y=\"" + fmt(margin + view + 24) +
               "\" font-size=\"12\" text-anchor=\"middle\">" + fmt(fx) + "</text>\n";
        svg += "<text x=\"" + fmt(margin - 8) + "\" y=\"" + fmt(Y(fy) + 4) +
               "\" font-size=\"12\" text-anchor=\"end\">" + fmt(fy) + "</text>\n";
    }
    svg += "<text x=\"" + fmt(margin + view / 2) + "\" y=\"" + fmt(margin + view + 48) +
           "\" font-size=\"14\" text-anchor=\"middle\">P, kW</text>\n";
    svg += "<text x=\"18\" y=\"" + fmt(margin + view / 2) +
           "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
           fmt(margin + view / 2) + ")\">Q, kVAr</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace flexmap::render
