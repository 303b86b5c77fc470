#include "flexmap/misocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <vector>

#include "flexmap/errors.hpp"

namespace flexmap::misocp {

namespace {

constexpr double kIntegralityTol = 1e-6;

std::string cache_key(distflow::ObjectiveDirection dir, const distflow::InterfaceWindow& win,
                      const std::set<int>& subset) {
    std::ostringstream os;
    os.precision(17);
    os << dir.pi_p << "|" << dir.pi_q;
    auto put = [&](const std::optional<double>& v) {
        os << "|";
        if (v) os << *v;
    };
    put(win.p_lo);
    put(win.p_hi);
    put(win.q_lo);
    put(win.q_hi);
    for (int id : subset) os << "," << id;
    return os.str();
}

double box_area(const grid::FlexUnit& u) {
    return (u.p_max - u.p_min) * (u.q_max - u.q_min);
}

} // namespace

std::optional<std::optional<distflow::OperatingPoint>> SubsetCache::lookup(const Key& key) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void SubsetCache::store(const Key& key, const std::optional<distflow::OperatingPoint>& value) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_[key] = value;
}

std::optional<MisocpResult> solve_misocp(const grid::Network& net,
                                         distflow::ObjectiveDirection dir, int cardinality_limit,
                                         const distflow::InterfaceWindow& win,
                                         const std::set<int>& forced_on,
                                         const std::set<int>& forced_off,
                                         const MisocpOptions& opts) {
    const int n_units = static_cast<int>(net.flex_units.size());
    if (cardinality_limit < 0 || cardinality_limit > n_units)
        throw ValidationError("cardinality limit out of range");
    for (int id : forced_on)
        if (forced_off.count(id))
            throw ValidationError("flex unit " + std::to_string(id) + " forced both on and off");
    if (static_cast<int>(forced_on.size()) > cardinality_limit)
        throw ValidationError("forced_on exceeds the cardinality limit");
    for (int id : forced_on)
        if (!net.find_unit(id))
            throw ValidationError("forced set references unknown flex unit " + std::to_string(id));
    for (int id : forced_off)
        if (!net.find_unit(id))
            throw ValidationError("forced set references unknown flex unit " + std::to_string(id));

    // Exact evaluation of one activation subset, memoized when a cache is
    // supplied. nullopt marks a subset whose window is unreachable.
    auto evaluate_subset =
        [&](const std::set<int>& subset) -> std::optional<distflow::OperatingPoint> {
        const std::string key = opts.cache ? cache_key(dir, win, subset) : std::string();
        if (opts.cache) {
            if (auto hit = opts.cache->lookup(key)) return *hit;
        }
        auto pt = distflow::solve_opf(net, dir, distflow::ActivationContext::fixed(subset), win,
                                      opts.solve);
        if (opts.cache) opts.cache->store(key, pt);
        return pt;
    };

    std::optional<MisocpResult> incumbent;
    auto offer = [&](const std::set<int>& subset,
                     const std::optional<distflow::OperatingPoint>& pt) {
        if (!pt) return;
        if (!incumbent || pt->objective_pu < incumbent->objective_pu ||
            (pt->objective_pu == incumbent->objective_pu && subset < incumbent->activation)) {
            MisocpResult r;
            r.activation = subset;
            r.point = *pt;
            r.objective_pu = pt->objective_pu;
            r.nodes_explored = incumbent ? incumbent->nodes_explored : 0;
            incumbent = std::move(r);
        }
    };

    // Everything decided up front: a single exact solve settles it.
    if (cardinality_limit == 0 ||
        static_cast<int>(forced_on.size()) == cardinality_limit ||
        static_cast<int>(forced_off.size()) == n_units - static_cast<int>(forced_on.size())) {
        auto pt = evaluate_subset(forced_on);
        offer(forced_on, pt);
        if (!incumbent) return std::nullopt;
        incumbent->nodes_explored = 1;
        return incumbent;
    }

    struct Node {
        std::set<int> fixed_one, fixed_zero;
        double bound;
        int depth;
        long id;
    };
    struct Order {
        bool operator()(const Node& a, const Node& b) const {
            if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
            return a.id > b.id;
        }
    };
    std::priority_queue<Node, std::vector<Node>, Order> open;
    long next_id = 0;
    int explored = 0;

    auto log_line = [&](const Node& node, const std::string& decision) {
        if (!opts.node_log) return;
        (*opts.node_log) << "node " << node.id << " depth " << node.depth << " bound "
                         << node.bound << " incumbent "
                         << (incumbent ? incumbent->objective_pu
                                       : std::numeric_limits<double>::infinity())
                         << " " << decision << "\n";
    };

    open.push({forced_on, forced_off, -std::numeric_limits<double>::infinity(), 0, next_id++});

    bool seeded = false;
    while (!open.empty()) {
        Node node = open.top();
        open.pop();
        if (incumbent && node.bound >= incumbent->objective_pu - opts.gap_tol) {
            log_line(node, "prune-bound");
            continue;
        }
        if (++explored > opts.node_limit)
            throw NumericalError("branch-and-bound node limit exceeded");

        auto relax = distflow::solve_relaxation(net, dir, cardinality_limit, win, node.fixed_one,
                                                node.fixed_zero, opts.solve);
        if (relax.status == conic::SolveStatus::Infeasible) {
            log_line(node, "prune-infeasible");
            continue;
        }
        const bool relax_ok = relax.status == conic::SolveStatus::Optimal;
        // A stalled node solve keeps its parent bound (still valid), loses
        // the fractional guidance and is never pruned on its own value.
        node.bound = relax_ok ? relax.bound_pu : node.bound;
        if (incumbent && node.bound >= incumbent->objective_pu - opts.gap_tol) {
            log_line(node, "prune-bound");
            continue;
        }

        // Incumbent seeding: round the root relaxation once.
        if (!seeded && relax_ok) {
            seeded = true;
            std::vector<std::pair<double, int>> ranked;
            for (const auto& [id, x] : relax.x_values)
                if (!forced_off.count(id)) ranked.push_back({x, id});
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            std::set<int> rounded = forced_on;
            for (const auto& [x, id] : ranked) {
                if (static_cast<int>(rounded.size()) >= cardinality_limit) break;
                if (x >= 0.5) rounded.insert(id);
            }
            offer(rounded, evaluate_subset(rounded));
        }

        const bool at_limit = static_cast<int>(node.fixed_one.size()) >= cardinality_limit;
        std::vector<std::pair<int, double>> free_units;
        for (const auto& u : net.flex_units) {
            if (node.fixed_one.count(u.id) || node.fixed_zero.count(u.id)) continue;
            double x = 0.5;
            for (const auto& [id, xv] : relax.x_values)
                if (id == u.id) x = xv;
            free_units.push_back({u.id, x});
        }

        if (free_units.empty() || at_limit) {
            // Leaf: the subset is fully decided.
            offer(node.fixed_one, evaluate_subset(node.fixed_one));
            log_line(node, "leaf");
            continue;
        }

        if (relax_ok && relax.integral) {
            // The relaxation already picked a binary activation; evaluate it
            // exactly, but keep branching: with an inexact cone relaxation
            // the node bound may still undercut the incumbent.
            std::set<int> candidate = node.fixed_one;
            for (const auto& [id, x] : free_units)
                if (x > 0.5) candidate.insert(id);
            offer(candidate, evaluate_subset(candidate));
            if (incumbent && node.bound >= incumbent->objective_pu - opts.gap_tol) {
                log_line(node, "leaf-integral");
                continue;
            }
        }

        // Branch on the most fractional free unit; ties by larger box area,
        // then by lower unit id.
        auto score = [&](const std::pair<int, double>& e) {
            return std::abs(e.second - std::round(e.second));
        };
        std::sort(free_units.begin(), free_units.end(),
                  [&](const std::pair<int, double>& a, const std::pair<int, double>& b) {
                      const double fa = score(a), fb = score(b);
                      if (std::abs(fa - fb) > kIntegralityTol) return fa > fb;
                      const double aa = box_area(*net.find_unit(a.first));
                      const double ab = box_area(*net.find_unit(b.first));
                      if (aa != ab) return aa > ab;
                      return a.first < b.first;
                  });
        const int pick = free_units.front().first;
        log_line(node, "branch unit " + std::to_string(pick));

        Node off_child{node.fixed_one, node.fixed_zero, node.bound, node.depth + 1, next_id++};
        off_child.fixed_zero.insert(pick);
        Node on_child{node.fixed_one, node.fixed_zero, node.bound, node.depth + 1, next_id++};
        on_child.fixed_one.insert(pick);
        open.push(off_child);
        open.push(on_child);
    }

    if (!incumbent) return std::nullopt;
    incumbent->nodes_explored = explored;
    return incumbent;
}

} // namespace flexmap::misocp
