#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "flexmap/distflow.hpp"

namespace flexmap::misocp {

/// One branch-and-bound node over the activation binaries.
struct BranchNode {
    std::set<int> fixed_zero, fixed_one;
    double relaxation_bound = 0.0;
    int depth = 0;
};

/// Memoizes exact fixed-subset solves across solve_misocp calls that share
/// a network and direction (cardinality sweeps hit the same subsets).
class SubsetCache {
public:
    using Key = std::string;
    std::optional<std::optional<distflow::OperatingPoint>> lookup(const Key& key);
    void store(const Key& key, const std::optional<distflow::OperatingPoint>& value);

private:
    std::mutex mutex_;
    std::map<Key, std::optional<distflow::OperatingPoint>> entries_;
};

struct MisocpOptions {
    distflow::SolveOptions solve{};
    double gap_tol = 9e-7;          // absolute optimality gap, per-unit objective
    std::ostream* node_log = nullptr;  // one line per node when set
    SubsetCache* cache = nullptr;
    int node_limit = 200000;
};

struct MisocpResult {
    std::set<int> activation;
    distflow::OperatingPoint point;
    double objective_pu = 0.0;
    int nodes_explored = 0;
};

/// Optimal binary activation under sum(x) <= cardinality_limit, best-first
/// branch-and-bound on conic node relaxations with exact leaf evaluation.
/// Returns nullopt when no activation satisfies the window.
std::optional<MisocpResult> solve_misocp(const grid::Network& net,
                                         distflow::ObjectiveDirection dir, int cardinality_limit,
                                         const distflow::InterfaceWindow& win,
                                         const std::set<int>& forced_on = {},
                                         const std::set<int>& forced_off = {},
                                         const MisocpOptions& opts = {});

} // namespace flexmap::misocp
