#pragma once

#include <optional>
#include <set>
#include <vector>

#include "flexmap/conic.hpp"
#include "flexmap/grid.hpp"

namespace flexmap::distflow {

/// Optimization direction coefficients of the interface objective
/// pi_p * P + pi_q * Q (minimized). Both zero is a pure feasibility probe.
struct ObjectiveDirection {
    int pi_p = 0;
    int pi_q = 0;
};

enum class ActivationMode { Off, FixedSubset, Relaxed };

struct ActivationContext {
    ActivationMode mode = ActivationMode::Off;
    std::set<int> subset;                  // FixedSubset: active unit ids
    std::optional<int> cardinality_limit;  // Relaxed: row sum(x) <= limit

    static ActivationContext off() { return {}; }
    static ActivationContext fixed(std::set<int> ids) {
        return {ActivationMode::FixedSubset, std::move(ids), std::nullopt};
    }
    static ActivationContext all_units(const grid::Network& net);
    static ActivationContext relaxed(std::optional<int> limit) {
        return {ActivationMode::Relaxed, {}, limit};
    }
};

/// Optional bounds on the interface exchange, in kW / kVAr.
struct InterfaceWindow {
    std::optional<double> p_lo, p_hi, q_lo, q_hi;
    bool empty() const { return !p_lo && !p_hi && !q_lo && !q_hi; }
};

struct BranchFlow {
    double p = 0.0;  // p.u., sending end, oriented away from the reference
    double q = 0.0;
    double l = 0.0;  // squared current, p.u.
};

struct FlexOutput {
    int unit_id = 0;
    double p_kw = 0.0;
    double q_kvar = 0.0;
    bool active = false;
    double x = 0.0;  // activation value (fractional in relaxed mode)
};

/// One network state. Interface values follow the consumption convention:
/// positive P/Q mean the network imports at the reference bus.
struct OperatingPoint {
    double interface_p = 0.0;  // kW
    double interface_q = 0.0;  // kVAr
    std::vector<double> voltages;    // p.u., by bus position
    std::vector<BranchFlow> flows;   // by branch position; open branches zero
    std::vector<FlexOutput> flex_outputs;
    double losses_p = 0.0;  // kW
    double losses_q = 0.0;  // kVAr
    double exactness_residual = 0.0;  // p.u., max |p^2 + q^2 - l w|
    bool relaxation_inexact = false;
    double objective_pu = 0.0;  // pi . interface, per-unit, minimization form
};

struct SolveOptions {
    conic::Tolerances tol{};
    int max_iter = 200;
    /// Per-branch residual above which a conic point is treated as inexact.
    double exactness_tol = 1e-6;
    /// Objective certification width for the exactness-recovery bisection.
    double bisection_tol = 1e-7;
};

/// Assembles Model 1 as a conic program: linear balance/voltage rows, the
/// flow-current relation relaxed to rotated cones, thermal cones with fixed
/// radius, squared-voltage bounds, and (in relaxed mode) McCormick rows
/// with the cardinality constraint.
conic::Problem build_opf(const grid::Network& net, ObjectiveDirection dir,
                         const ActivationContext& act, const InterfaceWindow& win);

/// Optimizes the interface exchange. Fixed-subset and off modes return a
/// physically exact point: if the cone relaxation comes back loose, the
/// optimum is re-certified by loss-minimizing probes bisected on the
/// objective, so every returned point satisfies the flow-current equality
/// to exactness_tol (flagged otherwise, never silently dropped).
/// Returns nullopt when the window admits no operating point.
std::optional<OperatingPoint> solve_opf(const grid::Network& net, ObjectiveDirection dir,
                                        const ActivationContext& act, const InterfaceWindow& win,
                                        const SolveOptions& opts = {});

/// Relaxed-activation solve used for branch-and-bound node bounds. The
/// bound is the conic optimum with continuous x (no exactness recovery),
/// which lower-bounds every binary completion of the node.
struct RelaxationResult {
    conic::SolveStatus status = conic::SolveStatus::IterationLimit;
    double bound_pu = 0.0;
    std::vector<std::pair<int, double>> x_values;  // unit id -> activation
    bool integral = false;
    OperatingPoint point;
};
RelaxationResult solve_relaxation(const grid::Network& net, ObjectiveDirection dir,
                                  std::optional<int> cardinality_limit,
                                  const InterfaceWindow& win, const std::set<int>& forced_on,
                                  const std::set<int>& forced_off, const SolveOptions& opts = {});

/// Maximizes the displacement t >= 0 along a ray
///   (P, Q) = reference + t (cos theta, sin theta)
/// in the interface plane (kW / kVAr), with the same exactness
/// certification as solve_opf. Fixed-subset and off activations only.
/// Returns nullopt when not even t = 0 is reachable.
struct RayResult {
    OperatingPoint point;
    double t_kw = 0.0;
};
std::optional<RayResult> solve_ray(const grid::Network& net, const ActivationContext& act,
                                   double ref_p_kw, double ref_q_kvar, double theta,
                                   const SolveOptions& opts = {});

/// Forward/backward sweep power flow: the independent oracle. `inj_*` are
/// additional per-bus injections (positive = production) on top of the
/// network demands, by bus position; pass empty vectors for the bare
/// network. Reports violations, never enforces limits. Throws
/// NumericalError when the sweep diverges (voltage collapse).
struct SweepResult {
    OperatingPoint point;
    int iterations = 0;
    double mismatch = 0.0;       // p.u., max balance/voltage/current residual
    double voltage_violation = 0.0;  // p.u. magnitude beyond [v_min, v_max]
    double thermal_violation = 0.0;  // p.u. apparent power beyond s_max
    bool feasible(double tol = 1e-6) const {
        return voltage_violation <= tol && thermal_violation <= tol;
    }
};
SweepResult sweep_power_flow(const grid::Network& net, std::vector<double> inj_p_kw = {},
                             std::vector<double> inj_q_kvar = {});

/// pi . interface in per-unit minimization form for an operating point.
double objective_pu(const grid::Network& net, ObjectiveDirection dir, const OperatingPoint& pt);

} // namespace flexmap::distflow
