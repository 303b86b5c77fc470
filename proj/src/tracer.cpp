#include "flexmap/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexmap/errors.hpp"
#include "flexmap/parallel.hpp"

namespace flexmap::tracer {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4b289ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct SolvedPoint {
    bool feasible = false;
    distflow::OperatingPoint point;
    std::set<int> activation;
};

/// Deterministic coordinate descent over the active units' outputs,
/// evaluated through the sweep oracle. The certified conic solve lands in
/// the right dispatch basin but can stop short of a pinched frontier by
/// the width of the loss-probe's blind spot; the oracle walk closes that
/// last stretch. The result is exact physics by construction.
void polish_dispatch(const grid::Network& net, const std::set<int>& activation,
                     distflow::ObjectiveDirection dir, const distflow::InterfaceWindow& win,
                     distflow::OperatingPoint& point) {
    if (activation.empty() || (dir.pi_p == 0 && dir.pi_q == 0)) return;

    std::vector<const grid::FlexUnit*> units;
    for (const auto& u : net.flex_units)
        if (activation.count(u.id)) units.push_back(&u);

    // Dispatch state per active unit, seeded from the solved point.
    std::vector<double> up(units.size()), uq(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        for (const auto& fo : point.flex_outputs)
            if (fo.unit_id == units[i]->id) {
                up[i] = fo.p_kw;
                uq[i] = fo.q_kvar;
            }
    }

    const double wtol = 1e-7 * net.base_mva * 1000.0;
    auto evaluate = [&](const std::vector<double>& p, const std::vector<double>& q,
                        distflow::SweepResult& sw) -> bool {
        std::vector<double> inj_p(net.buses.size(), 0.0), inj_q(net.buses.size(), 0.0);
        for (std::size_t i = 0; i < units.size(); ++i) {
            const int bi = net.bus_index(units[i]->bus);
            inj_p[bi] += p[i];
            inj_q[bi] += q[i];
        }
        try {
            sw = distflow::sweep_power_flow(net, inj_p, inj_q);
        } catch (const NumericalError&) {
            return false;
        }
        if (!sw.feasible(1e-9)) return false;
        const double P = sw.point.interface_p, Q = sw.point.interface_q;
        if (win.p_lo && P < *win.p_lo - wtol) return false;
        if (win.p_hi && P > *win.p_hi + wtol) return false;
        if (win.q_lo && Q < *win.q_lo - wtol) return false;
        if (win.q_hi && Q > *win.q_hi + wtol) return false;
        return true;
    };
    auto objective = [&](const distflow::SweepResult& sw) {
        return dir.pi_p * net.kw_to_pu(sw.point.interface_p) +
               dir.pi_q * net.kw_to_pu(sw.point.interface_q);
    };

    distflow::SweepResult best_sw;
    if (!evaluate(up, uq, best_sw)) return;  // solved point not reproducible; keep it
    double best = objective(best_sw);
    const double improve_tol = 1e-10;

    double caps = 0.0;
    for (const auto* u : units)
        caps = std::max({caps, u->p_max - u->p_min, u->q_max - u->q_min});
    double step = 0.25 * caps;
    const double step_floor = 2e-6 * net.base_mva * 1000.0;

    for (int round = 0; round < 60 && step > step_floor; ++round) {
        bool improved = false;
        for (std::size_t i = 0; i < units.size(); ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                double& v = axis == 0 ? up[i] : uq[i];
                const double lo = axis == 0 ? units[i]->p_min : units[i]->q_min;
                const double hi = axis == 0 ? units[i]->p_max : units[i]->q_max;
                const double saved = v;
                for (double delta : {step, -step}) {
                    const double candidate = std::clamp(saved + delta, lo, hi);
                    if (candidate == saved) continue;
                    v = candidate;
                    distflow::SweepResult sw;
                    if (evaluate(up, uq, sw) && objective(sw) < best - improve_tol) {
                        best = objective(sw);
                        best_sw = sw;
                        improved = true;
                        break;
                    }
                    v = saved;
                }
            }
        }
        if (!improved) step *= 0.35;
    }

    if (best < point.objective_pu - improve_tol) {
        distflow::OperatingPoint polished = best_sw.point;
        polished.objective_pu = best;
        polished.exactness_residual = best_sw.mismatch;
        polished.relaxation_inexact = false;
        polished.flex_outputs.clear();
        for (const auto& u : net.flex_units) {
            distflow::FlexOutput fo;
            fo.unit_id = u.id;
            fo.active = activation.count(u.id) > 0;
            for (std::size_t i = 0; i < units.size(); ++i)
                if (units[i]->id == u.id) {
                    fo.p_kw = up[i];
                    fo.q_kvar = uq[i];
                }
            fo.x = fo.active ? 1.0 : 0.0;
            polished.flex_outputs.push_back(fo);
        }
        point = polished;
    }
}

/// One boundary probe, dispatched to the fixed-subset solver or the
/// cardinality-constrained branch-and-bound depending on the context.
SolvedPoint solve_probe(const grid::Network& net, const distflow::ActivationContext& act,
                        distflow::ObjectiveDirection dir, const distflow::InterfaceWindow& win,
                        const TraceOptions& opts) {
    SolvedPoint out;
    if (act.mode == distflow::ActivationMode::Relaxed) {
        const int limit =
            act.cardinality_limit.value_or(static_cast<int>(net.flex_units.size()));
        misocp::MisocpOptions mopts;
        mopts.solve = opts.solve;
        mopts.gap_tol = opts.misocp_gap_tol;
        mopts.cache = opts.cache;
        auto r = misocp::solve_misocp(net, dir, limit, win, {}, {}, mopts);
        if (!r) return out;
        out.feasible = true;
        out.point = r->point;
        out.activation = r->activation;
        polish_dispatch(net, out.activation, dir, win, out.point);
        return out;
    }
    auto pt = distflow::solve_opf(net, dir, act, win, opts.solve);
    if (!pt) return out;
    out.feasible = true;
    out.point = *pt;
    if (act.mode == distflow::ActivationMode::FixedSubset) out.activation = act.subset;
    polish_dispatch(net, out.activation, dir, win, out.point);
    return out;
}

BoundaryPoint to_boundary(const grid::Network& net, const SolvedPoint& sp, int slot,
                          std::string side, const TraceOptions& opts) {
    BoundaryPoint bp;
    bp.slot = slot;
    bp.side = std::move(side);
    if (!sp.feasible) {
        bp.empty = true;
        return bp;
    }
    bp.p_kw = sp.point.interface_p;
    bp.q_kvar = sp.point.interface_q;
    bp.inexact = sp.point.exactness_residual > opts.solve.exactness_tol;
    bp.activation = sp.activation;
    bp.oracle_ok = true;
    if (opts.verify_with_sweep) {
        std::vector<double> inj_p(net.buses.size(), 0.0), inj_q(net.buses.size(), 0.0);
        for (std::size_t u = 0; u < net.flex_units.size(); ++u) {
            const int bi = net.bus_index(net.flex_units[u].bus);
            inj_p[bi] += sp.point.flex_outputs[u].p_kw;
            inj_q[bi] += sp.point.flex_outputs[u].q_kvar;
        }
        try {
            auto sw = distflow::sweep_power_flow(net, inj_p, inj_q);
            bp.oracle_gap_kw = std::max(std::abs(sw.point.interface_p - bp.p_kw),
                                        std::abs(sw.point.interface_q - bp.q_kvar));
            bp.oracle_ok = sw.feasible(1e-6) &&
                           bp.oracle_gap_kw <= 1e-5 * net.base_mva * 1000.0;
        } catch (const NumericalError&) {
            bp.oracle_ok = false;
        }
    }
    return bp;
}

} // namespace

std::string to_string(TraceMethod method) {
    switch (method) {
        case TraceMethod::Epsilon: return "epsilon";
        case TraceMethod::Radial: return "radial";
        case TraceMethod::MonteCarloHull: return "monte-carlo-hull";
    }
    return "unknown";
}

geom::Point reference_point(const grid::Network& net, const TraceOptions& opts) {
    auto pt = distflow::solve_opf(net, {0, 0}, distflow::ActivationContext::off(), {}, opts.solve);
    if (!pt) throw InfeasibleError("network admits no feasible operating point with units off");
    return {pt->interface_p, pt->interface_q};
}

Extremes extreme_points(const grid::Network& net, const distflow::ActivationContext& act,
                        const TraceOptions& opts) {
    Extremes out;
    std::array<SolvedPoint, 4> results;
    const std::array<distflow::ObjectiveDirection, 4> dirs = {
        distflow::ObjectiveDirection{0, +1},   // min Q
        distflow::ObjectiveDirection{0, -1},   // max Q
        distflow::ObjectiveDirection{+1, 0},   // min P
        distflow::ObjectiveDirection{-1, 0}};  // max P
    parallel_for(4, opts.workers ? opts.workers : default_workers(), [&](std::size_t i) {
        results[i] = solve_probe(net, act, dirs[i], {}, opts);
    });
    for (const auto& r : results)
        if (!r.feasible)
            throw InfeasibleError("network admits no operating point under this activation");
    out.q_min = results[0].point.interface_q;
    out.q_max = results[1].point.interface_q;
    out.p_min = results[2].point.interface_p;
    out.p_max = results[3].point.interface_p;
    out.q_min_point = results[0].point;
    out.q_max_point = results[1].point;
    out.p_min_point = results[2].point;
    out.p_max_point = results[3].point;
    return out;
}

FlexArea trace_epsilon(const grid::Network& net, const distflow::ActivationContext& act, int k,
                       const TraceOptions& opts) {
    if (k < 1) throw ValidationError("trace_epsilon requires k >= 1");
    FlexArea area;
    area.method = TraceMethod::Epsilon;
    area.k = k;
    area.context = act;
    area.reference_point = reference_point(net, opts);
    const Extremes ext = extreme_points(net, act, opts);

    const double width = (ext.q_max - ext.q_min) / k;
    area.points.assign(2 * k, {});

    // Jobs 0..k-1: max-P per band; k..2k-1: min-P per band. Within a flat
    // optimal face the point is pushed outward in Q (away from the
    // reference) by a second windowed solve, so straight edges keep their
    // corners.
    parallel_for(static_cast<std::size_t>(2 * k),
                 opts.workers ? opts.workers : default_workers(), [&](std::size_t job) {
                     const int i = static_cast<int>(job % k);
                     const bool max_side = job < static_cast<std::size_t>(k);
                     distflow::InterfaceWindow win;
                     win.q_lo = ext.q_min + i * width;
                     win.q_hi = ext.q_min + (i + 1) * width;
                     const distflow::ObjectiveDirection dir =
                         max_side ? distflow::ObjectiveDirection{-1, 0}
                                  : distflow::ObjectiveDirection{+1, 0};
                     SolvedPoint sp = solve_probe(net, act, dir, win, opts);
                     if (sp.feasible) {
                         const double mid = 0.5 * (*win.q_lo + *win.q_hi);
                         const bool outward_up = mid >= area.reference_point.y;
                         // A few solver tolerances in kW.
                         const double slack = 5e-5 * net.base_mva;
                         distflow::InterfaceWindow stage2 = win;
                         if (max_side)
                             stage2.p_lo = sp.point.interface_p - slack;
                         else
                             stage2.p_hi = sp.point.interface_p + slack;
                         SolvedPoint pushed = solve_probe(
                             net, act, {0, outward_up ? -1 : +1}, stage2, opts);
                         if (pushed.feasible) sp = pushed;
                     }
                     area.points[job] =
                         to_boundary(net, sp, i, max_side ? "max" : "min", opts);
                 });

    for (int i = 0; i < k; ++i)
        if (!area.points[i].empty)
            area.boundary.push_back({area.points[i].p_kw, area.points[i].q_kvar});
    for (int i = k - 1; i >= 0; --i)
        if (!area.points[k + i].empty)
            area.boundary.push_back({area.points[k + i].p_kw, area.points[k + i].q_kvar});

    if (area.boundary.empty())
        throw NumericalError("all epsilon slices came back empty, which contradicts the "
                             "existence of the initial operating point");
    return area;
}

FlexArea trace_radial(const grid::Network& net, const distflow::ActivationContext& act, int k,
                      const TraceOptions& opts) {
    if (k < 2) throw ValidationError("trace_radial requires k >= 2");
    if (act.mode == distflow::ActivationMode::Relaxed)
        throw ModelError("radial tracing supports fixed activation contexts only");
    FlexArea area;
    area.method = TraceMethod::Radial;
    area.k = k;
    area.context = act;
    area.reference_point = reference_point(net, opts);
    area.points.assign(2 * k, {});

    parallel_for(static_cast<std::size_t>(2 * k),
                 opts.workers ? opts.workers : default_workers(), [&](std::size_t m) {
                     const double theta = 2.0 * kPi * static_cast<double>(m) / (2.0 * k);
                     auto ray = distflow::solve_ray(net, act, area.reference_point.x,
                                                    area.reference_point.y, theta, opts.solve);
                     SolvedPoint sp;
                     if (ray) {
                         sp.feasible = true;
                         sp.point = ray->point;
                         if (act.mode == distflow::ActivationMode::FixedSubset)
                             sp.activation = act.subset;
                     }
                     area.points[m] = to_boundary(net, sp, static_cast<int>(m), "ray", opts);
                 });

    for (const auto& bp : area.points)
        if (!bp.empty) area.boundary.push_back({bp.p_kw, bp.q_kvar});
    if (area.boundary.empty())
        throw NumericalError("all rays came back empty in radial tracing");
    return area;
}

std::vector<CloudSample> monte_carlo_cloud(const grid::Network& net,
                                           const distflow::ActivationContext& act, int n_samples,
                                           std::uint64_t seed, const TraceOptions& opts) {
    if (n_samples < 1) throw ValidationError("monte_carlo_cloud requires n_samples >= 1");
    std::vector<const grid::FlexUnit*> active;
    for (const auto& u : net.flex_units) {
        const bool on = act.mode == distflow::ActivationMode::Relaxed ||
                        (act.mode == distflow::ActivationMode::FixedSubset &&
                         act.subset.count(u.id) > 0);
        if (on) active.push_back(&u);
    }

    std::vector<CloudSample> samples(n_samples);
    parallel_for(static_cast<std::size_t>(n_samples),
                 opts.workers ? opts.workers : default_workers(), [&](std::size_t i) {
                     std::uint64_t state = splitmix64(seed ^ (0x51ed2701ULL + i));
                     auto unif = [&](double a, double b) {
                         state = splitmix64(state);
                         return a + (b - a) * (static_cast<double>(state >> 11) * 0x1.0p-53);
                     };
                     std::vector<double> inj_p(net.buses.size(), 0.0),
                         inj_q(net.buses.size(), 0.0);
                     for (const grid::FlexUnit* u : active) {
                         const int bi = net.bus_index(u->bus);
                         inj_p[bi] += unif(u->p_min, u->p_max);
                         inj_q[bi] += unif(u->q_min, u->q_max);
                     }
                     CloudSample& s = samples[i];
                     try {
                         auto sw = distflow::sweep_power_flow(net, inj_p, inj_q);
                         s.p_kw = sw.point.interface_p;
                         s.q_kvar = sw.point.interface_q;
                         s.feasible = sw.feasible(1e-6);
                     } catch (const NumericalError&) {
                         s.p_kw = std::numeric_limits<double>::quiet_NaN();
                         s.q_kvar = std::numeric_limits<double>::quiet_NaN();
                         s.feasible = false;
                     }
                 });
    return samples;
}

} // namespace flexmap::tracer
