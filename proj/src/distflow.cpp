#include "flexmap/distflow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "flexmap/errors.hpp"

namespace flexmap::distflow {

namespace {

// ---------------------------------------------------------------------------
// Compiled radial topology in per-unit quantities.
// ---------------------------------------------------------------------------

struct Compiled {
    const grid::Network* net = nullptr;
    int n = 0;
    int ref = 0;                         // bus position of the reference
    std::vector<int> order;              // BFS bus positions, root first
    std::vector<std::vector<int>> child_branches;  // by bus position
    std::vector<int> up_bus, down_bus;   // by branch position (-1 if open)
    std::vector<double> r_pu, x_pu, smax_pu;
    std::vector<double> dp_pu, dq_pu;    // demands by bus position
    std::vector<double> wmin, wmax;      // squared voltage bounds
    std::vector<std::vector<int>> units_at;  // unit indices by bus position
    std::vector<std::vector<int>> gens_at;   // generator indices by bus position
    double wref = 1.0;
};

Compiled compile(const grid::Network& net) {
    Compiled c;
    c.net = &net;
    c.n = static_cast<int>(net.buses.size());
    c.ref = net.bus_index(net.reference_bus());
    c.wref = net.ref_voltage * net.ref_voltage;

    c.child_branches.assign(c.n, {});
    c.up_bus.assign(net.branches.size(), -1);
    c.down_bus.assign(net.branches.size(), -1);
    c.r_pu.assign(net.branches.size(), 0.0);
    c.x_pu.assign(net.branches.size(), 0.0);
    c.smax_pu.assign(net.branches.size(), 0.0);
    c.dp_pu.assign(c.n, 0.0);
    c.dq_pu.assign(c.n, 0.0);
    c.wmin.assign(c.n, 0.0);
    c.wmax.assign(c.n, 0.0);
    c.units_at.assign(c.n, {});
    c.gens_at.assign(c.n, {});

    for (int i = 0; i < c.n; ++i) {
        const grid::Bus& b = net.buses[i];
        c.dp_pu[i] = net.kw_to_pu(b.demand_p);
        c.dq_pu[i] = net.kw_to_pu(b.demand_q);
        c.wmin[i] = b.v_min * b.v_min;
        c.wmax[i] = b.v_max * b.v_max;
    }
    for (std::size_t u = 0; u < net.flex_units.size(); ++u)
        c.units_at[net.bus_index(net.flex_units[u].bus)].push_back(static_cast<int>(u));
    for (std::size_t g = 0; g < net.generators.size(); ++g)
        c.gens_at[net.bus_index(net.generators[g].bus)].push_back(static_cast<int>(g));

    std::vector<std::vector<std::pair<int, int>>> adj(c.n);
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        const grid::Branch& br = net.branches[b];
        c.r_pu[b] = net.ohm_to_pu(br.r);
        c.x_pu[b] = net.ohm_to_pu(br.x);
        c.smax_pu[b] = net.kw_to_pu(br.s_max);
        if (br.normally_open) continue;
        const int i = net.bus_index(br.from_bus);
        const int j = net.bus_index(br.to_bus);
        adj[i].push_back({static_cast<int>(b), j});
        adj[j].push_back({static_cast<int>(b), i});
    }
    std::vector<char> seen(c.n, 0);
    std::queue<int> q;
    q.push(c.ref);
    seen[c.ref] = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        c.order.push_back(u);
        for (auto [b, w] : adj[u])
            if (!seen[w]) {
                seen[w] = 1;
                c.up_bus[b] = u;
                c.down_bus[b] = w;
                c.child_branches[u].push_back(b);
                q.push(w);
            }
    }
    if (static_cast<int>(c.order.size()) != c.n)
        throw ModelError("network is not connected over in-service branches");
    if (c.child_branches[c.ref].empty())
        throw ModelError("reference bus has no in-service branch");
    return c;
}

// ---------------------------------------------------------------------------
// Program assembly
// ---------------------------------------------------------------------------

struct RaySpec {
    double ref_p_pu = 0.0, ref_q_pu = 0.0;
    double cos_t = 1.0, sin_t = 0.0;
};

struct BuildExtras {
    bool loss_proxy_objective = false;
    std::optional<double> objective_cap_pu;  // on the minimization objective
    std::set<int> forced_on, forced_off;     // relaxed mode
    std::optional<RaySpec> ray;              // objective becomes min -t
};

// Variable layout of one assembled program, for solution extraction.
struct Layout {
    conic::Problem program;
    Compiled topo;
    std::vector<int> w_of_bus;             // bus position -> var
    std::vector<int> p_of, q_of, l_of;     // branch position -> var (-1 if open)
    std::vector<int> fp_of, fq_of, x_of;   // unit index -> var (-1 when absent)
    std::vector<int> zp_of, zq_of;         // unit index -> contribution var
    std::vector<int> gp_of, gq_of;         // generator index -> var
    ObjectiveDirection dir;
    ActivationMode mode = ActivationMode::Off;
    int ray_t = -1;
};

Layout assemble(const grid::Network& net, ObjectiveDirection dir, const ActivationContext& act,
                const InterfaceWindow& win, const BuildExtras& extras) {
    Layout lay;
    lay.topo = compile(net);
    lay.dir = dir;
    lay.mode = act.mode;
    const Compiled& t = lay.topo;
    conic::Problem& pr = lay.program;
    const auto inf = conic::kInf;

    if (act.mode == ActivationMode::FixedSubset)
        for (int id : act.subset)
            if (!net.find_unit(id))
                throw ValidationError("activation subset references unknown flex unit " +
                                      std::to_string(id));

    // Squared voltages; the reference magnitude is pinned.
    lay.w_of_bus.resize(t.n);
    for (int i = 0; i < t.n; ++i)
        lay.w_of_bus[i] = i == t.ref ? pr.add_variable(t.wref, t.wref)
                                     : pr.add_variable(t.wmin[i], t.wmax[i]);

    const std::size_t nb = net.branches.size();
    lay.p_of.assign(nb, -1);
    lay.q_of.assign(nb, -1);
    lay.l_of.assign(nb, -1);
    for (std::size_t b = 0; b < nb; ++b) {
        if (t.down_bus[b] < 0) continue;
        lay.p_of[b] = pr.add_variable(-inf, inf);
        lay.q_of[b] = pr.add_variable(-inf, inf);
        // Valid cap: l = (p^2+q^2)/w <= smax^2 / wmin at any physical point.
        const double lcap =
            t.smax_pu[b] * t.smax_pu[b] / std::max(t.wmin[t.up_bus[b]], 1e-6);
        lay.l_of[b] = pr.add_variable(0.0, lcap);
    }

    // Flexible units.
    const std::size_t nu = net.flex_units.size();
    lay.fp_of.assign(nu, -1);
    lay.fq_of.assign(nu, -1);
    lay.x_of.assign(nu, -1);
    lay.zp_of.assign(nu, -1);
    lay.zq_of.assign(nu, -1);
    for (std::size_t u = 0; u < nu; ++u) {
        const grid::FlexUnit& unit = net.flex_units[u];
        const double plo = net.kw_to_pu(unit.p_min), phi = net.kw_to_pu(unit.p_max);
        const double qlo = net.kw_to_pu(unit.q_min), qhi = net.kw_to_pu(unit.q_max);
        switch (act.mode) {
            case ActivationMode::Off:
                lay.fp_of[u] = pr.add_variable(0.0, 0.0);
                lay.fq_of[u] = pr.add_variable(0.0, 0.0);
                break;
            case ActivationMode::FixedSubset: {
                const bool active = act.subset.count(unit.id) > 0;
                lay.fp_of[u] = active ? pr.add_variable(plo, phi) : pr.add_variable(0.0, 0.0);
                lay.fq_of[u] = active ? pr.add_variable(qlo, qhi) : pr.add_variable(0.0, 0.0);
                break;
            }
            case ActivationMode::Relaxed: {
                lay.fp_of[u] = pr.add_variable(plo, phi);
                lay.fq_of[u] = pr.add_variable(qlo, qhi);
                double xlo = 0.0, xhi = 1.0;
                if (extras.forced_on.count(unit.id)) xlo = 1.0;
                if (extras.forced_off.count(unit.id)) xhi = 0.0;
                if (xlo > xhi)
                    throw ValidationError("flex unit " + std::to_string(unit.id) +
                                          " forced both on and off");
                lay.x_of[u] = pr.add_variable(xlo, xhi);
                lay.zp_of[u] = pr.add_variable(std::min(plo, 0.0), std::max(phi, 0.0));
                lay.zq_of[u] = pr.add_variable(std::min(qlo, 0.0), std::max(qhi, 0.0));
                // Exact box-times-binary linearization: z = x * f.
                const int x = lay.x_of[u];
                for (auto [z, f, lo, hi] :
                     {std::tuple{lay.zp_of[u], lay.fp_of[u], plo, phi},
                      std::tuple{lay.zq_of[u], lay.fq_of[u], qlo, qhi}}) {
                    pr.add_leq({{z, 1.0}, {x, -hi}}, 0.0);
                    pr.add_leq({{x, lo}, {z, -1.0}}, 0.0);
                    pr.add_leq({{z, 1.0}, {f, -1.0}, {x, -lo}}, -lo);
                    pr.add_leq({{f, 1.0}, {x, hi}, {z, -1.0}}, hi);
                }
                break;
            }
        }
    }
    if (act.mode == ActivationMode::Relaxed && act.cardinality_limit) {
        std::vector<conic::Problem::Term> row;
        for (std::size_t u = 0; u < nu; ++u) row.push_back({lay.x_of[u], 1.0});
        pr.add_leq(std::move(row), static_cast<double>(*act.cardinality_limit));
    }

    // Generators.
    lay.gp_of.assign(net.generators.size(), -1);
    lay.gq_of.assign(net.generators.size(), -1);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const grid::Generator& gen = net.generators[g];
        lay.gp_of[g] = pr.add_variable(net.kw_to_pu(gen.p_min), net.kw_to_pu(gen.p_max));
        lay.gq_of[g] = pr.add_variable(net.kw_to_pu(gen.q_min), net.kw_to_pu(gen.q_max));
    }

    // Per-branch rows: balances, voltage relation, flow-current cone,
    // thermal cone (on copies, keeping each variable in one cone slot).
    for (std::size_t b = 0; b < nb; ++b) {
        if (t.down_bus[b] < 0) continue;
        const int j = t.down_bus[b];
        const int i = t.up_bus[b];

        std::vector<conic::Problem::Term> prow{{lay.p_of[b], 1.0}, {lay.l_of[b], -t.r_pu[b]}};
        std::vector<conic::Problem::Term> qrow{{lay.q_of[b], 1.0}, {lay.l_of[b], -t.x_pu[b]}};
        for (int cb : t.child_branches[j]) {
            prow.push_back({lay.p_of[cb], -1.0});
            qrow.push_back({lay.q_of[cb], -1.0});
        }
        for (int u : t.units_at[j]) {
            prow.push_back({lay.mode == ActivationMode::Relaxed ? lay.zp_of[u] : lay.fp_of[u], 1.0});
            qrow.push_back({lay.mode == ActivationMode::Relaxed ? lay.zq_of[u] : lay.fq_of[u], 1.0});
        }
        for (int g : t.gens_at[j]) {
            prow.push_back({lay.gp_of[g], 1.0});
            qrow.push_back({lay.gq_of[g], 1.0});
        }
        pr.add_equality(std::move(prow), t.dp_pu[j]);
        pr.add_equality(std::move(qrow), t.dq_pu[j]);

        const double z2 = t.r_pu[b] * t.r_pu[b] + t.x_pu[b] * t.x_pu[b];
        pr.add_equality({{lay.w_of_bus[j], 1.0},
                         {lay.w_of_bus[i], -1.0},
                         {lay.l_of[b], -z2},
                         {lay.p_of[b], 2.0 * t.r_pu[b]},
                         {lay.q_of[b], 2.0 * t.x_pu[b]}},
                        0.0);

        // 2 (w_i / 2) l >= p^2 + q^2
        const int a = pr.add_variable(0.0, conic::kInf);
        pr.add_equality({{a, 1.0}, {lay.w_of_bus[i], -0.5}}, 0.0);
        pr.add_cone({a, lay.l_of[b], {lay.p_of[b], lay.q_of[b]}});

        // p^2 + q^2 <= smax^2 as a cone with fixed radius.
        const double s2 = t.smax_pu[b] * t.smax_pu[b];
        const int su = pr.add_variable(s2 / 2.0, s2 / 2.0);
        const int sv = pr.add_variable(1.0, 1.0);
        const int pd = pr.add_variable(-inf, inf);
        const int qd = pr.add_variable(-inf, inf);
        pr.add_equality({{pd, 1.0}, {lay.p_of[b], -1.0}}, 0.0);
        pr.add_equality({{qd, 1.0}, {lay.q_of[b], -1.0}}, 0.0);
        pr.add_cone({su, sv, {pd, qd}});
    }

    // Interface expressions over the branches at the reference bus. The
    // reference bus's own demand enters as a constant.
    std::vector<conic::Problem::Term> pref, qref;
    for (int b : t.child_branches[t.ref]) {
        pref.push_back({lay.p_of[b], 1.0});
        qref.push_back({lay.q_of[b], 1.0});
    }
    const double pconst = t.dp_pu[t.ref];
    const double qconst = t.dq_pu[t.ref];

    if (win.p_lo || win.p_hi) {
        const double lo = win.p_lo ? net.kw_to_pu(*win.p_lo) - pconst : -inf;
        const double hi = win.p_hi ? net.kw_to_pu(*win.p_hi) - pconst : inf;
        pr.add_range(std::vector<conic::Problem::Term>(pref), lo, hi);
    }
    if (win.q_lo || win.q_hi) {
        const double lo = win.q_lo ? net.kw_to_pu(*win.q_lo) - qconst : -inf;
        const double hi = win.q_hi ? net.kw_to_pu(*win.q_hi) - qconst : inf;
        pr.add_range(std::vector<conic::Problem::Term>(qref), lo, hi);
    }

    if (extras.ray) {
        // (P, Q) pinned to reference + t (cos, sin); the objective is -t.
        lay.ray_t = pr.add_variable(0.0, conic::kInf);
        std::vector<conic::Problem::Term> prow(pref), qrow(qref);
        prow.push_back({lay.ray_t, -extras.ray->cos_t});
        qrow.push_back({lay.ray_t, -extras.ray->sin_t});
        pr.add_equality(std::move(prow), extras.ray->ref_p_pu - pconst);
        pr.add_equality(std::move(qrow), extras.ray->ref_q_pu - qconst);
    }

    if (extras.objective_cap_pu) {
        std::vector<conic::Problem::Term> row;
        if (extras.ray) {
            row.push_back({lay.ray_t, -1.0});
            pr.add_leq(std::move(row), *extras.objective_cap_pu);
        } else {
            for (const auto& term : pref) row.push_back({term.var, static_cast<double>(dir.pi_p)});
            for (const auto& term : qref) row.push_back({term.var, static_cast<double>(dir.pi_q)});
            const double cap = *extras.objective_cap_pu - dir.pi_p * pconst - dir.pi_q * qconst;
            if (!row.empty()) pr.add_leq(std::move(row), cap);
        }
    }

    if (extras.loss_proxy_objective) {
        for (std::size_t b = 0; b < nb; ++b)
            if (lay.l_of[b] >= 0) pr.set_objective(lay.l_of[b], t.r_pu[b] + t.x_pu[b]);
    } else if (extras.ray) {
        pr.set_objective(lay.ray_t, -1.0);
    } else {
        for (const auto& term : pref) pr.set_objective(term.var, static_cast<double>(dir.pi_p));
        for (const auto& term : qref) pr.set_objective(term.var, static_cast<double>(dir.pi_q));
    }

    pr.validate();
    return lay;
}

OperatingPoint extract(const Layout& lay, const conic::Solution& sol) {
    const Compiled& t = lay.topo;
    const grid::Network& net = *t.net;
    OperatingPoint pt;
    pt.voltages.resize(t.n);
    for (int i = 0; i < t.n; ++i)
        pt.voltages[i] = std::sqrt(std::max(0.0, sol.primal[lay.w_of_bus[i]]));

    pt.flows.assign(net.branches.size(), {});
    double loss_p = 0.0, loss_q = 0.0, residual = 0.0;
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        if (lay.p_of[b] < 0) continue;
        BranchFlow f;
        f.p = sol.primal[lay.p_of[b]];
        f.q = sol.primal[lay.q_of[b]];
        f.l = sol.primal[lay.l_of[b]];
        const double w_up = sol.primal[lay.w_of_bus[t.up_bus[b]]];
        if (t.r_pu[b] == 0.0 && t.x_pu[b] == 0.0 && w_up > 0.0) {
            // Zero-impedance branch: l is decoupled from every other row, so
            // report its physical value on the cone boundary.
            f.l = (f.p * f.p + f.q * f.q) / w_up;
        }
        residual = std::max(residual, std::abs(f.p * f.p + f.q * f.q - f.l * w_up));
        loss_p += t.r_pu[b] * f.l;
        loss_q += t.x_pu[b] * f.l;
        pt.flows[b] = f;
    }
    pt.exactness_residual = residual;
    pt.losses_p = net.pu_to_kw(loss_p);
    pt.losses_q = net.pu_to_kw(loss_q);

    double pref = t.dp_pu[t.ref], qref = t.dq_pu[t.ref];
    for (int b : t.child_branches[t.ref]) {
        pref += sol.primal[lay.p_of[b]];
        qref += sol.primal[lay.q_of[b]];
    }
    pt.interface_p = net.pu_to_kw(pref);
    pt.interface_q = net.pu_to_kw(qref);
    pt.objective_pu = lay.ray_t >= 0 ? -sol.primal[lay.ray_t]
                                     : lay.dir.pi_p * pref + lay.dir.pi_q * qref;

    pt.flex_outputs.resize(net.flex_units.size());
    for (std::size_t u = 0; u < net.flex_units.size(); ++u) {
        FlexOutput& out = pt.flex_outputs[u];
        out.unit_id = net.flex_units[u].id;
        if (lay.mode == ActivationMode::Relaxed) {
            out.x = sol.primal[lay.x_of[u]];
            out.active = out.x > 0.5;
            out.p_kw = net.pu_to_kw(sol.primal[lay.zp_of[u]]);
            out.q_kvar = net.pu_to_kw(sol.primal[lay.zq_of[u]]);
        } else {
            out.p_kw = net.pu_to_kw(sol.primal[lay.fp_of[u]]);
            out.q_kvar = net.pu_to_kw(sol.primal[lay.fq_of[u]]);
            const bool inactive_var =
                lay.program.lower()[lay.fp_of[u]] == 0.0 && lay.program.upper()[lay.fp_of[u]] == 0.0 &&
                lay.program.lower()[lay.fq_of[u]] == 0.0 && lay.program.upper()[lay.fq_of[u]] == 0.0;
            out.active = !inactive_var;
            out.x = out.active ? 1.0 : 0.0;
        }
    }
    return pt;
}

} // namespace

ActivationContext ActivationContext::all_units(const grid::Network& net) {
    std::set<int> ids;
    for (const auto& u : net.flex_units) ids.insert(u.id);
    return fixed(std::move(ids));
}

conic::Problem build_opf(const grid::Network& net, ObjectiveDirection dir,
                         const ActivationContext& act, const InterfaceWindow& win) {
    return assemble(net, dir, act, win, {}).program;
}

// ---------------------------------------------------------------------------
// Exactness-certified solving
// ---------------------------------------------------------------------------

namespace {

struct ProbeResult {
    bool feasible = false;
    OperatingPoint point;
};

ProbeResult run_probe(const grid::Network& net, ObjectiveDirection dir,
                      const ActivationContext& act, const InterfaceWindow& win,
                      const BuildExtras& base, std::optional<double> cap_pu,
                      const SolveOptions& opts) {
    BuildExtras extras = base;
    extras.loss_proxy_objective = true;
    extras.objective_cap_pu = cap_pu;
    Layout lay = assemble(net, dir, act, win, extras);
    conic::Solution sol = conic::solve(lay.program, opts.tol, opts.max_iter);
    ProbeResult out;
    if (sol.status != conic::SolveStatus::Optimal) return out;  // infeasible or stalled
    out.feasible = true;
    out.point = extract(lay, sol);
    if (lay.ray_t >= 0) out.point.objective_pu = -sol.primal[lay.ray_t];
    return out;
}

// Interval arithmetic floor on the minimization objective: interface P and
// Q are bracketed by total demand, the aggregate unit capability and the
// branch-current caps. Sound for any activation and window.
double objective_floor(const grid::Network& net, const Compiled& t, ObjectiveDirection dir,
                       const ActivationContext& act, const BuildExtras& extras) {
    double dsum_p = 0.0, dsum_q = 0.0, max_loss_p = 0.0, max_loss_q = 0.0;
    for (int i = 0; i < t.n; ++i) {
        dsum_p += t.dp_pu[i];
        dsum_q += t.dq_pu[i];
    }
    for (std::size_t b = 0; b < net.branches.size(); ++b) {
        if (t.down_bus[b] < 0) continue;
        const double lcap = t.smax_pu[b] * t.smax_pu[b] / std::max(t.wmin[t.up_bus[b]], 1e-6);
        max_loss_p += t.r_pu[b] * lcap;
        max_loss_q += t.x_pu[b] * lcap;
    }
    double inj_p = 0.0, absorb_p = 0.0, inj_q = 0.0, absorb_q = 0.0;
    for (const auto& u : net.flex_units) {
        const bool maybe_on = act.mode != ActivationMode::Off &&
                              (act.mode == ActivationMode::Relaxed || act.subset.count(u.id));
        if (!maybe_on) continue;
        inj_p += std::max(0.0, net.kw_to_pu(u.p_max));
        absorb_p += std::max(0.0, -net.kw_to_pu(u.p_min));
        inj_q += std::max(0.0, net.kw_to_pu(u.q_max));
        absorb_q += std::max(0.0, -net.kw_to_pu(u.q_min));
    }
    for (const auto& g : net.generators) {
        inj_p += std::max(0.0, net.kw_to_pu(g.p_max));
        absorb_p += std::max(0.0, -net.kw_to_pu(g.p_min));
        inj_q += std::max(0.0, net.kw_to_pu(g.q_max));
        absorb_q += std::max(0.0, -net.kw_to_pu(g.q_min));
    }
    const double p_lo = dsum_p - inj_p, p_hi = dsum_p + absorb_p + max_loss_p;
    const double q_lo = dsum_q - inj_q, q_hi = dsum_q + absorb_q + max_loss_q;
    if (extras.ray) {
        const double reach = std::hypot(p_hi - p_lo, q_hi - q_lo) +
                             std::hypot(extras.ray->ref_p_pu, extras.ray->ref_q_pu);
        return -reach;  // objective is -t
    }
    return dir.pi_p * (dir.pi_p >= 0 ? p_lo : p_hi) + dir.pi_q * (dir.pi_q >= 0 ? q_lo : q_hi);
}

// Direct conic solve; if the relaxation is loose in this direction,
// certify the true optimum by bisecting the objective level against
// loss-minimizing probes (a cone-tight probe proves attainability).
std::optional<OperatingPoint> certified_minimize(const grid::Network& net,
                                                 ObjectiveDirection dir,
                                                 const ActivationContext& act,
                                                 const InterfaceWindow& win,
                                                 const BuildExtras& base,
                                                 const SolveOptions& opts) {
    Layout lay = assemble(net, dir, act, win, base);
    conic::Solution sol = conic::solve(lay.program, opts.tol, opts.max_iter);
    if (sol.status == conic::SolveStatus::Infeasible) return std::nullopt;
    if (sol.status == conic::SolveStatus::Unbounded)
        throw NumericalError("DistFlow relaxation unbounded; data out of range");

    double bound;  // sound lower bound for the bisection
    if (sol.status == conic::SolveStatus::Optimal) {
        OperatingPoint relaxed_pt = extract(lay, sol);
        if (relaxed_pt.exactness_residual <= opts.exactness_tol) return relaxed_pt;
        bound = relaxed_pt.objective_pu;
    } else {
        // Stalled solve: fall back to the interval-arithmetic floor.
        bound = objective_floor(net, lay.topo, dir, act, base);
    }

    ProbeResult anchor = run_probe(net, dir, act, win, base, std::nullopt, opts);
    if (!anchor.feasible || anchor.point.exactness_residual > opts.exactness_tol)
        return std::nullopt;  // the window itself is physically unreachable

    OperatingPoint best = anchor.point;
    double attainable = best.objective_pu;

    for (int iter = 0; iter < 64 && attainable - bound > opts.bisection_tol; ++iter) {
        const double mid = 0.5 * (attainable + bound);
        ProbeResult probe = run_probe(net, dir, act, win, base, mid, opts);
        if (probe.feasible && probe.point.exactness_residual <= opts.exactness_tol &&
            probe.point.objective_pu <= attainable) {
            best = probe.point;
            attainable = probe.point.objective_pu;
        } else {
            bound = mid;
        }
    }
    best.relaxation_inexact = best.exactness_residual > opts.exactness_tol;
    return best;
}

} // namespace

std::optional<OperatingPoint> solve_opf(const grid::Network& net, ObjectiveDirection dir,
                                        const ActivationContext& act, const InterfaceWindow& win,
                                        const SolveOptions& opts) {
    if (act.mode == ActivationMode::Relaxed) {
        RelaxationResult rr =
            solve_relaxation(net, dir, act.cardinality_limit, win, {}, {}, opts);
        if (rr.status == conic::SolveStatus::Infeasible) return std::nullopt;
        if (rr.status != conic::SolveStatus::Optimal)
            throw NumericalError("relaxed OPF did not converge");
        return rr.point;
    }

    // Pure feasibility probes report the loss-minimal point of the window.
    if (dir.pi_p == 0 && dir.pi_q == 0) {
        ProbeResult anchor = run_probe(net, dir, act, win, {}, std::nullopt, opts);
        if (!anchor.feasible || anchor.point.exactness_residual > opts.exactness_tol)
            return std::nullopt;
        return anchor.point;
    }

    return certified_minimize(net, dir, act, win, {}, opts);
}

std::optional<RayResult> solve_ray(const grid::Network& net, const ActivationContext& act,
                                   double ref_p_kw, double ref_q_kvar, double theta,
                                   const SolveOptions& opts) {
    if (act.mode == ActivationMode::Relaxed)
        throw ModelError("ray tracing supports fixed activation contexts only");
    BuildExtras base;
    base.ray = RaySpec{net.kw_to_pu(ref_p_kw), net.kw_to_pu(ref_q_kvar), std::cos(theta),
                       std::sin(theta)};
    auto pt = certified_minimize(net, {0, 0}, act, {}, base, opts);
    if (!pt) return std::nullopt;
    RayResult out;
    out.t_kw = net.pu_to_kw(-pt->objective_pu);
    out.point = *pt;
    return out;
}

RelaxationResult solve_relaxation(const grid::Network& net, ObjectiveDirection dir,
                                  std::optional<int> cardinality_limit,
                                  const InterfaceWindow& win, const std::set<int>& forced_on,
                                  const std::set<int>& forced_off, const SolveOptions& opts) {
    ActivationContext act = ActivationContext::relaxed(cardinality_limit);
    BuildExtras extras;
    extras.forced_on = forced_on;
    extras.forced_off = forced_off;
    Layout lay = assemble(net, dir, act, win, extras);
    conic::Solution sol = conic::solve(lay.program, opts.tol, opts.max_iter);

    RelaxationResult out;
    out.status = sol.status;
    if (sol.status != conic::SolveStatus::Optimal) {
        out.bound_pu = sol.status == conic::SolveStatus::Infeasible
                           ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
        return out;
    }
    out.point = extract(lay, sol);
    out.point.relaxation_inexact = out.point.exactness_residual > opts.exactness_tol;
    out.bound_pu = out.point.objective_pu;
    out.integral = true;
    for (const auto& fo : out.point.flex_outputs) {
        out.x_values.push_back({fo.unit_id, fo.x});
        if (std::abs(fo.x - std::round(fo.x)) > 1e-6) out.integral = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweep power flow (independent oracle)
// ---------------------------------------------------------------------------

SweepResult sweep_power_flow(const grid::Network& net, std::vector<double> inj_p_kw,
                             std::vector<double> inj_q_kvar) {
    const Compiled t = compile(net);
    if (inj_p_kw.empty()) inj_p_kw.assign(t.n, 0.0);
    if (inj_q_kvar.empty()) inj_q_kvar.assign(t.n, 0.0);
    if (static_cast<int>(inj_p_kw.size()) != t.n || static_cast<int>(inj_q_kvar.size()) != t.n)
        throw ValidationError("injection vectors must have one entry per bus");

    std::vector<double> wd_p(t.n), wd_q(t.n);
    for (int i = 0; i < t.n; ++i) {
        wd_p[i] = t.dp_pu[i] - net.kw_to_pu(inj_p_kw[i]);
        wd_q[i] = t.dq_pu[i] - net.kw_to_pu(inj_q_kvar[i]);
    }

    const std::size_t nb = net.branches.size();
    std::vector<double> w(t.n, t.wref), l(nb, 0.0), fp(nb, 0.0), fq(nb, 0.0);

    SweepResult out;
    bool converged = false;
    for (int iter = 1; iter <= 100; ++iter) {
        out.iterations = iter;
        for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
            const int u = *it;
            for (int b : t.child_branches[u]) {
                const int child = t.down_bus[b];
                double p = wd_p[child] + t.r_pu[b] * l[b];
                double q = wd_q[child] + t.x_pu[b] * l[b];
                for (int cb : t.child_branches[child]) {
                    p += fp[cb];
                    q += fq[cb];
                }
                fp[b] = p;
                fq[b] = q;
            }
        }
        double delta = 0.0;
        for (int u : t.order) {
            for (int b : t.child_branches[u]) {
                const int child = t.down_bus[b];
                const double z2 = t.r_pu[b] * t.r_pu[b] + t.x_pu[b] * t.x_pu[b];
                const double wn = w[u] + z2 * l[b] - 2.0 * (t.r_pu[b] * fp[b] + t.x_pu[b] * fq[b]);
                if (wn <= 1e-4)
                    throw NumericalError("sweep power flow diverged (voltage collapse)");
                delta = std::max(delta, std::abs(wn - w[child]));
                w[child] = wn;
                const double ln = (fp[b] * fp[b] + fq[b] * fq[b]) / w[u];
                delta = std::max(delta, std::abs(ln - l[b]));
                l[b] = ln;
            }
        }
        if (delta < 1e-13) {
            converged = true;
            break;
        }
    }

    // Mismatch over the four DistFlow relations, recomputed from the state.
    double mismatch = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        if (t.down_bus[b] < 0) continue;
        const int j = t.down_bus[b];
        const int i = t.up_bus[b];
        double p = wd_p[j] + t.r_pu[b] * l[b];
        double q = wd_q[j] + t.x_pu[b] * l[b];
        for (int cb : t.child_branches[j]) {
            p += fp[cb];
            q += fq[cb];
        }
        mismatch = std::max({mismatch, std::abs(p - fp[b]), std::abs(q - fq[b])});
        const double z2 = t.r_pu[b] * t.r_pu[b] + t.x_pu[b] * t.x_pu[b];
        mismatch = std::max(mismatch, std::abs(w[j] - w[i] - z2 * l[b] +
                                               2.0 * (t.r_pu[b] * fp[b] + t.x_pu[b] * fq[b])));
        mismatch = std::max(mismatch, std::abs(fp[b] * fp[b] + fq[b] * fq[b] - l[b] * w[i]));
    }
    out.mismatch = mismatch;
    if (!converged || mismatch > 1e-10)
        throw NumericalError("sweep power flow did not reach 1e-10 mismatch in 100 iterations");

    OperatingPoint& pt = out.point;
    pt.voltages.resize(t.n);
    for (int i = 0; i < t.n; ++i) pt.voltages[i] = std::sqrt(w[i]);
    pt.flows.assign(nb, {});
    double loss_p = 0.0, loss_q = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        if (t.down_bus[b] < 0) continue;
        pt.flows[b] = {fp[b], fq[b], l[b]};
        loss_p += t.r_pu[b] * l[b];
        loss_q += t.x_pu[b] * l[b];
        const double s = std::hypot(fp[b], fq[b]);
        out.thermal_violation = std::max(out.thermal_violation, s - t.smax_pu[b]);
    }
    for (int i = 0; i < t.n; ++i) {
        const double v = pt.voltages[i];
        out.voltage_violation = std::max(
            {out.voltage_violation, net.buses[i].v_min - v, v - net.buses[i].v_max});
    }
    out.voltage_violation = std::max(0.0, out.voltage_violation);
    out.thermal_violation = std::max(0.0, out.thermal_violation);
    pt.losses_p = net.pu_to_kw(loss_p);
    pt.losses_q = net.pu_to_kw(loss_q);
    double pref = t.dp_pu[t.ref], qref = t.dq_pu[t.ref];
    for (int b : t.child_branches[t.ref]) {
        pref += fp[b];
        qref += fq[b];
    }
    pt.interface_p = net.pu_to_kw(pref);
    pt.interface_q = net.pu_to_kw(qref);
    pt.exactness_residual = mismatch;

    pt.flex_outputs.resize(net.flex_units.size());
    for (std::size_t u = 0; u < net.flex_units.size(); ++u) {
        const int bi = net.bus_index(net.flex_units[u].bus);
        pt.flex_outputs[u].unit_id = net.flex_units[u].id;
        pt.flex_outputs[u].p_kw = inj_p_kw[bi];
        pt.flex_outputs[u].q_kvar = inj_q_kvar[bi];
        pt.flex_outputs[u].active = inj_p_kw[bi] != 0.0 || inj_q_kvar[bi] != 0.0;
    }
    return out;
}

double objective_pu(const grid::Network& net, ObjectiveDirection dir, const OperatingPoint& pt) {
    return dir.pi_p * net.kw_to_pu(pt.interface_p) + dir.pi_q * net.kw_to_pu(pt.interface_q);
}

} // namespace flexmap::distflow
