#pragma once

// Random small SOCP instances with a grid-refinement oracle. The oracle
// never touches the interior-point path: it enumerates boxes directly.

#include <cmath>
#include <random>
#include <vector>

#include "flexmap/conic.hpp"

namespace testsupport {

struct RandomSocp {
    flexmap::conic::Problem problem;
    int dims = 0;                        // leading box variables
    std::vector<double> lo, hi;          // their bounds
    std::vector<std::vector<double>> ineq_a;  // a . x <= rhs over box dims
    std::vector<double> ineq_rhs;
    bool has_cone = false;               // cone on (x0, x1, [x2])
    std::vector<double> objective;       // over box dims
};

inline RandomSocp make_random_socp(unsigned seed) {
    std::mt19937_64 rng(seed);
    auto unif = [&](double a, double b) {
        return a + (b - a) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };

    RandomSocp out;
    out.dims = 2 + static_cast<int>(rng() % 2);
    out.has_cone = out.dims == 3 && (rng() % 2 == 0);

    for (int i = 0; i < out.dims; ++i) {
        double lo, hi;
        if (out.has_cone && i < 2) {
            lo = unif(0.2, 0.6);
            hi = lo + unif(0.8, 1.6);
        } else if (out.has_cone && i == 2) {
            lo = -unif(0.5, 0.9);
            hi = unif(0.5, 0.9);
        } else {
            lo = unif(-1.5, 0.0);
            hi = lo + unif(0.5, 2.5);
        }
        out.lo.push_back(lo);
        out.hi.push_back(hi);
    }

    auto& pr = out.problem;
    for (int i = 0; i < out.dims; ++i) {
        const double c = unif(-1.0, 1.0);
        pr.add_variable(out.lo[i], out.hi[i], c);
        out.objective.push_back(c);
    }
    if (out.has_cone) pr.add_cone({0, 1, {2}});

    const int n_ineq = static_cast<int>(rng() % 3);
    for (int r = 0; r < n_ineq; ++r) {
        std::vector<double> a(out.dims);
        double at_center = 0.0;
        std::vector<flexmap::conic::Problem::Term> terms;
        for (int i = 0; i < out.dims; ++i) {
            a[i] = unif(-1.0, 1.0);
            at_center += a[i] * 0.5 * (out.lo[i] + out.hi[i]);
            terms.push_back({i, a[i]});
        }
        const double rhs = at_center + unif(0.15, 0.8);
        pr.add_leq(std::move(terms), rhs);
        out.ineq_a.push_back(std::move(a));
        out.ineq_rhs.push_back(rhs);
    }
    return out;
}

inline bool grid_feasible(const RandomSocp& s, const std::vector<double>& x) {
    for (std::size_t r = 0; r < s.ineq_a.size(); ++r) {
        double lhs = 0.0;
        for (int i = 0; i < s.dims; ++i) lhs += s.ineq_a[r][i] * x[i];
        if (lhs > s.ineq_rhs[r]) return false;
    }
    if (s.has_cone && x[2] * x[2] > 2.0 * x[0] * x[1]) return false;
    return true;
}

/// Dense brute-force grid refinement: grids shrinking boxes around the
/// best feasible candidates. Several candidates are tracked per round so
/// thin feasible wedges are not lost while zooming.
inline double grid_refine_oracle(const RandomSocp& s) {
    const int pts = 33;
    const int keep = 6;

    struct Window {
        std::vector<double> lo, hi;
    };
    struct Candidate {
        double obj;
        std::vector<double> x;
    };

    std::vector<Window> windows = {{s.lo, s.hi}};
    double best = std::numeric_limits<double>::infinity();

    for (int round = 0; round < 9; ++round) {
        std::vector<Candidate> cands;
        for (const Window& win : windows) {
            std::vector<int> idx(s.dims, 0);
            std::vector<double> x(s.dims);
            bool done = false;
            while (!done) {
                bool in_box = true;
                for (int i = 0; i < s.dims; ++i) {
                    x[i] = win.lo[i] + (win.hi[i] - win.lo[i]) * idx[i] / (pts - 1);
                    if (x[i] < s.lo[i] - 1e-15 || x[i] > s.hi[i] + 1e-15) in_box = false;
                }
                if (in_box && grid_feasible(s, x)) {
                    double obj = 0.0;
                    for (int i = 0; i < s.dims; ++i) obj += s.objective[i] * x[i];
                    cands.push_back({obj, x});
                }
                for (int i = 0;; ++i) {
                    if (i == s.dims) {
                        done = true;
                        break;
                    }
                    if (++idx[i] < pts) break;
                    idx[i] = 0;
                }
            }
        }
        if (cands.empty()) break;
        std::sort(cands.begin(), cands.end(),
                  [](const Candidate& a, const Candidate& b) { return a.obj < b.obj; });
        best = std::min(best, cands.front().obj);

        // Keep the best candidates that are spatially distinct, so separate
        // basins stay covered.
        std::vector<Candidate> kept;
        for (const Candidate& c : cands) {
            bool distinct = true;
            for (const Candidate& k : kept) {
                double dist = 0.0;
                for (int i = 0; i < s.dims; ++i) dist = std::max(dist, std::abs(c.x[i] - k.x[i]));
                const double cell = (windows.front().hi[0] - windows.front().lo[0]) / (pts - 1);
                if (dist < 2.0 * cell) distinct = false;
            }
            if (distinct) kept.push_back(c);
            if (kept.size() >= keep) break;
        }

        std::vector<Window> next;
        for (const Candidate& c : kept) {
            Window win;
            for (int i = 0; i < s.dims; ++i) {
                const double cell =
                    3.0 * (windows.front().hi[i] - windows.front().lo[i]) / (pts - 1);
                win.lo.push_back(std::max(s.lo[i], c.x[i] - cell));
                win.hi.push_back(std::min(s.hi[i], c.x[i] + cell));
            }
            next.push_back(std::move(win));
        }
        windows = std::move(next);
    }
    return best;
}

} // namespace testsupport
