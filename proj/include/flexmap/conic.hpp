#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace flexmap::conic {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rotated second-order cone over variable slots:
///   2 * x[u] * x[v] >= sum_k x[w[k]]^2,  x[u] >= 0, x[v] >= 0.
struct RotatedCone {
    int u = -1;
    int v = -1;
    std::vector<int> w;
};

/// Linear-objective program over linear equalities, variable bounds and
/// rotated second-order cones. Each variable may appear in at most one
/// cone slot.
class Problem {
public:
    struct Term {
        int var;
        double coef;
    };
    struct Row {
        std::vector<Term> terms;
        double rhs = 0.0;
    };

    int add_variable(double lower = -kInf, double upper = kInf, double objective = 0.0);
    int num_variables() const { return static_cast<int>(objective_.size()); }

    void set_objective(int var, double coef) { objective_[var] = coef; }
    void set_bounds(int var, double lower, double upper);

    int add_equality(std::vector<Term> terms, double rhs);
    /// terms . x <= rhs via a nonnegative slack variable. Returns the slack index.
    int add_leq(std::vector<Term> terms, double rhs);
    /// terms . x >= rhs via a nonnegative slack variable. Returns the slack index.
    int add_geq(std::vector<Term> terms, double rhs);
    /// terms . x - s = 0 with s in [lower, upper]. Returns the index of s.
    int add_range(std::vector<Term> terms, double lower, double upper);

    void add_cone(RotatedCone cone);

    const std::vector<double>& objective() const { return objective_; }
    const std::vector<Row>& equalities() const { return equalities_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }
    const std::vector<RotatedCone>& cones() const { return cones_; }

    /// Checks the structural invariants; throws ModelError on violation.
    void validate() const;

private:
    std::vector<double> objective_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<Row> equalities_;
    std::vector<RotatedCone> cones_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(SolveStatus status);

struct Tolerances {
    double feas = 1e-8;     // primal/dual feasibility, relative
    double abs_gap = 1e-8;  // absolute complementarity gap
    double rel_gap = 1e-8;  // relative complementarity gap
};

/// Solver output. Dual sign conventions (all recomputable through
/// kkt_residuals):
///   stationarity   c + E' y - lam + mu - scatter(zeta) = 0
///   lam, mu >= 0 are the lower/upper bound multipliers,
///   zeta_k lies in the (self-dual) rotated cone, paired with the cone slots.
/// For status Infeasible the dual fields hold a certificate ray with
///   d' y - lo' lam + up' mu = -1 and E' y - lam + mu - scatter(zeta) = 0.
/// For status Unbounded the primal field holds a ray with c' x = -1,
/// E x = 0, bound directions respected and cone slots inside the cone.
struct Solution {
    SolveStatus status = SolveStatus::IterationLimit;
    std::vector<double> primal;
    std::vector<double> eq_duals;
    std::vector<double> lower_duals;
    std::vector<double> upper_duals;
    std::vector<std::vector<double>> cone_duals;
    double objective_value = 0.0;
    int iterations = 0;
};

/// Worst-case scaled residuals recomputed from the vectors in a Solution.
struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;
    /// max of the three
    double worst() const;
};

Solution solve(const Problem& problem, const Tolerances& tol = {}, int max_iter = 200);

/// Recomputes KKT residuals of an Optimal solution from its vectors alone.
Residuals kkt_residuals(const Problem& problem, const Solution& solution);

/// Residual of an infeasibility/unboundedness certificate; small values
/// confirm the ray. Returns +inf if the solution status carries no ray.
double certificate_residual(const Problem& problem, const Solution& solution);

/// Debug dump, one constraint per line.
void dump(const Problem& problem, std::ostream& os);

} // namespace flexmap::conic
