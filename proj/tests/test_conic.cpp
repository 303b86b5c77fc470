#include <doctest.h>

#include <cmath>
#include <sstream>

#include "flexmap/conic.hpp"
#include "flexmap/errors.hpp"
#include "support/random_socp.hpp"

using namespace flexmap;
using conic::Problem;
using conic::SolveStatus;

TEST_SUITE("conic") {

TEST_CASE("bound-active LP: min x s.t. x >= 3") {
    Problem pr;
    pr.add_variable(3.0, conic::kInf, 1.0);
    auto sol = conic::solve(pr);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(conic::kkt_residuals(pr, sol).worst() <= 1e-8);
}

TEST_CASE("rotated cone closed form: min u s.t. 2 u v >= w^2, v = 1, w = 4") {
    Problem pr;
    const int u = pr.add_variable(0.0, conic::kInf, 1.0);
    const int v = pr.add_variable(1.0, 1.0);
    const int w = pr.add_variable(4.0, 4.0);
    pr.add_cone({u, v, {w}});
    auto sol = conic::solve(pr);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(8.0).epsilon(1e-7));
    CHECK(conic::kkt_residuals(pr, sol).worst() <= 1e-8);
}

TEST_CASE("contradictory equalities are infeasible with a certificate") {
    Problem pr;
    const int x = pr.add_variable();
    pr.add_equality({{x, 1.0}}, 1.0);
    pr.add_equality({{x, 1.0}}, 2.0);
    auto sol = conic::solve(pr);
    REQUIRE(sol.status == SolveStatus::Infeasible);
    CHECK(conic::certificate_residual(pr, sol) <= 1e-6);
}

TEST_CASE("infeasible box/row combination is certified") {
    Problem pr;
    const int x0 = pr.add_variable(0.0, 1.0);
    const int x1 = pr.add_variable(0.0, 1.0, 1.0);
    pr.add_leq({{x0, 1.0}, {x1, 1.0}}, -0.5);
    auto sol = conic::solve(pr);
    REQUIRE(sol.status == SolveStatus::Infeasible);
    CHECK(conic::certificate_residual(pr, sol) <= 1e-6);
}

TEST_CASE("unbounded objective is certified by a primal ray") {
    Problem pr;
    const int x = pr.add_variable(0.0, conic::kInf, -1.0);
    const int y = pr.add_variable(0.0, 2.0, 0.0);
    pr.add_equality({{y, 1.0}}, 1.0);
    (void)x;
    auto sol = conic::solve(pr);
    REQUIRE(sol.status == SolveStatus::Unbounded);
    CHECK(conic::certificate_residual(pr, sol) <= 1e-6);
}

TEST_CASE("degenerate cone presolves to pinned w") {
    Problem pr;
    const int u = pr.add_variable(0.0, 0.0);
    const int v = pr.add_variable(0.0, 0.0);
    const int w = pr.add_variable(-10.0, 10.0, -1.0);  // wants w large, cone pins it
    pr.add_cone({u, v, {w}});
    auto sol = conic::solve(pr);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.primal[w]) <= 1e-7);
}

TEST_CASE("objective scaling leaves the argmin, scales the value") {
    Problem base;
    const int x = base.add_variable(0.0, 4.0, 1.0);
    const int y = base.add_variable(0.5, 3.0, 2.0);
    base.add_geq({{x, 1.0}, {y, 1.0}}, 2.0);
    auto sol1 = conic::solve(base);
    REQUIRE(sol1.status == SolveStatus::Optimal);

    Problem scaled = base;
    scaled.set_objective(x, 7.5 * 1.0);
    scaled.set_objective(y, 7.5 * 2.0);
    auto sol2 = conic::solve(scaled);
    REQUIRE(sol2.status == SolveStatus::Optimal);

    CHECK(sol2.primal[x] == doctest::Approx(sol1.primal[x]).epsilon(1e-6));
    CHECK(sol2.primal[y] == doctest::Approx(sol1.primal[y]).epsilon(1e-6));
    CHECK(sol2.objective_value == doctest::Approx(7.5 * sol1.objective_value).epsilon(1e-9));
}

TEST_CASE("randomized suite vs grid refinement oracle") {
    int solved = 0;
    for (unsigned seed = 1; seed <= 100; ++seed) {
        auto inst = testsupport::make_random_socp(seed);
        auto sol = conic::solve(inst.problem);
        REQUIRE_MESSAGE(sol.status == SolveStatus::Optimal, "seed ", seed);
        const auto res = conic::kkt_residuals(inst.problem, sol);
        CHECK_MESSAGE(res.worst() <= 1e-8, "seed ", seed, " residual ", res.worst());

        const double oracle = testsupport::grid_refine_oracle(inst);
        CHECK_MESSAGE(std::abs(sol.objective_value - oracle) <=
                          1e-4 * std::max(1.0, std::abs(oracle)),
                      "seed ", seed, " solver ", sol.objective_value, " oracle ", oracle);
        ++solved;
    }
    CHECK(solved == 100);
}

TEST_CASE("validate rejects duplicate cone slots") {
    Problem pr;
    const int a = pr.add_variable(0.0, 1.0);
    const int b = pr.add_variable(0.0, 1.0);
    const int c = pr.add_variable(-1.0, 1.0);
    pr.add_cone({a, b, {c}});
    pr.add_cone({a, b, {c}});
    CHECK_THROWS_AS(pr.validate(), ModelError);
}

TEST_CASE("debug dump lists one constraint per line") {
    Problem pr;
    const int u = pr.add_variable(0.0, conic::kInf, 1.0);
    const int v = pr.add_variable(1.0, 1.0);
    const int w = pr.add_variable(-2.0, 2.0);
    pr.add_equality({{w, 1.0}}, 0.5);
    pr.add_cone({u, v, {w}});
    std::ostringstream os;
    conic::dump(pr, os);
    const std::string text = os.str();
    CHECK(text.find("eq r0:") != std::string::npos);
    CHECK(text.find("cone k0:") != std::string::npos);
    CHECK(text.find("min 1*x0") != std::string::npos);
}

} // TEST_SUITE
