#include "scp/relax.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace scp;
using scp::testing::make_t3;

namespace {

Instance chain_instance(std::uint64_t seed, int k) {
    GeneratorParams g;
    g.k = k;
    g.size_lo = 1;
    g.size_hi = 5;
    g.density = 1.0;
    g.cost_lo = -10;
    g.cost_hi = 10;
    g.chain = true;
    g.seed = seed;
    return generate_random(g);
}

double gradient_at(const SparseGradient &g, int p, int q, int u) {
    for (const GradientEntry &e : g)
        if (e.p == p && e.q == q && e.u == u)
            return e.g;
    return 0.0;
}

} // namespace

TEST_CASE("node profit on T3") {
    const Instance t3 = make_t3();
    Multipliers lambda = zero_multipliers(t3, RelaxMode::full);
    CHECK(node_profit(t3, lambda, {2, 0}) == 4.0);
    CHECK(node_profit(t3, lambda, {2, 1}) == 2.0);
    CHECK(node_profit(t3, lambda, {1, 0}) == 0.0);
    CHECK(node_profit(t3, lambda, {0, 0}) == 1.0);

    lambda.values(0, 2)(0) = 3.0;
    lambda.values(0, 2)(1) = -3.0;
    CHECK(node_profit(t3, lambda, {0, 0}) == 4.0);
    CHECK(node_profit(t3, lambda, {2, 1}) == 2.0);
    for (int q = 0; q < 3; ++q)
        for (int v = 0; v < 2; ++v)
            CHECK(node_profit(t3, lambda, {q, v}) ==
                  scp::testing::oracle_profit(t3, lambda, q, v, false));
}

TEST_CASE("relaxation on T3 at zero multipliers") {
    const Instance t3 = make_t3();
    const Multipliers lambda = zero_multipliers(t3, RelaxMode::full);

    // Path scores in lexicographic order, from the oracle's profit weights.
    std::vector<double> scores;
    scp::testing::for_each_assignment(t3.sizes(), [&](const Assignment &path) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            s += scp::testing::oracle_profit(t3, lambda, i, path[i], false);
        for (int i = 0; i < 2; ++i)
            s += t3.edge_cost({i, path[i]}, {i + 1, path[i + 1]});
        scores.push_back(s);
    });
    CHECK(scores == std::vector<double>{7, 8, 8, 6, 8, 9, 11, 9});

    const RelaxSolution sol = solve_relaxation(t3, lambda);
    CHECK(sol.path == Assignment{0, 1, 1});
    CHECK(sol.dual_value == 6.0);
    CHECK(sol.partner(0, 2) == 1);
    CHECK(evaluate_primal(t3, sol).value == 9.0);

    const SparseGradient g = subgradient_vector(t3, sol);
    CHECK(g.size() == 2);
    CHECK(gradient_at(g, 0, 2, 0) == 1.0);
    CHECK(gradient_at(g, 0, 2, 1) == -1.0);
    CHECK(subgradient_step(2.0, 9.0, sol.dual_value, g) == 3.0);

    Relaxation rel(t3, RelaxMode::full);
    rel.apply_step(g, 3.0);
    CHECK(rel.multipliers().value(0, 2, 0) == 3.0);
    CHECK(rel.multipliers().value(0, 2, 1) == -3.0);
}

TEST_CASE("first subgradient step matches the hand step") {
    const Instance t3 = make_t3();
    SubgradientConfig cfg;
    cfg.max_iters = 1;
    const BoundsReport r = optimize_bounds(t3, zero_multipliers(t3, RelaxMode::full),
                                           std::numeric_limits<double>::infinity(), cfg);
    CHECK(r.best_lb == 6.0);
    CHECK(r.best_ub == 9.0);
    CHECK(r.iterations == 1);
    CHECK(r.stop == StopReason::iteration_cap);

    cfg.max_iters = 2;
    cfg.record_history = true;
    const BoundsReport r2 = optimize_bounds(t3, zero_multipliers(t3, RelaxMode::full),
                                            std::numeric_limits<double>::infinity(), cfg);
    Multipliers stepped = zero_multipliers(t3, RelaxMode::full);
    stepped.values(0, 2)(0) = 3.0;
    stepped.values(0, 2)(1) = -3.0;
    const double dual2 = scp::testing::oracle_dual(t3, stepped);
    CHECK(r2.best_lb == std::max(6.0, dual2));
}

TEST_CASE("subgradient edge cases") {
    // k = 2: nothing dualized.
    const Instance two = generate_random(scp::testing::small_params(3, 2, 2));
    const RelaxSolution sol = solve_relaxation(two, zero_multipliers(two, RelaxMode::full));
    CHECK(subgradient_vector(two, sol).empty());

    // Zero gradient at lambda0: immediate stop with the dual at lambda0.
    SubgradientConfig cfg;
    const BoundsReport r = optimize_bounds(two, zero_multipliers(two, RelaxMode::full),
                                           std::numeric_limits<double>::infinity(), cfg);
    CHECK(r.iterations == 1);
    CHECK(r.best_lb == sol.dual_value);
    CHECK((r.stop == StopReason::zero_gradient || r.stop == StopReason::gap_closed));

    const Instance zero({2, 3, 2});
    const RelaxSolution zs = solve_relaxation(zero, zero_multipliers(zero, RelaxMode::full));
    CHECK(evaluate_primal(zero, zs).value == 0.0);
}

TEST_CASE("chain and k <= 2 exactness") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Instance chain = chain_instance(seed, 2 + static_cast<int>(seed % 6));
        const RelaxSolution sol = solve_relaxation(chain, zero_multipliers(chain, RelaxMode::full));
        const double opt = scp::testing::oracle_optimum(chain).value;
        CHECK(sol.dual_value == opt);
        CHECK(evaluate_primal(chain, sol).value == sol.dual_value);

        SubgradientConfig cfg;
        cfg.integral = true;
        const BoundsReport r = optimize_bounds(chain, zero_multipliers(chain, RelaxMode::full),
                                               std::numeric_limits<double>::infinity(), cfg);
        CHECK(r.iterations == 1);
        CHECK(r.best_lb == r.best_ub);

        const Instance pair = generate_random(scp::testing::small_params(seed, 1, 2));
        for (RelaxMode mode : {RelaxMode::full, RelaxMode::reduced})
            CHECK(solve_relaxation(pair, zero_multipliers(pair, mode), mode).dual_value ==
                  scp::testing::oracle_optimum(pair).value);
    }
}

TEST_CASE("relaxation matches the enumerated dual and bounds the optimum") {
    std::mt19937_64 rng(17);
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        const Instance inst = generate_random(scp::testing::small_params(seed, 2, 6, 4));
        const double opt = scp::testing::oracle_optimum(inst).value;
        for (RelaxMode mode : {RelaxMode::full, RelaxMode::reduced}) {
            const bool reduced = mode == RelaxMode::reduced;
            for (double scale : {0.0, 1.0, 10.0}) {
                const Multipliers lambda = scp::testing::random_multipliers(inst, rng, scale, mode);
                const RelaxSolution sol = solve_relaxation(inst, lambda, mode);
                CHECK(sol.dual_value ==
                      doctest::Approx(scp::testing::oracle_dual(inst, lambda, reduced))
                          .epsilon(1e-12));
                CHECK(sol.dual_value <= opt + 1e-9);
                CHECK(evaluate_primal(inst, sol).value >= opt);
            }
        }
    }
}

TEST_CASE("incremental profits equal direct profits") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        GeneratorParams g = scp::testing::small_params(seed, 3, 9, 6);
        g.integer_costs = seed % 3 != 0;
        const Instance inst = generate_random(g);
        for (RelaxMode mode : {RelaxMode::full, RelaxMode::reduced}) {
            Relaxation rel(inst, mode);
            double ub = std::numeric_limits<double>::infinity();
            for (int it = 0; it < 25; ++it) {
                const RelaxSolution sol = rel.solve();
                ub = std::min(ub, evaluate_primal(inst, sol).value);
                const SparseGradient grad = subgradient_vector(inst, sol);
                if (grad.empty())
                    break;
                rel.apply_step(grad, subgradient_step(1.0, ub + 1.0, sol.dual_value, grad));
                for (int q = 0; q < inst.k(); ++q)
                    for (int v = 0; v < inst.size(q); ++v)
                        CHECK(rel.profits()[q](v) ==
                              node_profit(inst, rel.multipliers(), {q, v}, mode));
            }
        }
    }
}

TEST_CASE("bounds are monotone and sound") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Instance inst = generate_random(scp::testing::small_params(seed, 3, 7, 5));
        const double opt = scp::testing::oracle_optimum(inst).value;
        for (RelaxMode mode : {RelaxMode::full, RelaxMode::reduced}) {
            SubgradientConfig cfg;
            cfg.mode = mode;
            cfg.record_history = true;
            const BoundsReport r = optimize_bounds(inst, zero_multipliers(inst, mode),
                                                   std::numeric_limits<double>::infinity(), cfg);
            REQUIRE(!r.history.empty());
            for (std::size_t i = 1; i < r.history.size(); ++i) {
                CHECK(r.history[i].first >= r.history[i - 1].first);
                CHECK(r.history[i].second <= r.history[i - 1].second);
            }
            CHECK(r.best_lb <= opt + 1e-9);
            CHECK(r.best_ub >= opt);
            CHECK(assignment_cost(inst, r.best_assignment) == r.best_ub);
            CHECK(solve_relaxation(inst, r.multipliers, mode).dual_value == r.best_lb);
            if (mode == RelaxMode::reduced) {
                for (int p = 0; p < inst.k(); ++p)
                    for (int q = p + 2; q < inst.k(); ++q)
                        if (r.multipliers.sign_restricted(p, q))
                            CHECK(r.multipliers.values(p, q).maxCoeff() <= 0.0);
            }
        }
    }
}

TEST_CASE("incumbent and cutoff controls") {
    const Instance t3 = make_t3();
    SubgradientConfig cfg;
    const BoundsReport r = optimize_bounds(t3, zero_multipliers(t3, RelaxMode::full), 8.0, cfg);
    CHECK(r.best_ub == 8.0);
    CHECK(r.best_assignment.empty());

    cfg.lb_cutoff = 5.0;
    const BoundsReport c = optimize_bounds(t3, zero_multipliers(t3, RelaxMode::full), 100.0, cfg);
    CHECK(c.stop == StopReason::cutoff);
    CHECK(c.iterations == 1);

    CHECK(gap_closed(8.0, 7.5, 1e-6, true));
    CHECK(!gap_closed(8.0, 7.5, 1e-6, false));
    CHECK(!gap_closed(8.0, 7.0, 1e-6, true));
}

TEST_CASE("fractional primal") {
    const std::vector<int> sizes{3, 2};
    const auto one = fractional_primal({{2, 1}}, sizes);
    CHECK(one[0](2) == 1.0);
    CHECK(one[0](0) == 0.0);
    CHECK(one[1](1) == 1.0);

    const auto two = fractional_primal({{0, 1}, {2, 1}}, sizes);
    CHECK(two[0](0) == 0.5);
    CHECK(two[0](2) == 0.5);
    CHECK(two[0](1) == 0.0);
    CHECK(two[1](1) == 1.0);

    const auto same = fractional_primal({{1, 0}, {1, 0}, {1, 0}}, sizes);
    CHECK(same[0](1) == 1.0);
    CHECK(same[1](0) == 1.0);
    CHECK(same[0].sum() == 1.0);

    CHECK_THROWS_AS(fractional_primal({}, sizes), std::invalid_argument);
}

TEST_CASE("reduced formulation") {
    const ReducedFormulation t3 = build_reduced_formulation(make_t3());
    for (int p = 0; p < 3; ++p)
        for (int q = p + 1; q < 3; ++q)
            CHECK(!t3.is_inequality(p, q));
    CHECK(t3.kept(0, 1) == 4);

    Instance mixed({2, 1});
    mixed.set_edge_cost({0, 0}, {1, 0}, -1.0);
    mixed.set_edge_cost({0, 1}, {1, 0}, 0.0);
    const ReducedFormulation m = build_reduced_formulation(mixed);
    CHECK(m.is_inequality(0, 1));
    CHECK(m.kept(0, 1) == 1);

    GeneratorParams g;
    g.k = 5;
    g.size_lo = 1;
    g.size_hi = 3;
    g.density = 1.0;
    g.cost_lo = -9;
    g.cost_hi = -1;
    g.seed = 4;
    const Instance neg = generate_random(g);
    const ReducedFormulation n = build_reduced_formulation(neg);
    for (int p = 0; p < 5; ++p)
        for (int q = p + 1; q < 5; ++q)
            CHECK(n.is_inequality(p, q));
    const Multipliers lambda = zero_multipliers(neg, RelaxMode::reduced);
    CHECK(lambda.sign_restricted(0, 2));

    // A restricted pair whose edges are all zero carries a zero backward term.
    Instance flat({2, 2, 2});
    flat.set_node_cost(2, 1, 1.0);
    flat.set_edge_cost({0, 0}, {2, 0}, 0.0);
    const Multipliers fl = zero_multipliers(flat, RelaxMode::reduced);
    CHECK(node_profit(flat, fl, {2, 0}, RelaxMode::reduced) == 0.0);
    const RelaxSolution fs = solve_relaxation(flat, fl, RelaxMode::reduced);
    CHECK(fs.partner(0, 2) == -1);
    CHECK(subgradient_vector(flat, fs).size() <= 1);
}

TEST_CASE("multiplier sign projection") {
    Multipliers lambda(std::vector<int>{2, 2, 3});
    lambda.values(0, 2) << 1.0, -2.0;
    lambda.set_sign_restricted(0, 2, true);
    CHECK(lambda.value(0, 2, 0) == 0.0);
    CHECK(lambda.value(0, 2, 1) == -2.0);
    CHECK(lambda.max_abs() == 2.0);

    // Projected steps keep restricted entries non-positive.
    Instance flat({2, 2, 2});
    flat.set_edge_cost({0, 0}, {2, 0}, -1.0);
    Relaxation rel(flat, RelaxMode::reduced);
    REQUIRE(rel.multipliers().sign_restricted(0, 2));
    rel.apply_step({{0, 2, 0, 1.0}, {0, 2, 1, -1.0}}, 3.0);
    CHECK(rel.multipliers().value(0, 2, 0) == 0.0);
    CHECK(rel.multipliers().value(0, 2, 1) == -3.0);
    for (int q = 0; q < 3; ++q)
        for (int v = 0; v < 2; ++v)
            CHECK(rel.profits()[q](v) ==
                  node_profit(flat, rel.multipliers(), {q, v}, RelaxMode::reduced));
}

TEST_CASE("deterministic relaxation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Instance inst = generate_random(scp::testing::small_params(seed));
        SubgradientConfig cfg;
        cfg.record_history = true;
        const BoundsReport a = optimize_bounds(inst, zero_multipliers(inst, RelaxMode::full),
                                               std::numeric_limits<double>::infinity(), cfg);
        const BoundsReport b = optimize_bounds(inst, zero_multipliers(inst, RelaxMode::full),
                                               std::numeric_limits<double>::infinity(), cfg);
        CHECK(a.history == b.history);
        CHECK(a.best_assignment == b.best_assignment);
    }
}
