#include "scp/reduce.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace scp;
using scp::testing::make_t3;
using scp::testing::oracle_optimum;

namespace {

// V1 = {u, v}, V2 = {w}; c_u = 5, c_uw = 1, everything else 0.
Instance goldstein_example() {
    Instance inst({2, 1});
    inst.set_node_cost(0, 0, 5.0);
    inst.set_edge_cost({0, 0}, {1, 0}, 1.0);
    inst.set_edge_cost({0, 1}, {1, 0}, 0.0);
    return inst;
}

} // namespace

TEST_CASE("Goldstein eliminates a dominated rotamer") {
    const Instance inst = goldstein_example();
    const Reduction r = goldstein_eliminate(inst);
    CHECK(r.instance.sizes() == std::vector<int>{1, 1});
    REQUIRE(r.trace.steps.size() == 1);
    CHECK(r.trace.steps[0] ==
          ReductionStep{ReductionStep::Kind::eliminate, 0, 0});
    CHECK(oracle_optimum(r.instance).value == oracle_optimum(inst).value);
    CHECK(oracle_optimum(r.instance).value == 0.0);

    const Assignment lifted = lift_assignment(r.trace, {0, 0});
    CHECK(lifted == Assignment{1, 0});
    CHECK(assignment_cost(inst, lifted) == assignment_cost(r.instance, {0, 0}));
}

TEST_CASE("Goldstein keeps ties") {
    Instance flat({3, 2, 2});
    for (int p = 0; p < 3; ++p)
        for (int r = 0; r < flat.size(p); ++r)
            flat.set_node_cost(p, r, 2.0);
    for (int p = 0; p < 3; ++p)
        for (int q = p + 1; q < 3; ++q)
            for (int u = 0; u < flat.size(p); ++u)
                for (int v = 0; v < flat.size(q); ++v)
                    flat.set_edge_cost({p, u}, {q, v}, -1.0);
    const Reduction r = goldstein_eliminate(flat);
    CHECK(r.trace.steps.empty());
    CHECK(r.instance.sizes() == flat.sizes());
    CHECK(instance_to_string(r.instance) == instance_to_string(flat));
}

TEST_CASE("T3 keeps its optimum under reduction") {
    const Instance t3 = make_t3();
    const Reduction g = goldstein_eliminate(t3);
    CHECK(oracle_optimum(g.instance).value == 8.0);
    const Reduction p = presolve(t3);
    const auto best = oracle_optimum(p.instance);
    CHECK(best.value == 8.0);
    CHECK(assignment_cost(t3, lift_assignment(p.trace, best.assignment)) == 8.0);
}

TEST_CASE("fold singletons") {
    Instance inst({1, 3});
    inst.set_node_cost(0, 0, 2.0);
    inst.set_node_cost(1, 2, -1.0);
    inst.set_edge_cost({0, 0}, {1, 1}, -4.0);
    const Reduction r = fold_singletons(inst, ReductionTrace::identity(inst));
    CHECK(r.instance.k() == 1);
    CHECK(r.instance.size(0) == 3);
    CHECK(oracle_optimum(r.instance).value == oracle_optimum(inst).value);
    CHECK(lift_assignment(r.trace, {1}) == Assignment{0, 1});

    const Instance t3 = make_t3();
    const Reduction same = fold_singletons(t3, ReductionTrace::identity(t3));
    CHECK(same.trace.steps.empty());
    CHECK(instance_to_string(same.instance) == instance_to_string(t3));

    const Instance forced = restrict_instance(t3, {{1}, {0}, {1}});
    const Reduction all = fold_singletons(forced, ReductionTrace::identity(forced));
    CHECK(all.instance.k() == 0);
    CHECK(all.instance.constant() == assignment_cost(t3, {1, 0, 1}));
    CHECK(lift_assignment(all.trace, {}) == Assignment{0, 0, 0});
}

TEST_CASE("identity trace lifts to itself") {
    const Instance t3 = make_t3();
    const ReductionTrace id = ReductionTrace::identity(t3);
    CHECK(lift_assignment(id, {1, 0, 1}) == Assignment{1, 0, 1});
    CHECK_THROWS_AS(lift_assignment(id, {1, 0}), TraceMismatch);
    CHECK_THROWS_AS(lift_assignment(id, {1, 2, 0}), TraceMismatch);
}

TEST_CASE("reduction safety on random instances") {
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        GeneratorParams g = scp::testing::small_params(seed, 1, 6, 5);
        g.integer_costs = seed % 4 != 0;
        const Instance inst = generate_random(g);
        const auto before = oracle_optimum(inst);
        const Reduction r = presolve(inst);
        const auto after = oracle_optimum(r.instance);
        if (g.integer_costs)
            CHECK(after.value == before.value);
        else
            CHECK(after.value == doctest::Approx(before.value).epsilon(1e-12));
        const Assignment lifted = lift_assignment(r.trace, after.assignment);
        CHECK(assignment_cost(inst, lifted) == doctest::Approx(after.value).epsilon(1e-12));

        for (const ReductionStep &s : r.trace.steps)
            if (s.kind == ReductionStep::Kind::eliminate)
                CHECK(lifted[s.position] != s.rotamer);

        // A second pass finds nothing more.
        const Reduction again = presolve(r.instance);
        CHECK(again.trace.steps.empty());
    }
}

TEST_CASE("trace JSON round trip") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Instance inst = generate_random(scp::testing::small_params(seed, 2, 6, 5));
        const Reduction r = presolve(inst);
        const nlohmann::json j = trace_to_json(r.trace);
        CHECK(j.at("original_k") == inst.k());
        const ReductionTrace back = trace_from_json(nlohmann::json::parse(j.dump()));
        CHECK(back.original_k == r.trace.original_k);
        CHECK(back.original_sizes == r.trace.original_sizes);
        CHECK(back.steps == r.trace.steps);
    }

    nlohmann::json bad = trace_to_json(ReductionTrace::identity(make_t3()));
    bad["steps"] = nlohmann::json::array({{{"op", "merge"}, {"position", 0}, {"rotamer", 0}}});
    CHECK_THROWS_AS(trace_from_json(bad), TraceMismatch);
    bad["steps"] = nlohmann::json::array({{{"op", "eliminate"}, {"position", 5}, {"rotamer", 0}}});
    CHECK_THROWS_AS(trace_from_json(bad).replay(), TraceMismatch);
}
