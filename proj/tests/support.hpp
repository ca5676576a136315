// Shared fixtures and independent oracles for the test suites.  Nothing here
// calls into the solver paths it is used to check.
#ifndef SCP_TESTS_SUPPORT_HPP
#define SCP_TESTS_SUPPORT_HPP

#include "scp/instance.hpp"
#include "scp/relax.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace scp::testing {

inline std::string data_path(const std::string &name) {
    return std::string(SCP_TEST_DATA_DIR) + "/" + name;
}

/// T3: k=3, sizes (2,2,2); rotamer 0 is "x1", rotamer 1 is "x2".
inline Instance make_t3() {
    Instance t({2, 2, 2});
    const double node[3][2] = {{1, 3}, {0, 2}, {4, 0}};
    for (int p = 0; p < 3; ++p)
        for (int r = 0; r < 2; ++r)
            t.set_node_cost(p, r, node[p][r]);
    auto e = [&](int p, int u, int q, int v, double c) { t.set_edge_cost({p, u}, {q, v}, c); };
    e(0, 0, 1, 0, 2); e(0, 0, 1, 1, 0); e(0, 1, 1, 0, 1); e(0, 1, 1, 1, 1);
    e(1, 0, 2, 0, 0); e(1, 0, 2, 1, 3); e(1, 1, 2, 0, 1); e(1, 1, 2, 1, 1);
    e(0, 0, 2, 0, 1); e(0, 0, 2, 1, 5); e(0, 1, 2, 0, 0); e(0, 1, 2, 1, 2);
    return t;
}

/// Objective by the textbook double loop over NodeRef lookups.
inline double oracle_objective(const Instance &inst, const Assignment &a) {
    double total = inst.constant();
    for (int i = 0; i < inst.k(); ++i)
        total += inst.node_cost(i, a[i]);
    for (int i = 0; i < inst.k(); ++i)
        for (int j = i + 1; j < inst.k(); ++j)
            total += inst.edge_cost({i, a[i]}, {j, a[j]});
    return total;
}

/// Calls `visit` on every assignment in lexicographic order.
inline void for_each_assignment(const std::vector<int> &sizes,
                                const std::function<void(const Assignment &)> &visit) {
    Assignment a(sizes.size(), 0);
    if (sizes.empty()) {
        visit(a);
        return;
    }
    while (true) {
        visit(a);
        int p = static_cast<int>(sizes.size()) - 1;
        while (p >= 0 && ++a[p] == sizes[p]) {
            a[p] = 0;
            --p;
        }
        if (p < 0)
            return;
    }
}

struct Optimum {
    double value = std::numeric_limits<double>::infinity();
    Assignment assignment;
};

inline Optimum oracle_optimum(const Instance &inst) {
    Optimum best;
    for_each_assignment(inst.sizes(), [&](const Assignment &a) {
        const double v = oracle_objective(inst, a);
        if (v < best.value) {
            best.value = v;
            best.assignment = a;
        }
    });
    return best;
}

/// Profit delta(v) straight from its definition, over all of V_p.
inline double oracle_profit(const Instance &inst, const Multipliers &lambda, int q, int v,
                            bool reduced) {
    double own = inst.node_cost(q, v);
    for (int r = q + 2; r < inst.k(); ++r)
        own += lambda.value(q, r, v);
    double back = 0.0;
    for (int p = 0; p + 2 <= q; ++p) {
        bool inequality = false;
        if (reduced) {
            inequality = true;
            for (int u = 0; u < inst.size(p); ++u)
                for (int w = 0; w < inst.size(q); ++w)
                    if (inst.edge_cost({p, u}, {q, w}) > 0.0)
                        inequality = false;
        }
        double best = inequality ? 0.0 : std::numeric_limits<double>::infinity();
        for (int u = 0; u < inst.size(p); ++u) {
            const double c = inst.edge_cost({p, u}, {q, v});
            if (inequality && !(c < 0.0))
                continue;
            best = std::min(best, c - lambda.value(p, q, u));
        }
        back += best;
    }
    return own + back;
}

/// Relaxation optimum by enumerating every path with profit weights.
inline double oracle_dual(const Instance &inst, const Multipliers &lambda, bool reduced = false) {
    const int k = inst.k();
    std::vector<std::vector<double>> delta(k);
    for (int q = 0; q < k; ++q)
        for (int v = 0; v < inst.size(q); ++v)
            delta[q].push_back(oracle_profit(inst, lambda, q, v, reduced));
    double best = std::numeric_limits<double>::infinity();
    for_each_assignment(inst.sizes(), [&](const Assignment &path) {
        double s = inst.constant();
        for (int i = 0; i < k; ++i)
            s += delta[i][path[i]];
        for (int i = 0; i + 1 < k; ++i)
            s += inst.edge_cost({i, path[i]}, {i + 1, path[i + 1]});
        best = std::min(best, s);
    });
    return best;
}

inline GeneratorParams small_params(std::uint64_t seed, int k_lo = 2, int k_hi = 7,
                                    int size_hi = 6) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    GeneratorParams g;
    g.k = k_lo + static_cast<int>(rng() % static_cast<std::uint64_t>(k_hi - k_lo + 1));
    g.size_lo = 1;
    g.size_hi = size_hi;
    const double densities[] = {0.3, 0.7, 1.0};
    g.density = densities[rng() % 3];
    g.cost_lo = -10;
    g.cost_hi = 10;
    g.integer_costs = true;
    g.seed = seed;
    return g;
}

/// Random multipliers in [-scale, scale], respecting sign restrictions.
inline Multipliers random_multipliers(const Instance &inst, std::mt19937_64 &rng, double scale,
                                      RelaxMode mode = RelaxMode::full) {
    Multipliers lambda = zero_multipliers(inst, mode);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int p = 0; p < inst.k(); ++p)
        for (int q = p + 2; q < inst.k(); ++q) {
            Eigen::VectorXd &v = lambda.values(p, q);
            for (int u = 0; u < v.size(); ++u) {
                double x = dist(rng);
                v(u) = lambda.sign_restricted(p, q) ? -std::abs(x) : x;
            }
        }
    return lambda;
}

} // namespace scp::testing

#endif
