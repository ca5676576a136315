#include "scp/bnb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace scp {

namespace {

double pair_cost(const Instance &inst, int p, int u, int q, int w) {
    if (p < q) {
        const EdgeBlock *blk = inst.block(p, q);
        return blk ? blk->cost(u, w) : 0.0;
    }
    const EdgeBlock *blk = inst.block(q, p);
    return blk ? blk->cost(w, u) : 0.0;
}

} // namespace

// --- local search ------------------------------------------------------------

LocalSearchResult local_search(const Instance &inst, std::uint64_t seed, int max_iters,
                               int patience) {
    const int k = inst.k();
    LocalSearchResult res;
    res.assignment.resize(k);
    for (int p = 0; p < k; ++p) {
        Eigen::Index best = 0;
        inst.node_costs(p).minCoeff(&best);
        // minCoeff's index is not guaranteed to be the first on ties.
        const double v = inst.node_cost(p, static_cast<int>(best));
        for (int r = 0; r < inst.size(p); ++r)
            if (inst.node_cost(p, r) == v) {
                best = r;
                break;
            }
        res.assignment[p] = static_cast<int>(best);
    }
    if (k > 0) {
        std::mt19937_64 rng(seed);
        int failures = 0;
        while (res.iterations < max_iters && failures < patience) {
            ++res.iterations;
            const int i = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
            auto local = [&](int r) {
                double e = inst.node_cost(i, r);
                for (int j = 0; j < k; ++j)
                    if (j != i)
                        e += pair_cost(inst, i, r, j, res.assignment[j]);
                return e;
            };
            const double current = local(res.assignment[i]);
            int best_r = res.assignment[i];
            double best_e = current;
            for (int r = 0; r < inst.size(i); ++r) {
                const double e = local(r);
                if (e < best_e) {
                    best_e = e;
                    best_r = r;
                }
            }
            if (best_r != res.assignment[i]) {
                res.assignment[i] = best_r;
                ++res.improving_moves;
                failures = 0;
            } else {
                ++failures;
            }
        }
    }
    res.value = assignment_cost(inst, res.assignment);
    return res;
}

Assignment lexicographic_polish(const Instance &inst, Assignment a) {
    const int k = inst.k();
    auto local = [&](int i, int r) {
        double e = inst.node_cost(i, r);
        for (int j = 0; j < k; ++j)
            if (j != i)
                e += pair_cost(inst, i, r, j, a[j]);
        return e;
    };
    bool moved = true;
    while (moved) {
        moved = false;
        for (int i = 0; i < k && !moved; ++i) {
            const double current = local(i, a[i]);
            for (int r = 0; r < a[i]; ++r)
                if (local(i, r) <= current) {
                    a[i] = r;
                    moved = true;
                    break;
                }
        }
    }
    return a;
}

// --- position order ----------------------------------------------------------

Instance reorder_positions(const Instance &inst, const std::vector<int> &order) {
    const int k = inst.k();
    if (static_cast<int>(order.size()) != k)
        throw std::invalid_argument("order does not match k");
    std::vector<int> sizes(k);
    for (int i = 0; i < k; ++i)
        sizes[i] = inst.size(order[i]);
    Instance out(sizes, inst.name());
    out.set_constant(inst.constant());
    for (int i = 0; i < k; ++i)
        for (int r = 0; r < sizes[i]; ++r)
            out.set_node_cost(i, r, inst.node_cost(order[i], r));
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            const int a = order[i], b = order[j];
            const EdgeBlock *blk = a < b ? inst.block(a, b) : inst.block(b, a);
            if (!blk)
                continue;
            for (int u = 0; u < sizes[i]; ++u)
                for (int v = 0; v < sizes[j]; ++v) {
                    const bool present = a < b ? blk->present(u, v) : blk->present(v, u);
                    if (present)
                        out.set_edge_cost({i, u}, {j, v},
                                          a < b ? blk->cost(u, v) : blk->cost(v, u));
                }
        }
    return out;
}

std::vector<int> size_order(const Instance &inst) {
    std::vector<int> order(inst.k());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return inst.size(a) < inst.size(b); });
    return order;
}

std::size_t dualized_constraint_count(const Instance &inst) {
    std::size_t count = 0;
    for (int p = 0; p < inst.k(); ++p)
        for (int q = p + 2; q < inst.k(); ++q)
            if (const EdgeBlock *blk = inst.block(p, q); blk && !blk->cost.isZero(0.0))
                count += static_cast<std::size_t>(inst.size(p));
    return count;
}

std::vector<int> solver_order(const Instance &inst) {
    std::vector<int> by_size = size_order(inst);
    std::vector<int> identity(inst.k());
    std::iota(identity.begin(), identity.end(), 0);
    if (by_size == identity)
        return by_size;
    const std::size_t sized = dualized_constraint_count(reorder_positions(inst, by_size));
    const std::size_t given = dualized_constraint_count(inst);
    return given < sized ? identity : by_size;
}

// --- subproblem views --------------------------------------------------------

Assignment NodeView::lift(const Assignment &view_assignment) const {
    Assignment root(allowed.size());
    for (std::size_t p = 0; p < allowed.size(); ++p)
        root[p] = allowed[p].front();
    for (std::size_t i = 0; i < positions.size(); ++i)
        root[positions[i]] = rotamers[i][view_assignment[i]];
    return root;
}

NodeView materialize(const Instance &root, const AllowedSets &allowed) {
    const int k = root.k();
    if (static_cast<int>(allowed.size()) != k)
        throw std::invalid_argument("allowed sets do not match k");
    NodeView view;
    view.allowed = allowed;
    std::vector<int> fixed;
    for (int p = 0; p < k; ++p) {
        if (allowed[p].empty())
            throw std::invalid_argument("empty allowed set");
        if (allowed[p].size() == 1) {
            fixed.push_back(p);
        } else {
            view.positions.push_back(p);
            view.rotamers.push_back(allowed[p]);
        }
    }
    std::vector<int> sizes;
    for (const auto &r : view.rotamers)
        sizes.push_back(static_cast<int>(r.size()));
    view.instance = Instance(sizes, root.name());

    double constant = root.constant();
    for (std::size_t a = 0; a < fixed.size(); ++a) {
        const int s = fixed[a];
        constant += root.node_cost(s, allowed[s][0]);
        for (std::size_t b = a + 1; b < fixed.size(); ++b) {
            const int t = fixed[b];
            constant += pair_cost(root, s, allowed[s][0], t, allowed[t][0]);
        }
    }
    view.instance.set_constant(constant);

    const int vk = view.instance.k();
    for (int i = 0; i < vk; ++i) {
        const int p = view.positions[i];
        for (int r = 0; r < sizes[i]; ++r) {
            const int orig = view.rotamers[i][r];
            double c = root.node_cost(p, orig);
            for (int s : fixed)
                c += pair_cost(root, p, orig, s, allowed[s][0]);
            view.instance.set_node_cost(i, r, c);
        }
    }
    for (int i = 0; i < vk; ++i)
        for (int j = i + 1; j < vk; ++j) {
            const EdgeBlock *blk = root.block(view.positions[i], view.positions[j]);
            if (!blk)
                continue;
            for (int u = 0; u < sizes[i]; ++u)
                for (int v = 0; v < sizes[j]; ++v) {
                    const int ou = view.rotamers[i][u], ov = view.rotamers[j][v];
                    if (blk->present(ou, ov))
                        view.instance.set_edge_cost({i, u}, {j, v}, blk->cost(ou, ov));
                }
        }
    return view;
}

NodeView fix_in_view(const NodeView &view, int pos, int rot) {
    NodeView child;
    child.instance = fix_rotamer(view.instance, pos, rot);
    child.allowed = view.allowed;
    child.allowed[view.positions[pos]] = {view.rotamers[pos][rot]};
    child.positions = view.positions;
    child.rotamers = view.rotamers;
    child.positions.erase(child.positions.begin() + pos);
    child.rotamers.erase(child.rotamers.begin() + pos);
    return child;
}

Multipliers multipliers_to_view(const Multipliers &root, const NodeView &view) {
    Multipliers out(view.instance.sizes());
    const int vk = view.instance.k();
    for (int p = 0; p < vk; ++p)
        for (int q = p + 2; q < vk; ++q) {
            const Eigen::VectorXd &src = root.values(view.positions[p], view.positions[q]);
            Eigen::VectorXd &dst = out.values(p, q);
            for (int u = 0; u < dst.size(); ++u)
                dst(u) = src(view.rotamers[p][u]);
        }
    return out;
}

void multipliers_from_view(const Multipliers &view_lambda, const NodeView &view,
                           Multipliers &root) {
    const int vk = view.instance.k();
    for (int p = 0; p < vk; ++p)
        for (int q = p + 2; q < vk; ++q) {
            const Eigen::VectorXd &src = view_lambda.values(p, q);
            Eigen::VectorXd &dst = root.values(view.positions[p], view.positions[q]);
            for (int u = 0; u < src.size(); ++u)
                dst(view.rotamers[p][u]) = src(u);
        }
}

Multipliers multipliers_drop_position(const Multipliers &parent_lambda,
                                       const NodeView &child, int dropped) {
    Multipliers out(child.instance.sizes());
    const int ck = child.instance.k();
    auto parent_of = [dropped](int i) { return i < dropped ? i : i + 1; };
    for (int p = 0; p < ck; ++p)
        for (int q = p + 2; q < ck; ++q)
            out.values(p, q) = parent_lambda.values(parent_of(p), parent_of(q));
    return out;
}

// --- strong branching --------------------------------------------------------

bool SearchState::offer(double value, const Assignment &root_assignment) {
    if (value < incumbent) {
        incumbent = value;
        incumbent_assignment = root_assignment;
        return true;
    }
    return false;
}

int candidate_count(int free_positions, int depth, int max_candidates) {
    const double gamma = std::max(0.05, 0.5 * std::pow(2.0, -depth));
    const int n = static_cast<int>(std::ceil(gamma * free_positions - 1e-12));
    return std::clamp(n, 1, std::max(1, std::min(max_candidates, free_positions)));
}

BranchScore select_branch_position(const NodeView &view, const Multipliers &view_lambda,
                                   double node_lb,
                                   const std::vector<Eigen::VectorXd> &fractional,
                                   int depth, SearchState &state,
                                   const SolverConfig &cfg) {
    const int vk = view.instance.k();
    if (vk == 0)
        throw std::invalid_argument("select_branch_position: no free position");
    BranchScore best;
    if (vk == 1) {
        best.position = view.positions[0];
        return best;
    }

    auto frac = [&](int i, int r) {
        return fractional.empty() ? 1.0 : fractional[i](r);
    };
    std::vector<double> max_frac(vk);
    for (int i = 0; i < vk; ++i) {
        double m = 0.0;
        for (int r = 0; r < view.instance.size(i); ++r)
            m = std::max(m, frac(i, r));
        max_frac[i] = m;
    }
    std::vector<int> order(vk);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return max_frac[a] < max_frac[b]; });
    order.resize(candidate_count(vk, depth, cfg.max_candidates));

    SubgradientConfig probe;
    probe.max_iters = cfg.probe_iters;
    probe.mu0 = cfg.probe_mu;
    probe.halve_after = 0;
    probe.mu_min = 0.0;
    probe.window = 1;
    probe.mode = cfg.mode;
    probe.gap_tol = state.gap_tol;
    probe.integral = state.integral;
    probe.deadline = state.deadline;

    const double inf = std::numeric_limits<double>::infinity();
    double best_xi = -inf;
    int probes = 0, probe_iterations = 0;
    bool have_best = false;
    std::vector<BranchScore::Candidate> summaries;

    for (int i : order) {
        std::vector<int> rots(view.instance.size(i));
        std::iota(rots.begin(), rots.end(), 0);
        std::stable_sort(rots.begin(), rots.end(),
                         [&](int a, int b) { return frac(i, a) > frac(i, b); });
        BranchScore score;
        score.position = view.positions[i];
        double min_delta = inf;
        for (int r : rots) {
            const NodeView child = fix_in_view(view, i, r);
            // Progress beyond the smallest one seen cannot lower xi.
            probe.lb_cutoff = node_lb + min_delta;
            const BoundsReport rep =
                optimize_bounds(child.instance, multipliers_drop_position(view_lambda, child, i),
                                state.incumbent, probe);
            ++probes;
            probe_iterations += rep.iterations;
            if (!rep.best_assignment.empty())
                state.offer(rep.best_ub, child.lift(rep.best_assignment));
            const double child_lb = std::max(node_lb, rep.best_lb);
            const double delta = state.prunable(child_lb) ? inf : child_lb - node_lb;
            score.per_rotamer.push_back({view.rotamers[i][r], child_lb, delta});
            min_delta = std::min(min_delta, delta);
            if (have_best && min_delta <= best_xi) {
                score.aborted = true;
                break;
            }
        }
        summaries.push_back({score.position, min_delta, score.aborted,
                             static_cast<int>(score.per_rotamer.size())});
        if (score.aborted)
            continue;
        score.xi = min_delta;
        if (!have_best || score.xi > best_xi) {
            best_xi = score.xi;
            best = std::move(score);
            have_best = true;
        }
    }
    best.candidates = std::move(summaries);
    best.probes = probes;
    best.probe_iterations = probe_iterations;
    return best;
}

std::vector<Subproblem> expand(const Subproblem &sub, const BranchScore &score,
                               const SolverConfig &cfg) {
    const std::vector<int> &rots = sub.allowed.at(score.position);
    if (rots.size() < 2)
        throw std::invalid_argument("expand: position is not free");

    struct Entry {
        int rotamer;
        double lb;
    };
    std::vector<Entry> entries;
    for (int r : rots) {
        double lb = sub.local_lb;
        for (const RotamerProbe &pr : score.per_rotamer)
            if (pr.rotamer == r)
                lb = std::max(lb, pr.child_lb);
        entries.push_back({r, lb});
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry &a, const Entry &b) { return a.lb < b.lb; });

    std::vector<Subproblem> children;
    auto make_child = [&](std::vector<int> set, double lb) {
        Subproblem c;
        c.allowed = sub.allowed;
        std::sort(set.begin(), set.end());
        c.allowed[score.position] = std::move(set);
        c.depth = sub.depth + 1;
        c.lambda = sub.lambda;
        c.local_lb = lb;
        children.push_back(std::move(c));
    };

    if (static_cast<int>(rots.size()) <= cfg.split_threshold) {
        for (const Entry &e : entries)
            make_child({e.rotamer}, e.lb);
        return children;
    }
    // Alternate bound-sorted rotamers between two halves.
    std::vector<int> first, second;
    double first_lb = std::numeric_limits<double>::infinity();
    double second_lb = first_lb;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i % 2 == 0) {
            first.push_back(entries[i].rotamer);
            first_lb = std::min(first_lb, entries[i].lb);
        } else {
            second.push_back(entries[i].rotamer);
            second_lb = std::min(second_lb, entries[i].lb);
        }
    }
    make_child(std::move(first), first_lb);
    make_child(std::move(second), second_lb);
    return children;
}

// --- driver ------------------------------------------------------------------

const char *to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible_input: return "infeasible-input";
    }
    return "unknown";
}

SolveResult solve(const Instance &inst, const SolverConfig &cfg) {
    const auto start = Clock::now();
    SolveResult res;

    SearchState state;
    state.integral = inst.integral();
    state.gap_tol = cfg.gap_tol;
    if (cfg.time_limit)
        state.deadline = start + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(*cfg.time_limit));
    auto out_of_time = [&] { return state.deadline && Clock::now() >= *state.deadline; };

    Reduction reduced{inst, ReductionTrace::identity(inst)};
    if (cfg.presolve)
        reduced = presolve(inst);
    const std::vector<int> order = solver_order(reduced.instance);
    const Instance root = reorder_positions(reduced.instance, order);

    auto to_original = [&](const Assignment &root_assignment) {
        Assignment work(root.k());
        for (int i = 0; i < root.k(); ++i)
            work[order[i]] = root_assignment[i];
        return lift_assignment(reduced.trace, work);
    };

    const LocalSearchResult ls =
        local_search(root, cfg.seed, cfg.local_search_iters, cfg.local_search_patience);
    res.local_search_value = ls.value;
    state.offer(ls.value, ls.assignment);

    std::vector<Subproblem> stack;
    {
        Subproblem rootsub;
        rootsub.allowed = full_allowed(root);
        rootsub.lambda = std::make_shared<const Multipliers>(zero_multipliers(root, cfg.mode));
        stack.push_back(std::move(rootsub));
    }

    bool timed_out = false;
    while (!stack.empty()) {
        if (res.nodes > 0 && out_of_time()) {
            timed_out = true;
            break;
        }
        Subproblem sub = std::move(stack.back());
        stack.pop_back();
        if (state.prunable(sub.local_lb))
            continue;

        const NodeView view = materialize(root, sub.allowed);
        const bool is_root = res.nodes == 0;
        ++res.nodes;
        res.height = std::max(res.height, sub.depth);

        SubgradientConfig sc;
        sc.max_iters = is_root ? cfg.root_iters : cfg.node_iters;
        sc.mu0 = cfg.mu0;
        sc.halve_after = cfg.halve_after;
        sc.mu_min = cfg.mu_min;
        sc.window = cfg.window;
        sc.mode = cfg.mode;
        sc.gap_tol = state.gap_tol;
        sc.integral = state.integral;
        sc.deadline = state.deadline;
        const BoundsReport rep = optimize_bounds(
            view.instance, multipliers_to_view(*sub.lambda, view), state.incumbent, sc);
        res.iterations += rep.iterations;
        if (!rep.best_assignment.empty())
            state.offer(rep.best_ub, view.lift(rep.best_assignment));
        const double node_lb = std::max(sub.local_lb, rep.best_lb);
        if (is_root)
            res.root_lb = node_lb;
        if (state.prunable(node_lb) || view.instance.k() == 0)
            continue;
        if (rep.stop == StopReason::deadline) {
            sub.local_lb = node_lb;
            stack.push_back(std::move(sub));
            timed_out = true;
            break;
        }

        const BranchScore score = select_branch_position(
            view, rep.multipliers, node_lb, rep.fractional, sub.depth, state, cfg);
        res.probes += score.probes;
        res.iterations += score.probe_iterations;
        if (state.prunable(node_lb))
            continue;

        auto lambda = std::make_shared<Multipliers>(*sub.lambda);
        multipliers_from_view(rep.multipliers, view, *lambda);
        Subproblem parent{std::move(sub.allowed), sub.depth, std::move(lambda), node_lb};
        std::vector<Subproblem> children = expand(parent, score, cfg);
        for (auto it = children.rbegin(); it != children.rend(); ++it)
            if (!state.prunable(it->local_lb))
                stack.push_back(std::move(*it));
    }
    if (res.nodes == 0)
        res.nodes = 1;

    res.assignment = lexicographic_polish(inst, to_original(state.incumbent_assignment));
    res.value = assignment_cost(inst, res.assignment);
    res.ub = res.value;
    double open_lb = std::numeric_limits<double>::infinity();
    if (timed_out)
        for (const Subproblem &s : stack)
            if (!state.prunable(s.local_lb))
                open_lb = std::min(open_lb, s.local_lb);
    if (open_lb == std::numeric_limits<double>::infinity()) {
        res.status = SolveStatus::optimal;
        res.lb = res.ub;
    } else {
        res.status = SolveStatus::feasible;
        res.lb = std::min(open_lb, res.ub);
    }
    res.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return res;
}

} // namespace scp
