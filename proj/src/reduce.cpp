#include "scp/reduce.hpp"

#include <algorithm>

namespace scp {

ReductionTrace ReductionTrace::identity(const Instance &inst) {
    return {inst.k(), inst.sizes(), {}};
}

ReductionTrace::Layout ReductionTrace::replay() const {
    if (static_cast<int>(original_sizes.size()) != original_k)
        throw TraceMismatch("trace shape is inconsistent");
    Layout layout;
    layout.forced.assign(original_k, -1);
    std::vector<std::vector<int>> alive(original_k);
    for (int p = 0; p < original_k; ++p) {
        alive[p].resize(original_sizes[p]);
        for (int r = 0; r < original_sizes[p]; ++r)
            alive[p][r] = r;
    }
    std::vector<char> removed(original_k, 0);
    for (const ReductionStep &s : steps) {
        if (s.position < 0 || s.position >= original_k || removed[s.position])
            throw TraceMismatch("trace step refers to an unknown position");
        auto &rots = alive[s.position];
        auto it = std::find(rots.begin(), rots.end(), s.rotamer);
        if (it == rots.end())
            throw TraceMismatch("trace step refers to an eliminated rotamer");
        if (s.kind == ReductionStep::Kind::eliminate) {
            if (rots.size() == 1)
                throw TraceMismatch("trace eliminates the last rotamer");
            rots.erase(it);
        } else {
            layout.forced[s.position] = s.rotamer;
            removed[s.position] = 1;
        }
    }
    for (int p = 0; p < original_k; ++p) {
        if (removed[p])
            continue;
        layout.positions.push_back(p);
        layout.rotamers.push_back(alive[p]);
    }
    return layout;
}

namespace {

// Largest value of c_u - c_v + sum_j min_w (c_uw - c_vw) stays <= this and u
// survives; ties and float noise keep the rotamer.
constexpr double kStrictMargin = 1e-9;

double pair_cost(const Instance &inst, int p, int u, int q, int w) {
    if (p < q) {
        const EdgeBlock *blk = inst.block(p, q);
        return blk ? blk->cost(u, w) : 0.0;
    }
    const EdgeBlock *blk = inst.block(q, p);
    return blk ? blk->cost(w, u) : 0.0;
}

bool dominated(const Instance &inst, const std::vector<std::vector<char>> &alive,
               int i, int u, int v) {
    double sum = inst.node_cost(i, u) - inst.node_cost(i, v);
    for (int j = 0; j < inst.k(); ++j) {
        if (j == i)
            continue;
        double best = std::numeric_limits<double>::infinity();
        for (int w = 0; w < inst.size(j); ++w)
            if (alive[j][w])
                best = std::min(best, pair_cost(inst, i, u, j, w) -
                                          pair_cost(inst, i, v, j, w));
        sum += best;
    }
    return sum > kStrictMargin;
}

} // namespace

Reduction goldstein_eliminate(const Instance &inst, int pass_cap) {
    return goldstein_eliminate(inst, ReductionTrace::identity(inst), pass_cap);
}

Reduction goldstein_eliminate(const Instance &inst, ReductionTrace trace,
                              int pass_cap) {
    const ReductionTrace::Layout layout = trace.replay();
    if (static_cast<int>(layout.positions.size()) != inst.k())
        throw TraceMismatch("trace does not describe this instance");
    const int k = inst.k();
    std::vector<std::vector<char>> alive(k);
    std::vector<int> alive_count(k);
    for (int p = 0; p < k; ++p) {
        if (static_cast<int>(layout.rotamers[p].size()) != inst.size(p))
            throw TraceMismatch("trace does not describe this instance");
        alive[p].assign(inst.size(p), 1);
        alive_count[p] = inst.size(p);
    }

    for (int pass = 0; pass < pass_cap; ++pass) {
        bool changed = false;
        for (int i = 0; i < k; ++i) {
            for (int u = 0; u < inst.size(i) && alive_count[i] > 1; ++u) {
                if (!alive[i][u])
                    continue;
                for (int v = 0; v < inst.size(i); ++v) {
                    if (v == u || !alive[i][v])
                        continue;
                    if (dominated(inst, alive, i, u, v)) {
                        alive[i][u] = 0;
                        --alive_count[i];
                        trace.steps.push_back({ReductionStep::Kind::eliminate,
                                               layout.positions[i],
                                               layout.rotamers[i][u]});
                        changed = true;
                        break;
                    }
                }
            }
        }
        if (!changed)
            break;
    }

    AllowedSets keep(k);
    for (int p = 0; p < k; ++p)
        for (int r = 0; r < inst.size(p); ++r)
            if (alive[p][r])
                keep[p].push_back(r);
    Instance out = restrict_instance(inst, keep);
    out.set_name(inst.name());
    return {std::move(out), std::move(trace)};
}

Reduction fold_singletons(const Instance &inst, ReductionTrace trace) {
    const ReductionTrace::Layout layout = trace.replay();
    if (static_cast<int>(layout.positions.size()) != inst.k())
        throw TraceMismatch("trace does not describe this instance");
    Instance out = inst;
    // Highest index first so lower reduced indices stay valid.
    for (int p = inst.k() - 1; p >= 0; --p) {
        if (inst.size(p) != 1)
            continue;
        trace.steps.push_back({ReductionStep::Kind::fold, layout.positions[p],
                               layout.rotamers[p][0]});
        out = fix_rotamer(out, p, 0);
    }
    return {std::move(out), std::move(trace)};
}

Reduction presolve(const Instance &inst) {
    Reduction r = goldstein_eliminate(inst);
    return fold_singletons(r.instance, std::move(r.trace));
}

Assignment lift_assignment(const ReductionTrace &trace, const Assignment &reduced) {
    const ReductionTrace::Layout layout = trace.replay();
    if (reduced.size() != layout.positions.size())
        throw TraceMismatch("assignment length does not match the reduced instance");
    Assignment original(trace.original_k, -1);
    for (int p = 0; p < trace.original_k; ++p)
        if (layout.forced[p] >= 0)
            original[p] = layout.forced[p];
    for (std::size_t i = 0; i < reduced.size(); ++i) {
        const auto &rots = layout.rotamers[i];
        if (reduced[i] < 0 || reduced[i] >= static_cast<int>(rots.size()))
            throw TraceMismatch("assignment index out of range for the reduced instance");
        original[layout.positions[i]] = rots[reduced[i]];
    }
    return original;
}

nlohmann::json trace_to_json(const ReductionTrace &trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const ReductionStep &s : trace.steps)
        steps.push_back({{"op", s.kind == ReductionStep::Kind::eliminate ? "eliminate" : "fold"},
                         {"position", s.position},
                         {"rotamer", s.rotamer}});
    return {{"original_k", trace.original_k},
            {"original_sizes", trace.original_sizes},
            {"steps", steps}};
}

ReductionTrace trace_from_json(const nlohmann::json &j) {
    ReductionTrace t;
    t.original_k = j.at("original_k").get<int>();
    t.original_sizes = j.at("original_sizes").get<std::vector<int>>();
    for (const auto &s : j.at("steps")) {
        const std::string op = s.at("op").get<std::string>();
        ReductionStep::Kind kind;
        if (op == "eliminate")
            kind = ReductionStep::Kind::eliminate;
        else if (op == "fold")
            kind = ReductionStep::Kind::fold;
        else
            throw TraceMismatch("unknown trace op '" + op + "'");
        t.steps.push_back({kind, s.at("position").get<int>(), s.at("rotamer").get<int>()});
    }
    t.replay(); // validates
    return t;
}

} // namespace scp
