#include "scp/relax.hpp"

#include <algorithm>
#include <cmath>

namespace scp {

// --- Multipliers -------------------------------------------------------------

Multipliers::Multipliers(const std::vector<int> &sizes)
    : k_(static_cast<int>(sizes.size())) {
    const std::size_t slots = k_ > 1 ? pair_slot(k_, k_ - 2, k_ - 1) + 1 : 0;
    values_.resize(slots);
    restricted_.assign(slots, 0);
    for (int p = 0; p < k_; ++p)
        for (int q = p + 2; q < k_; ++q)
            values_[pair_slot(k_, p, q)] = Eigen::VectorXd::Zero(sizes[p]);
}

void Multipliers::set_sign_restricted(int p, int q, bool restricted) {
    const std::size_t s = pair_slot(k_, p, q);
    restricted_[s] = restricted ? 1 : 0;
    if (restricted)
        values_[s] = values_[s].cwiseMin(0.0);
}

double Multipliers::max_abs() const {
    double m = 0.0;
    for (const auto &v : values_)
        if (v.size() > 0)
            m = std::max(m, v.cwiseAbs().maxCoeff());
    return m;
}

// --- reduced formulation -----------------------------------------------------

ReducedFormulation build_reduced_formulation(const Instance &inst) {
    ReducedFormulation f;
    f.k = inst.k();
    const std::size_t slots = f.k > 1 ? pair_slot(f.k, f.k - 2, f.k - 1) + 1 : 0;
    f.inequality.assign(slots, 0);
    f.kept_edges.assign(slots, 0);
    for (int p = 0; p < f.k; ++p) {
        for (int q = p + 1; q < f.k; ++q) {
            const std::size_t s = pair_slot(f.k, p, q);
            const EdgeBlock *blk = inst.block(p, q);
            if (!blk) {
                f.inequality[s] = 1;
                continue;
            }
            const bool has_positive = (blk->cost.array() > 0.0).any();
            f.inequality[s] = has_positive ? 0 : 1;
            if (has_positive)
                f.kept_edges[s] = static_cast<std::size_t>(blk->present.count());
            else
                f.kept_edges[s] = static_cast<std::size_t>(
                    (blk->present && (blk->cost.array() < 0.0)).count());
        }
    }
    return f;
}

Multipliers zero_multipliers(const Instance &inst, RelaxMode mode) {
    Multipliers lambda(inst.sizes());
    if (mode == RelaxMode::reduced) {
        const ReducedFormulation f = build_reduced_formulation(inst);
        for (int p = 0; p < inst.k(); ++p)
            for (int q = p + 2; q < inst.k(); ++q)
                lambda.set_sign_restricted(p, q, f.is_inequality(p, q));
    }
    return lambda;
}

// --- direct profit evaluation ------------------------------------------------

namespace {

// Best backward term of v in V_q towards position p, with its argmin.
// Lowest index wins ties.  In the inequality case the node may select no
// partner, which contributes 0.
std::pair<double, int> backward_term(const Instance &inst, const Multipliers &lambda,
                                     int p, int q, int v, bool inequality) {
    const EdgeBlock *blk = inst.block(p, q);
    const Eigen::VectorXd &lam = lambda.values(p, q);
    const int n = inst.size(p);
    if (inequality) {
        double best = 0.0;
        int arg = -1;
        if (blk) {
            for (int u = 0; u < n; ++u) {
                const double c = blk->cost(u, v);
                if (!(c < 0.0))
                    continue;
                const double val = c - lam(u);
                if (val < best) {
                    best = val;
                    arg = u;
                }
            }
        }
        return {best, arg};
    }
    double best = (blk ? blk->cost(0, v) : 0.0) - lam(0);
    int arg = 0;
    for (int u = 1; u < n; ++u) {
        const double val = (blk ? blk->cost(u, v) : 0.0) - lam(u);
        if (val < best) {
            best = val;
            arg = u;
        }
    }
    return {best, arg};
}

double own_term(const Instance &inst, const Multipliers &lambda, int p, int u) {
    double own = inst.node_cost(p, u);
    for (int q = p + 2; q < inst.k(); ++q)
        own += lambda.value(p, q, u);
    return own;
}

} // namespace

double node_profit(const Instance &inst, const Multipliers &lambda, NodeRef v,
                   RelaxMode mode) {
    std::optional<ReducedFormulation> f;
    if (mode == RelaxMode::reduced)
        f = build_reduced_formulation(inst);
    double delta = own_term(inst, lambda, v.position, v.rotamer);
    for (int p = 0; p + 2 <= v.position; ++p) {
        const bool ineq = f && f->is_inequality(p, v.position);
        delta += backward_term(inst, lambda, p, v.position, v.rotamer, ineq).first;
    }
    return delta;
}

// --- Relaxation context ------------------------------------------------------

Relaxation::Relaxation(const Instance &inst, RelaxMode mode)
    : inst_(&inst), mode_(mode), formulation_(build_reduced_formulation(inst)),
      lambda_(zero_multipliers(inst, mode)) {
    const int k = inst.k();
    own_.resize(k);
    profit_.resize(k);
    const std::size_t slots = k > 1 ? pair_slot(k, k - 2, k - 1) + 1 : 0;
    min_term_.resize(slots);
    arg_term_.resize(slots);
    set_multipliers(lambda_);
}

void Relaxation::set_multipliers(const Multipliers &lambda) {
    const Instance &inst = *inst_;
    const int k = inst.k();
    if (lambda.k() != k)
        throw std::invalid_argument("multipliers do not match instance");
    lambda_ = lambda;
    for (int p = 0; p < k; ++p)
        for (int q = p + 2; q < k; ++q) {
            if (lambda_.values(p, q).size() != inst.size(p))
                throw std::invalid_argument("multipliers do not match instance");
            const bool restricted =
                mode_ == RelaxMode::reduced && formulation_.is_inequality(p, q);
            lambda_.set_sign_restricted(p, q, restricted);
        }
    for (int p = 0; p < k; ++p)
        recompute_own(p);
    for (int p = 0; p < k; ++p)
        for (int q = p + 2; q < k; ++q)
            recompute_block(p, q);
    for (int q = 0; q < k; ++q)
        assemble_profit(q);
}

void Relaxation::recompute_own(int p) {
    const int n = inst_->size(p);
    Eigen::VectorXd &own = own_[p];
    own.resize(n);
    for (int u = 0; u < n; ++u)
        own(u) = own_term(*inst_, lambda_, p, u);
}

void Relaxation::recompute_block(int p, int q) {
    const int k = inst_->k();
    const std::size_t s = pair_slot(k, p, q);
    const bool ineq = mode_ == RelaxMode::reduced && formulation_.is_inequality(p, q);
    const int n = inst_->size(q);
    Eigen::VectorXd &m = min_term_[s];
    Eigen::VectorXi &a = arg_term_[s];
    m.resize(n);
    a.resize(n);
    for (int v = 0; v < n; ++v) {
        auto [val, arg] = backward_term(*inst_, lambda_, p, q, v, ineq);
        m(v) = val;
        a(v) = arg;
    }
}

void Relaxation::assemble_profit(int q) {
    const int k = inst_->k();
    Eigen::VectorXd &delta = profit_[q];
    delta = own_[q];
    for (int p = 0; p + 2 <= q; ++p)
        delta += min_term_[pair_slot(k, p, q)];
}

void Relaxation::apply_step(const SparseGradient &g, double step) {
    const int k = inst_->k();
    std::vector<char> touched_pair(min_term_.size(), 0);
    std::vector<char> dirty_own(k, 0), dirty_profit(k, 0);
    for (const GradientEntry &e : g) {
        if (e.g == 0.0)
            continue;
        double &lam = lambda_.values(e.p, e.q)(e.u);
        lam += step * e.g;
        if (lambda_.sign_restricted(e.p, e.q))
            lam = std::min(lam, 0.0);
        touched_pair[pair_slot(k, e.p, e.q)] = 1;
        dirty_own[e.p] = 1;
        dirty_profit[e.p] = 1;
        dirty_profit[e.q] = 1;
    }
    last_recomputed_ = 0;
    for (int p = 0; p < k; ++p) {
        if (dirty_own[p])
            recompute_own(p);
        for (int q = p + 2; q < k; ++q)
            if (touched_pair[pair_slot(k, p, q)]) {
                recompute_block(p, q);
                ++last_recomputed_;
            }
    }
    for (int q = 0; q < k; ++q)
        if (dirty_profit[q])
            assemble_profit(q);
}

RelaxSolution Relaxation::solve() const {
    const Instance &inst = *inst_;
    const int k = inst.k();
    RelaxSolution sol;
    sol.profits = profit_;
    sol.path.assign(k, 0);
    if (k == 0) {
        sol.dual_value = inst.constant();
        return sol;
    }

    // Layered DAG: positions are layers, consecutive-position edges carry
    // c_uv + delta(v).
    std::vector<Eigen::VectorXd> dist(k);
    std::vector<Eigen::VectorXi> back(k);
    dist[0] = profit_[0];
    for (int i = 1; i < k; ++i) {
        const int prev_n = inst.size(i - 1);
        const int n = inst.size(i);
        const EdgeBlock *blk = inst.block(i - 1, i);
        dist[i].resize(n);
        back[i].resize(n);
        for (int v = 0; v < n; ++v) {
            double best = dist[i - 1](0) + (blk ? blk->cost(0, v) : 0.0);
            int arg = 0;
            for (int u = 1; u < prev_n; ++u) {
                const double val = dist[i - 1](u) + (blk ? blk->cost(u, v) : 0.0);
                if (val < best) {
                    best = val;
                    arg = u;
                }
            }
            dist[i](v) = best + profit_[i](v);
            back[i](v) = arg;
        }
    }
    Eigen::Index last = 0;
    const double best = dist[k - 1].minCoeff(&last);
    int node = static_cast<int>(last);
    for (Eigen::Index v = 0; v < dist[k - 1].size(); ++v)
        if (dist[k - 1](v) == best) {
            node = static_cast<int>(v);
            break;
        }
    for (int i = k - 1; i >= 0; --i) {
        sol.path[i] = node;
        if (i > 0)
            node = back[i](node);
    }
    sol.dual_value = best + inst.constant();

    sol.partners.assign(min_term_.size(), -1);
    for (int p = 0; p < k; ++p)
        for (int q = p + 2; q < k; ++q) {
            const std::size_t s = pair_slot(k, p, q);
            sol.partners[s] = arg_term_[s](sol.path[q]);
        }
    return sol;
}

// --- free functions ----------------------------------------------------------

RelaxSolution solve_relaxation(const Instance &inst, const Multipliers &lambda,
                               RelaxMode mode) {
    Relaxation rel(inst, mode);
    rel.set_multipliers(lambda);
    return rel.solve();
}

PrimalValue evaluate_primal(const Instance &inst, const RelaxSolution &sol) {
    return {sol.path, assignment_cost(inst, sol.path)};
}

SparseGradient subgradient_vector(const Instance &inst, const RelaxSolution &sol) {
    SparseGradient g;
    const int k = inst.k();
    for (int p = 0; p < k; ++p)
        for (int q = p + 2; q < k; ++q) {
            const int on_path = sol.path[p];
            const int partner = sol.partner(p, q);
            if (partner == on_path)
                continue;
            g.push_back({p, q, on_path, 1.0});
            if (partner >= 0)
                g.push_back({p, q, partner, -1.0});
        }
    return g;
}

std::vector<Eigen::VectorXd> fractional_primal(const std::vector<Assignment> &recent,
                                               const std::vector<int> &sizes) {
    if (recent.empty())
        throw std::invalid_argument("fractional_primal needs at least one solution");
    std::vector<Eigen::VectorXd> frac;
    frac.reserve(sizes.size());
    for (int n : sizes)
        frac.push_back(Eigen::VectorXd::Zero(n));
    const double w = 1.0 / static_cast<double>(recent.size());
    for (const Assignment &a : recent)
        for (std::size_t p = 0; p < sizes.size(); ++p)
            frac[p](a[p]) += w;
    return frac;
}

const char *to_string(StopReason r) {
    switch (r) {
    case StopReason::zero_gradient: return "zero_gradient";
    case StopReason::gap_closed: return "gap_closed";
    case StopReason::cutoff: return "cutoff";
    case StopReason::step_size: return "step_size";
    case StopReason::iteration_cap: return "iteration_cap";
    case StopReason::deadline: return "deadline";
    }
    return "unknown";
}

double subgradient_step(double mu, double ub, double dual, const SparseGradient &g) {
    double norm2 = 0.0;
    for (const GradientEntry &e : g)
        norm2 += e.g * e.g;
    return norm2 > 0.0 ? mu * (ub - dual) / norm2 : 0.0;
}

bool gap_closed(double ub, double lb, double gap_tol, bool integral) {
    if (integral)
        return ub - lb <= 1.0 - 1e-9;
    return ub - lb <= gap_tol;
}

BoundsReport optimize_bounds(const Instance &inst, const Multipliers &lambda0,
                             double incumbent_ub, const SubgradientConfig &cfg) {
    BoundsReport report;
    report.best_ub = incumbent_ub;
    Relaxation rel(inst, cfg.mode);
    rel.set_multipliers(lambda0);
    report.multipliers = rel.multipliers();

    std::deque<Assignment> window;
    double mu = cfg.mu0;
    int since_improve = 0;

    for (int it = 0; it < cfg.max_iters; ++it) {
        if (it > 0 && cfg.deadline && Clock::now() >= *cfg.deadline) {
            report.stop = StopReason::deadline;
            break;
        }
        const RelaxSolution sol = rel.solve();
        ++report.iterations;
        if (sol.dual_value > report.best_lb) {
            report.best_lb = sol.dual_value;
            report.multipliers = rel.multipliers();
            since_improve = 0;
        } else {
            ++since_improve;
        }
        const PrimalValue primal = evaluate_primal(inst, sol);
        if (primal.value < report.best_ub) {
            report.best_ub = primal.value;
            report.best_assignment = primal.assignment;
        }
        window.push_back(sol.path);
        if (static_cast<int>(window.size()) > cfg.window)
            window.pop_front();
        if (cfg.record_history)
            report.history.emplace_back(report.best_lb, report.best_ub);

        if (gap_closed(report.best_ub, report.best_lb, cfg.gap_tol, cfg.integral)) {
            report.stop = StopReason::gap_closed;
            break;
        }
        if (report.best_lb >= cfg.lb_cutoff) {
            report.stop = StopReason::cutoff;
            break;
        }

        SparseGradient g = subgradient_vector(inst, sol);
        // Projected direction: a restricted entry sitting at 0 cannot move up.
        std::erase_if(g, [&](const GradientEntry &e) {
            return e.g > 0.0 && rel.multipliers().sign_restricted(e.p, e.q) &&
                   rel.multipliers().value(e.p, e.q, e.u) >= 0.0;
        });
        if (g.empty()) {
            report.stop = StopReason::zero_gradient;
            break;
        }
        if (cfg.halve_after > 0 && since_improve >= cfg.halve_after) {
            mu *= 0.5;
            since_improve = 0;
        }
        if (mu < cfg.mu_min) {
            report.stop = StopReason::step_size;
            break;
        }
        rel.apply_step(g, subgradient_step(mu, report.best_ub, sol.dual_value, g));
    }

    std::vector<Assignment> recent(window.begin(), window.end());
    if (!recent.empty())
        report.fractional = fractional_primal(recent, inst.sizes());
    return report;
}

} // namespace scp
