/** @file
 * @brief Lagrangian relaxation of the SCP integer program, solved as a
 * shortest path over node profits, and the subgradient loop around it.
 *
 * Positions are taken in instance order.  The linking constraints between a
 * node v and a later position q > r(v)+1 are dualized with multiplier
 * lambda_v^q; what remains is a path through consecutive positions plus an
 * independent best backward partner per node and earlier non-neighbor
 * position, both folded into the node profit.
 */
#ifndef SCP_RELAX_HPP
#define SCP_RELAX_HPP

#include "scp/instance.hpp"

#include <chrono>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

namespace scp {

enum class RelaxMode {
    full,    ///< every position pair uses the equality linking constraints
    reduced, ///< all-non-positive pairs use inequality linking, sign-restricted
};

/// Index of the unordered position pair p < q in a k x k upper triangle.
inline std::size_t pair_slot(int k, int p, int q) {
    const auto kk = static_cast<std::size_t>(k);
    const auto pp = static_cast<std::size_t>(p);
    return pp * kk - pp * (pp + 1) / 2 + static_cast<std::size_t>(q - p - 1);
}

/**
 * Multipliers lambda_u^q for u in V_p and q > p + 1.  Neighboring pairs carry
 * no entries.  Sign-restricted pairs keep every entry <= 0.
 */
class Multipliers {
public:
    Multipliers() = default;
    explicit Multipliers(const std::vector<int> &sizes);

    int k() const { return k_; }
    static bool dualized(int p, int q) { return q > p + 1; }

    const Eigen::VectorXd &values(int p, int q) const {
        return values_[pair_slot(k_, p, q)];
    }
    Eigen::VectorXd &values(int p, int q) { return values_[pair_slot(k_, p, q)]; }
    double value(int p, int q, int u) const { return values(p, q)(u); }

    bool sign_restricted(int p, int q) const {
        return restricted_[pair_slot(k_, p, q)] != 0;
    }
    /// Setting a pair restricted clamps its entries to <= 0.
    void set_sign_restricted(int p, int q, bool restricted);

    /// Largest absolute entry; 0 for an empty set.
    double max_abs() const;

private:
    int k_ = 0;
    std::vector<Eigen::VectorXd> values_;
    std::vector<char> restricted_;
};

/// Pair classification for the reduced formulation.  A pair is
/// inequality-governed when no edge between the two positions is positive;
/// its zero-cost edges are dropped and its multipliers are sign-restricted.
struct ReducedFormulation {
    int k = 0;
    std::vector<char> inequality;
    std::vector<std::size_t> kept_edges;

    bool is_inequality(int p, int q) const {
        return inequality[pair_slot(k, p, q)] != 0;
    }
    std::size_t kept(int p, int q) const { return kept_edges[pair_slot(k, p, q)]; }
};

ReducedFormulation build_reduced_formulation(const Instance &inst);

struct RelaxSolution {
    Assignment path;
    /// partner[pair_slot(k, p, q)] for q > p + 1: backward partner in V_p of
    /// the path node at q, or -1 when none was selected (reduced mode).
    std::vector<int> partners;
    std::vector<Eigen::VectorXd> profits;
    double dual_value = 0.0;

    int partner(int p, int q) const {
        return partners[pair_slot(static_cast<int>(path.size()), p, q)];
    }
};

struct GradientEntry {
    int p, q, u;
    double g;
};

using SparseGradient = std::vector<GradientEntry>;

/**
 * Relaxation context over one instance: owns the multipliers and the cached
 * profit terms, and keeps them consistent across multiplier steps by
 * recomputing only the blocks a step touched.
 */
class Relaxation {
public:
    Relaxation(const Instance &inst, RelaxMode mode);

    const Instance &instance() const { return *inst_; }
    RelaxMode mode() const { return mode_; }
    const Multipliers &multipliers() const { return lambda_; }
    const std::vector<Eigen::VectorXd> &profits() const { return profit_; }

    /// Replace the multipliers (projected onto the sign restrictions) and
    /// rebuild every cached term.
    void set_multipliers(const Multipliers &lambda);

    /// lambda <- lambda + step * g, projected; incremental profit update.
    void apply_step(const SparseGradient &g, double step);

    RelaxSolution solve() const;

    /// Profit blocks rebuilt on the last apply_step (for diagnostics).
    std::size_t last_blocks_recomputed() const { return last_recomputed_; }

private:
    void recompute_block(int p, int q);
    void recompute_own(int p);
    void assemble_profit(int q);

    const Instance *inst_;
    RelaxMode mode_;
    ReducedFormulation formulation_;
    Multipliers lambda_;
    std::vector<Eigen::VectorXd> own_;      // c_v + sum of v's own multipliers
    std::vector<Eigen::VectorXd> min_term_; // per dualized pair, over V_q
    std::vector<Eigen::VectorXi> arg_term_;
    std::vector<Eigen::VectorXd> profit_;
    std::size_t last_recomputed_ = 0;
};

/// Multipliers with all entries zero and sign flags set for `mode`.
Multipliers zero_multipliers(const Instance &inst, RelaxMode mode);

/// Profit delta(v) evaluated directly from its definition.
double node_profit(const Instance &inst, const Multipliers &lambda, NodeRef v,
                   RelaxMode mode = RelaxMode::full);

RelaxSolution solve_relaxation(const Instance &inst, const Multipliers &lambda,
                               RelaxMode mode = RelaxMode::full);

struct PrimalValue {
    Assignment assignment;
    double value = 0.0;
};

/// Objective of the assignment read off the relaxation path.
PrimalValue evaluate_primal(const Instance &inst, const RelaxSolution &sol);

/// g_u^q = [u on path] - [u is the partner of the path node at q].
SparseGradient subgradient_vector(const Instance &inst, const RelaxSolution &sol);

/// Uniform average of 0/1 indicator vectors of the given assignments.
std::vector<Eigen::VectorXd> fractional_primal(const std::vector<Assignment> &recent,
                                               const std::vector<int> &sizes);

using Clock = std::chrono::steady_clock;

struct SubgradientConfig {
    int max_iters = 2000;
    double mu0 = 2.0;
    /// Non-improving iterations before mu is halved; 0 disables halving.
    int halve_after = 30;
    double mu_min = 1e-3;
    int window = 10;
    RelaxMode mode = RelaxMode::full;
    double gap_tol = 1e-6;
    /// Exploit an integral objective: stop once UB - LB < 1.
    bool integral = false;
    /// Stop as soon as the lower bound reaches this value.
    double lb_cutoff = std::numeric_limits<double>::infinity();
    std::optional<Clock::time_point> deadline;
    bool record_history = false;
};

enum class StopReason { zero_gradient, gap_closed, cutoff, step_size, iteration_cap, deadline };

const char *to_string(StopReason r);

struct BoundsReport {
    double best_lb = -std::numeric_limits<double>::infinity();
    double best_ub = std::numeric_limits<double>::infinity();
    /// Empty when no evaluated primal beat the supplied incumbent.
    Assignment best_assignment;
    /// Multipliers that produced best_lb.
    Multipliers multipliers;
    std::vector<Eigen::VectorXd> fractional;
    int iterations = 0;
    StopReason stop = StopReason::iteration_cap;
    /// (best_lb, best_ub) after each iteration, when requested.
    std::vector<std::pair<double, double>> history;
};

/// Step length t = mu * (ub - dual) / ||g||^2.
double subgradient_step(double mu, double ub, double dual, const SparseGradient &g);

/// True when an upper bound and a lower bound certify optimality.
bool gap_closed(double ub, double lb, double gap_tol, bool integral);

BoundsReport optimize_bounds(const Instance &inst, const Multipliers &lambda0,
                             double incumbent_ub, const SubgradientConfig &cfg);

} // namespace scp

#endif
