/** @file
 * @brief Exact SCP solver: Lagrangian bounds inside a depth-first
 * branch-and-bound with strong-branching position selection.
 */
#ifndef SCP_BNB_HPP
#define SCP_BNB_HPP

#include "scp/instance.hpp"
#include "scp/reduce.hpp"
#include "scp/relax.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace scp {

struct SolverConfig {
    RelaxMode mode = RelaxMode::full;
    bool presolve = true;
    /// Absolute pruning tolerance for non-integral objectives.
    double gap_tol = 1e-9;
    /// Rotamer sets larger than this are split in two instead of fanned out.
    int split_threshold = 64;
    int root_iters = 2000;
    int node_iters = 200;
    double mu0 = 2.0;
    int halve_after = 30;
    double mu_min = 1e-3;
    int window = 10;
    int probe_iters = 8;
    double probe_mu = 4.0;
    int max_candidates = 10;
    int local_search_iters = 100;
    int local_search_patience = 10;
    std::optional<double> time_limit; ///< seconds
    std::uint64_t seed = 0;
};

struct LocalSearchResult {
    Assignment assignment;
    double value = 0.0;
    int improving_moves = 0;
    int iterations = 0;
};

/// Greedy start (cheapest self energy per position), then randomly chosen
/// positions are re-optimized against the rest until `patience`
/// consecutive attempts fail or `max_iters` attempts are spent.
LocalSearchResult local_search(const Instance &inst, std::uint64_t seed,
                               int max_iters = 100, int patience = 10);

/// Single-position moves to a smaller rotamer index that do not increase
/// the objective, repeated until none applies.
Assignment lexicographic_polish(const Instance &inst, Assignment a);

/// Positions permuted so that position i of the result is `order[i]` of the
/// input.
Instance reorder_positions(const Instance &inst, const std::vector<int> &order);

/// Stable order of positions by increasing rotamer count.
std::vector<int> size_order(const Instance &inst);

/// Number of dualized linking constraints that carry any nonzero edge cost
/// under the instance's current position order.
std::size_t dualized_constraint_count(const Instance &inst);

/// Position order used by the solver: the size order, unless the given order
/// dualizes strictly fewer cost-carrying constraints.
std::vector<int> solver_order(const Instance &inst);

struct Subproblem {
    AllowedSets allowed;
    int depth = 0;
    std::shared_ptr<const Multipliers> lambda;
    double local_lb = -std::numeric_limits<double>::infinity();
};

/**
 * A subproblem materialized as an instance of its free positions only:
 * disallowed rotamers removed, singleton positions folded into node costs
 * and the constant.
 */
struct NodeView {
    Instance instance;
    AllowedSets allowed;
    std::vector<int> positions;
    std::vector<std::vector<int>> rotamers;

    Assignment lift(const Assignment &view_assignment) const;
};

NodeView materialize(const Instance &root, const AllowedSets &allowed);

/// Fix view position `pos` to view rotamer `rot`.
NodeView fix_in_view(const NodeView &view, int pos, int rot);

/// Multipliers of `view`, copied from root-indexed multipliers.
Multipliers multipliers_to_view(const Multipliers &root, const NodeView &view);
/// Write view multipliers back into a root-indexed set.
void multipliers_from_view(const Multipliers &view_lambda, const NodeView &view,
                           Multipliers &root);
/// Multipliers of `child` = `parent` with one position fixed.
Multipliers multipliers_drop_position(const Multipliers &parent_lambda,
                                       const NodeView &child, int dropped);

struct RotamerProbe {
    int rotamer = 0;    ///< root-space rotamer id
    double child_lb = 0.0;
    double delta = 0.0; ///< child_lb - node lb; +inf when the child is prunable
};

struct BranchScore {
    int position = 0; ///< root-space position id
    double xi = 0.0;
    std::vector<RotamerProbe> per_rotamer;
    bool aborted = false;
    /// Every probed candidate, in probing order.
    struct Candidate {
        int position;  ///< root-space
        double xi;     ///< min delta over the rotamers probed
        bool aborted;
        int probed;
    };
    std::vector<Candidate> candidates;
    int probes = 0;
    int probe_iterations = 0;
};

/// Shared search state visible to probes.
struct SearchState {
    double incumbent = std::numeric_limits<double>::infinity();
    Assignment incumbent_assignment; ///< root space
    bool integral = false;
    double gap_tol = 1e-9;
    std::optional<Clock::time_point> deadline;

    bool prunable(double lb) const { return gap_closed(incumbent, lb, gap_tol, integral); }
    /// Returns true when the offer improved the incumbent.
    bool offer(double value, const Assignment &root_assignment);
};

/// Maximum number of strong-branching candidates at depth `depth` out of
/// `free_positions`.
int candidate_count(int free_positions, int depth, int max_candidates);

BranchScore select_branch_position(const NodeView &view, const Multipliers &view_lambda,
                                   double node_lb,
                                   const std::vector<Eigen::VectorXd> &fractional,
                                   int depth, SearchState &state,
                                   const SolverConfig &cfg);

/// Children of `sub` at the scored position, in traversal order.
std::vector<Subproblem> expand(const Subproblem &sub, const BranchScore &score,
                               const SolverConfig &cfg);

enum class SolveStatus { optimal, feasible, infeasible_input };

const char *to_string(SolveStatus s);

struct SolveResult {
    SolveStatus status = SolveStatus::infeasible_input;
    double value = 0.0;
    Assignment assignment; ///< original index space
    double lb = 0.0;
    double ub = 0.0;
    long nodes = 0;
    int height = 0;
    long iterations = 0;
    long probes = 0;
    double root_lb = 0.0;
    double local_search_value = 0.0;
    double wall_ms = 0.0;
    std::string message;
};

SolveResult solve(const Instance &inst, const SolverConfig &cfg = {});

} // namespace scp

#endif
