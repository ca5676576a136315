/** @file
 * @brief Optimality-preserving preprocessing with a trace that maps reduced
 * solutions back to the original index space.
 */
#ifndef SCP_REDUCE_HPP
#define SCP_REDUCE_HPP

#include "scp/instance.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace scp {

struct ReductionStep {
    enum class Kind { eliminate, fold };
    Kind kind;
    /// Both indices refer to the original instance.
    int position;
    int rotamer;

    friend bool operator==(const ReductionStep &, const ReductionStep &) = default;
};

struct ReductionTrace {
    int original_k = 0;
    std::vector<int> original_sizes;
    std::vector<ReductionStep> steps;

    static ReductionTrace identity(const Instance &inst);

    /// Surviving original positions and, per surviving position, its
    /// surviving original rotamers, in reduced-space order.
    struct Layout {
        std::vector<int> positions;
        std::vector<std::vector<int>> rotamers;
        /// forced[p] >= 0 when original position p was folded away.
        std::vector<int> forced;
    };
    Layout replay() const;
};

class TraceMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Reduction {
    Instance instance;
    ReductionTrace trace;
};

inline constexpr int kGoldsteinPassCap = 50;

/// Singles Goldstein dead-end elimination, swept to a fixed point.
Reduction goldstein_eliminate(const Instance &inst, int pass_cap = kGoldsteinPassCap);
/// Continue an existing trace (its steps are kept).
Reduction goldstein_eliminate(const Instance &inst, ReductionTrace trace,
                              int pass_cap = kGoldsteinPassCap);

/// Fold every position with exactly one rotamer into the constant.
Reduction fold_singletons(const Instance &inst, ReductionTrace trace);

/// Goldstein elimination followed by singleton folding.
Reduction presolve(const Instance &inst);

Assignment lift_assignment(const ReductionTrace &trace, const Assignment &reduced);

nlohmann::json trace_to_json(const ReductionTrace &trace);
ReductionTrace trace_from_json(const nlohmann::json &j);

} // namespace scp

#endif
