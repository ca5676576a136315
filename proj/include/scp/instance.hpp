/** @file
 * @brief k-partite cost model for side-chain placement instances.
 */
#ifndef SCP_INSTANCE_HPP
#define SCP_INSTANCE_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scp {

/// One rotamer index per position.
using Assignment = std::vector<int>;

/// Per-position lists of allowed rotamer indices (sorted, non-empty).
using AllowedSets = std::vector<std::vector<int>>;

struct NodeRef {
    int position = 0;
    int rotamer = 0;

    friend bool operator==(const NodeRef &, const NodeRef &) = default;
    friend auto operator<=>(const NodeRef &, const NodeRef &) = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

/// Dense cost block between positions p < q.  Rows index V_p, columns V_q.
/// An empty block means no edge between the two positions.
struct EdgeBlock {
    Eigen::MatrixXd cost;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> present;

    bool empty() const { return cost.size() == 0; }
};

/**
 * Immutable (after construction) SCP instance: node costs c_v, pairwise
 * edge costs c_uv between distinct positions, and a constant offset that
 * is added to every objective value.
 */
class Instance {
public:
    Instance() = default;
    explicit Instance(std::vector<int> sizes, std::string name = {});

    int k() const { return static_cast<int>(sizes_.size()); }
    const std::vector<int> &sizes() const { return sizes_; }
    int size(int pos) const { return sizes_[pos]; }
    int num_nodes() const;
    /// Number of explicitly stored edge entries (including zero-cost ones).
    std::size_t edge_count() const;

    double node_cost(int pos, int rot) const { return node_cost_[pos](rot); }
    const Eigen::VectorXd &node_costs(int pos) const { return node_cost_[pos]; }

    /// Cost of the edge between two nodes of distinct positions; 0 if absent.
    double edge_cost(NodeRef a, NodeRef b) const;
    /// Block for p < q, or nullptr if no edge joins the positions.
    const EdgeBlock *block(int p, int q) const;

    double constant() const { return constant_; }
    const std::string &name() const { return name_; }

    // Mutators used while building an instance.
    void set_node_cost(int pos, int rot, double cost);
    void set_edge_cost(NodeRef a, NodeRef b, double cost);
    void set_constant(double c) { constant_ = c; }
    void add_constant(double c) { constant_ += c; }
    void set_name(std::string name) { name_ = std::move(name); }

    /// True when every cost and the constant are integers.
    bool integral() const;

    /// Equality up to zero-cost defaults (presence flags and name ignored).
    bool same_costs(const Instance &other) const;

private:
    std::size_t pair_index(int p, int q) const {
        const auto k = static_cast<std::size_t>(sizes_.size());
        const auto pp = static_cast<std::size_t>(p);
        return pp * k - pp * (pp + 1) / 2 + static_cast<std::size_t>(q - p - 1);
    }
    void check_node(NodeRef v) const;

    std::vector<int> sizes_;
    std::vector<Eigen::VectorXd> node_cost_;
    std::vector<EdgeBlock> blocks_;
    double constant_ = 0.0;
    std::string name_;
};

Instance parse_instance(std::istream &in);
Instance parse_instance_string(const std::string &text);
Instance read_instance_file(const std::string &path);

void write_instance(const Instance &inst, std::ostream &out);
std::string instance_to_string(const Instance &inst);

/// Shortest decimal form that round-trips the value exactly.
std::string format_cost(double value);

struct GeneratorParams {
    int k = 3;
    int size_lo = 2, size_hi = 2;
    double density = 1.0;
    double cost_lo = -10.0, cost_hi = 10.0;
    /// Integer costs drawn uniformly from [ceil(lo), floor(hi)].
    bool integer_costs = true;
    /// Only join adjacent positions (chain instances).
    bool chain = false;
    std::uint64_t seed = 0;
};

Instance generate_random(const GeneratorParams &params);

double assignment_cost(const Instance &inst, const Assignment &a);

/// Fold rotamer `rot` of position `pos` into the remaining positions.
Instance fix_rotamer(const Instance &inst, int pos, int rot);

/// Sub-instance keeping only the allowed rotamers of each position.
Instance restrict_instance(const Instance &inst, const AllowedSets &allowed);

AllowedSets full_allowed(const Instance &inst);

class EnumerationCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OracleResult {
    Assignment assignment;
    double value = 0.0;
};

inline constexpr double kDefaultEnumerationCap = 1e7;

/// Exhaustive optimum; ties resolved toward the lexicographically smallest
/// assignment.
OracleResult brute_force(const Instance &inst,
                         double cap = kDefaultEnumerationCap);

} // namespace scp

#endif
