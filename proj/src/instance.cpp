#include "scp/instance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

namespace scp {

Instance::Instance(std::vector<int> sizes, std::string name)
    : sizes_(std::move(sizes)), name_(std::move(name)) {
    for (int n : sizes_) {
        if (n < 1)
            throw std::invalid_argument("position sizes must be >= 1");
    }
    node_cost_.reserve(sizes_.size());
    for (int n : sizes_)
        node_cost_.push_back(Eigen::VectorXd::Zero(n));
    const std::size_t k = sizes_.size();
    blocks_.resize(k * (k > 0 ? k - 1 : 0) / 2);
}

int Instance::num_nodes() const {
    int total = 0;
    for (int n : sizes_)
        total += n;
    return total;
}

std::size_t Instance::edge_count() const {
    std::size_t count = 0;
    for (const auto &b : blocks_) {
        if (!b.empty())
            count += static_cast<std::size_t>(b.present.count());
    }
    return count;
}

void Instance::check_node(NodeRef v) const {
    if (v.position < 0 || v.position >= k() || v.rotamer < 0 ||
        v.rotamer >= sizes_[v.position])
        throw std::out_of_range("node (" + std::to_string(v.position) + "," +
                                std::to_string(v.rotamer) + ") out of range");
}

double Instance::edge_cost(NodeRef a, NodeRef b) const {
    check_node(a);
    check_node(b);
    if (a.position == b.position)
        throw std::invalid_argument("same-position edge");
    if (a.position > b.position)
        std::swap(a, b);
    const EdgeBlock &blk = blocks_[pair_index(a.position, b.position)];
    return blk.empty() ? 0.0 : blk.cost(a.rotamer, b.rotamer);
}

const EdgeBlock *Instance::block(int p, int q) const {
    const EdgeBlock &blk = blocks_[pair_index(p, q)];
    return blk.empty() ? nullptr : &blk;
}

void Instance::set_node_cost(int pos, int rot, double cost) {
    check_node({pos, rot});
    node_cost_[pos](rot) = cost;
}

void Instance::set_edge_cost(NodeRef a, NodeRef b, double cost) {
    check_node(a);
    check_node(b);
    if (a.position == b.position)
        throw std::invalid_argument("same-position edge");
    if (a.position > b.position)
        std::swap(a, b);
    EdgeBlock &blk = blocks_[pair_index(a.position, b.position)];
    if (blk.empty()) {
        blk.cost = Eigen::MatrixXd::Zero(sizes_[a.position], sizes_[b.position]);
        blk.present.setConstant(sizes_[a.position], sizes_[b.position], false);
    }
    blk.cost(a.rotamer, b.rotamer) = cost;
    blk.present(a.rotamer, b.rotamer) = true;
}

bool Instance::integral() const {
    auto is_int = [](double x) { return std::floor(x) == x; };
    if (!is_int(constant_))
        return false;
    for (const auto &c : node_cost_) {
        for (Eigen::Index i = 0; i < c.size(); ++i)
            if (!is_int(c(i)))
                return false;
    }
    for (const auto &b : blocks_) {
        for (Eigen::Index i = 0; i < b.cost.size(); ++i)
            if (!is_int(b.cost.data()[i]))
                return false;
    }
    return true;
}

bool Instance::same_costs(const Instance &other) const {
    if (sizes_ != other.sizes_ || constant_ != other.constant_)
        return false;
    for (int p = 0; p < k(); ++p)
        if (node_cost_[p] != other.node_cost_[p])
            return false;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const EdgeBlock &a = blocks_[i];
        const EdgeBlock &b = other.blocks_[i];
        if (a.empty() && b.empty())
            continue;
        if (a.empty() != b.empty()) {
            const EdgeBlock &nonempty = a.empty() ? b : a;
            if (!nonempty.cost.isZero(0.0))
                return false;
            continue;
        }
        if (a.cost != b.cost)
            return false;
    }
    return true;
}

// --- text format -----------------------------------------------------------

namespace {

struct Line {
    int number;
    std::vector<std::string> tokens;
};

template <typename T>
T parse_number(const std::string &tok, int line, const char *what) {
    T value{};
    const char *first = tok.data();
    const char *last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw ParseError(line, std::string("malformed ") + what + " '" + tok + "'");
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value))
            throw ParseError(line, "non-finite cost '" + tok + "'");
    }
    return value;
}

std::vector<Line> tokenize(std::istream &in) {
    std::vector<Line> lines;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream ss(raw);
        Line line{number, {}};
        for (std::string tok; ss >> tok;)
            line.tokens.push_back(tok);
        if (!line.tokens.empty())
            lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace

Instance parse_instance(std::istream &in) {
    const std::vector<Line> lines = tokenize(in);
    if (lines.empty())
        throw ParseError(1, "missing header 'scp 1'");
    const Line &header = lines.front();
    if (header.tokens.size() != 2 || header.tokens[0] != "scp")
        throw ParseError(header.number, "missing header 'scp 1'");
    if (header.tokens[1] != "1")
        throw ParseError(header.number, "unsupported format version '" +
                                            header.tokens[1] + "'");

    int k = -1;
    int k_line = 0;
    std::vector<int> sizes;
    bool have_sizes = false;
    int sizes_line = 0;
    double constant = 0.0;
    bool have_constant = false;
    std::vector<const Line *> entries;

    for (std::size_t i = 1; i < lines.size(); ++i) {
        const Line &l = lines[i];
        const std::string &key = l.tokens[0];
        if (key == "k") {
            if (k >= 0)
                throw ParseError(l.number, "duplicate 'k'");
            if (l.tokens.size() != 2)
                throw ParseError(l.number, "expected 'k <int>'");
            k = parse_number<int>(l.tokens[1], l.number, "count");
            if (k < 1)
                throw ParseError(l.number, "k must be >= 1");
            k_line = l.number;
        } else if (key == "sizes") {
            if (have_sizes)
                throw ParseError(l.number, "duplicate 'sizes'");
            for (std::size_t t = 1; t < l.tokens.size(); ++t) {
                int n = parse_number<int>(l.tokens[t], l.number, "size");
                if (n < 1)
                    throw ParseError(l.number, "sizes must be >= 1");
                sizes.push_back(n);
            }
            have_sizes = true;
            sizes_line = l.number;
        } else if (key == "constant") {
            if (have_constant)
                throw ParseError(l.number, "duplicate 'constant'");
            if (l.tokens.size() != 2)
                throw ParseError(l.number, "expected 'constant <cost>'");
            constant = parse_number<double>(l.tokens[1], l.number, "cost");
            have_constant = true;
        } else if (key == "node" || key == "edge") {
            entries.push_back(&l);
        } else if (key == "scp") {
            throw ParseError(l.number, "duplicate header");
        } else {
            throw ParseError(l.number, "unknown token '" + key + "'");
        }
    }
    const int eof_line = lines.back().number + 1;
    if (k < 0)
        throw ParseError(eof_line, "missing 'k'");
    if (!have_sizes)
        throw ParseError(eof_line, "missing 'sizes'");
    if (static_cast<int>(sizes.size()) != k)
        throw ParseError(sizes_line, "expected " + std::to_string(k) +
                                         " sizes (k on line " +
                                         std::to_string(k_line) + ")");

    Instance inst(sizes);
    inst.set_constant(constant);

    auto node_at = [&](const Line &l, std::size_t t) {
        NodeRef v{parse_number<int>(l.tokens[t], l.number, "index"),
                  parse_number<int>(l.tokens[t + 1], l.number, "index")};
        if (v.position < 0 || v.position >= k)
            throw ParseError(l.number, "position " + std::to_string(v.position) +
                                           " out of range");
        if (v.rotamer < 0 || v.rotamer >= sizes[v.position])
            throw ParseError(l.number, "rotamer " + std::to_string(v.rotamer) +
                                           " out of range for position " +
                                           std::to_string(v.position));
        return v;
    };

    std::set<NodeRef> seen_nodes;
    std::set<std::pair<NodeRef, NodeRef>> seen_edges;
    for (const Line *lp : entries) {
        const Line &l = *lp;
        if (l.tokens[0] == "node") {
            if (l.tokens.size() != 4)
                throw ParseError(l.number, "expected 'node <pos> <rot> <cost>'");
            NodeRef v = node_at(l, 1);
            double c = parse_number<double>(l.tokens[3], l.number, "cost");
            if (!seen_nodes.insert(v).second)
                throw ParseError(l.number, "duplicate node entry");
            inst.set_node_cost(v.position, v.rotamer, c);
        } else {
            if (l.tokens.size() != 6)
                throw ParseError(l.number,
                                 "expected 'edge <pos> <rot> <pos> <rot> <cost>'");
            NodeRef a = node_at(l, 1);
            NodeRef b = node_at(l, 3);
            double c = parse_number<double>(l.tokens[5], l.number, "cost");
            if (a.position == b.position)
                throw ParseError(l.number, "same-position edge");
            if (b < a)
                std::swap(a, b);
            if (!seen_edges.insert({a, b}).second)
                throw ParseError(l.number, "duplicate edge entry");
            inst.set_edge_cost(a, b, c);
        }
    }
    return inst;
}

Instance parse_instance_string(const std::string &text) {
    std::istringstream in(text);
    return parse_instance(in);
}

Instance read_instance_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    Instance inst = parse_instance(in);
    std::string stem = path;
    if (auto slash = stem.find_last_of('/'); slash != std::string::npos)
        stem.erase(0, slash + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos && dot > 0)
        stem.erase(dot);
    inst.set_name(stem);
    return inst;
}

std::string format_cost(double value) {
    if (value == 0.0)
        return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

void write_instance(const Instance &inst, std::ostream &out) {
    out << "scp 1\n";
    out << "k " << inst.k() << '\n';
    out << "sizes";
    for (int n : inst.sizes())
        out << ' ' << n;
    out << '\n';
    if (inst.constant() != 0.0)
        out << "constant " << format_cost(inst.constant()) << '\n';
    for (int p = 0; p < inst.k(); ++p) {
        for (int r = 0; r < inst.size(p); ++r) {
            double c = inst.node_cost(p, r);
            if (c != 0.0)
                out << "node " << p << ' ' << r << ' ' << format_cost(c) << '\n';
        }
    }
    for (int p = 0; p < inst.k(); ++p) {
        for (int u = 0; u < inst.size(p); ++u) {
            for (int q = p + 1; q < inst.k(); ++q) {
                const EdgeBlock *blk = inst.block(p, q);
                if (!blk)
                    continue;
                for (int v = 0; v < inst.size(q); ++v) {
                    double c = blk->cost(u, v);
                    if (c != 0.0)
                        out << "edge " << p << ' ' << u << ' ' << q << ' ' << v
                            << ' ' << format_cost(c) << '\n';
                }
            }
        }
    }
}

std::string instance_to_string(const Instance &inst) {
    std::ostringstream out;
    write_instance(inst, out);
    return out.str();
}

// --- generator ---------------------------------------------------------------

namespace {

// Portable draws on top of mt19937_64 so the output does not depend on the
// standard library's distribution implementations.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : rng_(seed) {}

    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(rng_() % span);
    }

private:
    std::mt19937_64 rng_;
};

} // namespace

Instance generate_random(const GeneratorParams &params) {
    if (params.k < 1)
        throw std::invalid_argument("k must be >= 1");
    if (params.size_lo < 1 || params.size_lo > params.size_hi)
        throw std::invalid_argument("invalid size range");
    if (!(params.cost_lo <= params.cost_hi))
        throw std::invalid_argument("invalid cost range");
    if (!(params.density >= 0.0 && params.density <= 1.0))
        throw std::invalid_argument("density must lie in [0,1]");

    const double ilo = std::ceil(params.cost_lo);
    const double ihi = std::floor(params.cost_hi);
    if (params.integer_costs && ilo > ihi)
        throw std::invalid_argument("cost range contains no integer");

    Draw draw(params.seed);
    auto cost = [&]() {
        if (params.integer_costs)
            return static_cast<double>(draw.integer(static_cast<std::int64_t>(ilo),
                                                    static_cast<std::int64_t>(ihi)));
        return params.cost_lo + draw.unit() * (params.cost_hi - params.cost_lo);
    };

    std::vector<int> sizes(params.k);
    for (int &n : sizes)
        n = static_cast<int>(draw.integer(params.size_lo, params.size_hi));
    Instance inst(sizes);
    for (int p = 0; p < params.k; ++p)
        for (int r = 0; r < sizes[p]; ++r)
            inst.set_node_cost(p, r, cost());
    for (int p = 0; p < params.k; ++p) {
        for (int q = p + 1; q < params.k; ++q) {
            if (params.chain && q != p + 1)
                continue;
            for (int u = 0; u < sizes[p]; ++u)
                for (int v = 0; v < sizes[q]; ++v)
                    if (draw.unit() < params.density)
                        inst.set_edge_cost({p, u}, {q, v}, cost());
        }
    }
    return inst;
}

// --- objective and folding ---------------------------------------------------

double assignment_cost(const Instance &inst, const Assignment &a) {
    if (static_cast<int>(a.size()) != inst.k())
        throw std::out_of_range("assignment length does not match k");
    for (int p = 0; p < inst.k(); ++p)
        if (a[p] < 0 || a[p] >= inst.size(p))
            throw std::out_of_range("assignment index out of range at position " +
                                    std::to_string(p));
    double total = inst.constant();
    for (int p = 0; p < inst.k(); ++p)
        total += inst.node_cost(p, a[p]);
    for (int p = 0; p < inst.k(); ++p)
        for (int q = p + 1; q < inst.k(); ++q)
            if (const EdgeBlock *blk = inst.block(p, q))
                total += blk->cost(a[p], a[q]);
    return total;
}

Instance fix_rotamer(const Instance &inst, int pos, int rot) {
    if (pos < 0 || pos >= inst.k() || rot < 0 || rot >= inst.size(pos))
        throw std::out_of_range("fix_rotamer: node out of range");
    std::vector<int> sizes;
    std::vector<int> old_of;
    for (int p = 0; p < inst.k(); ++p) {
        if (p == pos)
            continue;
        sizes.push_back(inst.size(p));
        old_of.push_back(p);
    }
    Instance out(sizes, inst.name());
    out.set_constant(inst.constant() + inst.node_cost(pos, rot));
    const int k = out.k();
    for (int np = 0; np < k; ++np) {
        const int p = old_of[np];
        for (int r = 0; r < sizes[np]; ++r) {
            double c = inst.node_cost(p, r);
            if (p < pos) {
                if (const EdgeBlock *blk = inst.block(p, pos))
                    c += blk->cost(r, rot);
            } else if (const EdgeBlock *blk = inst.block(pos, p)) {
                c += blk->cost(rot, r);
            }
            out.set_node_cost(np, r, c);
        }
    }
    for (int np = 0; np < k; ++np) {
        for (int nq = np + 1; nq < k; ++nq) {
            const EdgeBlock *blk = inst.block(old_of[np], old_of[nq]);
            if (!blk)
                continue;
            for (int u = 0; u < sizes[np]; ++u)
                for (int v = 0; v < sizes[nq]; ++v)
                    if (blk->present(u, v))
                        out.set_edge_cost({np, u}, {nq, v}, blk->cost(u, v));
        }
    }
    return out;
}

AllowedSets full_allowed(const Instance &inst) {
    AllowedSets allowed(inst.k());
    for (int p = 0; p < inst.k(); ++p) {
        allowed[p].resize(inst.size(p));
        for (int r = 0; r < inst.size(p); ++r)
            allowed[p][r] = r;
    }
    return allowed;
}

Instance restrict_instance(const Instance &inst, const AllowedSets &allowed) {
    if (static_cast<int>(allowed.size()) != inst.k())
        throw std::invalid_argument("allowed sets do not match k");
    std::vector<int> sizes(inst.k());
    for (int p = 0; p < inst.k(); ++p) {
        if (allowed[p].empty())
            throw std::invalid_argument("empty allowed set at position " +
                                        std::to_string(p));
        sizes[p] = static_cast<int>(allowed[p].size());
    }
    Instance out(sizes, inst.name());
    out.set_constant(inst.constant());
    for (int p = 0; p < inst.k(); ++p)
        for (int i = 0; i < sizes[p]; ++i)
            out.set_node_cost(p, i, inst.node_cost(p, allowed[p][i]));
    for (int p = 0; p < inst.k(); ++p) {
        for (int q = p + 1; q < inst.k(); ++q) {
            const EdgeBlock *blk = inst.block(p, q);
            if (!blk)
                continue;
            for (int i = 0; i < sizes[p]; ++i)
                for (int j = 0; j < sizes[q]; ++j) {
                    const int u = allowed[p][i], v = allowed[q][j];
                    if (blk->present(u, v))
                        out.set_edge_cost({p, i}, {q, j}, blk->cost(u, v));
                }
        }
    }
    return out;
}

// --- oracle ------------------------------------------------------------------

OracleResult brute_force(const Instance &inst, double cap) {
    const int k = inst.k();
    double space = 1.0;
    for (int n : inst.sizes())
        space *= n;
    if (space > cap)
        throw EnumerationCapExceeded("search space " + std::to_string(space) +
                                     " exceeds enumeration cap");
    if (k == 0)
        return {{}, inst.constant()};

    // Depth-first enumeration in lexicographic order.  partial[d] is the cost
    // of positions < d; only strict improvements replace the incumbent.
    Assignment cur(k, 0);
    std::vector<double> partial(k + 1, 0.0);
    partial[0] = inst.constant();
    OracleResult best;
    bool have_best = false;
    int depth = 0;
    cur[0] = -1;
    while (depth >= 0) {
        if (++cur[depth] >= inst.size(depth)) {
            --depth;
            continue;
        }
        double c = partial[depth] + inst.node_cost(depth, cur[depth]);
        for (int p = 0; p < depth; ++p)
            if (const EdgeBlock *blk = inst.block(p, depth))
                c += blk->cost(cur[p], cur[depth]);
        if (depth + 1 == k) {
            if (!have_best || c < best.value) {
                best.value = c;
                best.assignment = cur;
                have_best = true;
            }
            continue;
        }
        partial[depth + 1] = c;
        ++depth;
        cur[depth] = -1;
    }
    best.value = assignment_cost(inst, best.assignment);
    return best;
}

} // namespace scp
