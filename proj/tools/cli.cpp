#include "cli.hpp"

#include "scp/reduce.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace scp::cli {

nlohmann::json number(double value) {
    if (std::isfinite(value) && std::floor(value) == value && std::abs(value) < 9.0e15)
        return static_cast<std::int64_t>(value);
    if (!std::isfinite(value))
        return nullptr;
    return value;
}

static const char *mode_name(RelaxMode m) {
    return m == RelaxMode::full ? "full" : "reduced";
}

nlohmann::json solver_config_json(const SolverConfig &cfg) {
    nlohmann::json j = {
        {"mode", mode_name(cfg.mode)},
        {"presolve", cfg.presolve},
        {"gap_tol", cfg.gap_tol},
        {"p", cfg.split_threshold},
        {"root_iters", cfg.root_iters},
        {"node_iters", cfg.node_iters},
        {"mu0", cfg.mu0},
        {"halve_after", cfg.halve_after},
        {"mu_min", cfg.mu_min},
        {"window", cfg.window},
        {"probe_iters", cfg.probe_iters},
        {"probe_mu", cfg.probe_mu},
        {"max_candidates", cfg.max_candidates},
        {"seed", cfg.seed},
    };
    j["time_limit"] = cfg.time_limit ? nlohmann::json(*cfg.time_limit) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json solve_result_json(const SolveResult &res, std::uint64_t seed) {
    return {
        {"status", to_string(res.status)},
        {"value", number(res.value)},
        {"assignment", res.assignment},
        {"lb", number(res.lb)},
        {"ub", number(res.ub)},
        {"nodes", res.nodes},
        {"height", res.height},
        {"iters", res.iterations},
        {"probes", res.probes},
        {"root_lb", number(res.root_lb)},
        {"local_search_value", number(res.local_search_value)},
        {"time_ms", res.wall_ms},
        {"seed", seed},
    };
}

nlohmann::json bounds_report_json(const BoundsReport &rep) {
    return {
        {"lb", number(rep.best_lb)},
        {"ub", number(rep.best_ub)},
        {"assignment", rep.best_assignment},
        {"iters", rep.iterations},
        {"stop", to_string(rep.stop)},
    };
}

namespace {

using Ms = std::chrono::duration<double, std::milli>;

std::string command_echo(const std::vector<std::string> &args) {
    std::string s = "scp";
    for (const auto &a : args)
        s += " " + a;
    return s;
}

RelaxMode parse_mode(const std::string &m) {
    if (m == "full")
        return RelaxMode::full;
    if (m == "reduced")
        return RelaxMode::reduced;
    throw std::invalid_argument("unknown mode '" + m + "'");
}

void print_table(const Instance &inst, const SolveResult &res, std::ostream &out) {
    out << std::left << std::setw(16) << "name" << std::right << std::setw(8) << "#res"
        << std::setw(8) << "#rot" << std::setw(8) << "N" << std::setw(6) << "H"
        << std::setw(12) << "time/s" << std::setw(14) << "value" << "  status\n";
    std::ostringstream t;
    t << std::fixed << std::setprecision(2) << res.wall_ms / 1000.0;
    out << std::left << std::setw(16) << (inst.name().empty() ? "-" : inst.name())
        << std::right << std::setw(8) << inst.k() << std::setw(8) << inst.num_nodes()
        << std::setw(8) << res.nodes << std::setw(6) << res.height << std::setw(12)
        << t.str() << std::setw(14) << format_cost(res.value) << "  "
        << to_string(res.status) << '\n';
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Exact side-chain placement solver"};
    app.require_subcommand(1);

    // solve
    std::string solve_path;
    SolverConfig solve_cfg;
    std::string solve_mode = "full";
    bool no_presolve = false, as_table = false, as_json = false;
    double time_limit = -1.0;
    auto *solve_cmd = app.add_subcommand("solve", "Solve an instance to optimality");
    solve_cmd->add_option("instance", solve_path, "Instance file (.scp)")->required();
    solve_cmd->add_option("--time-limit", time_limit, "Wall-clock limit in seconds");
    solve_cmd->add_option("--seed", solve_cfg.seed, "Local search seed");
    solve_cmd->add_option("--mode", solve_mode, "Relaxation mode: full|reduced");
    solve_cmd->add_flag("--no-presolve", no_presolve, "Skip dead-end elimination");
    solve_cmd->add_flag("--json", as_json, "JSON report (default)");
    solve_cmd->add_flag("--table", as_table, "Tabular summary");
    solve_cmd->add_option("--gap-tol", solve_cfg.gap_tol, "Absolute pruning tolerance");
    solve_cmd->add_option("--p", solve_cfg.split_threshold, "Rotamer set split threshold");
    solve_cmd->add_option("--root-iters", solve_cfg.root_iters, "Subgradient iterations at the root");
    solve_cmd->add_option("--node-iters", solve_cfg.node_iters, "Subgradient iterations per node");

    // bound
    std::string bound_path, bound_mode = "full";
    int bound_iters = 2000;
    auto *bound_cmd = app.add_subcommand("bound", "Root Lagrangian bounds without branching");
    bound_cmd->add_option("instance", bound_path, "Instance file (.scp)")->required();
    bound_cmd->add_option("--mode", bound_mode, "Relaxation mode: full|reduced");
    bound_cmd->add_option("--root-iters", bound_iters, "Subgradient iterations");

    // oracle
    std::string oracle_path;
    double cap = kDefaultEnumerationCap;
    auto *oracle_cmd = app.add_subcommand("oracle", "Exhaustive optimum (small instances)");
    oracle_cmd->add_option("instance", oracle_path, "Instance file (.scp)")->required();
    oracle_cmd->add_option("--cap", cap, "Maximum number of enumerated assignments");

    // generate
    GeneratorParams gen;
    std::vector<int> gen_sizes{2, 2};
    std::vector<double> gen_costs{-10.0, 10.0};
    bool gen_real = false;
    std::string gen_out;
    auto *gen_cmd = app.add_subcommand("generate", "Write a seeded random instance");
    gen_cmd->add_option("--k", gen.k, "Number of positions")->required();
    gen_cmd->add_option("--sizes", gen_sizes, "Rotamer count range: lo hi")->expected(2);
    gen_cmd->add_option("--density", gen.density, "Edge probability in [0,1]");
    gen_cmd->add_option("--costs", gen_costs, "Cost range: lo hi")->expected(2);
    gen_cmd->add_option("--seed", gen.seed, "Generator seed");
    gen_cmd->add_flag("--real", gen_real, "Real-valued costs instead of integers");
    gen_cmd->add_flag("--chain", gen.chain, "Only join adjacent positions");
    gen_cmd->add_option("-o,--out", gen_out, "Output file (default stdout)");

    // reduce
    std::string reduce_path, reduce_out, reduce_trace;
    auto *reduce_cmd = app.add_subcommand("reduce", "Dead-end elimination and singleton folding");
    reduce_cmd->add_option("instance", reduce_path, "Instance file (.scp)")->required();
    reduce_cmd->add_option("-o,--out", reduce_out, "Reduced instance file")->required();
    reduce_cmd->add_option("--trace", reduce_trace, "Trace file (default <out>.trace.json)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (*solve_cmd) {
            if (as_json && as_table)
                throw std::invalid_argument("--json and --table are exclusive");
            solve_cfg.mode = parse_mode(solve_mode);
            solve_cfg.presolve = !no_presolve;
            if (time_limit >= 0.0)
                solve_cfg.time_limit = time_limit;
            const Instance inst = read_instance_file(solve_path);
            const SolveResult res = solve(inst, solve_cfg);
            if (as_table) {
                print_table(inst, res, out);
            } else {
                nlohmann::json report = solve_result_json(res, solve_cfg.seed);
                report["command"] = command_echo(args);
                report["instance"] = inst.name();
                report["config"] = solver_config_json(solve_cfg);
                report["wall_ms"] = Ms(std::chrono::steady_clock::now() - t0).count();
                out << report.dump() << '\n';
            }
            return res.status == SolveStatus::optimal ? kExitOptimal : kExitLimit;
        }
        if (*bound_cmd) {
            const Instance inst = read_instance_file(bound_path);
            SubgradientConfig sc;
            sc.mode = parse_mode(bound_mode);
            sc.max_iters = bound_iters;
            sc.integral = inst.integral();
            const BoundsReport rep =
                optimize_bounds(inst, zero_multipliers(inst, sc.mode),
                                std::numeric_limits<double>::infinity(), sc);
            nlohmann::json report = bounds_report_json(rep);
            report["command"] = command_echo(args);
            report["instance"] = inst.name();
            report["config"] = {{"mode", mode_name(sc.mode)},
                                {"root_iters", sc.max_iters},
                                {"mu0", sc.mu0},
                                {"halve_after", sc.halve_after},
                                {"mu_min", sc.mu_min},
                                {"window", sc.window},
                                {"gap_tol", sc.gap_tol}};
            report["wall_ms"] = Ms(std::chrono::steady_clock::now() - t0).count();
            out << report.dump() << '\n';
            return kExitOptimal;
        }
        if (*oracle_cmd) {
            const Instance inst = read_instance_file(oracle_path);
            OracleResult best;
            try {
                best = brute_force(inst, cap);
            } catch (const EnumerationCapExceeded &e) {
                err << "error: " << e.what() << '\n';
                return kExitCap;
            }
            nlohmann::json report = {{"command", command_echo(args)},
                                     {"instance", inst.name()},
                                     {"value", number(best.value)},
                                     {"assignment", best.assignment},
                                     {"wall_ms", Ms(std::chrono::steady_clock::now() - t0).count()}};
            out << report.dump() << '\n';
            return kExitOptimal;
        }
        if (*gen_cmd) {
            gen.size_lo = gen_sizes[0];
            gen.size_hi = gen_sizes[1];
            gen.cost_lo = gen_costs[0];
            gen.cost_hi = gen_costs[1];
            gen.integer_costs = !gen_real;
            const Instance inst = generate_random(gen);
            if (gen_out.empty()) {
                write_instance(inst, out);
            } else {
                std::ofstream f(gen_out);
                if (!f)
                    throw std::runtime_error("cannot write '" + gen_out + "'");
                write_instance(inst, f);
            }
            return kExitOptimal;
        }
        if (*reduce_cmd) {
            const Instance inst = read_instance_file(reduce_path);
            const Reduction r = presolve(inst);
            if (reduce_trace.empty())
                reduce_trace = reduce_out + ".trace.json";
            std::ofstream f(reduce_out);
            if (!f)
                throw std::runtime_error("cannot write '" + reduce_out + "'");
            write_instance(r.instance, f);
            std::ofstream t(reduce_trace);
            if (!t)
                throw std::runtime_error("cannot write '" + reduce_trace + "'");
            t << trace_to_json(r.trace).dump(2) << '\n';
            out << nlohmann::json{{"command", command_echo(args)},
                                  {"instance", inst.name()},
                                  {"original_k", inst.k()},
                                  {"original_rotamers", inst.num_nodes()},
                                  {"reduced_k", r.instance.k()},
                                  {"reduced_rotamers", r.instance.num_nodes()},
                                  {"steps", r.trace.steps.size()},
                                  {"out", reduce_out},
                                  {"trace", reduce_trace}}
                       .dump()
                << '\n';
            return kExitOptimal;
        }
    } catch (const ParseError &e) {
        err << "error: parse error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitInputError;
}

} // namespace scp::cli
