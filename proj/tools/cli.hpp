#ifndef SCP_TOOLS_CLI_HPP
#define SCP_TOOLS_CLI_HPP

#include "scp/bnb.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace scp::cli {

// Exit codes.
inline constexpr int kExitOptimal = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitLimit = 2;
inline constexpr int kExitCap = 3;

/// Run the command line `args` (without the program name).
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

/// JSON number that prints integral values without a fractional part.
nlohmann::json number(double value);

nlohmann::json solver_config_json(const SolverConfig &cfg);
nlohmann::json solve_result_json(const SolveResult &res, std::uint64_t seed);
nlohmann::json bounds_report_json(const BoundsReport &rep);

} // namespace scp::cli

#endif
