#pragma once

#include "hypermem/memory.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace hypermem {

/// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitEnvironmentError = 2;

/// Runs the command line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Listing printed by `inspect`: live points with members and lineage,
/// retired points, then vertices.
std::string render_inspection(const MemoryHypergraph& m, int step);

}  // namespace hypermem
