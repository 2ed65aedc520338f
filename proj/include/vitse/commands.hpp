#pragma once

#include <iosfwd>
#include <string>

#include "vitse/runconfig.hpp"

namespace vitse {

// Exit codes shared by the CLI: 0 success, 1 usage/config, 2 data,
// 3 numeric-check failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& log);
int cmd_attnmap(const RunConfig& cfg, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& log);

// Dispatches by name and maps exceptions to exit codes.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace vitse
