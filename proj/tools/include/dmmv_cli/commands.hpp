#pragma once

#include "dmmv_cli/run_config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dmmv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

data::MultivariateSeries load_series(const RunConfig& config);

void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_sweep_bias(const RunConfig& config, std::ostream& log);
void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_decompose(const RunConfig& config, std::ostream& log);
void cmd_ablate(const RunConfig& config, std::ostream& log);

void dispatch(const RunConfig& config, std::ostream& log);

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dmmv::cli
