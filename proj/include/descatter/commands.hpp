#pragma once

#include "descatter/config.hpp"

namespace descatter {

// CLI verb implementations. Each writes its outputs under cfg.output_dir and
// throws ConfigError / NumericalError on failure.
void cmd_generate(const RunConfig& cfg);
void cmd_fit(const RunConfig& cfg);
void cmd_descatter(const RunConfig& cfg);
void cmd_reconstruct(const RunConfig& cfg, const std::string& entry, const std::string& truth_entry,
                     const std::string& nuisance_entry, const std::string& nuisance_atten_csv);
void cmd_eval(const RunConfig& cfg);
void cmd_oracle_fit(const RunConfig& cfg);
void cmd_scatter_estimation(const RunConfig& cfg);
void cmd_sweep_neighbors(const RunConfig& cfg);
void cmd_noise(const RunConfig& cfg);
void cmd_scatter_scale(const RunConfig& cfg);

}  // namespace descatter
