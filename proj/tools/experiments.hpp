#pragma once

#include <string>
#include <vector>

#include "odegrad/config.hpp"

namespace odegrad::cli {

// Every subcommand: 0 on success, 1 on a check/training failure.
// Usage errors surface as std::invalid_argument and exit 2 from main.
int cmd_gradcheck(const ExperimentConfig& cfg);
int cmd_odenet2d(const ExperimentConfig& cfg);
int cmd_cnf(const ExperimentConfig& cfg);
int cmd_spirals(const ExperimentConfig& cfg);
int cmd_poisson(const ExperimentConfig& cfg);

void declare_gradcheck(ExperimentConfig& cfg);
void declare_odenet2d(ExperimentConfig& cfg);
void declare_cnf(ExperimentConfig& cfg);
void declare_spirals(ExperimentConfig& cfg);
void declare_poisson(ExperimentConfig& cfg);

std::vector<int> parse_int_list(const std::string& csv);
std::vector<double> parse_double_list(const std::string& csv);
void ensure_out_dir(const std::string& path);

}  // namespace odegrad::cli
