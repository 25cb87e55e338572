#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace icl {

struct ExperimentConfig {
    std::string scenario;
    std::string command;
    std::vector<int> k_grid{0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
    long n_trials = 2000;
    std::uint64_t seed = 1;
    std::string out;  // empty writes the CSV to stdout
    std::optional<double> sigma_mu;
    std::optional<double> sigma_w;
    std::optional<double> tau_y;
    bool strict = false;
    int workers = 0;
    long n_particles = 1000000;
};

const std::vector<std::string>& command_names();
const std::vector<std::string>& config_keys();

// Merges a JSON object into base. Unknown keys are an error.
ExperimentConfig merge_config_json(const std::string& text, ExperimentConfig base = {});
void validate_config(const ExperimentConfig& cfg);
std::string config_to_json(const ExperimentConfig& cfg);
std::vector<int> parse_k_grid(const std::string& text);

struct LoadResult {
    ExperimentConfig config;
    bool help = false;
    std::string help_text;
};

// --config FILE is read first; every flag given on the command line wins.
// Throws std::invalid_argument on bad input.
LoadResult load_config(const std::vector<std::string>& args);

}  // namespace icl
