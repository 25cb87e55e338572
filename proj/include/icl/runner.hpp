#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "icl/config.hpp"
#include "icl/posterior.hpp"

namespace icl {

struct CsvRow {
    int k = 0;
    std::string metric;
    double value = 0.0;
    double std_error = 0.0;
    std::optional<int> component;  // 0-based here, printed 1-based
    std::string extra;
};

enum class CheckStatus { pass = 0, fail = 1, inconclusive = 3 };

struct RunResult {
    std::vector<CsvRow> rows;
    std::vector<std::string> summary;
    std::vector<std::string> notes;  // extra header lines
    CheckStatus status = CheckStatus::pass;
};

using PosteriorEngine = std::function<PosteriorMixture(const PriorModel&, const Sequence&, const Vec&)>;

PosteriorEngine default_engine();

// Throws std::invalid_argument when the scenario does not fit the command.
RunResult run_command(const ExperimentConfig& cfg);
RunResult oracle_check(const ExperimentConfig& cfg, const PosteriorEngine& engine);

std::string format_number(double v);
std::string format_csv(const ExperimentConfig& cfg, const RunResult& result);

// Exit codes: 0 ok, 1 oracle mismatch, 2 bad config or precondition, 3 inconclusive, 4 I/O failure.
int run(const ExperimentConfig& cfg, std::ostream& log);
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace icl
