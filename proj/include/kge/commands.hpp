#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kge/core.hpp"
#include "kge/evaluation.hpp"

namespace kge {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int runtime_failure = 1;
inline constexpr int invalid_input = 2;
}  // namespace exit_code

// Entry point shared by the `kge` binary and the tests. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

nlohmann::json metrics_to_json(const MetricsReport& report, bool include_timing);
nlohmann::json classification_to_json(const ThresholdTable& thresholds, const ClassificationReport& report,
                                      const Vocabulary& vocab);
nlohmann::json summary_to_json(const DatasetSummary& summary, const RelationStats& stats, const Vocabulary& vocab);

}  // namespace kge
