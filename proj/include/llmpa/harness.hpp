#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmpa/metrics.hpp"
#include "llmpa/world.hpp"

namespace llmpa {

struct AblationConfig {
  std::string label;
  bool grouping = true;
  bool icpad = true;
  bool calibration = true;
};

// {"configs": [{"label","grouping","icpad","calibration"}, ...]}
std::vector<AblationConfig> load_matrix(const std::string& path);

using BackendFactory = std::function<std::unique_ptr<LlmBackend>()>;

struct SuiteResult {
  std::vector<MetricsReport> reports;  // one per config, matrix order
  std::vector<std::vector<EpisodeResult>> episodes;  // per config, task order
};

// Runs every task under every config with a fresh backend per config.
// Per-task failures are recorded in the outcomes; fixture errors propagate.
// jobs > 1 parallelizes episodes within a config; aggregation order stays
// fixed so output is byte-stable regardless of scheduling.
SuiteResult run_suite(const WorldSpec& world,
                      const std::vector<const TaskSpec*>& tasks,
                      const RunConfig& base_config,
                      const std::vector<AblationConfig>& matrix,
                      const BackendFactory& backend_factory, int jobs = 1);

// Table-1-shaped text: method label, Step SR, Task SR, Ele. Acc, Op. F1.
std::string render_report_table(const std::vector<MetricsReport>& reports);

nlohmann::json report_to_json(const MetricsReport& report);
nlohmann::json reports_to_json(const std::vector<MetricsReport>& reports);

// One JSONL record per step attempt.
std::string episode_trace_jsonl(const EpisodeResult& episode);

}  // namespace llmpa
