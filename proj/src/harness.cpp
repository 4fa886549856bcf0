#include "llmpa/harness.hpp"

#include <atomic>
#include <iomanip>
#include <sstream>
#include <thread>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

std::vector<AblationConfig> load_matrix(const std::string& path) {
  json doc = jsonu::load_file(path);
  const json& configs = jsonu::require_array(doc, "configs", path);
  std::vector<AblationConfig> matrix;
  for (size_t i = 0; i < configs.size(); ++i) {
    std::string p = path + ".configs[" + std::to_string(i) + "]";
    AblationConfig c;
    c.label = jsonu::require_string(configs[i], "label", p);
    c.grouping = jsonu::require_bool(configs[i], "grouping", p);
    c.icpad = jsonu::require_bool(configs[i], "icpad", p);
    c.calibration = jsonu::require_bool(configs[i], "calibration", p);
    matrix.push_back(std::move(c));
  }
  if (matrix.empty()) throw ConfigError("matrix has no configs: " + path);
  return matrix;
}

SuiteResult run_suite(const WorldSpec& world,
                      const std::vector<const TaskSpec*>& tasks,
                      const RunConfig& base_config,
                      const std::vector<AblationConfig>& matrix,
                      const BackendFactory& backend_factory, int jobs) {
  if (matrix.empty()) throw ConfigError("ablation matrix is empty");
  if (tasks.empty()) throw ConfigError("no tasks selected");

  SuiteResult result;
  for (const AblationConfig& ablation : matrix) {
    RunConfig config = base_config;
    config.grouping = ablation.grouping;
    config.icpad = ablation.icpad;
    config.calibration = ablation.calibration;

    std::unique_ptr<LlmBackend> backend = backend_factory();

    std::vector<EpisodeResult> episodes(tasks.size());
    if (jobs <= 1) {
      for (size_t i = 0; i < tasks.size(); ++i)
        episodes[i] = run_episode(world, *tasks[i], config, *backend);
    } else {
      std::atomic<size_t> next{0};
      auto worker = [&]() {
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          episodes[i] = run_episode(world, *tasks[i], config, *backend);
        }
      };
      std::vector<std::thread> pool;
      int n = std::min<int>(jobs, static_cast<int>(tasks.size()));
      for (int t = 0; t < n; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    std::vector<StepOutcome> outcomes;
    for (EpisodeResult& ep : episodes) {
      ep.config_label = ablation.label;
      outcomes.insert(outcomes.end(), ep.outcomes.begin(), ep.outcomes.end());
    }
    result.reports.push_back(aggregate_metrics(outcomes, ablation.label));
    result.episodes.push_back(std::move(episodes));
  }
  return result;
}

std::string render_report_table(const std::vector<MetricsReport>& reports) {
  size_t label_width = std::string("Method").size();
  for (const MetricsReport& r : reports)
    label_width = std::max(label_width, r.config_label.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_width + 2)) << "Method"
      << std::right << std::setw(9) << "Step SR" << std::setw(9) << "Task SR"
      << std::setw(10) << "Ele. Acc" << std::setw(9) << "Op. F1" << "\n";
  out << std::string(label_width + 2 + 9 + 9 + 10 + 9, '-') << "\n";
  out << std::fixed << std::setprecision(4);
  for (const MetricsReport& r : reports) {
    out << std::left << std::setw(static_cast<int>(label_width + 2))
        << r.config_label << std::right << std::setw(9) << r.step_sr
        << std::setw(9) << r.task_sr << std::setw(10) << r.element_acc
        << std::setw(9) << r.operation_f1 << "\n";
  }
  return out.str();
}

json report_to_json(const MetricsReport& report) {
  json j;
  j["config_label"] = report.config_label;
  j["step_sr"] = report.step_sr;
  j["task_sr"] = report.task_sr;
  j["element_acc"] = report.element_acc;
  j["operation_f1"] = report.operation_f1;
  j["counts"] = {{"tasks", report.task_count}, {"steps", report.step_count}};
  return j;
}

json reports_to_json(const std::vector<MetricsReport>& reports) {
  json arr = json::array();
  for (const MetricsReport& r : reports) arr.push_back(report_to_json(r));
  return arr;
}

std::string episode_trace_jsonl(const EpisodeResult& episode) {
  std::ostringstream out;
  for (const StepRecord& step : episode.steps) {
    for (size_t a = 0; a < step.attempts.size(); ++a) {
      const AttemptRecord& attempt = step.attempts[a];
      bool last = a + 1 == step.attempts.size();
      json row;
      row["task_id"] = episode.task_id;
      if (!episode.config_label.empty())
        row["config"] = episode.config_label;
      row["step"] = step.index;
      row["attempt"] = attempt.attempt;
      row["page"] = step.page_before;
      row["step_key"] = step.step_key;
      row["prompt"] = attempt.prompt;
      row["reply"] = attempt.raw_reply;
      row["status"] = attempt.status;
      if (!attempt.feedback.empty()) row["feedback"] = attempt.feedback;
      if (step.alignment_m >= 0) row["alignment_m"] = step.alignment_m;
      if (last && step.executed) {
        row["executed"] = true;
        row["action"] = step.action->to_json();
        row["page_after"] = step.page_after;
        row["noop"] = step.noop;
        row["terminal"] = step.terminal;
        row["description"] = step.description;
        if (step.description_fallback) row["description_fallback"] = true;
      }
      out << row.dump() << "\n";
    }
  }
  json tail;
  tail["task_id"] = episode.task_id;
  if (!episode.config_label.empty()) tail["config"] = episode.config_label;
  tail["task_success"] = episode.task_success;
  tail["terminal_reached"] = episode.terminal_reached;
  if (!episode.abort_reason.empty()) tail["abort_reason"] = episode.abort_reason;
  tail["executed_steps"] = episode.trajectory.steps.size();
  out << tail.dump() << "\n";
  return out.str();
}

}  // namespace llmpa
