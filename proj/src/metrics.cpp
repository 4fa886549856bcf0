#include "llmpa/metrics.hpp"

#include <map>

#include "llmpa/chains.hpp"
#include "llmpa/errors.hpp"

namespace llmpa {

StepOutcome StepOutcome::make(std::string task_id, int step_index,
                              bool element_match, bool operation_match,
                              std::optional<Action> predicted,
                              std::optional<Action> gold) {
  StepOutcome o;
  o.task_id = std::move(task_id);
  o.step_index = step_index;
  o.element_match = element_match;
  o.operation_match = operation_match;
  o.success = element_match && operation_match;
  o.predicted = std::move(predicted);
  o.gold = std::move(gold);
  return o;
}

double step_sr(const std::vector<StepOutcome>& outcomes) {
  if (outcomes.empty()) throw MetricError("step_sr over zero steps");
  size_t ok = 0;
  for (const StepOutcome& o : outcomes) ok += o.success;
  return static_cast<double>(ok) / outcomes.size();
}

double task_sr(const std::vector<StepOutcome>& outcomes) {
  if (outcomes.empty()) throw MetricError("task_sr over zero tasks");
  std::map<std::string, bool> all_ok;
  for (const StepOutcome& o : outcomes) {
    auto [it, inserted] = all_ok.try_emplace(o.task_id, true);
    it->second = it->second && o.success;
  }
  size_t ok = 0;
  for (const auto& [task, good] : all_ok) ok += good;
  return static_cast<double>(ok) / all_ok.size();
}

double element_accuracy(const std::vector<StepOutcome>& outcomes) {
  if (outcomes.empty()) throw MetricError("element_accuracy over zero steps");
  size_t ok = 0;
  for (const StepOutcome& o : outcomes) ok += o.element_match;
  return static_cast<double>(ok) / outcomes.size();
}

namespace {

std::vector<std::string> operation_tokens(const Action& a) {
  std::vector<std::string> tokens;
  tokens.push_back(function_name(a.function()));
  if (a.value()) {
    for (const std::string& t : tokenize(*a.value())) tokens.push_back(t);
  }
  return tokens;
}

}  // namespace

double operation_f1(const Action& predicted, const Action& gold) {
  std::vector<std::string> p = operation_tokens(predicted);
  std::vector<std::string> g = operation_tokens(gold);
  std::map<std::string, int> counts;
  for (const std::string& t : g) ++counts[t];
  int overlap = 0;
  for (const std::string& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / p.size();
  double recall = static_cast<double>(overlap) / g.size();
  return 2.0 * precision * recall / (precision + recall);
}

double mean_operation_f1(const std::vector<StepOutcome>& outcomes) {
  if (outcomes.empty()) throw MetricError("operation_f1 over zero steps");
  double sum = 0;
  for (const StepOutcome& o : outcomes) {
    if (o.predicted && o.gold) sum += operation_f1(*o.predicted, *o.gold);
  }
  return sum / outcomes.size();
}

MetricsReport aggregate_metrics(const std::vector<StepOutcome>& outcomes,
                                const std::string& config_label) {
  MetricsReport r;
  r.config_label = config_label;
  r.step_sr = step_sr(outcomes);
  r.task_sr = task_sr(outcomes);
  r.element_acc = element_accuracy(outcomes);
  r.operation_f1 = mean_operation_f1(outcomes);
  std::map<std::string, bool> tasks;
  for (const StepOutcome& o : outcomes) tasks[o.task_id] = true;
  r.task_count = tasks.size();
  r.step_count = outcomes.size();
  return r;
}

}  // namespace llmpa
