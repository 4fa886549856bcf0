#pragma once

#include <optional>
#include <string>
#include <vector>

#include "llmpa/actions.hpp"

namespace llmpa {

/// Per-step comparison against the gold action at the same index.
struct StepOutcome {
  std::string task_id;
  int step_index = 1;
  bool element_match = false;
  bool operation_match = false;
  bool success = false;  // element_match && operation_match, enforced
  std::optional<Action> predicted;
  std::optional<Action> gold;

  static StepOutcome make(std::string task_id, int step_index,
                          bool element_match, bool operation_match,
                          std::optional<Action> predicted,
                          std::optional<Action> gold);
};

struct MetricsReport {
  std::string config_label;
  double step_sr = 0;
  double task_sr = 0;
  double element_acc = 0;
  double operation_f1 = 0;
  size_t task_count = 0;
  size_t step_count = 0;
};

// Successful steps over total steps. Empty input is an undefined metric.
double step_sr(const std::vector<StepOutcome>& outcomes);

// Fully-successful tasks over total tasks (grouped by task_id).
double task_sr(const std::vector<StepOutcome>& outcomes);

// Steps with the right element over total steps.
double element_accuracy(const std::vector<StepOutcome>& outcomes);

// Token-level F1 of "function + type-value words" (element excluded),
// lowercased, split on non-alphanumerics, multiset overlap.
double operation_f1(const Action& predicted, const Action& gold);

// Mean operation F1 across outcomes; a missing prediction scores 0.
double mean_operation_f1(const std::vector<StepOutcome>& outcomes);

MetricsReport aggregate_metrics(const std::vector<StepOutcome>& outcomes,
                                const std::string& config_label);

}  // namespace llmpa
