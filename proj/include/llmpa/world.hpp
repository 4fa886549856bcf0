#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "llmpa/actions.hpp"
#include "llmpa/backend.hpp"
#include "llmpa/calibration.hpp"
#include "llmpa/chains.hpp"
#include "llmpa/layout.hpp"
#include "llmpa/metrics.hpp"
#include "llmpa/prediction.hpp"
#include "llmpa/ui_model.hpp"

namespace llmpa {

struct TransitionMatch {
  ActionFunction function = ActionFunction::click;
  std::string element;
  std::optional<std::string> value_pattern;  // type only; "*" matches any
};

struct TransitionRule {
  std::string from_page;
  TransitionMatch match;
  std::string to_page;
  bool terminal = false;
};

struct TaskSpec {
  std::string task_id;
  std::string description;  // the instruction
  std::vector<Action> gold_actions;
  std::optional<std::vector<std::string>> gold_chain;
  std::optional<std::string> key_path_tag;
};

/// Deterministic page-level state machine standing in for a real app.
struct WorldSpec {
  std::string world_id;
  std::string start_page;
  std::map<std::string, PageSnapshot> pages;
  std::vector<TransitionRule> transitions;
  std::vector<TaskSpec> tasks;

  const TaskSpec* find_task(const std::string& task_id) const;
};

// Validates every invariant, including a gold-action replay to a terminal
// rule for each task. Errors name the offending page, rule, or task.
WorldSpec load_world(const std::string& path);
WorldSpec parse_world(const std::string& text, const std::string& name);

struct ApplyResult {
  std::string next_page;
  bool terminal = false;
  bool noop = false;  // no rule matched; the page did not change
};

// First matching rule wins; rules are ordered. An unmatched action is a
// recorded no-op, not an error.
ApplyResult apply(const WorldSpec& world, const std::string& current,
                  const Action& action);

struct RunConfig {
  bool grouping = true;
  bool icpad = true;  // instruction chain + previous-action descriptions
  bool calibration = true;
  size_t max_candidates = 50;
  size_t prompt_budget = 8000;
  size_t digest_budget = 2000;
  int max_attempts = 3;
  int step_cap = 0;  // 0 means 2 * |gold| + 3
  double min_score = 0.3;
  GroupingParams grouping_params;
  CalibrationConfig calibration_config;
  std::shared_ptr<ExecutabilityClassifier> classifier;  // flag-based default
  std::vector<KeyPath> key_paths;  // history_top + loop-check references
  std::string chain_cache_dir;     // cache generated chains when non-empty
  unsigned seed = 0;               // reserved; deterministic backends ignore it
};

struct StepRecord {
  int index = 1;
  std::string page_before;
  std::string page_after;
  std::string step_key;
  bool executed = false;
  bool noop = false;
  bool terminal = false;
  std::optional<Action> action;
  std::string description;  // previous-action description
  bool description_fallback = false;
  int alignment_m = -1;  // consumed chain prefix; -1 when icpad is off
  std::vector<AttemptRecord> attempts;
};

struct EpisodeResult {
  std::string task_id;
  std::string config_label;
  bool task_success = false;
  bool terminal_reached = false;
  std::string abort_reason;  // empty on a clean terminal finish
  std::optional<InstructionChain> chain;
  Trajectory trajectory;
  std::vector<StepRecord> steps;
  std::vector<StepOutcome> outcomes;  // one per gold step
};

// The end-to-end loop: redact, group, digest, candidates, align, predict,
// calibrate, apply; repeats until a terminal rule or the step cap. Backend
// and fixture errors abort the episode (recorded), never the caller.
EpisodeResult run_episode(const WorldSpec& world, const TaskSpec& task,
                          const RunConfig& config, LlmBackend& backend);

}  // namespace llmpa
