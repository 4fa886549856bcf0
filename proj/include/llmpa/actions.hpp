#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmpa/backend.hpp"
#include "llmpa/ui_model.hpp"

namespace llmpa {

enum class ActionFunction { click, scroll, type };

std::string function_name(ActionFunction f);
ActionFunction function_from_name(const std::string& name);

// Element for a whole-page scroll.
inline constexpr const char* kPageSentinel = "PAGE";

/// A (function, element, value) triple. Only type carries a value.
class Action {
 public:
  static Action click(std::string element);
  static Action scroll(std::string element);
  static Action type(std::string element, std::string value);
  static Action make(ActionFunction fn, std::string element,
                     std::optional<std::string> value);

  ActionFunction function() const { return function_; }
  const std::string& element() const { return element_; }
  const std::optional<std::string>& value() const { return value_; }

  // Canonical reply-grammar rendering, e.g. "TYPE Search bar :: coupon".
  std::string grammar_form() const;

  bool operator==(const Action&) const = default;

  static Action from_json(const nlohmann::json& j, const std::string& path);
  nlohmann::json to_json() const;

 private:
  Action(ActionFunction fn, std::string element,
         std::optional<std::string> value);
  ActionFunction function_;
  std::string element_;
  std::optional<std::string> value_;
};

/// A reference executable action sequence for a task (loop-check input).
struct KeyPath {
  std::string task_tag;
  std::vector<Action> actions;  // non-empty
  bool marked_cyclic = false;
};

KeyPath load_key_path(const nlohmann::json& j, const std::string& path);
std::vector<KeyPath> load_key_paths_file(const std::string& path);

// Element texts ranked by frequency across all paths with the given tag;
// ties keep first-seen order.
std::vector<std::string> history_top(const std::vector<KeyPath>& paths,
                                     const std::string& task_tag,
                                     size_t max_size);

struct TrajectoryStep {
  int index = 1;  // consecutive from 1
  Action action;
  PageSnapshot page_before;
  PageSnapshot page_after;
  std::string description;  // the previous-action description for this step
};

struct Trajectory {
  std::string task;  // the fixed instruction
  std::vector<TrajectoryStep> steps;
  std::optional<KeyPath> reference_path;
};

// True iff no (page_before.page_id, function, element) triple repeats.
bool check_acyclic(const std::vector<TrajectoryStep>& steps);

// True iff appending (page_id, action) to the steps would introduce a repeat.
bool would_loop(const std::vector<TrajectoryStep>& steps,
                const std::string& page_id, const Action& action);

// Deterministic description grammar used as the fallback renderer and as
// the test oracle for generated descriptions.
std::string template_description(const Action& action,
                                 const PageSnapshot& page_before,
                                 const PageSnapshot& page_after);

struct DescribedAction {
  std::string text;
  bool template_fallback = false;
};

// One-to-three sentence description of an executed step, threading the
// previous description through the backend request. Falls back to the
// template grammar when an LLM backend fails in transit; scripted gaps are
// a test-authoring bug and propagate.
DescribedAction describe_action(const Action& action,
                                const PageSnapshot& page_before,
                                const PageSnapshot& page_after,
                                const std::optional<std::string>& previous,
                                LlmBackend& backend,
                                const std::string& step_key = "");

}  // namespace llmpa
