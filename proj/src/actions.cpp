#include "llmpa/actions.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

std::string function_name(ActionFunction f) {
  switch (f) {
    case ActionFunction::click: return "click";
    case ActionFunction::scroll: return "scroll";
    case ActionFunction::type: return "type";
  }
  return "?";
}

ActionFunction function_from_name(const std::string& name) {
  if (name == "click") return ActionFunction::click;
  if (name == "scroll") return ActionFunction::scroll;
  if (name == "type") return ActionFunction::type;
  throw ParseError("unknown action function: " + name);
}

Action::Action(ActionFunction fn, std::string element,
               std::optional<std::string> value)
    : function_(fn), element_(std::move(element)), value_(std::move(value)) {
  if (element_.empty()) throw IntegrityError("action element must be non-empty");
  if (function_ == ActionFunction::type) {
    if (!value_)
      throw IntegrityError("type action requires a value");
  } else if (value_) {
    throw IntegrityError("only the type function carries a value");
  }
}

Action Action::click(std::string element) {
  return Action(ActionFunction::click, std::move(element), std::nullopt);
}

Action Action::scroll(std::string element) {
  return Action(ActionFunction::scroll, std::move(element), std::nullopt);
}

Action Action::type(std::string element, std::string value) {
  return Action(ActionFunction::type, std::move(element), std::move(value));
}

Action Action::make(ActionFunction fn, std::string element,
                    std::optional<std::string> value) {
  return Action(fn, std::move(element), std::move(value));
}

std::string Action::grammar_form() const {
  switch (function_) {
    case ActionFunction::click: return "CLICK " + element_;
    case ActionFunction::scroll: return "SCROLL " + element_;
    case ActionFunction::type: return "TYPE " + element_ + " :: " + *value_;
  }
  return "";
}

Action Action::from_json(const json& j, const std::string& path) {
  ActionFunction fn =
      function_from_name(jsonu::require_string(j, "function", path));
  std::string element = jsonu::require_string(j, "element", path);
  std::optional<std::string> value;
  if (j.contains("value") && !j.at("value").is_null()) {
    if (!j.at("value").is_string())
      throw ParseError("field " + path + ".value must be a string or null");
    value = j.at("value").get<std::string>();
  }
  try {
    return Action(fn, std::move(element), std::move(value));
  } catch (const IntegrityError& e) {
    throw IntegrityError(std::string(e.what()) + " at " + path);
  }
}

json Action::to_json() const {
  json j;
  j["function"] = function_name(function_);
  j["element"] = element_;
  j["value"] = value_ ? json(*value_) : json(nullptr);
  return j;
}

KeyPath load_key_path(const json& j, const std::string& path) {
  KeyPath kp;
  kp.task_tag = jsonu::require_string(j, "task_tag", path);
  const json& actions = jsonu::require_array(j, "actions", path);
  if (actions.empty())
    throw IntegrityError("key path actions must be non-empty at " + path);
  for (size_t i = 0; i < actions.size(); ++i) {
    kp.actions.push_back(Action::from_json(
        actions[i], path + ".actions[" + std::to_string(i) + "]"));
  }
  if (j.contains("cyclic")) kp.marked_cyclic = j.at("cyclic").get<bool>();
  return kp;
}

std::vector<KeyPath> load_key_paths_file(const std::string& path) {
  json doc = jsonu::load_file(path);
  if (!doc.is_array())
    throw LoadError("key paths file must be a JSON array: " + path);
  std::vector<KeyPath> out;
  for (size_t i = 0; i < doc.size(); ++i)
    out.push_back(load_key_path(doc[i], "$[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::string> history_top(const std::vector<KeyPath>& paths,
                                     const std::string& task_tag,
                                     size_t max_size) {
  std::map<std::string, int> counts;
  std::vector<std::string> first_seen;
  for (const KeyPath& kp : paths) {
    if (kp.task_tag != task_tag) continue;
    for (const Action& a : kp.actions) {
      if (counts.find(a.element()) == counts.end())
        first_seen.push_back(a.element());
      ++counts[a.element()];
    }
  }
  std::stable_sort(first_seen.begin(), first_seen.end(),
                   [&](const std::string& a, const std::string& b) {
                     return counts[a] > counts[b];
                   });
  if (first_seen.size() > max_size) first_seen.resize(max_size);
  return first_seen;
}

namespace {

std::string triple(const std::string& page_id, const Action& a) {
  return page_id + "\x1f" + function_name(a.function()) + "\x1f" + a.element();
}

}  // namespace

bool check_acyclic(const std::vector<TrajectoryStep>& steps) {
  std::set<std::string> seen;
  for (const TrajectoryStep& s : steps)
    if (!seen.insert(triple(s.page_before.page_id, s.action)).second)
      return false;
  return true;
}

bool would_loop(const std::vector<TrajectoryStep>& steps,
                const std::string& page_id, const Action& action) {
  std::string key = triple(page_id, action);
  for (const TrajectoryStep& s : steps)
    if (triple(s.page_before.page_id, s.action) == key) return true;
  return false;
}

std::string template_description(const Action& action,
                                 const PageSnapshot& page_before,
                                 const PageSnapshot& page_after) {
  std::string verbed;
  switch (action.function()) {
    case ActionFunction::click: verbed = "Clicked"; break;
    case ActionFunction::scroll: verbed = "Scrolled"; break;
    case ActionFunction::type: verbed = "Typed"; break;
  }
  std::string out = verbed + " '" + action.element() + "'";
  if (action.value()) out += " with value '" + *action.value() + "'";
  out += " on page " + page_before.page_id + "; ";
  if (page_after.page_id == page_before.page_id)
    out += "page did not change.";
  else
    out += "page changed to " + page_after.page_id + ".";
  return out;
}

DescribedAction describe_action(const Action& action,
                                const PageSnapshot& page_before,
                                const PageSnapshot& page_after,
                                const std::optional<std::string>& previous,
                                LlmBackend& backend,
                                const std::string& step_key) {
  if (backend.kind() == BackendKind::template_render)
    return {template_description(action, page_before, page_after), false};

  BackendRequest req;
  req.role = Role::pad_gen;
  std::string prompt =
      "Describe the executed step in one to three sentences, covering what "
      "was acted on and how the page changed.\n";
  prompt += "ACTION: " + action.grammar_form() + "\n";
  prompt += "PAGE_BEFORE: " + page_before.page_id + "\n";
  prompt += "PAGE_AFTER: " + page_after.page_id + "\n";
  prompt += "PREVIOUS: " + (previous ? *previous : std::string("(none)")) +
            "\n";
  if (!step_key.empty()) prompt += "STEP_KEY: " + step_key + "\n";
  req.prompt = prompt;

  try {
    return {backend.complete(req), false};
  } catch (const TransportError&) {
    return {template_description(action, page_before, page_after), true};
  } catch (const RequestError&) {
    return {template_description(action, page_before, page_after), true};
  }
}

}  // namespace llmpa
