#include "llmpa/world.hpp"

#include <algorithm>
#include <set>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

const TaskSpec* WorldSpec::find_task(const std::string& task_id) const {
  for (const TaskSpec& t : tasks)
    if (t.task_id == task_id) return &t;
  return nullptr;
}

namespace {

TransitionRule parse_transition(const json& j, const std::string& path) {
  TransitionRule rule;
  rule.from_page = jsonu::require_string(j, "from", path);
  rule.to_page = jsonu::require_string(j, "to", path);
  const json& match = jsonu::require(j, "match", path);
  rule.match.function = function_from_name(
      jsonu::require_string(match, "function", path + ".match"));
  rule.match.element =
      jsonu::require_string(match, "element", path + ".match");
  if (match.contains("value") && !match.at("value").is_null())
    rule.match.value_pattern = match.at("value").get<std::string>();
  if (j.contains("terminal")) rule.terminal = j.at("terminal").get<bool>();
  if (rule.match.value_pattern &&
      rule.match.function != ActionFunction::type)
    throw LoadError("only type rules may carry a value pattern at " + path);
  return rule;
}

TaskSpec parse_task(const json& j, const std::string& path) {
  TaskSpec task;
  task.task_id = jsonu::require_string(j, "task_id", path);
  task.description = jsonu::require_string(j, "description", path);
  if (task.description.empty())
    throw LoadError("task description must be non-empty at " + path);
  const json& gold = jsonu::require_array(j, "gold_actions", path);
  if (gold.empty())
    throw LoadError("task '" + task.task_id + "' has no gold actions");
  for (size_t i = 0; i < gold.size(); ++i)
    task.gold_actions.push_back(Action::from_json(
        gold[i], path + ".gold_actions[" + std::to_string(i) + "]"));
  if (j.contains("gold_chain") && !j.at("gold_chain").is_null()) {
    std::vector<std::string> steps;
    for (const json& s : j.at("gold_chain")) steps.push_back(s.get<std::string>());
    if (steps.empty())
      throw LoadError("task '" + task.task_id + "' has an empty gold chain");
    task.gold_chain = std::move(steps);
  }
  if (j.contains("key_path_tag") && !j.at("key_path_tag").is_null())
    task.key_path_tag = j.at("key_path_tag").get<std::string>();
  return task;
}

// Element texts a transition may legally reference on a page: raw node
// texts plus disambiguated section display texts.
std::set<std::string> resolvable_texts(const PageSnapshot& page) {
  std::set<std::string> texts;
  for (const UiNode& n : flatten(page))
    if (!n.text.empty()) texts.insert(n.text);
  auto result = disambiguate(group_sections(page), page);
  for (const Section& s : result.sections) texts.insert(s.display_text());
  texts.insert(kPageSentinel);
  return texts;
}

}  // namespace

WorldSpec parse_world(const std::string& text, const std::string& name) {
  json doc = jsonu::parse_text(text, name);
  WorldSpec world;
  world.world_id = jsonu::require_string(doc, "world_id", "$");
  world.start_page = jsonu::require_string(doc, "start_page", "$");

  const json& pages = jsonu::require(doc, "pages", "$");
  if (!pages.is_object())
    throw LoadError("world pages must be an object keyed by page_id");
  for (const auto& [page_id, page_json] : pages.items()) {
    PageSnapshot page = parse_page_json(page_json, "$.pages." + page_id);
    if (page.page_id != page_id)
      throw LoadError("page key '" + page_id + "' does not match page_id '" +
                      page.page_id + "'");
    world.pages.emplace(page_id, std::move(page));
  }
  if (!world.pages.count(world.start_page))
    throw LoadError("start_page '" + world.start_page + "' does not exist");

  std::map<std::string, std::set<std::string>> page_texts;
  for (const auto& [id, page] : world.pages)
    page_texts[id] = resolvable_texts(page);

  const json& transitions = jsonu::require_array(doc, "transitions", "$");
  std::set<std::string> rule_keys;
  for (size_t i = 0; i < transitions.size(); ++i) {
    std::string path = "$.transitions[" + std::to_string(i) + "]";
    TransitionRule rule = parse_transition(transitions[i], path);
    if (!world.pages.count(rule.from_page))
      throw LoadError("transition " + path + " references missing page '" +
                      rule.from_page + "'");
    if (!world.pages.count(rule.to_page))
      throw LoadError("transition " + path + " references missing page '" +
                      rule.to_page + "'");
    if (!page_texts[rule.from_page].count(rule.match.element))
      throw LoadError("transition " + path + " element '" +
                      rule.match.element + "' does not resolve on page '" +
                      rule.from_page + "'");
    std::string key = rule.from_page + "\x1f" +
                      function_name(rule.match.function) + "\x1f" +
                      rule.match.element + "\x1f" +
                      rule.match.value_pattern.value_or("\x1e");
    if (!rule_keys.insert(key).second)
      throw LoadError("duplicate transition key at " + path);
    world.transitions.push_back(std::move(rule));
  }

  const json& tasks = jsonu::require_array(doc, "tasks", "$");
  std::set<std::string> task_ids;
  for (size_t i = 0; i < tasks.size(); ++i) {
    TaskSpec task =
        parse_task(tasks[i], "$.tasks[" + std::to_string(i) + "]");
    if (!task_ids.insert(task.task_id).second)
      throw LoadError("duplicate task_id '" + task.task_id + "'");
    world.tasks.push_back(std::move(task));
  }

  // Gold replay: every action must fire a rule and the last one must be
  // terminal.
  for (const TaskSpec& task : world.tasks) {
    std::string current = world.start_page;
    bool terminal = false;
    for (size_t i = 0; i < task.gold_actions.size(); ++i) {
      ApplyResult res = apply(world, current, task.gold_actions[i]);
      if (res.noop)
        throw LoadError("task '" + task.task_id + "' gold action " +
                        std::to_string(i + 1) + " (" +
                        task.gold_actions[i].grammar_form() +
                        ") matches no transition from page '" + current + "'");
      current = res.next_page;
      terminal = res.terminal;
    }
    if (!terminal)
      throw LoadError("task '" + task.task_id +
                      "' gold replay does not reach a terminal rule");
  }
  return world;
}

WorldSpec load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open world file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_world(buf.str(), path);
}

ApplyResult apply(const WorldSpec& world, const std::string& current,
                  const Action& action) {
  if (!world.pages.count(current))
    throw IntegrityError("current page '" + current + "' does not exist");
  for (const TransitionRule& rule : world.transitions) {
    if (rule.from_page != current) continue;
    if (rule.match.function != action.function()) continue;
    if (rule.match.element != action.element()) continue;
    if (action.function() == ActionFunction::type) {
      const std::string& pattern = rule.match.value_pattern.value_or("*");
      if (pattern != "*" && pattern != action.value().value_or(""))
        continue;
    }
    return ApplyResult{rule.to_page, rule.terminal, false};
  }
  return ApplyResult{current, false, true};
}

namespace {

// Digest for the grouping-off ablation: raw node texts in pre-order under
// the same whole-entries budget rule.
std::string raw_digest(const std::vector<std::string>& texts, size_t budget) {
  std::string out;
  for (const std::string& t : texts) {
    size_t extra = t.size() + (out.empty() ? 0 : 1);
    if (out.size() + extra > budget) break;
    if (!out.empty()) out += '\n';
    out += t;
  }
  return out;
}

// The reference path for the loop check: an explicit key-path fixture when
// one matches the task tag, otherwise the task's own gold actions.
std::optional<KeyPath> reference_path_for(const TaskSpec& task,
                                          const RunConfig& config) {
  if (!task.key_path_tag) return std::nullopt;
  for (const KeyPath& kp : config.key_paths)
    if (kp.task_tag == *task.key_path_tag) return kp;
  KeyPath kp;
  kp.task_tag = *task.key_path_tag;
  kp.actions = task.gold_actions;
  return kp;
}

// Replays the reference actions through the world to decide whether the
// reference itself is loop-free under the triple identity.
bool reference_is_acyclic(const WorldSpec& world, const KeyPath& reference) {
  if (reference.marked_cyclic) return false;
  std::string current = world.start_page;
  std::set<std::string> seen;
  for (const Action& a : reference.actions) {
    std::string key =
        current + "\x1f" + function_name(a.function()) + "\x1f" + a.element();
    if (!seen.insert(key).second) return false;
    ApplyResult res = apply(world, current, a);
    if (res.noop) return true;  // cannot replay further; treat as loop-free
    current = res.next_page;
  }
  return true;
}

InstructionChain obtain_chain(const TaskSpec& task, const RunConfig& config,
                              LlmBackend& backend) {
  ChainKind kind = task.key_path_tag ? ChainKind::elaborate_chain
                                     : ChainKind::abstract_chain;
  std::string cache_path;
  if (!config.chain_cache_dir.empty()) {
    cache_path = config.chain_cache_dir + "/" + task.task_id + ".chain.json";
    std::ifstream probe(cache_path);
    if (probe) return load_chain(cache_path);
  }
  InstructionChain chain;
  if (task.gold_chain) {
    chain.kind = kind;
    chain.task = task.description;
    chain.steps = *task.gold_chain;
  } else {
    auto* scripted = dynamic_cast<ScriptedBackend*>(&backend);
    if (backend.kind() == BackendKind::scripted &&
        (!scripted || !scripted->has(Role::chain_gen, task.task_id))) {
      TemplateBackend fallback;
      chain = generate_chain(task.description, kind, fallback);
    } else {
      chain = generate_chain(task.description, kind, backend, task.task_id);
    }
  }
  if (!cache_path.empty()) save_chain(chain, cache_path);
  return chain;
}

std::string make_step_key(const TaskSpec& task, const std::string& page_id,
                          size_t history_len, bool icpad) {
  std::string key = task.task_id + "/" + page_id;
  if (icpad) key += "/h" + std::to_string(history_len);
  return key;
}

std::vector<StepOutcome> outcomes_vs_gold(const TaskSpec& task,
                                          const Trajectory& trajectory) {
  std::vector<StepOutcome> outcomes;
  for (size_t i = 0; i < task.gold_actions.size(); ++i) {
    const Action& gold = task.gold_actions[i];
    std::optional<Action> predicted;
    if (i < trajectory.steps.size()) predicted = trajectory.steps[i].action;
    bool element_match = predicted && predicted->element() == gold.element();
    bool operation_match = false;
    if (predicted && predicted->function() == gold.function()) {
      operation_match = gold.function() != ActionFunction::type ||
                        predicted->value() == gold.value();
    }
    outcomes.push_back(StepOutcome::make(task.task_id,
                                         static_cast<int>(i + 1),
                                         element_match, operation_match,
                                         predicted, gold));
  }
  return outcomes;
}

}  // namespace

EpisodeResult run_episode(const WorldSpec& world, const TaskSpec& task,
                          const RunConfig& config, LlmBackend& backend) {
  EpisodeResult result;
  result.task_id = task.task_id;
  result.trajectory.task = task.description;
  result.trajectory.reference_path = reference_path_for(task, config);

  std::shared_ptr<ExecutabilityClassifier> classifier = config.classifier;
  if (!classifier) classifier = std::make_shared<FlagClassifier>();

  bool ref_acyclic =
      result.trajectory.reference_path &&
      reference_is_acyclic(world, *result.trajectory.reference_path);

  std::vector<std::string> top;
  if (task.key_path_tag)
    top = history_top(config.key_paths, *task.key_path_tag,
                      config.max_candidates);

  int step_cap = config.step_cap > 0
                     ? config.step_cap
                     : static_cast<int>(2 * task.gold_actions.size() + 3);

  try {
    if (config.icpad) result.chain = obtain_chain(task, config, backend);

    std::string current = world.start_page;
    auto* scripted = dynamic_cast<ScriptedBackend*>(&backend);

    while (true) {
      if (static_cast<int>(result.steps.size()) >= step_cap) {
        result.abort_reason = "step_cap";
        break;
      }
      int step_index = static_cast<int>(result.trajectory.steps.size()) + 1;

      PageSnapshot page = world.pages.at(current);
      page.step_index = step_index;
      PageSnapshot red = redact(page, default_redaction_rules());

      std::vector<Section> sections;
      std::string digest;
      CandidateSet candidates;
      if (config.grouping) {
        sections =
            disambiguate(group_sections(red, config.grouping_params), red)
                .sections;
        digest = extract_text(sections, config.digest_budget);
        candidates = build_candidates(sections, task.description, top,
                                      config.max_candidates);
      } else {
        std::vector<std::string> texts;
        for (const UiNode& n : flatten(red))
          if (!n.text.empty()) texts.push_back(n.text);
        digest = raw_digest(texts, config.digest_budget);
        candidates = build_candidates_from_texts(texts, task.description, top,
                                                 config.max_candidates);
      }

      StepRecord rec;
      rec.index = step_index;
      rec.page_before = current;
      rec.step_key = make_step_key(task, current,
                                   result.trajectory.steps.size(),
                                   config.icpad);

      PromptBundle bundle;
      bundle.task = task.description;
      bundle.include_plan = config.icpad;
      bundle.include_history = config.icpad;
      bundle.page_digest = digest;
      bundle.candidates = candidates;
      bundle.step_key = rec.step_key;
      bundle.budget = config.prompt_budget;
      if (config.icpad && result.chain) {
        std::vector<std::string> pads;
        for (const TrajectoryStep& s : result.trajectory.steps)
          pads.push_back(s.description);
        ProgressAlignment alignment =
            align_progress(*result.chain, pads, config.min_score);
        bundle.chain_remaining = alignment.remaining_steps;
        rec.alignment_m = static_cast<int>(alignment.matched_prefix_end);
      }
      for (const TrajectoryStep& s : result.trajectory.steps) {
        bundle.history_actions.push_back(s.action);
        bundle.history_descriptions.push_back(s.description);
      }

      ActionValidator validator;
      std::vector<std::string> gate_verdicts;
      if (config.calibration) {
        validator = [&](const Action& a) -> std::optional<std::string> {
          CalibrationOutcome outcome = calibrate(
              a, red, result.trajectory, ref_acyclic, *classifier,
              config.calibration_config, sections);
          gate_verdicts.push_back(calibration_verdict_name(outcome.verdict));
          if (outcome.verdict == CalibrationVerdict::pass) return std::nullopt;
          return outcome.feedback;
        };
      }

      PredictionOutcome prediction =
          try_predict(bundle, backend, config.max_attempts, validator);
      // Attach the specific calibration verdicts to the attempt records.
      size_t gate_i = 0;
      for (AttemptRecord& a : prediction.attempts) {
        if (a.status == "calibration_fail" || a.status == "ok") {
          if (gate_i < gate_verdicts.size()) {
            if (a.status == "calibration_fail") a.status = gate_verdicts[gate_i];
            ++gate_i;
          }
        }
      }
      rec.attempts = prediction.attempts;

      if (!prediction.action) {
        result.abort_reason = "prediction_failure";
        result.steps.push_back(rec);
        break;
      }

      Action action = *prediction.action;
      ApplyResult applied = apply(world, current, action);

      PageSnapshot after = world.pages.at(applied.next_page);
      after.step_index = step_index;
      PageSnapshot red_after = redact(after, default_redaction_rules());

      std::optional<std::string> previous;
      if (!result.trajectory.steps.empty())
        previous = result.trajectory.steps.back().description;
      DescribedAction pad;
      if (backend.kind() == BackendKind::scripted &&
          (!scripted || !scripted->has(Role::pad_gen, rec.step_key))) {
        pad = {template_description(action, red, red_after), false};
      } else {
        pad = describe_action(action, red, red_after, previous, backend,
                              rec.step_key);
      }

      result.trajectory.steps.push_back(
          TrajectoryStep{step_index, action, red, red_after, pad.text});

      rec.executed = true;
      rec.noop = applied.noop;
      rec.terminal = applied.terminal;
      rec.action = action;
      rec.description = pad.text;
      rec.description_fallback = pad.template_fallback;
      rec.page_after = applied.next_page;
      result.steps.push_back(rec);

      current = applied.next_page;
      if (applied.terminal) {
        result.terminal_reached = true;
        break;
      }
    }
  } catch (const EmptyCandidatesError&) {
    result.abort_reason = "empty_candidates";
  } catch (const Error& e) {
    result.abort_reason = "backend_error: " + std::string(e.what());
  }

  result.outcomes = outcomes_vs_gold(task, result.trajectory);
  bool all_match = result.trajectory.steps.size() == task.gold_actions.size();
  if (all_match) {
    for (size_t i = 0; i < task.gold_actions.size(); ++i)
      all_match = all_match &&
                  result.trajectory.steps[i].action == task.gold_actions[i];
  }
  result.task_success = all_match && result.terminal_reached;
  return result;
}

}  // namespace llmpa
