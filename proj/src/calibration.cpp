#include "llmpa/calibration.hpp"

#include <cmath>

#include "llmpa/errors.hpp"

namespace llmpa {

ExecutabilityVerdict ExecutabilityVerdict::make(double score, double threshold,
                                                std::string reason) {
  ExecutabilityVerdict v;
  v.score = score;
  v.threshold = threshold;
  v.executable = score >= threshold;
  v.reason = std::move(reason);
  return v;
}

std::string calibration_verdict_name(CalibrationVerdict v) {
  switch (v) {
    case CalibrationVerdict::pass: return "pass";
    case CalibrationVerdict::fail_executability: return "fail_executability";
    case CalibrationVerdict::fail_loop: return "fail_loop";
  }
  return "?";
}

namespace {

void collect_matches(const UiNode& node, const std::string& text,
                     std::vector<const UiNode*>& out) {
  if (node.text == text) out.push_back(&node);
  for (const UiNode& c : node.children) collect_matches(c, text, out);
}

const UiNode* find_by_id(const UiNode& node, const std::string& id) {
  if (node.node_id == id) return &node;
  for (const UiNode& c : node.children)
    if (const UiNode* hit = find_by_id(c, id)) return hit;
  return nullptr;
}

const UiNode* find_by_id(const PageSnapshot& page, const std::string& id) {
  for (const UiNode& r : page.roots)
    if (const UiNode* hit = find_by_id(r, id)) return hit;
  return nullptr;
}

}  // namespace

ResolvedElement resolve_element(const std::string& element,
                                const PageSnapshot& page,
                                const std::vector<Section>& sections) {
  ResolvedElement resolved;
  if (element == kPageSentinel) {
    resolved.is_page_sentinel = true;
    return resolved;
  }
  for (const UiNode& r : page.roots) collect_matches(r, element, resolved.nodes);
  if (resolved.nodes.empty()) {
    for (const Section& s : sections) {
      if (s.display_text() != element) continue;
      for (const std::string& id : s.member_node_ids)
        if (const UiNode* n = find_by_id(page, id)) resolved.nodes.push_back(n);
      break;
    }
  }
  for (const UiNode* n : resolved.nodes)
    resolved.is_container |= !n->children.empty();
  return resolved;
}

double FlagClassifier::score(const Action& action,
                             const ResolvedElement& resolved) const {
  switch (action.function()) {
    case ActionFunction::click:
      for (const UiNode* n : resolved.nodes)
        if (n->clickable) return 1.0;
      return 0.0;
    case ActionFunction::type:
      for (const UiNode* n : resolved.nodes)
        if (n->typeable) return 1.0;
      return 0.0;
    case ActionFunction::scroll:
      return (resolved.is_page_sentinel || resolved.is_container) ? 1.0 : 0.0;
  }
  return 0.0;
}

void LogisticClassifier::fit(const std::vector<Sample>& samples, int epochs,
                             double learning_rate) {
  if (samples.empty()) throw ConfigError("cannot fit on zero samples");
  w_area_ = w_leaf_ = w_len_ = bias_ = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double g_area = 0, g_leaf = 0, g_len = 0, g_bias = 0;
    for (const Sample& s : samples) {
      double p = score_features(s.area, s.leaf, s.text_length);
      double err = p - (s.positive ? 1.0 : 0.0);
      g_area += err * s.area / 100000.0;
      g_leaf += err * (s.leaf ? 1.0 : 0.0);
      g_len += err * s.text_length / 50.0;
      g_bias += err;
    }
    double n = static_cast<double>(samples.size());
    w_area_ -= learning_rate * g_area / n;
    w_leaf_ -= learning_rate * g_leaf / n;
    w_len_ -= learning_rate * g_len / n;
    bias_ -= learning_rate * g_bias / n;
  }
}

double LogisticClassifier::score_features(double area, bool leaf,
                                          size_t text_length) const {
  double z = w_area_ * area / 100000.0 + w_leaf_ * (leaf ? 1.0 : 0.0) +
             w_len_ * text_length / 50.0 + bias_;
  return 1.0 / (1.0 + std::exp(-z));
}

double LogisticClassifier::score(const Action&,
                                 const ResolvedElement& resolved) const {
  if (resolved.is_page_sentinel) return 1.0;
  if (resolved.nodes.empty()) return 0.0;
  const UiNode& n = *resolved.nodes.front();
  return score_features(static_cast<double>(n.width) * n.height,
                        n.children.empty(), n.text.size());
}

namespace {

std::string needed_flag(ActionFunction fn) {
  switch (fn) {
    case ActionFunction::click: return "clickable";
    case ActionFunction::type: return "typeable";
    case ActionFunction::scroll: return "scrollable";
  }
  return "?";
}

}  // namespace

ExecutabilityVerdict score_executability(
    const Action& action, const PageSnapshot& page,
    const ExecutabilityClassifier& classifier,
    const std::vector<Section>& sections, const CalibrationConfig& config) {
  ResolvedElement resolved = resolve_element(action.element(), page, sections);
  if (!resolved.is_page_sentinel && resolved.nodes.empty())
    return ExecutabilityVerdict::make(0.0, config.threshold,
                                      "element not on page");
  double score = classifier.score(action, resolved);
  std::string reason =
      score >= config.threshold
          ? "element is " + needed_flag(action.function())
          : "element is not " + needed_flag(action.function());
  return ExecutabilityVerdict::make(score, config.threshold, reason);
}

CalibrationOutcome check_logic(const Action& action,
                               const Trajectory& trajectory,
                               const std::string& current_page_id,
                               bool reference_acyclic, bool* vacuous) {
  if (vacuous) *vacuous = false;
  if (!trajectory.reference_path || !reference_acyclic) {
    if (vacuous) *vacuous = true;
    return CalibrationOutcome{CalibrationVerdict::pass, ""};
  }
  if (would_loop(trajectory.steps, current_page_id, action)) {
    return CalibrationOutcome{
        CalibrationVerdict::fail_loop,
        "Action repeats a previous step; the task has no loops; choose a "
        "different action."};
  }
  return CalibrationOutcome{CalibrationVerdict::pass, ""};
}

CalibrationOutcome calibrate(const Action& action, const PageSnapshot& page,
                             const Trajectory& trajectory,
                             bool reference_acyclic,
                             const ExecutabilityClassifier& classifier,
                             const CalibrationConfig& config,
                             const std::vector<Section>& sections,
                             ExecutabilityVerdict* verdict_out) {
  ExecutabilityVerdict verdict =
      score_executability(action, page, classifier, sections, config);
  if (verdict_out) *verdict_out = verdict;
  if (!verdict.executable) {
    std::string feedback;
    if (verdict.reason == "element not on page")
      feedback = "Element '" + action.element() +
                 "' is not on the page; choose a different candidate.";
    else
      feedback = "Element '" + action.element() + "' is not " +
                 needed_flag(action.function()) +
                 "; choose a different candidate.";
    return CalibrationOutcome{CalibrationVerdict::fail_executability,
                              feedback};
  }
  return check_logic(action, trajectory, page.page_id, reference_acyclic);
}

}  // namespace llmpa
