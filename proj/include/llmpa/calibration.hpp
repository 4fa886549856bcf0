#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "llmpa/actions.hpp"
#include "llmpa/layout.hpp"
#include "llmpa/ui_model.hpp"

namespace llmpa {

struct ExecutabilityVerdict {
  double score = 0;      // in [0,1]
  double threshold = 0.5;
  bool executable = false;  // score >= threshold, enforced on construction
  std::string reason;

  static ExecutabilityVerdict make(double score, double threshold,
                                   std::string reason);
};

enum class CalibrationVerdict { pass, fail_executability, fail_loop };

std::string calibration_verdict_name(CalibrationVerdict v);

struct CalibrationOutcome {
  CalibrationVerdict verdict = CalibrationVerdict::pass;
  std::string feedback;  // non-empty on any fail
};

// What the predicted element resolved to on the page.
struct ResolvedElement {
  std::vector<const UiNode*> nodes;  // section members or the exact node
  bool is_container = false;
  bool is_page_sentinel = false;
};

// Matches the action element against raw node texts, then against section
// display texts when sections are supplied. Empty nodes + not-sentinel means
// the element is not on the page.
ResolvedElement resolve_element(const std::string& element,
                                const PageSnapshot& page,
                                const std::vector<Section>& sections = {});

class ExecutabilityClassifier {
 public:
  virtual ~ExecutabilityClassifier() = default;
  virtual double score(const Action& action,
                       const ResolvedElement& resolved) const = 0;
};

// Exact against the simulated world: 1.0 when the resolved node (or any
// section member) carries the affordance the function needs, else 0.0.
// Scroll is executable on containers and the PAGE sentinel.
class FlagClassifier : public ExecutabilityClassifier {
 public:
  double score(const Action& action,
               const ResolvedElement& resolved) const override;
};

// Logistic regressor over (normalized area, is-leaf, text length). Only
// here to exercise the score-plus-threshold path with non-binary scores.
class LogisticClassifier : public ExecutabilityClassifier {
 public:
  struct Sample {
    double area = 0;       // pixels
    bool leaf = true;
    size_t text_length = 0;
    bool positive = false;
  };

  LogisticClassifier() = default;
  void fit(const std::vector<Sample>& samples, int epochs = 500,
           double learning_rate = 0.1);
  double score_features(double area, bool leaf, size_t text_length) const;
  double score(const Action& action,
               const ResolvedElement& resolved) const override;

 private:
  double w_area_ = 0, w_leaf_ = 0, w_len_ = 0, bias_ = 0;
};

struct CalibrationConfig {
  double threshold = 0.5;
};

// Scores whether the predicted element can actually be executed on the page.
// Non-resolution is a zero-score verdict with reason "element not on page".
ExecutabilityVerdict score_executability(
    const Action& action, const PageSnapshot& page,
    const ExecutabilityClassifier& classifier,
    const std::vector<Section>& sections = {},
    const CalibrationConfig& config = {});

// Loop-logic constraint: fail_loop iff executing the action on the current
// page would repeat a (page, function, element) triple. Passes vacuously
// (with a log note in `vacuous`) when the reference path is absent or
// cyclic.
CalibrationOutcome check_logic(const Action& action,
                               const Trajectory& trajectory,
                               const std::string& current_page_id,
                               bool reference_acyclic,
                               bool* vacuous = nullptr);

// Executability first, loop logic second; pass only if both pass.
CalibrationOutcome calibrate(const Action& action, const PageSnapshot& page,
                             const Trajectory& trajectory,
                             bool reference_acyclic,
                             const ExecutabilityClassifier& classifier,
                             const CalibrationConfig& config,
                             const std::vector<Section>& sections = {},
                             ExecutabilityVerdict* verdict_out = nullptr);

}  // namespace llmpa
