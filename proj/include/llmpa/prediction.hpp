#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "llmpa/actions.hpp"
#include "llmpa/backend.hpp"
#include "llmpa/layout.hpp"

namespace llmpa {

enum class CandidateSource { history_top, task_text, page_sections };

std::string candidate_source_name(CandidateSource source);

struct CandidateEntry {
  std::string display_text;
  CandidateSource source = CandidateSource::page_sections;
};

/// The closed set of element texts offered to the predictor. Entries are
/// pairwise distinct and capped at max_size.
struct CandidateSet {
  std::vector<CandidateEntry> entries;
  size_t max_size = 50;

  std::optional<size_t> find(const std::string& display_text) const;
};

struct PromptBundle {
  std::string task;
  std::vector<std::string> chain_remaining;
  std::vector<Action> history_actions;
  std::vector<std::string> history_descriptions;  // parallel to actions
  std::string page_digest;
  CandidateSet candidates;
  std::string step_key;     // scripted-backend marker; empty to omit
  bool include_plan = true;     // instruction-chain section toggle
  bool include_history = true;  // history section toggle
  size_t budget = 8000;         // rendered character budget
};

// Merge order: history_top, quoted phrases from the task, section display
// texts. First occurrence wins; the result is truncated to max_size.
// An empty merge is an error because prediction cannot proceed.
CandidateSet build_candidates(const std::vector<Section>& sections,
                              const std::string& task,
                              const std::vector<std::string>& history_top,
                              size_t max_size);

// Variant for the grouping-off ablation: candidates come straight from
// node texts, duplicates removed but not disambiguated.
CandidateSet build_candidates_from_texts(
    const std::vector<std::string>& texts, const std::string& task,
    const std::vector<std::string>& history_top, size_t max_size);

// Deterministic rendering with labeled sections in fixed order: TASK, PLAN,
// HISTORY, PAGE, CANDIDATES, INSTRUCTION. When over budget, the oldest
// history pairs go first, then the page digest is cut; TASK and CANDIDATES
// always survive. Byte-identical output for identical bundles.
std::string assemble_prompt(const PromptBundle& bundle,
                            const std::vector<std::string>& revision_notes = {});

// Accepts the closed answer grammar:
//   CLICK <n|text> | SCROLL <n|text|PAGE> | TYPE <n|text> :: <value>
// Numbers resolve through candidate indices (1-based); texts must equal a
// candidate display text after trimming. Unknown function tokens and a
// missing TYPE value are format errors; an element outside the candidate
// set is a hallucination error.
Action parse_action_reply(const std::string& reply,
                          const CandidateSet& candidates);

// Optional post-parse gate; returns feedback text on rejection.
using ActionValidator = std::function<std::optional<std::string>(const Action&)>;

struct AttemptRecord {
  int attempt = 1;
  std::string prompt;
  std::string raw_reply;
  std::string status;    // ok | format_error | hallucination | <gate verdict>
  std::string feedback;  // revision note added after this attempt
};

struct PredictionResult {
  Action action;
  std::vector<AttemptRecord> attempts;
};

struct PredictionOutcome {
  std::optional<Action> action;  // nullopt once attempts are exhausted
  std::vector<AttemptRecord> attempts;
};

// Non-throwing core used by the episode runner, which needs the attempt
// records for the trace even when every attempt failed.
PredictionOutcome try_predict(const PromptBundle& bundle, LlmBackend& backend,
                              int max_attempts,
                              const ActionValidator& validator = {});

// Assemble, invoke, parse; format/hallucination errors (and validator
// rejections, when a validator is given) are fed back as revision notes on
// the next attempt. Throws PredictionFailure with all raw replies once
// attempts are exhausted.
PredictionResult predict_next_action(const PromptBundle& bundle,
                                     LlmBackend& backend, int max_attempts,
                                     const ActionValidator& validator = {});

}  // namespace llmpa
