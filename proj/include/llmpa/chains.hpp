#pragma once

#include <functional>
#include <string>
#include <vector>

#include "llmpa/backend.hpp"

namespace llmpa {

enum class ChainKind { abstract_chain, elaborate_chain };

std::string chain_kind_name(ChainKind kind);
ChainKind chain_kind_from_name(const std::string& name);

/// Ordered natural-language plan for a task.
struct InstructionChain {
  ChainKind kind = ChainKind::abstract_chain;
  std::string task;
  std::vector<std::string> steps;  // non-empty, each non-empty
};

struct PadScore {
  size_t pad_index = 0;    // 1-based
  size_t chain_index = 0;  // 1-based, 0 when the pad matched nothing
  double score = 0;
};

struct ProgressAlignment {
  size_t matched_prefix_end = 0;  // m: highest consumed chain index
  std::vector<std::string> remaining_steps;  // chain steps m+1..n
  std::vector<PadScore> per_pad_scores;
};

// Lowercased word tokens, split on non-alphanumeric bytes.
std::vector<std::string> tokenize(const std::string& text);

// Token-level Dice coefficient over multisets: 2|A∩B| / (|A|+|B|).
// 1.0 when both token lists are empty.
double similarity(const std::string& a, const std::string& b);

using SimilarityFn = std::function<double(const std::string&,
                                          const std::string&)>;

// Parses a numbered-list reply into steps. Prose before the first numbered
// line is discarded; later unnumbered lines continue the previous step.
// Fewer than two steps is a format error carrying the raw reply.
std::vector<std::string> parse_numbered_list(const std::string& reply);

std::string render_numbered_list(const std::vector<std::string>& steps);

// Asks the backend to decompose the task, then parses its reply.
InstructionChain generate_chain(const std::string& task, ChainKind kind,
                                LlmBackend& backend,
                                const std::string& step_key = "");

// Scans descriptions in order; each consumes the earliest unconsumed chain
// step whose similarity clears min_score. Steps jumped over count as passed,
// so remaining_steps is always a suffix of the chain.
ProgressAlignment align_progress(const InstructionChain& chain,
                                 const std::vector<std::string>& pad_list,
                                 double min_score,
                                 const SimilarityFn& sim = similarity);

// Sidecar cache: {"task": str, "kind": str, "steps": [str]}.
void save_chain(const InstructionChain& chain, const std::string& path);
InstructionChain load_chain(const std::string& path);

}  // namespace llmpa
