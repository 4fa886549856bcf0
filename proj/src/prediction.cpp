#include "llmpa/prediction.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "llmpa/errors.hpp"

namespace llmpa {

std::string candidate_source_name(CandidateSource source) {
  switch (source) {
    case CandidateSource::history_top: return "history_top";
    case CandidateSource::task_text: return "task_text";
    case CandidateSource::page_sections: return "page_sections";
  }
  return "?";
}

std::optional<size_t> CandidateSet::find(const std::string& text) const {
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].display_text == text) return i;
  return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Phrases the task itself puts in quotes, e.g. type values or button names.
std::vector<std::string> quoted_phrases(const std::string& task) {
  std::vector<std::string> out;
  for (char quote : {'\'', '"'}) {
    size_t pos = 0;
    while (true) {
      size_t open = task.find(quote, pos);
      if (open == std::string::npos) break;
      size_t close = task.find(quote, open + 1);
      if (close == std::string::npos) break;
      std::string phrase = trim(task.substr(open + 1, close - open - 1));
      if (!phrase.empty()) out.push_back(phrase);
      pos = close + 1;
    }
  }
  return out;
}

CandidateSet merge_candidates(const std::vector<std::string>& history_top,
                              const std::string& task,
                              const std::vector<std::string>& section_texts,
                              size_t max_size) {
  if (max_size < 1) throw ConfigError("candidate max_size must be >= 1");
  CandidateSet set;
  set.max_size = max_size;
  std::set<std::string> seen;
  auto add = [&](const std::string& text, CandidateSource source) {
    if (text.empty()) return;
    if (set.entries.size() >= max_size) return;
    if (!seen.insert(text).second) return;
    set.entries.push_back(CandidateEntry{text, source});
  };
  for (const std::string& t : history_top) add(t, CandidateSource::history_top);
  for (const std::string& t : quoted_phrases(task))
    add(t, CandidateSource::task_text);
  for (const std::string& t : section_texts)
    add(t, CandidateSource::page_sections);
  if (set.entries.empty())
    throw EmptyCandidatesError("candidate set is empty; cannot predict");
  return set;
}

}  // namespace

CandidateSet build_candidates(const std::vector<Section>& sections,
                              const std::string& task,
                              const std::vector<std::string>& history_top,
                              size_t max_size) {
  std::vector<std::string> texts;
  for (const Section& s : sections) texts.push_back(s.display_text());
  return merge_candidates(history_top, task, texts, max_size);
}

CandidateSet build_candidates_from_texts(
    const std::vector<std::string>& texts, const std::string& task,
    const std::vector<std::string>& history_top, size_t max_size) {
  return merge_candidates(history_top, task, texts, max_size);
}

namespace {

std::string render_history_pair(size_t index, const Action& action,
                                const std::string& description) {
  return std::to_string(index + 1) + ". " + action.grammar_form() + "\n   " +
         description + "\n";
}

std::string render(const PromptBundle& b, size_t history_from,
                   size_t digest_len,
                   const std::vector<std::string>& notes) {
  std::string out;
  out += "TASK:\n" + b.task + "\n\n";
  if (b.include_plan) {
    out += "PLAN:\n";
    if (b.chain_remaining.empty()) {
      out += "(none)\n";
    } else {
      for (const std::string& step : b.chain_remaining)
        out += "- " + step + "\n";
    }
    out += "\n";
  }
  if (b.include_history) {
    out += "HISTORY:\n";
    if (b.history_actions.empty() ||
        history_from >= b.history_actions.size()) {
      out += "(none)\n";
    } else {
      for (size_t i = history_from; i < b.history_actions.size(); ++i) {
        std::string desc = i < b.history_descriptions.size()
                               ? b.history_descriptions[i]
                               : "";
        out += render_history_pair(i, b.history_actions[i], desc);
      }
    }
    out += "\n";
  }
  out += "PAGE:\n" + b.page_digest.substr(0, digest_len) + "\n\n";
  out += "CANDIDATES:\n";
  for (size_t i = 0; i < b.candidates.entries.size(); ++i)
    out += std::to_string(i + 1) + ". " +
           b.candidates.entries[i].display_text + "\n";
  out += "\n";
  out += "INSTRUCTION:\n";
  out += "Reply with exactly one line: CLICK <n|text> | SCROLL <n|text|PAGE>"
         " | TYPE <n|text> :: <value>. Pick elements only from CANDIDATES.\n";
  if (!b.step_key.empty()) out += "STEP_KEY: " + b.step_key + "\n";
  for (const std::string& note : notes) out += "REVISION: " + note + "\n";
  return out;
}

}  // namespace

std::string assemble_prompt(const PromptBundle& bundle,
                            const std::vector<std::string>& revision_notes) {
  size_t history_from = 0;
  size_t digest_len = bundle.page_digest.size();
  std::string out = render(bundle, history_from, digest_len, revision_notes);
  // Evict oldest history pairs, then cut the digest.
  while (out.size() > bundle.budget &&
         history_from < bundle.history_actions.size()) {
    ++history_from;
    out = render(bundle, history_from, digest_len, revision_notes);
  }
  while (out.size() > bundle.budget && digest_len > 0) {
    size_t over = out.size() - bundle.budget;
    digest_len = digest_len > over ? digest_len - over : 0;
    out = render(bundle, history_from, digest_len, revision_notes);
  }
  return out;
}

Action parse_action_reply(const std::string& reply,
                          const CandidateSet& candidates) {
  // First line that starts with a known function token.
  std::string line;
  size_t pos = 0;
  bool found = false;
  while (pos <= reply.size()) {
    size_t end = reply.find('\n', pos);
    std::string candidate_line = trim(
        reply.substr(pos, end == std::string::npos ? std::string::npos
                                                   : end - pos));
    if (candidate_line.rfind("CLICK", 0) == 0 ||
        candidate_line.rfind("SCROLL", 0) == 0 ||
        candidate_line.rfind("TYPE", 0) == 0) {
      line = candidate_line;
      found = true;
      break;
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  if (!found)
    throw FormatError("reply does not start with CLICK, SCROLL or TYPE: " +
                      trim(reply));

  size_t space = line.find(' ');
  if (space == std::string::npos)
    throw FormatError("reply names no element: " + line);
  std::string fn_token = line.substr(0, space);
  std::string rest = trim(line.substr(space + 1));

  ActionFunction fn;
  if (fn_token == "CLICK") fn = ActionFunction::click;
  else if (fn_token == "SCROLL") fn = ActionFunction::scroll;
  else if (fn_token == "TYPE") fn = ActionFunction::type;
  else throw FormatError("unknown function token: " + fn_token);

  std::optional<std::string> value;
  if (fn == ActionFunction::type) {
    size_t sep = rest.find("::");
    if (sep == std::string::npos)
      throw FormatError("TYPE reply is missing ':: <value>': " + line);
    value = trim(rest.substr(sep + 2));
    rest = trim(rest.substr(0, sep));
    if (value->empty())
      throw FormatError("TYPE reply has an empty value: " + line);
  }
  if (rest.empty()) throw FormatError("reply names no element: " + line);

  std::string element;
  bool all_digits = std::all_of(rest.begin(), rest.end(), [](unsigned char c) {
    return std::isdigit(c);
  });
  if (all_digits) {
    size_t index = std::stoul(rest);
    if (index < 1 || index > candidates.entries.size())
      throw HallucinationError("candidate index " + rest +
                               " is out of range");
    element = candidates.entries[index - 1].display_text;
  } else if (fn == ActionFunction::scroll && rest == kPageSentinel) {
    element = kPageSentinel;
  } else {
    if (!candidates.find(rest))
      throw HallucinationError("element '" + rest +
                               "' is not in the candidate set");
    element = rest;
  }
  return Action::make(fn, element, value);
}

PredictionOutcome try_predict(const PromptBundle& bundle, LlmBackend& backend,
                              int max_attempts,
                              const ActionValidator& validator) {
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  std::vector<std::string> notes;
  PredictionOutcome out;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    AttemptRecord rec;
    rec.attempt = attempt;
    rec.prompt = assemble_prompt(bundle, notes);

    BackendRequest req;
    req.role = Role::action_pred;
    req.prompt = rec.prompt;
    rec.raw_reply = backend.complete(req);

    try {
      Action action = parse_action_reply(rec.raw_reply, bundle.candidates);
      if (validator) {
        if (auto feedback = validator(action)) {
          rec.status = "calibration_fail";
          rec.feedback = *feedback;
          notes.push_back(*feedback);
          out.attempts.push_back(rec);
          continue;
        }
      }
      rec.status = "ok";
      out.attempts.push_back(rec);
      out.action = action;
      return out;
    } catch (const FormatError& e) {
      rec.status = "format_error";
      rec.feedback = std::string("Your reply was malformed: ") + e.what();
    } catch (const HallucinationError& e) {
      rec.status = "hallucination";
      rec.feedback = std::string(e.what()) +
                     "; choose one of the numbered candidates.";
    }
    notes.push_back(rec.feedback);
    out.attempts.push_back(rec);
  }
  return out;
}

PredictionResult predict_next_action(const PromptBundle& bundle,
                                     LlmBackend& backend, int max_attempts,
                                     const ActionValidator& validator) {
  PredictionOutcome out = try_predict(bundle, backend, max_attempts, validator);
  if (!out.action) {
    std::string detail;
    for (const AttemptRecord& a : out.attempts) {
      if (!detail.empty()) detail += " | ";
      detail += a.raw_reply;
    }
    throw PredictionFailure("no well-formed action after " +
                            std::to_string(max_attempts) +
                            " attempts; replies: " + detail);
  }
  return PredictionResult{*out.action, std::move(out.attempts)};
}

}  // namespace llmpa
