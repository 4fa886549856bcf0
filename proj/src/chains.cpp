#include "llmpa/chains.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

std::string chain_kind_name(ChainKind kind) {
  return kind == ChainKind::abstract_chain ? "abstract" : "elaborate";
}

ChainKind chain_kind_from_name(const std::string& name) {
  if (name == "abstract") return ChainKind::abstract_chain;
  if (name == "elaborate") return ChainKind::elaborate_chain;
  throw ParseError("unknown chain kind: " + name);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

double similarity(const std::string& a, const std::string& b) {
  std::vector<std::string> ta = tokenize(a);
  std::vector<std::string> tb = tokenize(b);
  if (ta.empty() && tb.empty()) return 1.0;
  if (ta.empty() || tb.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const std::string& t : ta) ++counts[t];
  int shared = 0;
  for (const std::string& t : tb) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return 2.0 * shared / (ta.size() + tb.size());
}

namespace {

// A numbered line looks like "3. text", "3) text" or "3: text".
bool split_numbered(const std::string& line, std::string& content) {
  size_t i = 0;
  while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
    ++i;
  size_t digits = i;
  while (digits < line.size() &&
         std::isdigit(static_cast<unsigned char>(line[digits])))
    ++digits;
  if (digits == i) return false;
  if (digits >= line.size()) return false;
  char sep = line[digits];
  if (sep != '.' && sep != ')' && sep != ':') return false;
  size_t start = digits + 1;
  while (start < line.size() &&
         std::isspace(static_cast<unsigned char>(line[start])))
    ++start;
  content = line.substr(start);
  while (!content.empty() &&
         std::isspace(static_cast<unsigned char>(content.back())))
    content.pop_back();
  return true;
}

// Locates the first "N." / "N)" / "N:" marker, which may sit after a prose
// preamble on the same line.
size_t first_marker(const std::string& text) {
  for (size_t i = 0; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
    if (i > 0 && !std::isspace(static_cast<unsigned char>(text[i - 1])))
      continue;
    size_t d = i;
    while (d < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[d])))
      ++d;
    if (d >= text.size()) break;
    char sep = text[d];
    if (sep != '.' && sep != ')' && sep != ':') continue;
    if (d + 1 < text.size() &&
        std::isdigit(static_cast<unsigned char>(text[d + 1])))
      continue;  // decimal number, not a list marker
    return i;
  }
  return std::string::npos;
}

}  // namespace

std::vector<std::string> parse_numbered_list(const std::string& reply) {
  size_t start = first_marker(reply);
  if (start == std::string::npos)
    throw FormatError("reply is not a numbered list: " + reply);

  std::vector<std::string> steps;
  std::istringstream in(reply.substr(start));
  std::string line;
  bool started = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string content;
    if (split_numbered(line, content)) {
      started = true;
      if (!content.empty()) steps.push_back(content);
    } else if (started && !steps.empty()) {
      // Wrapped continuation of the previous step.
      std::string trimmed = line;
      size_t a = trimmed.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      size_t b = trimmed.find_last_not_of(" \t");
      steps.back() += " " + trimmed.substr(a, b - a + 1);
    }
  }
  if (steps.size() < 2)
    throw FormatError("reply is not a numbered list of at least two steps: " +
                      reply);
  return steps;
}

std::string render_numbered_list(const std::vector<std::string>& steps) {
  std::string out;
  for (size_t i = 0; i < steps.size(); ++i)
    out += std::to_string(i + 1) + ". " + steps[i] + "\n";
  return out;
}

InstructionChain generate_chain(const std::string& task, ChainKind kind,
                                LlmBackend& backend,
                                const std::string& step_key) {
  if (task.empty()) throw ConfigError("task must be non-empty");
  BackendRequest req;
  req.role = Role::chain_gen;
  std::string detail =
      kind == ChainKind::elaborate_chain
          ? "Each step must name the concrete element to interact with."
          : "Keep the steps platform-agnostic and high level.";
  req.prompt = "Decompose the task into a numbered list of steps. " + detail +
               "\nTASK: " + task + "\n";
  if (!step_key.empty()) req.prompt += "STEP_KEY: " + step_key + "\n";

  std::string reply = backend.complete(req);
  InstructionChain chain;
  chain.kind = kind;
  chain.task = task;
  chain.steps = parse_numbered_list(reply);
  return chain;
}

ProgressAlignment align_progress(const InstructionChain& chain,
                                 const std::vector<std::string>& pad_list,
                                 double min_score, const SimilarityFn& sim) {
  if (min_score < 0 || min_score > 1)
    throw ConfigError("min_score must be in [0,1]");
  ProgressAlignment out;
  size_t m = 0;  // consumed prefix end, 0-based count
  for (size_t p = 0; p < pad_list.size(); ++p) {
    PadScore ps;
    ps.pad_index = p + 1;
    double best_unmatched = 0;
    for (size_t c = m; c < chain.steps.size(); ++c) {
      double score = sim(pad_list[p], chain.steps[c]);
      best_unmatched = std::max(best_unmatched, score);
      if (score >= min_score) {
        m = c + 1;
        ps.chain_index = c + 1;
        ps.score = score;
        break;
      }
    }
    if (ps.chain_index == 0) ps.score = best_unmatched;
    out.per_pad_scores.push_back(ps);
  }
  out.matched_prefix_end = m;
  out.remaining_steps.assign(chain.steps.begin() + m, chain.steps.end());
  return out;
}

void save_chain(const InstructionChain& chain, const std::string& path) {
  json doc;
  doc["task"] = chain.task;
  doc["kind"] = chain_kind_name(chain.kind);
  doc["steps"] = chain.steps;
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write chain cache: " + path);
  out << doc.dump(2) << "\n";
}

InstructionChain load_chain(const std::string& path) {
  json doc = jsonu::load_file(path);
  InstructionChain chain;
  chain.task = jsonu::require_string(doc, "task", path);
  chain.kind = chain_kind_from_name(jsonu::require_string(doc, "kind", path));
  const json& steps = jsonu::require_array(doc, "steps", path);
  for (const json& s : steps) {
    if (!s.is_string() || s.get<std::string>().empty())
      throw IntegrityError("chain steps must be non-empty strings: " + path);
    chain.steps.push_back(s.get<std::string>());
  }
  if (chain.steps.empty())
    throw IntegrityError("chain must have at least one step: " + path);
  return chain;
}

}  // namespace llmpa
