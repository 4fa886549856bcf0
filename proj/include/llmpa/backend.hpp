#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "llmpa/errors.hpp"

namespace llmpa {

enum class Role { chain_gen, pad_gen, action_pred };

std::string role_name(Role role);
Role role_from_name(const std::string& name);

struct RequestParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

struct BackendRequest {
  Role role = Role::action_pred;
  std::string prompt;  // non-empty
  RequestParams params;
};

enum class BackendKind { scripted, template_render, http };

struct BackendConfig {
  BackendKind kind = BackendKind::template_render;
  std::string endpoint = {};    // http only, full URL
  std::string model_name = {};  // http only
  int timeout_ms = 30000;
  int max_retries = 2;
  int backoff_base_ms = 200;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const BackendRequest& request) = 0;
  virtual BackendKind kind() const = 0;
};

// Script file: {"<role_tag>": {"<key>": ["reply", ...], ...}, ...}
// Replies for one key are consumed in order; once exhausted the last reply
// repeats. Keys are read from the "STEP_KEY: <key>" marker in the prompt.
using ScriptTable =
    std::map<std::pair<Role, std::string>, std::vector<std::string>>;

ScriptTable load_script(const std::string& path);

// Pulls the STEP_KEY marker out of a rendered prompt; empty if absent.
std::string extract_step_key(const std::string& prompt);

class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(ScriptTable table);
  std::string complete(const BackendRequest& request) override;
  BackendKind kind() const override { return BackendKind::scripted; }
  bool has(Role role, const std::string& key) const;

 private:
  ScriptTable table_;
  std::map<std::pair<Role, std::string>, size_t> cursors_;
  mutable std::mutex mutex_;
};

// Deterministic renderer used when no model is available. Action prediction
// always answers "CLICK 1"; chain generation emits a minimal two-step list.
// Previous-action descriptions are rendered by describe_action directly.
class TemplateBackend : public LlmBackend {
 public:
  std::string complete(const BackendRequest& request) override;
  BackendKind kind() const override { return BackendKind::template_render; }
};

// Chat-completions client. POSTs {model, messages, temperature, max_tokens}
// and returns the first choice's message content. Retries transport errors
// and 5xx with exponential backoff; never retries 4xx. Reads the API key
// from the LLMPA_API_KEY environment variable.
class HttpBackend : public LlmBackend {
 public:
  explicit HttpBackend(BackendConfig config);
  std::string complete(const BackendRequest& request) override;
  BackendKind kind() const override { return BackendKind::http; }
  int last_attempt_count() const;

 private:
  BackendConfig config_;
  std::string base_url_;
  std::string path_;
  mutable std::mutex mutex_;
  int last_attempts_ = 0;
};

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config,
                                         const std::string& script_path = "");

}  // namespace llmpa
