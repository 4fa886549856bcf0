#include "llmpa/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

std::string role_name(Role role) {
  switch (role) {
    case Role::chain_gen: return "chain_gen";
    case Role::pad_gen: return "pad_gen";
    case Role::action_pred: return "action_pred";
  }
  return "?";
}

Role role_from_name(const std::string& name) {
  if (name == "chain_gen") return Role::chain_gen;
  if (name == "pad_gen") return Role::pad_gen;
  if (name == "action_pred") return Role::action_pred;
  throw LoadError("unknown role tag: " + name);
}

namespace {

// nlohmann keeps the last value for duplicate object keys, so duplicate
// (role, key) pairs have to be caught at the SAX level.
struct DuplicateKeyChecker : json::json_sax_t {
  std::vector<std::map<std::string, int>> stack;
  std::string duplicate;

  bool key(string_t& val) override {
    if (!stack.empty() && ++stack.back()[val] > 1 && duplicate.empty())
      duplicate = val;
    return true;
  }
  bool start_object(std::size_t) override {
    stack.emplace_back();
    return true;
  }
  bool end_object() override {
    stack.pop_back();
    return true;
  }
  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_array(std::size_t) override { return true; }
  bool end_array() override { return true; }
  bool parse_error(std::size_t, const std::string&,
                   const json::exception& e) override {
    throw ParseError(std::string("script file: ") + e.what());
  }
};

}  // namespace

ScriptTable load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open script file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  DuplicateKeyChecker checker;
  json::sax_parse(text, &checker);
  if (!checker.duplicate.empty())
    throw LoadError("duplicate script key '" + checker.duplicate + "' in " +
                    path);

  json doc = jsonu::parse_text(text, path);
  if (!doc.is_object()) throw LoadError("script file must be an object");
  ScriptTable table;
  for (const auto& [role_tag, entries] : doc.items()) {
    Role role = role_from_name(role_tag);
    if (!entries.is_object())
      throw LoadError("script role '" + role_tag + "' must map keys to lists");
    for (const auto& [key, replies] : entries.items()) {
      if (!replies.is_array() || replies.empty())
        throw LoadError("script entry '" + role_tag + "/" + key +
                        "' must be a non-empty array of replies");
      std::vector<std::string> list;
      for (const json& r : replies) {
        if (!r.is_string())
          throw LoadError("script entry '" + role_tag + "/" + key +
                          "' contains a non-string reply");
        list.push_back(r.get<std::string>());
      }
      table[{role, key}] = std::move(list);
    }
  }
  return table;
}

std::string extract_step_key(const std::string& prompt) {
  static const std::string marker = "STEP_KEY: ";
  size_t pos = 0;
  while (pos != std::string::npos) {
    size_t hit = prompt.find(marker, pos);
    if (hit == std::string::npos) return "";
    if (hit == 0 || prompt[hit - 1] == '\n') {
      size_t start = hit + marker.size();
      size_t end = prompt.find('\n', start);
      std::string key = prompt.substr(
          start, end == std::string::npos ? std::string::npos : end - start);
      while (!key.empty() && (key.back() == '\r' || key.back() == ' '))
        key.pop_back();
      return key;
    }
    pos = hit + marker.size();
  }
  return "";
}

ScriptedBackend::ScriptedBackend(ScriptTable table)
    : table_(std::move(table)) {}

bool ScriptedBackend::has(Role role, const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return table_.count({role, key}) > 0;
}

std::string ScriptedBackend::complete(const BackendRequest& request) {
  std::string key = extract_step_key(request.prompt);
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = table_.find({request.role, key});
  if (it == table_.end())
    throw ScriptGapError("no scripted reply for (" + role_name(request.role) +
                         ", '" + key + "')");
  size_t& cursor = cursors_[{request.role, key}];
  const std::vector<std::string>& replies = it->second;
  std::string reply = replies[std::min(cursor, replies.size() - 1)];
  ++cursor;
  return reply;
}

std::string TemplateBackend::complete(const BackendRequest& request) {
  switch (request.role) {
    case Role::action_pred:
      return "CLICK 1";
    case Role::chain_gen:
      return "1. Open the app\n2. Complete the task";
    case Role::pad_gen:
      return "Performed an action on the page.";
  }
  return "";
}

namespace {

void split_url(const std::string& url, std::string& base, std::string& path) {
  size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("http endpoint must be a full URL: " + url);
  size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    base = url;
    path = "/";
  } else {
    base = url.substr(0, slash);
    path = url.substr(slash);
  }
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty() || config_.model_name.empty())
    throw ConfigError("http backend requires endpoint and model_name");
  split_url(config_.endpoint, base_url_, path_);
}

int HttpBackend::last_attempt_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return last_attempts_;
}

std::string HttpBackend::complete(const BackendRequest& request) {
  json body;
  body["model"] = config_.model_name;
  body["messages"] = json::array({{{"role", "user"},
                                   {"content", request.prompt}}});
  body["temperature"] = request.params.temperature;
  body["max_tokens"] = request.params.max_tokens;
  std::string payload = body.dump();

  httplib::Client client(base_url_);
  client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
  client.set_read_timeout(config_.timeout_ms / 1000,
                          (config_.timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (const char* key = std::getenv("LLMPA_API_KEY"))
    headers.emplace("Authorization", std::string("Bearer ") + key);

  std::string last_error;
  int attempts = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(
          config_.backoff_base_ms * (1LL << (attempt - 1)));
      std::this_thread::sleep_for(delay);
    }
    ++attempts;
    httplib::Result res = client.Post(path_, headers, payload,
                                      "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      last_attempts_ = attempts;
    }
    if (res->status >= 400)
      throw RequestError("http " + std::to_string(res->status) + ": " +
                         res->body);
    json reply = jsonu::parse_text(res->body, "chat completion response");
    const json& choices = jsonu::require_array(reply, "choices", "$");
    if (choices.empty())
      throw TransportError("chat completion response has no choices");
    const json& message = jsonu::require(choices[0], "message", "$.choices[0]");
    return jsonu::require_string(message, "content", "$.choices[0].message");
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    last_attempts_ = attempts;
  }
  throw TransportError("retries exhausted after " + std::to_string(attempts) +
                       " attempts: " + last_error);
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config,
                                         const std::string& script_path) {
  switch (config.kind) {
    case BackendKind::scripted:
      if (script_path.empty())
        throw ConfigError("scripted backend requires a script file");
      return std::make_unique<ScriptedBackend>(load_script(script_path));
    case BackendKind::template_render:
      return std::make_unique<TemplateBackend>();
    case BackendKind::http:
      return std::make_unique<HttpBackend>(config);
  }
  throw ConfigError("unknown backend kind");
}

}  // namespace llmpa
