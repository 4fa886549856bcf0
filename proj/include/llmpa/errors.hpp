#pragma once

#include <stdexcept>
#include <string>

namespace llmpa {

enum class ErrorCode {
  parse,           // malformed fixture document
  integrity,       // document violates a data-model invariant
  load,            // world/script/fixture failed validation
  format,          // backend reply does not match the answer grammar
  hallucination,   // reply names an element outside the candidate set
  empty_candidates,
  prediction_failure,
  script_gap,      // scripted backend has no entry for a key
  request,         // http 4xx
  transport,       // http retries exhausted
  metric_undefined,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(ErrorCode::parse, msg) {}
};
struct IntegrityError : Error {
  explicit IntegrityError(const std::string& msg)
      : Error(ErrorCode::integrity, msg) {}
};
struct LoadError : Error {
  explicit LoadError(const std::string& msg) : Error(ErrorCode::load, msg) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& msg)
      : Error(ErrorCode::format, msg) {}
};
struct HallucinationError : Error {
  explicit HallucinationError(const std::string& msg)
      : Error(ErrorCode::hallucination, msg) {}
};
struct EmptyCandidatesError : Error {
  explicit EmptyCandidatesError(const std::string& msg)
      : Error(ErrorCode::empty_candidates, msg) {}
};
struct PredictionFailure : Error {
  explicit PredictionFailure(const std::string& msg)
      : Error(ErrorCode::prediction_failure, msg) {}
};
struct ScriptGapError : Error {
  explicit ScriptGapError(const std::string& msg)
      : Error(ErrorCode::script_gap, msg) {}
};
struct RequestError : Error {
  explicit RequestError(const std::string& msg)
      : Error(ErrorCode::request, msg) {}
};
struct TransportError : Error {
  explicit TransportError(const std::string& msg)
      : Error(ErrorCode::transport, msg) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& msg)
      : Error(ErrorCode::metric_undefined, msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg)
      : Error(ErrorCode::config, msg) {}
};

}  // namespace llmpa
