#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "llmpa/errors.hpp"

namespace llmpa::jsonu {

using json = nlohmann::json;

inline json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

// Field accessors that name the offending path in error messages.
inline const json& require(const json& obj, const std::string& key,
                           const std::string& path) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError("missing field " + path + "." + key);
  return obj.at(key);
}

inline std::string require_string(const json& obj, const std::string& key,
                                  const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string())
    throw ParseError("field " + path + "." + key + " must be a string");
  return v.get<std::string>();
}

inline int require_int(const json& obj, const std::string& key,
                       const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer())
    throw ParseError("field " + path + "." + key + " must be an integer");
  return v.get<int>();
}

inline bool require_bool(const json& obj, const std::string& key,
                         const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_boolean())
    throw ParseError("field " + path + "." + key + " must be a boolean");
  return v.get<bool>();
}

inline const json& require_array(const json& obj, const std::string& key,
                                 const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array())
    throw ParseError("field " + path + "." + key + " must be an array");
  return v;
}

}  // namespace llmpa::jsonu
