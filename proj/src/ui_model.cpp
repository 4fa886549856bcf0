#include "llmpa/ui_model.hpp"

#include <regex>
#include <unordered_set>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

RedactionRule::RedactionRule(std::string pattern_, std::string replacement_)
    : pattern(std::move(pattern_)), replacement(std::move(replacement_)) {
  if (replacement.empty())
    throw IntegrityError("redaction replacement must be non-empty");
  if (replacement.find_first_of("0123456789") != std::string::npos)
    throw IntegrityError("redaction replacement must contain no digits: " +
                         replacement);
}

namespace {

UiNode parse_node(const json& j, const std::string& path,
                  std::unordered_set<std::string>& seen_ids) {
  UiNode n;
  n.node_id = jsonu::require_string(j, "id", path);
  if (!seen_ids.insert(n.node_id).second)
    throw IntegrityError("duplicate node_id '" + n.node_id + "' at " + path);
  n.text = jsonu::require_string(j, "text", path);
  n.x = jsonu::require_int(j, "x", path);
  n.y = jsonu::require_int(j, "y", path);
  n.width = jsonu::require_int(j, "w", path);
  n.height = jsonu::require_int(j, "h", path);
  if (n.width < 0 || n.height < 0)
    throw IntegrityError("negative size at " + path);
  if (j.contains("color") && !j.at("color").is_null()) {
    if (!j.at("color").is_string())
      throw ParseError("field " + path + ".color must be a string or null");
    n.color = j.at("color").get<std::string>();
  }
  n.clickable = jsonu::require_bool(j, "clickable", path);
  n.typeable = jsonu::require_bool(j, "typeable", path);
  if (j.contains("children")) {
    const json& kids = j.at("children");
    if (!kids.is_array())
      throw ParseError("field " + path + ".children must be an array");
    for (size_t i = 0; i < kids.size(); ++i) {
      n.children.push_back(parse_node(
          kids[i], path + ".children[" + std::to_string(i) + "]", seen_ids));
    }
  }
  return n;
}

json node_to_json(const UiNode& n) {
  json j;
  j["id"] = n.node_id;
  j["text"] = n.text;
  j["x"] = n.x;
  j["y"] = n.y;
  j["w"] = n.width;
  j["h"] = n.height;
  j["color"] = n.color ? json(*n.color) : json(nullptr);
  j["clickable"] = n.clickable;
  j["typeable"] = n.typeable;
  json kids = json::array();
  for (const UiNode& c : n.children) kids.push_back(node_to_json(c));
  j["children"] = kids;
  return j;
}

void flatten_into(const UiNode& n, std::vector<UiNode>& out) {
  out.push_back(n);
  for (const UiNode& c : n.children) flatten_into(c, out);
}

std::string redact_text(const std::string& text,
                        const std::vector<RedactionRule>& rules) {
  std::string result = text;
  for (const RedactionRule& rule : rules) {
    std::regex re(rule.pattern);
    result = std::regex_replace(result, re, rule.replacement);
  }
  return result;
}

UiNode redact_node(const UiNode& n, const std::vector<RedactionRule>& rules) {
  UiNode out = n;
  out.text = redact_text(n.text, rules);
  out.children.clear();
  for (const UiNode& c : n.children)
    out.children.push_back(redact_node(c, rules));
  return out;
}

}  // namespace

PageSnapshot parse_page_json(const json& doc, const std::string& path) {
  PageSnapshot page;
  page.page_id = jsonu::require_string(doc, "page_id", path);
  if (page.page_id.empty())
    throw IntegrityError("page_id must be non-empty at " + path);
  const json& nodes = jsonu::require_array(doc, "nodes", path);
  std::unordered_set<std::string> seen_ids;
  for (size_t i = 0; i < nodes.size(); ++i) {
    page.roots.push_back(parse_node(
        nodes[i], path + ".nodes[" + std::to_string(i) + "]", seen_ids));
  }
  return page;
}

PageSnapshot parse_page(const std::string& raw) {
  json doc = jsonu::parse_text(raw, "page document");
  return parse_page_json(doc, "$");
}

std::string serialize_page(const PageSnapshot& page) {
  json doc;
  doc["page_id"] = page.page_id;
  json nodes = json::array();
  for (const UiNode& r : page.roots) nodes.push_back(node_to_json(r));
  doc["nodes"] = nodes;
  return doc.dump(2);
}

std::vector<UiNode> flatten(const PageSnapshot& page) {
  std::vector<UiNode> out;
  for (const UiNode& r : page.roots) flatten_into(r, out);
  return out;
}

PageSnapshot redact(const PageSnapshot& page,
                    const std::vector<RedactionRule>& rules) {
  PageSnapshot out;
  out.page_id = page.page_id;
  out.step_index = page.step_index;
  for (const UiNode& r : page.roots) out.roots.push_back(redact_node(r, rules));
  return out;
}

const std::vector<RedactionRule>& default_redaction_rules() {
  // Phone rule first so a mobile number is not half-eaten by the digit-run
  // rule.
  static const std::vector<RedactionRule> rules = {
      RedactionRule("1[3-9][0-9]{9}", "⟨PHONE⟩"),
      RedactionRule("[0-9]{6,}", "⟨NUM⟩"),
  };
  return rules;
}

}  // namespace llmpa
