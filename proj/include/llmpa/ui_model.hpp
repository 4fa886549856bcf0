#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmpa/errors.hpp"

namespace llmpa {

/// One on-screen text element. Coordinates are absolute pixels, origin
/// top-left. A node is interactable when it is clickable or typeable.
struct UiNode {
  std::string node_id;
  std::string text;
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  std::optional<std::string> color;
  bool clickable = false;
  bool typeable = false;
  std::vector<UiNode> children;

  bool interactable() const { return clickable || typeable; }
  bool operator==(const UiNode&) const = default;
};

/// A page is an ordered forest of UiNodes. step_index is only meaningful
/// for snapshots captured inside a trajectory.
struct PageSnapshot {
  std::string page_id;
  std::vector<UiNode> roots;
  int step_index = 0;

  bool operator==(const PageSnapshot&) const = default;
};

/// Pattern-based privacy rule. The replacement placeholder must be
/// non-empty and digit-free so redaction stays idempotent.
struct RedactionRule {
  RedactionRule(std::string pattern, std::string replacement);
  std::string pattern;
  std::string replacement;
};

// Parses the page fixture schema:
//   {"page_id": str, "nodes": [{"id","text","x","y","w","h","color",
//    "clickable","typeable","children":[...]}]}
// Throws ParseError naming the offending path, IntegrityError on duplicate
// node ids or negative sizes.
PageSnapshot parse_page(const std::string& raw);

// Same contract, for a page object embedded in a larger document (world
// files); `path` prefixes error messages.
PageSnapshot parse_page_json(const nlohmann::json& doc,
                             const std::string& path);

// Inverse of parse_page; parse_page(serialize_page(p)) == p.
std::string serialize_page(const PageSnapshot& page);

// Depth-first pre-order traversal.
std::vector<UiNode> flatten(const PageSnapshot& page);

// Applies rules in order to every node text; geometry and flags untouched.
PageSnapshot redact(const PageSnapshot& page,
                    const std::vector<RedactionRule>& rules);

// Long digit runs and phone-shaped numbers.
const std::vector<RedactionRule>& default_redaction_rules();

}  // namespace llmpa
