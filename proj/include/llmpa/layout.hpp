#pragma once

#include <optional>
#include <string>
#include <vector>

#include "llmpa/ui_model.hpp"

namespace llmpa {

struct BoundingBox {
  double x = 0;
  double y = 0;
  double width = 0;
  double height = 0;

  double area() const { return width * height; }
  bool operator==(const BoundingBox&) const = default;
};

/// A geometric group of related page elements treated as one semantic unit.
/// representative_text is the text of exactly one member (the interactable,
/// top-left-most one); qualifier disambiguates equal representatives.
struct Section {
  std::string section_id;
  BoundingBox box;
  std::vector<std::string> member_node_ids;
  std::vector<std::string> member_texts;  // in member order
  std::string representative_text;
  bool representative_interactable = false;
  std::optional<std::string> qualifier;

  // Candidate-facing name: representative plus qualifier.
  std::string display_text() const;
  // Digest-facing line: every member text once, plus qualifier.
  std::string content_text() const;
};

struct DetectionPrediction {
  BoundingBox box;
  double confidence = 0;  // in [0,1]
};

struct GroupingParams {
  int gap_threshold = 8;  // px between adjacent boxes eligible for merging
};

// Intersection over union; 0 when the union has zero area.
double iou(const BoundingBox& a, const BoundingBox& b);

// Merges non-empty-text nodes that are vertically or horizontally adjacent
// within the gap threshold and share a strict common ancestor. Output is in
// reading order (top-to-bottom, left-to-right by section box origin).
std::vector<Section> group_sections(const PageSnapshot& page,
                                    const GroupingParams& params = {});

struct DisambiguationResult {
  std::vector<Section> sections;
  std::vector<std::string> warnings;
};

// Attaches "under: <heading>" qualifiers to sections whose representative
// texts collide; falls back to ordinal suffixes when the surroundings are
// identical too. Output display texts are pairwise distinct.
DisambiguationResult disambiguate(const std::vector<Section>& sections,
                                  const PageSnapshot& page);

// Newline-separated digest of section content lines in reading order.
// Never exceeds budget; drops whole trailing sections only.
std::string extract_text(const std::vector<Section>& sections, size_t budget);

// Class-agnostic average precision at one IoU threshold, all-points
// interpolation. Ties in confidence keep input order. Degenerate inputs:
// empty ground truth with predictions scores 0; both empty scores 1.
double evaluate_detector(const std::vector<DetectionPrediction>& predictions,
                         const std::vector<BoundingBox>& ground_truth,
                         double iou_threshold, bool* degenerate = nullptr);

struct DetectionFixture {
  std::vector<BoundingBox> ground_truth;
  std::vector<DetectionPrediction> predictions;
};

// {"ground_truth": [{x,y,w,h}], "predictions": [{"box":{...},"confidence":r}]}
DetectionFixture load_detection_fixture(const std::string& path);

}  // namespace llmpa
