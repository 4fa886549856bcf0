#include "llmpa/layout.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "llmpa/json_util.hpp"

namespace llmpa {

using jsonu::json;

std::string Section::display_text() const {
  if (!qualifier) return representative_text;
  return representative_text + " (" + *qualifier + ")";
}

std::string Section::content_text() const {
  std::string out;
  for (size_t i = 0; i < member_texts.size(); ++i) {
    if (i) out += ' ';
    out += member_texts[i];
  }
  if (qualifier) out += " (" + *qualifier + ")";
  return out;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  double ix = std::max(0.0, std::min(a.x + a.width, b.x + b.width) -
                                std::max(a.x, b.x));
  double iy = std::max(0.0, std::min(a.y + a.height, b.y + b.height) -
                                std::max(a.y, b.y));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

namespace {

struct FlatNode {
  const UiNode* node;
  size_t order;                    // pre-order index
  std::set<std::string> ancestors; // strict ancestors, by node_id
};

void collect(const UiNode& n, std::set<std::string>& path, size_t& counter,
             std::vector<FlatNode>& out) {
  out.push_back(FlatNode{&n, counter++, path});
  path.insert(n.node_id);
  for (const UiNode& c : n.children) collect(c, path, counter, out);
  path.erase(n.node_id);
}

BoundingBox node_box(const UiNode& n) {
  return BoundingBox{static_cast<double>(n.x), static_cast<double>(n.y),
                     static_cast<double>(n.width),
                     static_cast<double>(n.height)};
}

// Boxes merge when they overlap or nearly touch along one axis while
// overlapping on the other. Diagonal neighbours never merge.
bool adjacent(const BoundingBox& a, const BoundingBox& b, int gap_threshold) {
  double overlap_x =
      std::min(a.x + a.width, b.x + b.width) - std::max(a.x, b.x);
  double overlap_y =
      std::min(a.y + a.height, b.y + b.height) - std::max(a.y, b.y);
  if (overlap_x > 0 && -overlap_y <= gap_threshold) return true;
  if (overlap_y > 0 && -overlap_x <= gap_threshold) return true;
  return false;
}

bool share_ancestor(const FlatNode& a, const FlatNode& b) {
  for (const std::string& id : a.ancestors)
    if (b.ancestors.count(id)) return true;
  return false;
}

struct UnionFind {
  std::vector<size_t> parent;
  explicit UnionFind(size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), size_t{0});
  }
  size_t find(size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  double x1 = std::min(a.x, b.x);
  double y1 = std::min(a.y, b.y);
  double x2 = std::max(a.x + a.width, b.x + b.width);
  double y2 = std::max(a.y + a.height, b.y + b.height);
  return BoundingBox{x1, y1, x2 - x1, y2 - y1};
}

}  // namespace

std::vector<Section> group_sections(const PageSnapshot& page,
                                    const GroupingParams& params) {
  std::vector<FlatNode> all;
  std::set<std::string> path;
  size_t counter = 0;
  for (const UiNode& r : page.roots) collect(r, path, counter, all);

  std::vector<FlatNode> members;
  for (const FlatNode& f : all)
    if (!f.node->text.empty()) members.push_back(f);

  UnionFind uf(members.size());
  for (size_t i = 0; i < members.size(); ++i) {
    for (size_t j = i + 1; j < members.size(); ++j) {
      if (!share_ancestor(members[i], members[j])) continue;
      if (adjacent(node_box(*members[i].node), node_box(*members[j].node),
                   params.gap_threshold))
        uf.unite(i, j);
    }
  }

  std::map<size_t, std::vector<size_t>> groups;  // root -> member indices
  for (size_t i = 0; i < members.size(); ++i) groups[uf.find(i)].push_back(i);

  std::vector<Section> sections;
  for (auto& [root, idxs] : groups) {
    std::sort(idxs.begin(), idxs.end(), [&](size_t a, size_t b) {
      return members[a].order < members[b].order;
    });
    Section s;
    s.box = node_box(*members[idxs[0]].node);
    for (size_t i : idxs) {
      const UiNode& n = *members[i].node;
      s.box = union_box(s.box, node_box(n));
      s.member_node_ids.push_back(n.node_id);
      s.member_texts.push_back(n.text);
    }
    // Representative: prefer interactable members, then top-left-most.
    size_t best = idxs[0];
    bool best_set = false;
    bool any_interactable = false;
    for (size_t i : idxs) any_interactable |= members[i].node->interactable();
    for (size_t i : idxs) {
      const UiNode& n = *members[i].node;
      if (any_interactable && !n.interactable()) continue;
      if (!best_set) {
        best = i;
        best_set = true;
        continue;
      }
      const UiNode& cur = *members[best].node;
      if (std::tie(n.y, n.x) < std::tie(cur.y, cur.x)) best = i;
    }
    s.representative_text = members[best].node->text;
    s.representative_interactable = members[best].node->interactable();
    sections.push_back(std::move(s));
  }

  std::sort(sections.begin(), sections.end(),
            [](const Section& a, const Section& b) {
              return std::tie(a.box.y, a.box.x, a.member_node_ids) <
                     std::tie(b.box.y, b.box.x, b.member_node_ids);
            });
  for (size_t i = 0; i < sections.size(); ++i)
    sections[i].section_id = "s" + std::to_string(i + 1);
  return sections;
}

namespace {

struct HeadingNode {
  std::string text;
  double x;
  double y;
};

// Heading-like: non-interactable and noticeably taller than the median
// non-empty-text node.
std::vector<HeadingNode> find_headings(const PageSnapshot& page) {
  std::vector<int> heights;
  std::vector<UiNode> nodes = flatten(page);
  for (const UiNode& n : nodes)
    if (!n.text.empty()) heights.push_back(n.height);
  if (heights.empty()) return {};
  std::sort(heights.begin(), heights.end());
  double median;
  size_t m = heights.size();
  if (m % 2 == 1)
    median = heights[m / 2];
  else
    median = (heights[m / 2 - 1] + heights[m / 2]) / 2.0;
  double cutoff = 1.2 * median;

  std::vector<HeadingNode> headings;
  for (const UiNode& n : nodes) {
    if (n.text.empty() || n.interactable()) continue;
    if (n.height >= cutoff)
      headings.push_back(HeadingNode{n.text, static_cast<double>(n.x),
                                     static_cast<double>(n.y)});
  }
  return headings;
}

std::optional<std::string> nearest_preceding_heading(
    const std::vector<HeadingNode>& headings, const Section& s) {
  const HeadingNode* best = nullptr;
  for (const HeadingNode& h : headings) {
    if (h.y >= s.box.y) continue;  // must start above the section
    if (!best || h.y > best->y ||
        (h.y == best->y &&
         std::abs(h.x - s.box.x) < std::abs(best->x - s.box.x)))
      best = &h;
  }
  if (!best) return std::nullopt;
  return best->text;
}

}  // namespace

DisambiguationResult disambiguate(const std::vector<Section>& sections,
                                  const PageSnapshot& page) {
  DisambiguationResult result;
  result.sections = sections;
  auto& out = result.sections;

  std::map<std::string, std::vector<size_t>> by_text;
  for (size_t i = 0; i < out.size(); ++i)
    by_text[out[i].representative_text].push_back(i);

  bool any_dup = false;
  for (const auto& [text, idxs] : by_text) any_dup |= idxs.size() > 1;
  if (!any_dup) return result;

  std::vector<HeadingNode> headings = find_headings(page);
  for (const auto& [text, idxs] : by_text) {
    if (idxs.size() < 2) continue;
    for (size_t i : idxs) {
      auto heading = nearest_preceding_heading(headings, out[i]);
      if (heading) out[i].qualifier = "under: " + *heading;
    }
  }

  // Ordinal fallback for sections whose surroundings are identical too.
  for (int pass = 0; pass < 100; ++pass) {
    std::map<std::string, std::vector<size_t>> by_display;
    for (size_t i = 0; i < out.size(); ++i)
      by_display[out[i].display_text()].push_back(i);
    bool collision = false;
    for (const auto& [text, idxs] : by_display) {
      if (idxs.size() < 2) continue;
      collision = true;
      result.warnings.push_back("unresolvable duplicate text '" + text +
                                "'; ordinal suffixes assigned");
      for (size_t k = 0; k < idxs.size(); ++k) {
        Section& s = out[idxs[k]];
        std::string ordinal = "#" + std::to_string(k + 1);
        s.qualifier = s.qualifier ? *s.qualifier + " " + ordinal : ordinal;
      }
    }
    if (!collision) break;
  }
  return result;
}

std::string extract_text(const std::vector<Section>& sections, size_t budget) {
  std::vector<const Section*> ordered;
  for (const Section& s : sections) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Section* a, const Section* b) {
                     return std::tie(a->box.y, a->box.x) <
                            std::tie(b->box.y, b->box.x);
                   });
  std::string digest;
  for (const Section* s : ordered) {
    std::string line = s->content_text();
    size_t extra = line.size() + (digest.empty() ? 0 : 1);
    if (digest.size() + extra > budget) break;
    if (!digest.empty()) digest += '\n';
    digest += line;
  }
  return digest;
}

double evaluate_detector(const std::vector<DetectionPrediction>& predictions,
                         const std::vector<BoundingBox>& ground_truth,
                         double iou_threshold, bool* degenerate) {
  if (iou_threshold <= 0 || iou_threshold > 1)
    throw ConfigError("iou_threshold must be in (0,1]");
  if (degenerate) *degenerate = false;
  if (ground_truth.empty()) {
    if (degenerate) *degenerate = true;
    return predictions.empty() ? 1.0 : 0.0;
  }
  if (predictions.empty()) return 0.0;

  std::vector<size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return predictions[a].confidence > predictions[b].confidence;
  });

  std::vector<bool> gt_used(ground_truth.size(), false);
  std::vector<double> precision;
  std::vector<double> recall;
  size_t tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    const DetectionPrediction& pred = predictions[order[rank]];
    double best_iou = 0;
    size_t best_gt = ground_truth.size();
    for (size_t g = 0; g < ground_truth.size(); ++g) {
      if (gt_used[g]) continue;
      double v = iou(pred.box, ground_truth[g]);
      if (v > best_iou) {
        best_iou = v;
        best_gt = g;
      }
    }
    if (best_gt < ground_truth.size() && best_iou >= iou_threshold) {
      gt_used[best_gt] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / (rank + 1));
    recall.push_back(static_cast<double>(tp) / ground_truth.size());
  }

  // All-points interpolation: precision envelope from the right.
  std::vector<double> envelope(precision.size());
  double running = 0;
  for (size_t i = precision.size(); i-- > 0;) {
    running = std::max(running, precision[i]);
    envelope[i] = running;
  }
  double ap = 0;
  double prev_recall = 0;
  for (size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * envelope[i];
    prev_recall = recall[i];
  }
  return ap;
}

namespace {

BoundingBox parse_box(const json& j, const std::string& path) {
  auto num = [&](const char* key) -> double {
    const json& v = jsonu::require(j, key, path);
    if (!v.is_number())
      throw ParseError("field " + path + "." + key + " must be a number");
    return v.get<double>();
  };
  BoundingBox b{num("x"), num("y"), num("w"), num("h")};
  if (b.width < 0 || b.height < 0)
    throw IntegrityError("negative box size at " + path);
  return b;
}

}  // namespace

DetectionFixture load_detection_fixture(const std::string& path) {
  json doc = jsonu::load_file(path);
  DetectionFixture fx;
  const json& gts = jsonu::require_array(doc, "ground_truth", path);
  for (size_t i = 0; i < gts.size(); ++i)
    fx.ground_truth.push_back(
        parse_box(gts[i], path + ".ground_truth[" + std::to_string(i) + "]"));
  const json& preds = jsonu::require_array(doc, "predictions", path);
  for (size_t i = 0; i < preds.size(); ++i) {
    const std::string p = path + ".predictions[" + std::to_string(i) + "]";
    DetectionPrediction d;
    d.box = parse_box(jsonu::require(preds[i], "box", p), p + ".box");
    const json& conf = jsonu::require(preds[i], "confidence", p);
    if (!conf.is_number())
      throw ParseError("field " + p + ".confidence must be a number");
    d.confidence = conf.get<double>();
    if (d.confidence < 0 || d.confidence > 1)
      throw IntegrityError("confidence out of [0,1] at " + p);
    fx.predictions.push_back(d);
  }
  return fx;
}

}  // namespace llmpa
