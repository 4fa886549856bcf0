// Test-only reference implementations, kept independent of the library
// code paths they check.
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "llmpa/layout.hpp"
#include "llmpa/metrics.hpp"

namespace oracle {

// Counts unit cells on the integer grid instead of doing area arithmetic.
inline double raster_iou(int ax, int ay, int aw, int ah, int bx, int by,
                         int bw, int bh) {
  long inter = 0, uni = 0;
  int x1 = std::min(ax, bx), x2 = std::max(ax + aw, bx + bw);
  int y1 = std::min(ay, by), y2 = std::max(ay + ah, by + bh);
  for (int x = x1; x < x2; ++x) {
    for (int y = y1; y < y2; ++y) {
      bool in_a = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
      bool in_b = x >= bx && x < bx + bw && y >= by && y < by + bh;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Rebuilds the precision-recall curve from scratch for every prefix of the
// confidence-sorted predictions, then integrates with an explicit
// max-to-the-right search per point.
inline double brute_force_ap(const std::vector<llmpa::DetectionPrediction>& preds,
                             const std::vector<llmpa::BoundingBox>& gt,
                             double threshold) {
  if (gt.empty()) return preds.empty() ? 1.0 : 0.0;
  if (preds.empty()) return 0.0;

  std::vector<size_t> order(preds.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });

  auto tp_for_prefix = [&](size_t k) {
    std::vector<bool> used(gt.size(), false);
    size_t tp = 0;
    for (size_t i = 0; i < k; ++i) {
      double best = 0;
      size_t best_g = gt.size();
      for (size_t g = 0; g < gt.size(); ++g) {
        if (used[g]) continue;
        double v = llmpa::iou(preds[order[i]].box, gt[g]);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best_g < gt.size() && best >= threshold) {
        used[best_g] = true;
        ++tp;
      }
    }
    return tp;
  };

  std::vector<double> precision, recall;
  for (size_t k = 1; k <= preds.size(); ++k) {
    size_t tp = tp_for_prefix(k);
    precision.push_back(static_cast<double>(tp) / k);
    recall.push_back(static_cast<double>(tp) / gt.size());
  }
  double ap = 0, prev = 0;
  for (size_t i = 0; i < recall.size(); ++i) {
    double pmax = 0;
    for (size_t j = i; j < precision.size(); ++j)
      pmax = std::max(pmax, precision[j]);
    ap += (recall[i] - prev) * pmax;
    prev = recall[i];
  }
  return ap;
}

// Naive recounts of the four report metrics.
inline double recount_step_sr(const std::vector<llmpa::StepOutcome>& o) {
  int n = 0;
  for (const auto& s : o) n += s.success ? 1 : 0;
  return double(n) / double(o.size());
}

inline double recount_task_sr(const std::vector<llmpa::StepOutcome>& o) {
  std::map<std::string, std::vector<bool>> per_task;
  for (const auto& s : o) per_task[s.task_id].push_back(s.success);
  int good = 0;
  for (const auto& [id, flags] : per_task) {
    bool all = true;
    for (bool f : flags) all = all && f;
    good += all ? 1 : 0;
  }
  return double(good) / double(per_task.size());
}

inline double recount_element_acc(const std::vector<llmpa::StepOutcome>& o) {
  int n = 0;
  for (const auto& s : o) n += s.element_match ? 1 : 0;
  return double(n) / double(o.size());
}

// Multiset-intersection F1 via sorted token vectors.
inline double brute_force_operation_f1(const llmpa::Action& pred,
                                       const llmpa::Action& gold) {
  auto tokens = [](const llmpa::Action& a) {
    std::vector<std::string> t;
    t.push_back(llmpa::function_name(a.function()));
    if (a.value()) {
      std::string cur;
      for (char c : *a.value()) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
          cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
          t.push_back(cur);
          cur.clear();
        }
      }
      if (!cur.empty()) t.push_back(cur);
    }
    std::sort(t.begin(), t.end());
    return t;
  };
  std::vector<std::string> p = tokens(pred), g = tokens(gold);
  std::vector<std::string> inter;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                        std::back_inserter(inter));
  if (inter.empty()) return 0.0;
  double prec = double(inter.size()) / double(p.size());
  double rec = double(inter.size()) / double(g.size());
  return 2.0 * prec * rec / (prec + rec);
}

inline double recount_mean_f1(const std::vector<llmpa::StepOutcome>& o) {
  double sum = 0;
  for (const auto& s : o)
    if (s.predicted && s.gold)
      sum += brute_force_operation_f1(*s.predicted, *s.gold);
  return sum / double(o.size());
}

}  // namespace oracle
