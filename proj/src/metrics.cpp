#include "kmlp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "kmlp/error.hpp"

namespace kmlp::metrics {

ScoredSet::ScoredSet(std::span<const double> scores, std::span<const int> labels)
    : scores_(scores.begin(), scores.end()), labels_(labels.begin(), labels.end()) {
  if (scores_.size() != labels_.size()) {
    throw Error(ErrorCode::ShapeError, "scores and labels differ in length");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0 && labels_[i] != 1) {
      throw Error(ErrorCode::LabelError, "label is not 0 or 1", i + 1);
    }
    if (std::isnan(scores_[i])) {
      throw Error(ErrorCode::NumericalError, "score is NaN", i + 1);
    }
    positives_ += static_cast<std::size_t>(labels_[i]);
  }
}

namespace {

void require_both_classes(const ScoredSet& s) {
  if (s.positives() == 0 || s.negatives() == 0) {
    throw Error(ErrorCode::DegenerateLabels, "ROC metrics need at least one positive and one negative");
  }
}

std::vector<std::size_t> descending_order(const ScoredSet& s) {
  std::vector<std::size_t> order(s.scores().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto scores = s.scores();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::vector<RocPoint> roc_points(const ScoredSet& s) {
  require_both_classes(s);
  const auto P = static_cast<double>(s.positives());
  const auto N = static_cast<double>(s.negatives());
  const auto order = descending_order(s);
  const auto scores = s.scores();
  const auto labels = s.labels();

  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  // The last threshold group admits every row, so the sweep ends at (1,1).
  return points;
}

double auc(const ScoredSet& s) {
  const auto pts = roc_points(s);
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].fpr - pts[k - 1].fpr) * (pts[k].tpr + pts[k - 1].tpr) * 0.5;
  }
  return area;
}

double auc_rank_statistic(const ScoredSet& s) {
  require_both_classes(s);
  const auto scores = s.scores();
  const auto labels = s.labels();
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += mid_rank;
    }
    i = j;
  }
  const auto P = static_cast<double>(s.positives());
  const auto N = static_cast<double>(s.negatives());
  return (positive_rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

double ks(const ScoredSet& s) {
  double best = 0.0;
  for (const RocPoint& p : roc_points(s)) best = std::max(best, p.tpr - p.fpr);
  return best;
}

Summary summarize(const ScoredSet& s) { return {auc(s), ks(s)}; }

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

}  // namespace kmlp::metrics
