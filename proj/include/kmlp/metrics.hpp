#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kmlp::metrics {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

// Scores with binary labels. Constructing one checks equal lengths and labels
// in {0, 1}; both classes must be present for the ROC-based metrics.
class ScoredSet {
 public:
  ScoredSet(std::span<const double> scores, std::span<const int> labels);

  std::span<const double> scores() const { return scores_; }
  std::span<const int> labels() const { return labels_; }
  std::size_t positives() const { return positives_; }
  std::size_t negatives() const { return labels_.size() - positives_; }

 private:
  std::vector<double> scores_;
  std::vector<int> labels_;
  std::size_t positives_ = 0;
};

// One point per distinct score threshold, descending, framed by (0,0) and
// (1,1). Tied scores form a single (diagonal) step.
std::vector<RocPoint> roc_points(const ScoredSet& s);

// Trapezoidal area under roc_points.
double auc(const ScoredSet& s);

// Mann-Whitney form: P(score+ > score-) + P(tie)/2 via mid-ranks. Equal to
// auc() up to rounding; kept as an independent cross-check.
double auc_rank_statistic(const ScoredSet& s);

// max over thresholds of TPR - FPR.
double ks(const ScoredSet& s);

struct Summary {
  double auc = 0.0;
  double ks = 0.0;
};
Summary summarize(const ScoredSet& s);

// 0.93718 -> "93.72"
std::string percent(double fraction);

}  // namespace kmlp::metrics
