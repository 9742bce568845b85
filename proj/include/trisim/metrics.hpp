#pragma once

// Scores a distance matrix against expert triplet judgments.
//
// A judgment is correct when the anchor is strictly closer to the chosen
// reference: margin = D(anchor, unchosen) - D(anchor, chosen) > 0. For the
// classification view the predicted class is the closer reference, with
// ties predicted as Right. Skipped judgments are excluded and counted.

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "trisim/corpus.hpp"

namespace trisim {

// confusion[expert][predicted], index 0 = Left, 1 = Right.
using Confusion = std::array<std::array<std::uint64_t, 2>, 2>;

struct MetricsReport {
  double balanced_agreement = 0.0;
  double micro_agreement = 0.0;
  double macro_f1 = 0.0;
  double kappa = 0.0;
  std::size_t n_triplets = 0;  // non-skipped
  std::size_t n_anchors = 0;
  std::size_t n_skipped = 0;
  std::size_t n_ties = 0;  // margin exactly zero
  Confusion confusion{};
};

double triplet_margin(const DistanceMatrix& d, const IdIndex& index, const TripletJudgment& t);
double triplet_margin(const DistanceMatrix& d, const TripletJudgment& t);

struct Agreement {
  double balanced = 0.0;
  double micro = 0.0;
};
Agreement agreement(const DistanceMatrix& d, std::span<const TripletJudgment> judgments);

struct ClassificationScores {
  double macro_f1 = 0.0;
  double kappa = 0.0;
  Confusion confusion{};
};
ClassificationScores classification_metrics(const DistanceMatrix& d,
                                            std::span<const TripletJudgment> judgments);

// Macro-F1 and Cohen's kappa from a confusion matrix; p_o is supplied by the
// caller (the micro agreement).
double macro_f1(const Confusion& c);
double cohen_kappa(const Confusion& c, double observed_agreement);

MetricsReport evaluate_report(const DistanceMatrix& d, std::span<const TripletJudgment> judgments);

std::string report_to_json(const MetricsReport& r);
std::string report_to_table(const MetricsReport& r);

}  // namespace trisim
