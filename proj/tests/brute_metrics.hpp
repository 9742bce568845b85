#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "trisim/corpus.hpp"

namespace testing {

// Direct transcription of the metric definitions, kept deliberately naive.
struct BruteForce {
  double balanced;
  double micro;
  double macro_f1;
  double kappa;
};

inline BruteForce brute_force(const trisim::DistanceMatrix& d,
                              const std::vector<trisim::TripletJudgment>& js) {
  auto at = [&](const trisim::ItemId& a, const trisim::ItemId& b) {
    const auto ia = std::find(d.ids.begin(), d.ids.end(), a) - d.ids.begin();
    const auto ib = std::find(d.ids.begin(), d.ids.end(), b) - d.ids.begin();
    return d.values(ia, ib);
  };
  std::map<trisim::ItemId, std::pair<double, double>> per_anchor;
  double hits = 0, total = 0;
  double tp_l = 0, fp_l = 0, fn_l = 0, tp_r = 0, fp_r = 0, fn_r = 0;
  double expert_l = 0, pred_l = 0;
  for (const auto& j : js) {
    if (j.choice == trisim::Choice::Skipped) continue;
    const double dl = at(j.anchor, j.left);
    const double dr = at(j.anchor, j.right);
    const bool ok = j.choice == trisim::Choice::Left ? dl < dr : dr < dl;
    per_anchor[j.anchor].first += ok;
    per_anchor[j.anchor].second += 1;
    hits += ok;
    total += 1;
    const bool el = j.choice == trisim::Choice::Left;
    const bool pl = dl < dr;
    expert_l += el;
    pred_l += pl;
    if (el && pl) ++tp_l;
    if (!el && pl) { ++fp_l; ++fn_r; }
    if (el && !pl) { ++fn_l; ++fp_r; }
    if (!el && !pl) ++tp_r;
  }
  double bal = 0;
  for (const auto& [a, c] : per_anchor) bal += c.first / c.second;
  bal /= static_cast<double>(per_anchor.size());
  auto f1 = [](double tp, double fp, double fn) {
    return tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
  };
  const double po = hits / total;
  const double pe = (expert_l / total) * (pred_l / total) +
                    (1 - expert_l / total) * (1 - pred_l / total);
  return {bal, po, 0.5 * (f1(tp_l, fp_l, fn_l) + f1(tp_r, fp_r, fn_r)),
          pe == 1.0 ? 0.0 : (po - pe) / (1 - pe)};
}

}  // namespace testing
