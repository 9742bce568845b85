#include "trisim/metrics.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "trisim/errors.hpp"

namespace trisim {

namespace {

std::size_t lookup(const IdIndex& index, const ItemId& id) {
  const auto it = index.find(id);
  if (it == index.end()) throw DataError("judgment references unknown id '" + id + "'");
  return it->second;
}

struct Scored {
  const ItemId* anchor;
  int expert;     // 0 Left, 1 Right
  int predicted;  // 0 Left, 1 Right (ties -> Right)
  bool correct;   // margin > 0
  bool tie;
};

struct Scoring {
  std::vector<Scored> rows;
  std::size_t skipped = 0;
};

Scoring score_all(const DistanceMatrix& d, std::span<const TripletJudgment> judgments) {
  const auto index = build_id_index(d.ids);
  Scoring s;
  for (const auto& j : judgments) {
    if (j.choice == Choice::Skipped) {
      ++s.skipped;
      continue;
    }
    const auto a = lookup(index, j.anchor);
    const double dl = d.values(a, lookup(index, j.left));
    const double dr = d.values(a, lookup(index, j.right));
    const bool expert_left = j.choice == Choice::Left;
    const double margin = expert_left ? dr - dl : dl - dr;
    s.rows.push_back({&j.anchor, expert_left ? 0 : 1, dl < dr ? 0 : 1, margin > 0.0,
                      margin == 0.0});
  }
  if (s.rows.empty()) throw DataError("no non-skipped judgments to evaluate");
  return s;
}

Agreement agreement_of(const Scoring& s) {
  std::map<std::string_view, std::pair<std::size_t, std::size_t>> per_anchor;
  std::size_t correct = 0;
  for (const auto& r : s.rows) {
    auto& [hit, total] = per_anchor[*r.anchor];
    hit += r.correct ? 1 : 0;
    ++total;
    correct += r.correct ? 1 : 0;
  }
  double balanced = 0.0;
  for (const auto& [anchor, counts] : per_anchor) {
    balanced += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  Agreement out;
  out.balanced = balanced / static_cast<double>(per_anchor.size());
  out.micro = static_cast<double>(correct) / static_cast<double>(s.rows.size());
  return out;
}

Confusion confusion_of(const Scoring& s) {
  Confusion c{};
  for (const auto& r : s.rows) ++c[r.expert][r.predicted];
  return c;
}

}  // namespace

double triplet_margin(const DistanceMatrix& d, const IdIndex& index, const TripletJudgment& t) {
  if (t.choice == Choice::Skipped) throw DataError("margin of a skipped judgment");
  const auto a = lookup(index, t.anchor);
  const auto l = lookup(index, t.left);
  const auto r = lookup(index, t.right);
  return t.choice == Choice::Left ? d.values(a, r) - d.values(a, l)
                                  : d.values(a, l) - d.values(a, r);
}

double triplet_margin(const DistanceMatrix& d, const TripletJudgment& t) {
  return triplet_margin(d, build_id_index(d.ids), t);
}

Agreement agreement(const DistanceMatrix& d, std::span<const TripletJudgment> judgments) {
  return agreement_of(score_all(d, judgments));
}

double macro_f1(const Confusion& c) {
  double sum = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double tp = static_cast<double>(c[k][k]);
    const double fp = static_cast<double>(c[1 - k][k]);
    const double fn = static_cast<double>(c[k][1 - k]);
    const double denom = 2.0 * tp + fp + fn;
    sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
  }
  return sum / 2.0;
}

double cohen_kappa(const Confusion& c, double observed_agreement) {
  const double n = static_cast<double>(c[0][0] + c[0][1] + c[1][0] + c[1][1]);
  if (n == 0.0) throw DataError("kappa of an empty confusion matrix");
  double expected = 0.0;
  for (int k = 0; k < 2; ++k) {
    const double expert = static_cast<double>(c[k][0] + c[k][1]) / n;
    const double predicted = static_cast<double>(c[0][k] + c[1][k]) / n;
    expected += expert * predicted;
  }
  if (expected == 1.0) return 0.0;
  return (observed_agreement - expected) / (1.0 - expected);
}

ClassificationScores classification_metrics(const DistanceMatrix& d,
                                            std::span<const TripletJudgment> judgments) {
  const auto s = score_all(d, judgments);
  ClassificationScores out;
  out.confusion = confusion_of(s);
  out.macro_f1 = macro_f1(out.confusion);
  out.kappa = cohen_kappa(out.confusion, agreement_of(s).micro);
  return out;
}

MetricsReport evaluate_report(const DistanceMatrix& d,
                              std::span<const TripletJudgment> judgments) {
  const auto s = score_all(d, judgments);
  const auto agr = agreement_of(s);
  MetricsReport r;
  r.balanced_agreement = agr.balanced;
  r.micro_agreement = agr.micro;
  r.confusion = confusion_of(s);
  r.macro_f1 = macro_f1(r.confusion);
  r.kappa = cohen_kappa(r.confusion, agr.micro);
  r.n_triplets = s.rows.size();
  r.n_skipped = s.skipped;
  std::map<std::string_view, int> anchors;
  for (const auto& row : s.rows) {
    anchors[*row.anchor] = 1;
    r.n_ties += row.tie ? 1 : 0;
  }
  r.n_anchors = anchors.size();
  return r;
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["balanced_agreement"] = r.balanced_agreement;
  j["micro_agreement"] = r.micro_agreement;
  j["macro_f1"] = r.macro_f1;
  j["kappa"] = r.kappa;
  j["n_triplets"] = r.n_triplets;
  j["n_anchors"] = r.n_anchors;
  j["n_skipped"] = r.n_skipped;
  j["n_ties"] = r.n_ties;
  j["confusion"] = {{"expert_left", {{"pred_left", r.confusion[0][0]},
                                     {"pred_right", r.confusion[0][1]}}},
                    {"expert_right", {{"pred_left", r.confusion[1][0]},
                                      {"pred_right", r.confusion[1][1]}}}};
  return j.dump(2);
}

std::string report_to_table(const MetricsReport& r) {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const char* name, const char* fmt, auto value) {
    std::snprintf(buf, sizeof buf, fmt, name, value);
    out << buf;
  };
  row("Bal. Agr.", "%-12s %8.2f %%\n", 100.0 * r.balanced_agreement);
  row("Micro", "%-12s %8.2f %%\n", 100.0 * r.micro_agreement);
  row("Macro-F1", "%-12s %8.2f %%\n", 100.0 * r.macro_f1);
  row("kappa", "%-12s %8.3f\n", r.kappa);
  row("triplets", "%-12s %8zu\n", r.n_triplets);
  row("anchors", "%-12s %8zu\n", r.n_anchors);
  row("skipped", "%-12s %8zu\n", r.n_skipped);
  row("ties", "%-12s %8zu\n", r.n_ties);
  if (r.n_ties > 0) {
    out << "note: " << r.n_ties
        << " triplet(s) had equal distances; counted incorrect, predicted Right\n";
  }
  return out.str();
}

}  // namespace trisim
