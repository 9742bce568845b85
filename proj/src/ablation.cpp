#include "trisim/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "trisim/errors.hpp"
#include "trisim/seeding.hpp"

namespace trisim {

PlantedRun planted_soe_run(const SynthDataset& data, const SoeConfig& soe, double budget,
                           double held_out_fraction, std::uint64_t split_seed) {
  if (!(budget > 0.0 && budget <= 1.0)) throw ConfigError("budget must lie in (0, 1]");
  const auto index = build_id_index(data.latents.ids);
  const auto all = constraints_from_judgments(data.triplets, index);
  auto split = split_by_anchor(all, held_out_fraction, split_seed);
  if (split.held_out.empty()) throw DataError("held-out split is empty");
  std::vector<TripletConstraint> train = split.train;
  if (budget < 1.0) {
    const auto keep = static_cast<std::size_t>(
        std::floor(budget * static_cast<double>(train.size())));
    if (keep == 0) throw DataError("budget leaves no training triplets");
    std::mt19937_64 rng(derive_seed(split_seed, "budget-subsample"));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < keep; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<TripletConstraint> sub;
    sub.reserve(keep);
    for (const auto i : order) sub.push_back(train[i]);
    train = std::move(sub);
  }
  const auto fit = fit_soe(train, data.latents.size(), soe, split.held_out);
  PlantedRun run;
  run.held_out_balanced = balanced_constraint_agreement(fit.coords, split.held_out);
  run.held_out_micro = *fit.held_out_agreement;
  run.n_train = train.size();
  run.n_held_out = split.held_out.size();
  return run;
}

void AblationConfig::validate() const {
  synth.validate();
  soe.validate();
  if (dims.empty() || budgets.empty()) throw ConfigError("ablation needs dims and budgets");
  if (n_seeds == 0) throw ConfigError("ablation needs at least one seed");
}

namespace {

void summarize(AblationCell& c) {
  const double n = static_cast<double>(c.per_seed.size());
  c.mean = std::accumulate(c.per_seed.begin(), c.per_seed.end(), 0.0) / n;
  if (c.per_seed.size() < 2) return;
  double ss = 0.0;
  for (const double v : c.per_seed) ss += (v - c.mean) * (v - c.mean);
  c.sd = std::sqrt(ss / (n - 1.0));
}

}  // namespace

AblationTable run_ablation(const AblationConfig& cfg) {
  cfg.validate();
  AblationTable t;
  for (const auto d : cfg.dims) t.by_dim.push_back({d, 1.0, {}, 0.0, 0.0});
  for (const auto b : cfg.budgets) t.by_budget.push_back({cfg.soe.dim, b, {}, 0.0, 0.0});
  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed + s;
    const auto data = synth_dataset(sc);
    std::map<std::pair<std::size_t, double>, double> done;
    auto run = [&](std::size_t dim, double budget) {
      const auto key = std::make_pair(dim, budget);
      if (const auto it = done.find(key); it != done.end()) return it->second;
      SoeConfig soe = cfg.soe;
      soe.dim = dim;
      soe.seed = cfg.soe.seed + s;
      const double v =
          planted_soe_run(data, soe, budget, cfg.held_out_fraction, sc.seed).held_out_balanced;
      done.emplace(key, v);
      return v;
    };
    for (auto& c : t.by_dim) c.per_seed.push_back(run(c.dim, c.budget));
    for (auto& c : t.by_budget) c.per_seed.push_back(run(c.dim, c.budget));
  }
  for (auto& c : t.by_dim) summarize(c);
  for (auto& c : t.by_budget) summarize(c);
  return t;
}

std::string ablation_to_table(const AblationTable& t) {
  std::ostringstream out;
  char buf[64];
  auto block = [&](const char* title, const std::vector<AblationCell>& cells, auto label) {
    out << title << '\n';
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, "%9s", label(c).c_str());
      out << buf;
    }
    out << '\n';
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, "%9.1f", 100.0 * c.mean);
      out << buf;
    }
    out << '\n';
    if (cells.front().per_seed.size() > 1) {
      for (const auto& c : cells) {
        char sd[32];
        std::snprintf(sd, sizeof sd, "+-%.1f", 100.0 * c.sd);
        std::snprintf(buf, sizeof buf, "%9s", sd);
        out << buf;
      }
      out << '\n';
    }
  };
  block("Embedding dim (full budget), held-out Bal. Agr. [%]", t.by_dim,
        [](const AblationCell& c) { return std::to_string(c.dim); });
  out << '\n';
  char label[32];
  block("No. triplets (fraction of training set), held-out Bal. Agr. [%]", t.by_budget,
        [&](const AblationCell& c) {
          std::snprintf(label, sizeof label, "%g%%", 100.0 * c.budget);
          return std::string(label);
        });
  return out.str();
}

}  // namespace trisim
