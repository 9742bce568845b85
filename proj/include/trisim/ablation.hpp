#pragma once

// Embedding-dimension and triplet-budget sweeps of SOE on planted corpora.
// Each run splits the exhaustive triplet set 90/10 by anchor, fits on a
// budget-sized subsample of the training part and scores the fixed
// held-out part.

#include <cstdint>
#include <string>
#include <vector>

#include "trisim/soe.hpp"
#include "trisim/synth.hpp"

namespace trisim {

struct PlantedRun {
  double held_out_balanced = 0.0;
  double held_out_micro = 0.0;
  std::size_t n_train = 0;
  std::size_t n_held_out = 0;
};

// Budget is the fraction of the training part used for fitting.
PlantedRun planted_soe_run(const SynthDataset& data, const SoeConfig& soe, double budget,
                           double held_out_fraction, std::uint64_t split_seed);

struct AblationConfig {
  SynthConfig synth;
  SoeConfig soe;
  double held_out_fraction = 0.1;
  std::vector<std::size_t> dims{2, 3, 4, 5, 6};
  std::vector<double> budgets{0.001, 0.01, 0.1, 1.0};
  std::size_t n_seeds = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AblationCell {
  std::size_t dim = 0;
  double budget = 0.0;
  std::vector<double> per_seed;  // held-out balanced agreement
  double mean = 0.0;
  double sd = 0.0;  // across seeds, unbiased; 0 for a single seed
};

struct AblationTable {
  std::vector<AblationCell> by_dim;     // full budget
  std::vector<AblationCell> by_budget;  // at soe.dim
};

AblationTable run_ablation(const AblationConfig& cfg);

// Two blocks (embedding dim, triplet budget) with agreement in percent.
std::string ablation_to_table(const AblationTable& t);

}  // namespace trisim
