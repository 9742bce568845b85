#pragma once

// Planted-structure corpora: Gaussian latents, feature-map view pairs that
// carry the latents, and triplet labels decided by latent distances.

#include <cstdint>
#include <vector>

#include "trisim/corpus.hpp"

namespace trisim {

// (anchor, j, k) over item indices with j < k and both != anchor.
struct TripletIndex {
  std::uint32_t anchor = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
  bool operator==(const TripletIndex&) const = default;
};

// n * C(n-1, 2): every anchor with every unordered reference pair.
std::uint64_t triplet_universe_size(std::size_t n_items);

// Canonical order: anchor ascending, then (j, k) lexicographic.
std::vector<TripletIndex> triplet_universe(std::size_t n_items);

// Uniform sample without replacement of floor(fraction * |universe|)
// triplets, returned in canonical order. fraction == 1 yields the universe.
std::vector<TripletIndex> sample_triplet_indices(std::size_t n_items, double fraction,
                                                 std::uint64_t seed);

struct SynthConfig {
  std::size_t n_items = 60;
  std::size_t latent_dim = 4;
  double noise_sd = 0.0;        // independent per-view feature noise
  std::uint64_t seed = 0;
  double latent_scale = 1.0;    // latents ~ N(0, latent_scale^2)
  std::uint32_t channels = 16;
  std::uint32_t height = 8;
  std::uint32_t width = 8;
  std::uint32_t wounds_per_item = 1;
  double triplet_fraction = 1.0;
  double label_noise_sd = 0.0;  // perturbs the latent distance gap before labeling

  void validate() const;
};

struct SynthDataset {
  EmbeddingSet latents;
  std::vector<ViewPair> pairs;
  std::vector<TripletJudgment> triplets;
};

// Item ids are "item_000", "item_001", ...; wound ids "w0", "w1", ...
SynthDataset synth_dataset(const SynthConfig& cfg);

}  // namespace trisim
