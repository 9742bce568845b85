#include "trisim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "trisim/errors.hpp"
#include "trisim/seeding.hpp"

namespace trisim {

std::uint64_t triplet_universe_size(std::size_t n_items) {
  if (n_items < 3) return 0;
  const std::uint64_t m = n_items - 1;
  return n_items * (m * (m - 1) / 2);
}

std::vector<TripletIndex> triplet_universe(std::size_t n_items) {
  std::vector<TripletIndex> out;
  out.reserve(triplet_universe_size(n_items));
  const auto n = static_cast<std::uint32_t>(n_items);
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (j == a) continue;
      for (std::uint32_t k = j + 1; k < n; ++k) {
        if (k == a) continue;
        out.push_back({a, j, k});
      }
    }
  }
  return out;
}

std::vector<TripletIndex> sample_triplet_indices(std::size_t n_items, double fraction,
                                                 std::uint64_t seed) {
  if (n_items < 3) throw ConfigError("triplet sampling needs at least 3 items");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("triplet fraction must lie in (0, 1], got " +
                      std::to_string(fraction));
  }
  auto universe = triplet_universe(n_items);
  if (fraction == 1.0) return universe;
  const auto m = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(universe.size())));
  if (m == 0) {
    throw ConfigError("triplet fraction " + std::to_string(fraction) +
                      " selects 0 of " + std::to_string(universe.size()) + " triplets");
  }
  std::vector<std::size_t> order(universe.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, "triplet-sample"));
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(m);
  std::sort(order.begin(), order.end());
  std::vector<TripletIndex> out;
  out.reserve(m);
  for (auto idx : order) out.push_back(universe[idx]);
  return out;
}

void SynthConfig::validate() const {
  if (n_items < 3) throw ConfigError("synth: n_items must be >= 3");
  if (latent_dim < 1) throw ConfigError("synth: latent_dim must be >= 1");
  if (!(noise_sd >= 0.0)) throw ConfigError("synth: noise_sd must be >= 0");
  if (!(label_noise_sd >= 0.0)) throw ConfigError("synth: label_noise_sd must be >= 0");
  if (!(latent_scale > 0.0)) throw ConfigError("synth: latent_scale must be > 0");
  if (channels == 0 || height == 0 || width == 0) {
    throw ConfigError("synth: channels, height and width must be positive");
  }
  if (wounds_per_item == 0) throw ConfigError("synth: wounds_per_item must be >= 1");
}

namespace {

std::string item_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "item_%03zu", i);
  return buf;
}

// Axis-aligned rectangle covering between a quarter and all of each side.
std::vector<std::uint8_t> random_rect_mask(std::uint32_t h, std::uint32_t w,
                                           std::mt19937_64& rng) {
  auto extent = [&](std::uint32_t side) {
    std::uniform_int_distribution<std::uint32_t> len(std::max(1u, side / 4), side);
    const auto l = len(rng);
    std::uniform_int_distribution<std::uint32_t> off(0, side - l);
    return std::pair{off(rng), l};
  };
  const auto [y0, hh] = extent(h);
  const auto [x0, ww] = extent(w);
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(h) * w, 0);
  for (auto y = y0; y < y0 + hh; ++y) {
    for (auto x = x0; x < x0 + ww; ++x) cells[static_cast<std::size_t>(y) * w + x] = 1;
  }
  return cells;
}

}  // namespace

SynthDataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, "synth-corpus"));
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthDataset out;
  const auto n = static_cast<Eigen::Index>(cfg.n_items);
  const auto ld = static_cast<Eigen::Index>(cfg.latent_dim);
  out.latents.coords.resize(n, ld);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.latents.ids.push_back(item_name(static_cast<std::size_t>(i)));
    for (Eigen::Index k = 0; k < ld; ++k) {
      out.latents.coords(i, k) = cfg.latent_scale * normal(rng);
    }
  }

  // Fixed random lift from latent space to feature channels.
  Eigen::MatrixXd lift(cfg.channels, ld);
  for (Eigen::Index c = 0; c < lift.rows(); ++c) {
    for (Eigen::Index k = 0; k < ld; ++k) {
      lift(c, k) = normal(rng) / std::sqrt(static_cast<double>(ld));
    }
  }

  const std::size_t plane = static_cast<std::size_t>(cfg.height) * cfg.width;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<WoundMask> wounds;
    for (std::uint32_t w = 0; w < cfg.wounds_per_item; ++w) {
      wounds.push_back({"w" + std::to_string(w),
                        random_rect_mask(cfg.height, cfg.width, rng)});
    }
    std::vector<std::uint8_t> inside(plane, 0);
    for (const auto& w : wounds) {
      for (std::size_t p = 0; p < plane; ++p) inside[p] |= w.cells[p];
    }
    const Eigen::VectorXd signal = lift * out.latents.coords.row(i).transpose();
    auto make_view = [&]() {
      FeatureContainer fc;
      fc.item = out.latents.ids[static_cast<std::size_t>(i)];
      fc.channels = cfg.channels;
      fc.height = cfg.height;
      fc.width = cfg.width;
      fc.values.resize(static_cast<std::size_t>(cfg.channels) * plane);
      for (std::uint32_t c = 0; c < cfg.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
          const double base = inside[p] ? signal(c) : 0.0;
          fc.values[c * plane + p] = static_cast<float>(base + cfg.noise_sd * normal(rng));
        }
      }
      fc.wounds = wounds;
      return fc;
    };
    ViewPair pair;
    pair.item = out.latents.ids[static_cast<std::size_t>(i)];
    pair.view_a = make_view();
    pair.view_b = make_view();
    out.pairs.push_back(std::move(pair));
  }

  const auto triplets = sample_triplet_indices(cfg.n_items, cfg.triplet_fraction,
                                               cfg.seed);
  out.triplets.reserve(triplets.size());
  for (const auto& t : triplets) {
    const auto& z = out.latents.coords;
    const double dj = (z.row(t.anchor) - z.row(t.j)).norm();
    const double dk = (z.row(t.anchor) - z.row(t.k)).norm();
    double gap = dk - dj;
    if (cfg.label_noise_sd > 0.0) gap += cfg.label_noise_sd * normal(rng);
    TripletJudgment j;
    j.anchor = out.latents.ids[t.anchor];
    j.left = out.latents.ids[t.j];
    j.right = out.latents.ids[t.k];
    j.choice = gap > 0.0 ? Choice::Left : Choice::Right;
    j.source = Source::Synthetic;
    out.triplets.push_back(std::move(j));
  }
  return out;
}

}  // namespace trisim
