#include <doctest.h>

#include <map>
#include <set>

#include "gradcheck.hpp"
#include "support.hpp"
#include "trisim/errors.hpp"
#include "trisim/soe.hpp"
#include "trisim/synth.hpp"

using namespace trisim;

namespace {

std::vector<TripletConstraint> all_constraints(const SynthDataset& data) {
  return constraints_from_judgments(data.triplets, build_id_index(data.latents.ids));
}

}  // namespace

TEST_SUITE("soe") {

TEST_CASE("hinge loss and subgradient on a line") {
  Eigen::MatrixXd x(3, 1);
  x << 0, 1, 3;
  const std::vector<TripletConstraint> sat{{0, 1, 2}};
  const std::vector<TripletConstraint> viol{{0, 2, 1}};
  Eigen::MatrixXd g;
  CHECK(soe_loss_and_grad(x, sat, 0.5, &g) == 0.0);
  CHECK(g.norm() == 0.0);
  CHECK(soe_loss_and_grad(x, viol, 0.5, &g) == doctest::Approx(2.5));
  CHECK(g(0, 0) == doctest::Approx(0.0));
  CHECK(g(1, 0) == doctest::Approx(-1.0));
  CHECK(g(2, 0) == doctest::Approx(1.0));
  CHECK(soe_loss_and_grad(x, sat, 2.5) == doctest::Approx(0.5));
}

TEST_CASE("subgradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    INFO("seed ", seed);
    CHECK(testing::soe_gradient_error(seed) < 1e-4);
  }
}

TEST_CASE("loss is invariant to rigid motions") {
  std::mt19937_64 rng(3);
  const auto x = testing::gaussian(8, 3, rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(testing::gaussian(3, 3, rng))
                                .householderQ();
  const Eigen::RowVectorXd shift = testing::gaussian(1, 3, rng);
  const Eigen::MatrixXd y = (x * q).rowwise() + shift;
  std::vector<TripletConstraint> batch;
  for (std::uint32_t a = 0; a < 8; ++a)
    for (std::uint32_t b = 0; b < 8; ++b)
      for (std::uint32_t c = 0; c < 8; ++c)
        if (a != b && a != c && b != c) batch.push_back({a, b, c});
  CHECK(soe_loss_and_grad(y, batch, 0.1) ==
        doctest::Approx(soe_loss_and_grad(x, batch, 0.1)).epsilon(1e-12));
  CHECK(constraint_agreement(y, batch) == constraint_agreement(x, batch));
}

TEST_CASE("anchor-balanced resampling draws equally from each anchor pool") {
  std::vector<TripletConstraint> t;
  for (std::uint32_t i = 0; i < 7; ++i) t.push_back({5, i == 5 ? 9u : i, 8});
  for (std::uint32_t i = 0; i < 3; ++i) t.push_back({2, i, 8});
  std::mt19937_64 rng(1);
  const auto out = anchor_balanced_resample(t, rng);
  REQUIRE(out.size() == 10);
  std::map<std::uint32_t, int> per_anchor;
  for (std::size_t i = 0; i < out.size(); ++i) {
    per_anchor[out[i].anchor]++;
    CHECK(std::find(t.begin(), t.end(), out[i]) != t.end());
    if (i > 0) CHECK(out[i - 1].anchor <= out[i].anchor);
  }
  CHECK(per_anchor[2] == 5);
  CHECK(per_anchor[5] == 5);

  std::vector<TripletConstraint> odd(t.begin(), t.begin() + 8);
  CHECK(anchor_balanced_resample(odd, rng).size() == 8);  // ceil(8 / 2) per anchor
}

TEST_CASE("per-anchor split keeps training triplets for every anchor") {
  SynthConfig cfg;
  cfg.n_items = 12;
  const auto c = all_constraints(synth_dataset(cfg));
  const auto split = split_by_anchor(c, 0.3, 4);
  CHECK(split.train.size() + split.held_out.size() == c.size());
  std::set<std::uint32_t> train_anchors;
  for (const auto& t : split.train) train_anchors.insert(t.anchor);
  CHECK(train_anchors.size() == 12);
  const double frac = static_cast<double>(split.held_out.size()) / static_cast<double>(c.size());
  CHECK(frac == doctest::Approx(0.3).epsilon(0.05));
  auto in_order = [&](const std::vector<TripletConstraint>& part) {
    std::size_t cursor = 0;
    for (const auto& t : part) {
      while (cursor < c.size() && !(c[cursor] == t)) ++cursor;
      if (cursor++ == c.size()) return false;
    }
    return true;
  };
  CHECK(in_order(split.train));
  CHECK(in_order(split.held_out));
  CHECK(split_by_anchor(c, 0.3, 4).held_out == split.held_out);
  CHECK(split_by_anchor(c, 0.3, 5).held_out != split.held_out);
  CHECK(split_by_anchor(c, 0.0, 4).held_out.empty());
}

TEST_CASE("judgments become oriented constraints") {
  const std::vector<ItemId> ids{"a", "b", "c"};
  std::vector<TripletJudgment> js(3);
  js[0] = {"a", "b", "c", Choice::Left};
  js[1] = {"a", "b", "c", Choice::Right};
  js[2] = {"a", "b", "c", Choice::Skipped};
  const auto c = constraints_from_judgments(js, build_id_index(ids));
  REQUIRE(c.size() == 2);
  CHECK(c[0] == TripletConstraint{0, 1, 2});
  CHECK(c[1] == TripletConstraint{0, 2, 1});
  js[0].left = "zz";
  CHECK_THROWS_AS(constraints_from_judgments(js, build_id_index(ids)), DataError);
}

TEST_CASE("fits recover planted structure reproducibly") {
  SynthConfig synth;
  synth.n_items = 20;
  const auto data = synth_dataset(synth);
  const auto split = split_by_anchor(all_constraints(data), 0.1, 0);
  SoeConfig cfg;
  cfg.epochs = 30;
  const auto a = fit_soe(split.train, 20, cfg, split.held_out);
  const auto b = fit_soe(split.train, 20, cfg, split.held_out);
  CHECK((a.coords.array() == b.coords.array()).all());
  CHECK(a.loss_history == b.loss_history);
  REQUIRE(a.held_out_agreement.has_value());
  CHECK(*a.held_out_agreement > 0.9);
  CHECK(a.loss_history.back() < a.loss_history.front());
  cfg.seed = 1;
  CHECK_FALSE((fit_soe(split.train, 20, cfg).coords.array() == a.coords.array()).all());
}

TEST_CASE("balanced agreement averages per anchor") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 10;
  // Anchor 0: one of two satisfied; anchor 3: the only one satisfied.
  const std::vector<TripletConstraint> c{{0, 1, 2}, {0, 2, 1}, {3, 2, 1}};
  CHECK(balanced_constraint_agreement(x, c) == doctest::Approx(0.75));
  CHECK(constraint_agreement(x, c) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("invalid SOE inputs") {
  SoeConfig cfg;
  cfg.dim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  const std::vector<TripletConstraint> bad{{0, 1, 7}};
  CHECK_THROWS_AS(fit_soe(bad, 3, SoeConfig{}), DataError);
}

}  // TEST_SUITE
