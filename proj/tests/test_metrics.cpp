#include <doctest.h>

#include "brute_metrics.hpp"
#include "support.hpp"
#include "trisim/errors.hpp"
#include "trisim/metrics.hpp"

using namespace trisim;

namespace {

DistanceMatrix line_distances() {
  DistanceMatrix d;
  d.ids = {"x", "near", "far"};
  d.values.resize(3, 3);
  d.values << 0, 1, 2, 1, 0, 1.5, 2, 1.5, 0;
  return d;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("kappa from a known confusion matrix") {
  // Expert Left/predicted Left = 4, Left/Right = 2, Right/Left = 1, Right/Right = 3.
  std::vector<TripletJudgment> js;
  auto add = [&](int n, const char* l, const char* r, Choice c) {
    for (int i = 0; i < n; ++i) js.push_back({"x", l, r, c, Source::Human});
  };
  add(4, "near", "far", Choice::Left);
  add(2, "far", "near", Choice::Left);
  add(1, "near", "far", Choice::Right);
  add(3, "far", "near", Choice::Right);
  const auto r = evaluate_report(line_distances(), js);
  CHECK(r.confusion[0][0] == 4);
  CHECK(r.confusion[0][1] == 2);
  CHECK(r.confusion[1][0] == 1);
  CHECK(r.confusion[1][1] == 3);
  CHECK(r.micro_agreement == doctest::Approx(0.7));
  CHECK(r.kappa == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(cohen_kappa(r.confusion, 0.7) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("metrics agree with a brute-force evaluation") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const auto d = testing::random_distances(4 + rng() % 12, rng);
    const auto js = testing::random_judgments(d.ids, 5 + rng() % 80, rng, 0.1);
    if (std::all_of(js.begin(), js.end(), [](const auto& j) { return j.choice == Choice::Skipped; }))
      continue;
    const auto r = evaluate_report(d, js);
    const auto b = testing::brute_force(d, js);
    CHECK(std::abs(r.balanced_agreement - b.balanced) <= 1e-12);
    CHECK(std::abs(r.micro_agreement - b.micro) <= 1e-12);
    CHECK(std::abs(r.macro_f1 - b.macro_f1) <= 1e-12);
    CHECK(std::abs(r.kappa - b.kappa) <= 1e-12);
    const auto skipped = static_cast<std::size_t>(std::count_if(
        js.begin(), js.end(), [](const auto& j) { return j.choice == Choice::Skipped; }));
    CHECK(r.n_skipped == skipped);
    CHECK(r.n_triplets == js.size() - skipped);
  }
}

TEST_CASE("metrics ignore judgment order") {
  std::mt19937_64 rng(5);
  const auto d = testing::random_distances(10, rng);
  auto js = testing::random_judgments(d.ids, 60, rng, 0.1);
  const auto a = evaluate_report(d, js);
  std::shuffle(js.begin(), js.end(), rng);
  const auto b = evaluate_report(d, js);
  CHECK(report_to_json(a) == report_to_json(b));
}

TEST_CASE("metrics depend only on distance order") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 50; ++rep) {
    auto d = testing::random_distances(8, rng);
    const auto js = testing::random_judgments(d.ids, 50, rng);
    const auto before = evaluate_report(d, js);
    d.values = d.values.array().cube();
    const auto after = evaluate_report(d, js);
    CHECK(before.balanced_agreement == after.balanced_agreement);
    CHECK(before.micro_agreement == after.micro_agreement);
    CHECK(before.macro_f1 == after.macro_f1);
    CHECK(before.kappa == after.kappa);
  }
}

TEST_CASE("ties count as incorrect and predict Right") {
  DistanceMatrix d;
  d.ids = {"a", "b", "c"};
  d.values = Eigen::MatrixXd::Ones(3, 3);
  d.values.diagonal().setZero();
  const std::vector<TripletJudgment> js{{"a", "b", "c", Choice::Left},
                                        {"a", "b", "c", Choice::Right}};
  const auto r = evaluate_report(d, js);
  CHECK(r.n_ties == 2);
  CHECK(r.micro_agreement == 0.0);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.confusion[1][1] == 1);
  CHECK(report_to_table(r).find("equal distances") != std::string::npos);
  CHECK(triplet_margin(d, js[0]) == 0.0);
}

TEST_CASE("balanced agreement weighs anchors equally") {
  DistanceMatrix d = line_distances();
  std::vector<TripletJudgment> js{{"near", "x", "far", Choice::Left}};
  for (int i = 0; i < 9; ++i) js.push_back({"x", "far", "near", Choice::Left});
  const auto a = agreement(d, js);
  CHECK(a.balanced == doctest::Approx(0.5));
  CHECK(a.micro == doctest::Approx(0.1));
}

TEST_CASE("bad judgment sets are rejected") {
  const auto d = line_distances();
  CHECK_THROWS_AS(evaluate_report(d, std::vector<TripletJudgment>{}), DataError);
  const std::vector<TripletJudgment> skipped{{"x", "near", "far", Choice::Skipped}};
  CHECK_THROWS_AS(evaluate_report(d, skipped), DataError);
  const std::vector<TripletJudgment> unknown{{"x", "near", "zz", Choice::Left}};
  CHECK_THROWS_AS(evaluate_report(d, unknown), DataError);
}

TEST_CASE("report json carries every field") {
  const std::vector<TripletJudgment> js{{"x", "near", "far", Choice::Left}};
  const auto json = report_to_json(evaluate_report(line_distances(), js));
  for (const char* key : {"balanced_agreement", "micro_agreement", "macro_f1", "kappa",
                          "n_triplets", "n_anchors", "n_skipped", "n_ties", "confusion"}) {
    CHECK(json.find(key) != std::string::npos);
  }
}

}  // TEST_SUITE
