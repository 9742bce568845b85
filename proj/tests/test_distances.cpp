#include <doctest.h>

#include "support.hpp"
#include "trisim/distances.hpp"
#include "trisim/errors.hpp"

using namespace trisim;

TEST_SUITE("distances") {

TEST_CASE("hand-computed euclidean and cosine distances") {
  EmbeddingSet e{{"a", "b", "c"}, Eigen::MatrixXd(3, 2)};
  e.coords << 0, 0, 3, 4, 0, 2;
  const auto d = pairwise_distances(e, Metric::Euclidean);
  CHECK(d.values(0, 1) == 5.0);
  CHECK(d.values(0, 2) == 2.0);
  CHECK(d.values(1, 2) == doctest::Approx(std::sqrt(9.0 + 4.0)));

  EmbeddingSet f{{"a", "b", "c"}, Eigen::MatrixXd(3, 2)};
  f.coords << 1, 0, 0, 2, -3, 0;
  const auto c = pairwise_distances(f, Metric::Cosine);
  CHECK(c.values(0, 1) == doctest::Approx(1.0));
  CHECK(c.values(0, 2) == doctest::Approx(2.0));
  CHECK(c.values(0, 0) == 0.0);
}

TEST_CASE("distance matrices are valid metrics on random embeddings") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<Eigen::Index>(2 + rng() % 10);
    EmbeddingSet e{testing::make_ids(static_cast<std::size_t>(n)),
                   testing::gaussian(n, 1 + static_cast<Eigen::Index>(rng() % 5), rng)};
    for (const auto metric : {Metric::Euclidean, Metric::Cosine}) {
      const auto d = pairwise_distances(e, metric);
      CHECK_NOTHROW(d.validate());
      if (metric == Metric::Cosine) {
        CHECK(d.values.maxCoeff() <= 2.0);
        continue;
      }
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index k = 0; k < n; ++k)
            CHECK(d.values(i, k) <= d.values(i, j) + d.values(j, k) + 1e-12);
    }
  }
}

TEST_CASE("degenerate inputs are rejected") {
  EmbeddingSet one{{"a"}, Eigen::MatrixXd::Ones(1, 2)};
  CHECK_THROWS_AS(pairwise_distances(one), DataError);
  EmbeddingSet zero{{"a", "b"}, Eigen::MatrixXd::Zero(2, 2)};
  zero.coords(1, 0) = 1.0;
  CHECK_THROWS_AS(pairwise_distances(zero, Metric::Cosine), DataError);
  CHECK_THROWS_AS(parse_metric("manhattan"), ConfigError);
}

}  // TEST_SUITE
