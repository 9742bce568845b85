#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trisim/corpus.hpp"

namespace testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "trisim-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<trisim::ItemId> make_ids(std::size_t n, const std::string& prefix = "it") {
  std::vector<trisim::ItemId> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

// Symmetric, zero diagonal, entries uniform in (lo, hi).
inline trisim::DistanceMatrix random_distances(std::size_t n, std::mt19937_64& rng,
                                               double lo = 0.01, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  trisim::DistanceMatrix d;
  d.ids = make_ids(n);
  const auto m = static_cast<Eigen::Index>(n);
  d.values = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) d.values(i, j) = d.values(j, i) = u(rng);
  return d;
}

inline std::vector<trisim::TripletJudgment> random_judgments(const std::vector<trisim::ItemId>& ids,
                                                             std::size_t count,
                                                             std::mt19937_64& rng,
                                                             double skip_rate = 0.0) {
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<trisim::TripletJudgment> out;
  while (out.size() < count) {
    const auto a = pick(rng), l = pick(rng), r = pick(rng);
    if (a == l || a == r || l == r) continue;
    trisim::TripletJudgment j;
    j.anchor = ids[a];
    j.left = ids[l];
    j.right = ids[r];
    const double x = u(rng);
    j.choice = x < skip_rate ? trisim::Choice::Skipped
                             : (u(rng) < 0.5 ? trisim::Choice::Left : trisim::Choice::Right);
    j.source = trisim::Source::Human;
    out.push_back(j);
  }
  return out;
}

}  // namespace testing
