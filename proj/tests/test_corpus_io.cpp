#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "trisim/corpus_io.hpp"
#include "trisim/errors.hpp"

using namespace trisim;

namespace {

FeatureContainer random_container(std::mt19937_64& rng, const std::string& item,
                                  std::uint32_t n_wounds) {
  std::uniform_int_distribution<std::uint32_t> dim(1, 9);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  FeatureContainer fc;
  fc.item = item;
  fc.channels = dim(rng);
  fc.height = dim(rng);
  fc.width = dim(rng);
  fc.values.resize(static_cast<std::size_t>(fc.channels) * fc.height * fc.width);
  for (auto& v : fc.values) v = normal(rng);
  std::bernoulli_distribution on(0.4);
  for (std::uint32_t w = 0; w < n_wounds; ++w) {
    WoundMask m;
    m.id = "w" + std::to_string(w);
    m.cells.resize(static_cast<std::size_t>(fc.height) * fc.width);
    for (auto& c : m.cells) c = on(rng) ? 1 : 0;
    m.cells[rng() % m.cells.size()] = 1;
    fc.wounds.push_back(std::move(m));
  }
  return fc;
}

bool same_container(const FeatureContainer& a, const FeatureContainer& b) {
  if (a.item != b.item || a.channels != b.channels || a.height != b.height ||
      a.width != b.width || a.wounds.size() != b.wounds.size()) {
    return false;
  }
  if (std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) != 0) {
    return false;
  }
  for (std::size_t i = 0; i < a.wounds.size(); ++i) {
    if (a.wounds[i].id != b.wounds[i].id || a.wounds[i].cells != b.wounds[i].cells) return false;
  }
  return true;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("corpus_io") {

TEST_CASE("item ids reject separators and duplicates") {
  CHECK_NOTHROW(validate_item_id("case_01"));
  CHECK_THROWS_AS(validate_item_id(""), DataError);
  CHECK_THROWS_AS(validate_item_id("a,b"), DataError);
  CHECK_THROWS_AS(validate_item_id("a\nb"), DataError);
  const std::vector<ItemId> ids{"a", "b", "a"};
  CHECK(error_of([&] { build_id_index(ids); }).find("'a'") != std::string::npos);
}

TEST_CASE("timestamps round-trip through RFC 3339") {
  const Timestamp t{std::chrono::milliseconds(1'700'000'000'123)};
  CHECK(format_rfc3339(t) == "2023-11-14T22:13:20.123Z");
  CHECK(parse_rfc3339(format_rfc3339(t)) == t);
  CHECK(format_rfc3339(Timestamp{}) == "1970-01-01T00:00:00Z");
  CHECK(parse_rfc3339("2023-11-14T23:13:20.123+01:00") == t);
  CHECK_THROWS_AS(parse_rfc3339("yesterday"), DataError);
}

TEST_CASE("embedding CSV round-trips exactly on random sets") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = 1 + static_cast<Eigen::Index>(rng() % 12);
    const auto d = 1 + static_cast<Eigen::Index>(rng() % 6);
    EmbeddingSet e{testing::make_ids(static_cast<std::size_t>(n)),
                   testing::gaussian(n, d, rng, std::pow(10.0, static_cast<double>(rng() % 9) - 4))};
    std::stringstream buf;
    write_embeddings(buf, e);
    const auto back = read_embeddings(buf);
    REQUIRE(back.ids == e.ids);
    CHECK((back.coords.array() == e.coords.array()).all());
  }
}

TEST_CASE("embedding CSV errors carry the line number") {
  std::stringstream bad_row("id,dim=2\na,1,2\nb,1\n");
  CHECK(error_of([&] { read_embeddings(bad_row, "emb.csv"); }).find("emb.csv:3") !=
        std::string::npos);
  std::stringstream bad_header("name,x\n");
  CHECK_THROWS_AS(read_embeddings(bad_header), DataError);
  std::stringstream dup("id,dim=1\na,1\na,2\n");
  CHECK(error_of([&] { read_embeddings(dup, "e"); }).find("duplicate") != std::string::npos);
  std::stringstream nan("id,dim=1\na,nan\n");
  CHECK_THROWS_AS(read_embeddings(nan), DataError);
}

TEST_CASE("distance CSV round-trips and validates") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto d = testing::random_distances(2 + rng() % 10, rng);
    std::stringstream buf;
    write_distances(buf, d);
    const auto back = read_distances(buf);
    REQUIRE(back.ids == d.ids);
    CHECK((back.values.array() == d.values.array()).all());
  }
  std::stringstream asym("a,b\n0,1\n2,0\n");
  CHECK_THROWS_AS(read_distances(asym), DataError);
  std::stringstream diag("a,b\n1,1\n1,0\n");
  CHECK_THROWS_AS(read_distances(diag), DataError);
  std::stringstream short_rows("a,b,c\n0,1,1\n1,0,1\n");
  CHECK_THROWS_AS(read_distances(short_rows), DataError);
}

TEST_CASE("feature files round-trip bit-exactly") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    FeatureFile file;
    file.paired = rep % 2 == 1;
    const auto count = 1 + rng() % 4;
    for (std::size_t i = 0; i < count; ++i) {
      const auto id = "img" + std::to_string(i);
      const auto wounds = static_cast<std::uint32_t>(1 + rng() % 3);
      if (file.paired) {
        ViewPair p;
        p.item = id;
        p.view_a = random_container(rng, id, wounds);
        p.view_b = p.view_a;
        for (auto& v : p.view_b.values) v = -v;
        file.pairs.push_back(std::move(p));
      } else {
        file.containers.push_back(random_container(rng, id, wounds));
      }
    }
    const auto bytes = encode_feature_file(file);
    const auto back = decode_feature_file(bytes);
    REQUIRE(back.paired == file.paired);
    if (file.paired) {
      REQUIRE(back.pairs.size() == file.pairs.size());
      for (std::size_t i = 0; i < file.pairs.size(); ++i) {
        CHECK(same_container(back.pairs[i].view_a, file.pairs[i].view_a));
        CHECK(same_container(back.pairs[i].view_b, file.pairs[i].view_b));
      }
    } else {
      REQUIRE(back.containers.size() == file.containers.size());
      for (std::size_t i = 0; i < file.containers.size(); ++i) {
        CHECK(same_container(back.containers[i], file.containers[i]));
      }
    }
    CHECK(encode_feature_file(back) == bytes);
  }
}

TEST_CASE("feature file layout starts with the magic and little-endian header") {
  std::mt19937_64 rng(1);
  FeatureFile file;
  file.containers.push_back(random_container(rng, "x", 1));
  const auto bytes = encode_feature_file(file);
  REQUIRE(bytes.size() > 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "TRIDERM1");
  CHECK(bytes[8] == 0);   // kind: single
  CHECK(bytes[12] == 1);  // one record
  CHECK(bytes[16] == 1);  // id length
  CHECK(bytes[20] == 'x');
}

TEST_CASE("corrupt feature files are rejected with a reason") {
  std::mt19937_64 rng(2);
  FeatureFile file;
  file.containers.push_back(random_container(rng, "x", 1));
  const auto good = encode_feature_file(file);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(error_of([&] { decode_feature_file(bad_magic); }).find("magic") != std::string::npos);

  auto truncated = good;
  truncated.resize(good.size() - 3);
  CHECK_THROWS_AS(decode_feature_file(truncated), DataError);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(error_of([&] { decode_feature_file(trailing); }).find("trailing") != std::string::npos);

  // payload_bytes lives after id_len(4) + id(1) + C,H,W(12) + wound_count(4).
  auto bad_size = good;
  bad_size[16 + 4 + 1 + 12 + 4] ^= 0x04;
  CHECK(error_of([&] { decode_feature_file(bad_size); }).find("size") != std::string::npos);

  auto empty_mask = file;
  std::fill(empty_mask.containers[0].wounds[0].cells.begin(),
            empty_mask.containers[0].wounds[0].cells.end(), 0);
  CHECK_THROWS_AS(encode_feature_file(empty_mask), DataError);
}

TEST_CASE("view pairs must share wound ids") {
  std::mt19937_64 rng(4);
  ViewPair p;
  p.item = "a";
  p.view_a = random_container(rng, "a", 2);
  p.view_b = random_container(rng, "a", 1);
  CHECK_THROWS_AS(p.validate(), DataError);
}

TEST_CASE("judgment JSONL round-trips") {
  std::mt19937_64 rng(9);
  auto js = testing::random_judgments(testing::make_ids(8), 100, rng, 0.2);
  for (std::size_t i = 0; i < js.size(); ++i) {
    js[i].source = static_cast<Source>(i % 3);
    if (i % 2) js[i].annotator = "ann" + std::to_string(i);
    js[i].created_at = Timestamp{std::chrono::milliseconds(1'600'000'000'000 + 7 * i)};
  }
  std::stringstream buf;
  write_judgments(buf, js);
  const auto back = read_judgments(buf);
  CHECK(back == js);
}

TEST_CASE("judgment JSONL schema errors") {
  const std::string ok =
      R"({"anchor":"a","left":"b","right":"c","choice":"left","source":"human","annotator":null,"created_at":"2024-01-01T00:00:00Z"})";
  CHECK(judgment_from_json_line(ok).choice == Choice::Left);
  CHECK_FALSE(judgment_from_json_line(ok).annotator.has_value());
  std::stringstream bad(ok + "\n{\"anchor\":\"a\"}\n");
  CHECK(error_of([&] { read_judgments(bad, "j.jsonl"); }).find("j.jsonl:2") != std::string::npos);
  std::string same = ok;
  same.replace(same.find("\"b\""), 3, "\"a\"");
  CHECK_THROWS_AS(judgment_from_json_line(same), DataError);
  std::string choice = ok;
  choice.replace(choice.find("left\",\"s"), 4, "maybe");
  CHECK_THROWS_AS(judgment_from_json_line(choice), DataError);
}

TEST_CASE("files on disk") {
  testing::TempDir dir;
  const std::vector<ItemId> ids{"x", "y", "z"};
  save_item_ids(dir / "ids.txt", ids);
  CHECK(load_item_ids(dir / "ids.txt") == ids);
  CHECK_THROWS_AS(load_item_ids(dir / "missing.txt"), DataError);
}

TEST_CASE("shortest float formatting round-trips") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<double>(rng() % 20) - 10);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.05) == "0.05");
  CHECK_THROWS_AS(parse_double("1.5x"), DataError);
}

}  // TEST_SUITE
