#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "trisim/corpus_io.hpp"
#include "trisim/mock_oracle.hpp"

using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (const char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Run cli(const std::vector<std::string>& args) {
  testing::TempDir io;
  std::string cmd = quote(TRISIM_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote((io / "out").string()) + " 2>" + quote((io / "err").string());
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(io / "out");
  r.err = slurp(io / "err");
  return r;
}

std::string str(const std::filesystem::path& p) { return p.string(); }

// Small planted corpus written by the `synth` subcommand.
struct Corpus {
  testing::TempDir dir;
  Corpus(std::size_t n = 12) {
    const auto r = cli({"synth", "--out-dir", dir.path().string(), "--n-items",
                        std::to_string(n), "--channels", "6", "--height", "6", "--width", "6",
                        "--seed", "5"});
    REQUIRE(r.code == 0);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

long columns_of(const std::string& csv_path) {
  std::ifstream in(csv_path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  return static_cast<long>(std::count(row.begin(), row.end(), ','));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help lists every flag with the documented defaults") {
  const auto soe = cli({"soe", "fit", "--help"});
  CHECK(soe.code == 0);
  for (const char* s : {"--dim UINT [4]", "--margin FLOAT [0]", "--lr FLOAT [0.05]",
                        "--batch-size UINT [2048]", "--epochs UINT [50]",
                        "--amsgrad BOOLEAN [true]", "--anchor-balanced BOOLEAN [true]"}) {
    CHECK_MESSAGE(soe.out.find(s) != std::string::npos, s);
  }
  const auto pool = cli({"pool", "train", "--help"});
  CHECK(pool.code == 0);
  for (const char* s : {"--lambda FLOAT [25]", "--mu FLOAT [25]", "--nu FLOAT [1]",
                        "--lr FLOAT [0.001]", "--weight-decay FLOAT [1e-05]",
                        "--batch-size UINT [32]", "--dim UINT [512]", "--epochs UINT [50]",
                        "--margin FLOAT [0.2]", "--temperature FLOAT [0.1]",
                        "--schedule TEXT [cosine]"}) {
    CHECK_MESSAGE(pool.out.find(s) != std::string::npos, s);
  }
  const auto top = cli({"--help"});
  for (const char* sub : {"synth", "oracle", "soe", "pool", "embed", "distances", "fuse",
                          "metrics", "neighbors", "serve", "ablate"}) {
    CHECK_MESSAGE(top.out.find(std::string("  ") + sub + " ") != std::string::npos, sub);
  }
}

TEST_CASE("fit then score an embedding") {
  Corpus c;
  const auto fit = cli({"soe", "fit", "--triplets", c / "triplets.jsonl", "--items",
                        c / "ids.txt", "--dim", "4", "--out", c / "emb.csv"});
  REQUIRE(fit.code == 0);
  CHECK(columns_of(c / "emb.csv") == 4);
  const auto emb = trisim::load_embeddings(c / "emb.csv");
  CHECK(emb.size() == 12);

  const auto m = cli({"metrics", "--embeddings", c / "emb.csv", "--judgments",
                      c / "triplets.jsonl"});
  REQUIRE(m.code == 0);
  const auto report = json::parse(m.out);
  for (const char* key : {"balanced_agreement", "micro_agreement", "macro_f1", "kappa"}) {
    REQUIRE(report.contains(key));
  }
  CHECK(report["micro_agreement"].get<double>() > 0.9);

  const auto d = cli({"distances", "--embeddings", c / "emb.csv", "--out", c / "d.csv"});
  CHECK(d.code == 0);
  const auto nn = cli({"neighbors", "--distances", c / "d.csv", "--id", "item_000", "-k", "3"});
  CHECK(nn.code == 0);
  CHECK(std::count(nn.out.begin(), nn.out.end(), '\n') == 4);
  const auto f = cli({"fuse", "--vision-distances", c / "d.csv", "--text-embeddings",
                      c / "latents.csv", "--out", c / "fused.csv"});
  CHECK(f.code == 0);
  CHECK_NOTHROW(trisim::load_distances(c / "fused.csv").validate());
}

TEST_CASE("vision head train and embed") {
  Corpus c;
  const auto train = cli({"pool", "train", "--views", c / "views.bin", "--out", c / "head.bin",
                          "--dim", "8", "--hidden", "8", "--epochs", "3", "--batch-size", "4"});
  REQUIRE(train.code == 0);
  const auto embed = cli({"embed", "--features", c / "features.bin", "--head", c / "head.bin",
                          "--out", c / "vision.csv"});
  REQUIRE(embed.code == 0);
  CHECK(columns_of(c / "vision.csv") == 8);
  // The unpaired feature file cannot train a head.
  CHECK(cli({"pool", "train", "--views", c / "features.bin", "--out", c / "h2.bin"}).code == 2);
}

TEST_CASE("exit codes follow the contract") {
  Corpus c;
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"soe", "fit", "--bogus"}).code == 1);
  const auto missing = cli({"soe", "fit", "--triplets", c / "triplets.jsonl", "--items",
                            c / "ids.txt"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--out") != std::string::npos);
  CHECK(cli({"soe", "fit", "--triplets", c / "triplets.jsonl", "--items", c / "ids.txt",
             "--out", c / "e.csv", "--lr", "-1"})
         .code == 1);

  const auto absent = cli({"soe", "fit", "--triplets", c / "nope.jsonl", "--items",
                           c / "ids.txt", "--out", c / "e.csv"});
  CHECK(absent.code == 2);
  CHECK(absent.err.find("nope.jsonl") != std::string::npos);
  std::ofstream(c / "bad.jsonl") << "{\"anchor\": 1}\n";
  CHECK(cli({"metrics", "--embeddings", c / "latents.csv", "--judgments", c / "bad.jsonl"})
         .code == 2);

  const auto unreachable = cli({"oracle", "--descriptions", c / "descriptions.jsonl",
                                "--endpoint", "http://127.0.0.1:9/v1/chat/completions",
                                "--retry-limit", "0", "--budget", "0.01", "--out",
                                c / "o.jsonl"});
  CHECK(unreachable.code == 3);
}

TEST_CASE("oracle runs against a mock endpoint") {
  Corpus c(8);
  const auto descriptions = trisim::load_descriptions(c / "descriptions.jsonl");
  const auto latents = trisim::load_embeddings(c / "latents.csv");
  trisim::MockOracleServer good(trisim::latent_distance_answerer(descriptions, latents));
  const auto ok = cli({"oracle", "--descriptions", c / "descriptions.jsonl", "--triplets",
                       c / "triplets.jsonl", "--endpoint", good.endpoint(), "--out",
                       c / "oracle.jsonl", "--cache", c / "cache"});
  REQUIRE(ok.code == 0);
  const auto planted = trisim::load_judgments(c / "triplets.jsonl");
  const auto answered = trisim::load_judgments(c / "oracle.jsonl");
  REQUIRE(answered.size() == planted.size());
  for (std::size_t i = 0; i < planted.size(); ++i) CHECK(answered[i].choice == planted[i].choice);

  const auto sent = good.request_count();
  const auto again = cli({"oracle", "--descriptions", c / "descriptions.jsonl", "--triplets",
                          c / "triplets.jsonl", "--endpoint", good.endpoint(), "--out",
                          c / "oracle2.jsonl", "--cache", c / "cache"});
  CHECK(again.code == 0);
  CHECK(good.request_count() == sent);
  CHECK(slurp(c / "oracle2.jsonl") == slurp(c / "oracle.jsonl"));

  trisim::MockOracleServer garbage([](const trisim::PromptMessages&) {
    return std::string("they look alike");
  });
  const auto bad = cli({"oracle", "--descriptions", c / "descriptions.jsonl", "--budget",
                        "0.05", "--endpoint", garbage.endpoint(), "--out", c / "g.jsonl"});
  CHECK(bad.code == 3);
  CHECK(bad.err.find("skipped") != std::string::npos);
}

TEST_CASE("seeded commands are byte-reproducible") {
  testing::TempDir dir;
  for (const char* sub : {"a", "b"}) {
    CHECK(cli({"synth", "--out-dir", str(dir / sub), "--n-items", "10", "--channels", "4",
               "--height", "5", "--width", "5", "--seed", "3"})
           .code == 0);
  }
  for (const char* f : {"latents.csv", "views.bin", "features.bin", "triplets.jsonl",
                        "descriptions.jsonl", "ids.txt"}) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }
  const auto a = str(dir / "a");
  std::vector<std::string> outputs;
  for (const char* name : {"e1.csv", "e2.csv"}) {
    REQUIRE(cli({"soe", "fit", "--triplets", a + "/triplets.jsonl", "--items", a + "/ids.txt",
                 "--seed", "9", "--held-out", "0.2", "--out", str(dir / name)})
             .code == 0);
    outputs.push_back(slurp(dir / name));
  }
  CHECK(outputs[0] == outputs[1]);
  REQUIRE(cli({"soe", "fit", "--triplets", a + "/triplets.jsonl", "--items", a + "/ids.txt",
               "--seed", "10", "--out", str(dir / "e3.csv")})
           .code == 0);
  CHECK(slurp(dir / "e3.csv") != outputs[0]);

  for (const char* name : {"h1.bin", "h2.bin"}) {
    REQUIRE(cli({"pool", "train", "--views", a + "/views.bin", "--out", str(dir / name),
                 "--dim", "4", "--hidden", "4", "--epochs", "2", "--batch-size", "4",
                 "--seed", "2"})
             .code == 0);
  }
  CHECK(slurp(dir / "h1.bin") == slurp(dir / "h2.bin"));

  const std::vector<std::string> ablate{"ablate", "--synthetic", "--seed", "7", "--n-items",
                                        "10", "--dims", "2,4", "--budgets", "10,100",
                                        "--seeds", "1"};
  const auto r1 = cli(ablate);
  REQUIRE(r1.code == 0);
  CHECK(cli(ablate).out == r1.out);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  Corpus c;
  const std::vector<std::string> base{"soe", "fit", "--triplets", c / "triplets.jsonl",
                                      "--items", c / "ids.txt", "--epochs", "5"};
  auto with = [&](std::vector<std::string> extra, const std::string& out) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back(out);
    REQUIRE(cli(args).code == 0);
    return columns_of(out);
  };
  std::ofstream(c / "fit.conf") << "# soe settings\ndim = 3\nbatch_size = 64\n";
  CHECK(with({}, c / "default.csv") == 4);
  CHECK(with({"--config", c / "fit.conf"}, c / "file.csv") == 3);
  CHECK(with({"--config", c / "fit.conf", "--dim", "2"}, c / "flag.csv") == 2);

  std::ofstream(c / "typo.conf") << "dimm = 3\n";
  auto args = base;
  for (const auto& s : {std::string("--config"), c / "typo.conf", std::string("--out"),
                        c / "x.csv"}) {
    args.push_back(s);
  }
  const auto typo = cli(args);
  CHECK(typo.code == 1);
  CHECK(typo.err.find("dimm") != std::string::npos);
}

TEST_CASE("ablate prints both sweeps") {
  testing::TempDir dir;
  const auto r = cli({"ablate", "--synthetic", "--seed", "7", "--n-items", "12", "--dims",
                      "2,3,4", "--budgets", "1,100", "--seeds", "2", "--json-out",
                      str(dir / "abl.json")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Embedding dim") != std::string::npos);
  CHECK(r.out.find("No. triplets") != std::string::npos);
  const auto j = json::parse(slurp(dir / "abl.json"));
  CHECK(j["by_dim"].size() == 3);
  CHECK(j["by_budget"].size() == 2);
  CHECK(j["by_dim"][0]["per_seed"].size() == 2);
  CHECK(cli({"ablate", "--seed", "7"}).code == 1);
  CHECK(cli({"ablate", "--synthetic", "--budgets", "0"}).code == 1);
}

}  // TEST_SUITE
