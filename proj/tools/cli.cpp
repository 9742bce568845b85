#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trisim/ablation.hpp"
#include "trisim/corpus_io.hpp"
#include "trisim/distances.hpp"
#include "trisim/errors.hpp"
#include "trisim/fusion.hpp"
#include "trisim/head_io.hpp"
#include "trisim/metrics.hpp"
#include "trisim/mock_oracle.hpp"
#include "trisim/oracle.hpp"
#include "trisim/service.hpp"
#include "trisim/service_http.hpp"
#include "trisim/soe.hpp"
#include "trisim/synth.hpp"
#include "trisim/train_head.hpp"

namespace fs = std::filesystem;
using namespace trisim;

namespace {

struct Command {
  CLI::App* app = nullptr;
  std::string config;
  std::function<int()> run;
};

using Commands = std::vector<std::unique_ptr<Command>>;

Command& add_command(Commands& cmds, CLI::App& parent, const std::string& name,
                     const std::string& description) {
  auto cmd = std::make_unique<Command>();
  cmd->app = parent.add_subcommand(name, description);
  cmd->app->add_option("--config", cmd->config,
                       "Key-value file (key = value per line); command-line flags win");
  cmds.push_back(std::move(cmd));
  return *cmds.back();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Fills options the user did not pass on the command line.
void apply_config(CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto where = path + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    for (auto& c : key) c = c == '_' ? '-' : c;
    if (key == "config") throw ConfigError(where + "config files cannot nest");
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (!opt) {
      throw ConfigError(where + "unknown key '" + key + "' for '" + app.get_name() + "'");
    }
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError(where + "bad value for '" + key + "': " + e.what());
    }
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

DistanceMatrix distances_from(const std::string& distances, const std::string& embeddings,
                              const std::string& metric, const char* what) {
  if (!distances.empty() && !embeddings.empty()) {
    throw ConfigError(std::string("give either distances or embeddings for ") + what +
                      ", not both");
  }
  if (!distances.empty()) return load_distances(distances);
  if (!embeddings.empty()) return pairwise_distances(load_embeddings(embeddings),
                                                     parse_metric(metric));
  throw ConfigError(std::string("missing distances or embeddings for ") + what);
}

// Reorders `d` to the id order `ids` (same id set required).
DistanceMatrix align_to(const DistanceMatrix& d, const std::vector<ItemId>& ids) {
  if (d.ids == ids) return d;
  const auto index = build_id_index(d.ids);
  if (index.size() != ids.size()) throw DataError("fusion inputs cover different items");
  std::vector<Eigen::Index> map(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = index.find(ids[i]);
    if (it == index.end()) throw DataError("item '" + ids[i] + "' missing from one modality");
    map[i] = static_cast<Eigen::Index>(it->second);
  }
  DistanceMatrix out;
  out.ids = ids;
  const auto n = static_cast<Eigen::Index>(ids.size());
  out.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out.values(i, j) = d.values(map[i], map[j]);
  }
  return out;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(parse_double(item));
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad number '") + item + "' in " + flag);
    }
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " needs at least one value");
  return out;
}

std::atomic<bool> g_stop{false};

void wait_for_signal() {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void add_soe_options(CLI::App* app, SoeConfig& soe) {
  app->add_option("--dim", soe.dim, "Embedding dimension");
  app->add_option("--margin", soe.margin, "Hinge margin delta");
  app->add_option("--lr", soe.learning_rate, "Learning rate");
  app->add_option("--batch-size", soe.batch_size, "Triplets per optimizer step");
  app->add_option("--epochs", soe.epochs, "Training epochs");
  app->add_option("--amsgrad", soe.amsgrad, "Use the AMSGrad variant of Adam (true/false)")
      ->default_str(soe.amsgrad ? "true" : "false");
  app->add_option("--anchor-balanced", soe.anchor_balanced,
                  "Resample triplets each epoch to weight anchors equally (true/false)")
      ->default_str(soe.anchor_balanced ? "true" : "false");
  app->add_option("--init-sd", soe.init_sd, "Std of the Gaussian initialization");
  app->add_option("--seed", soe.seed, "Random seed");
}

void add_synth(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "synth", "Generate a planted-structure corpus");
  auto cfg = std::make_shared<SynthConfig>();
  auto out = std::make_shared<std::string>();
  auto* a = cmd.app;
  a->add_option("--out-dir", *out, "Output directory (required)");
  a->add_option("--n-items", cfg->n_items, "Number of items");
  a->add_option("--latent-dim", cfg->latent_dim, "Planted latent dimension");
  a->add_option("--noise-sd", cfg->noise_sd, "Per-view feature noise std");
  a->add_option("--label-noise-sd", cfg->label_noise_sd,
                "Noise added to the latent distance gap before labeling");
  a->add_option("--latent-scale", cfg->latent_scale, "Latent std");
  a->add_option("--channels", cfg->channels, "Feature channels");
  a->add_option("--height", cfg->height, "Feature map height");
  a->add_option("--width", cfg->width, "Feature map width");
  a->add_option("--wounds-per-item", cfg->wounds_per_item, "Masked regions per item");
  a->add_option("--triplet-fraction", cfg->triplet_fraction,
                "Fraction of the triplet universe to label");
  a->add_option("--seed", cfg->seed, "Random seed");
  cmd.run = [cfg, out] {
    require(*out, "--out-dir");
    const auto data = synth_dataset(*cfg);
    const fs::path dir(*out);
    fs::create_directories(dir);
    save_item_ids(dir / "ids.txt", data.latents.ids);
    save_embeddings(dir / "latents.csv", data.latents);
    save_view_pairs(dir / "views.bin", data.pairs);
    std::vector<FeatureContainer> single;
    for (const auto& p : data.pairs) single.push_back(p.view_a);
    save_feature_containers(dir / "features.bin", single);
    save_judgments(dir / "triplets.jsonl", data.triplets);
    save_descriptions(dir / "descriptions.jsonl", synthetic_descriptions(data.latents.ids));
    std::cout << "wrote " << data.latents.size() << " items and " << data.triplets.size()
              << " triplets to " << dir.string() << '\n';
    return 0;
  };
}

void add_oracle(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "oracle", "Collect triplet judgments from a language model");
  struct Opts {
    OracleConfig cfg;
    std::string descriptions, triplets, persona_file, out, cache;
    long timeout_s = 120;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--descriptions", o->descriptions, "Case descriptions JSONL {id, text} (required)");
  a->add_option("--triplets", o->triplets,
                "Triplet JSONL (anchor, left, right) to query; default samples the universe");
  a->add_option("--endpoint", o->cfg.endpoint, "Chat-completion URL (required)");
  a->add_option("--model", o->cfg.model, "Model name sent to the endpoint");
  a->add_option("--persona-file", o->persona_file, "Text file with the system persona");
  a->add_option("--max-parallel", o->cfg.max_parallel, "Concurrent requests");
  a->add_option("--retry-limit", o->cfg.retry_limit, "Transport retries per request");
  a->add_option("--unparseable-retries", o->cfg.unparseable_retries,
                "Re-asks after an unparseable reply before recording a skip");
  a->add_option("--temperature", o->cfg.temperature, "Sampling temperature");
  a->add_option("--budget", o->cfg.budget_fraction,
                "Fraction of the triplet universe to sample, in (0, 1]");
  a->add_option("--seed", o->cfg.seed, "Sampling seed");
  a->add_option("--cache", o->cache, "Response cache directory");
  a->add_option("--api-key-env", o->cfg.api_key_env,
                "Environment variable holding the API key (sent as a bearer token)");
  a->add_option("--timeout", o->timeout_s, "Per-request timeout in seconds");
  a->add_option("--out", o->out, "Output judgment JSONL (required)");
  cmd.run = [o] {
    require(o->descriptions, "--descriptions");
    require(o->out, "--out");
    auto cfg = o->cfg;
    cfg.cache_dir = o->cache;
    cfg.timeout = std::chrono::seconds(o->timeout_s);
    if (!o->persona_file.empty()) {
      std::ifstream in(o->persona_file);
      if (!in) throw DataError("cannot open persona file " + o->persona_file);
      std::stringstream buf;
      buf << in.rdbuf();
      cfg.persona = trim(buf.str());
    }
    cfg.validate();
    const auto descriptions = load_descriptions(o->descriptions);
    std::vector<TripletQuery> queries;
    if (!o->triplets.empty()) {
      for (const auto& q : load_queue(o->triplets)) queries.push_back({q.anchor, q.left, q.right});
    } else {
      for (const auto& t : sample_triplet_space(descriptions.size(), cfg.budget_fraction,
                                                cfg.seed)) {
        queries.push_back({descriptions[t.anchor].item, descriptions[t.j].item,
                           descriptions[t.k].item});
      }
    }
    const auto run = run_oracle(descriptions, queries, cfg);
    save_judgments(o->out, run.judgments);
    std::cerr << run.judgments.size() << " judgments, " << run.n_skipped << " skipped, "
              << run.n_requests << " requests, " << run.n_cache_hits << " cache hits\n";
    if (run.n_skipped > 0) {
      std::cerr << "error: " << run.n_skipped
                << " triplet(s) got no parseable answer and were recorded as skipped\n";
      return 3;
    }
    return 0;
  };
}

void add_mock_oracle(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "mock-oracle",
                          "Serve a local chat-completion endpoint answering from latents");
  struct Opts {
    std::string latents, descriptions, reply;
    int port = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--latents", o->latents, "Latent embedding CSV");
  a->add_option("--descriptions", o->descriptions, "Descriptions JSONL matching the latents");
  a->add_option("--reply", o->reply, "Fixed reply text instead of latent-based answers");
  a->add_option("--port", o->port, "Port on 127.0.0.1 (0 picks a free port)");
  cmd.run = [o] {
    MockOracleServer::Answerer answer;
    if (!o->reply.empty()) {
      answer = [reply = o->reply](const PromptMessages&) { return reply; };
    } else {
      require(o->latents, "--latents");
      require(o->descriptions, "--descriptions");
      answer = latent_distance_answerer(load_descriptions(o->descriptions),
                                        load_embeddings(o->latents));
    }
    MockOracleServer server(answer, o->port);
    std::cout << server.endpoint() << std::endl;
    wait_for_signal();
    server.stop();
    return 0;
  };
}

void add_soe_fit(Commands& cmds, CLI::App& soe_app) {
  auto& cmd = add_command(cmds, soe_app, "fit", "Fit a soft ordinal embedding to triplets");
  struct Opts {
    SoeConfig soe;
    std::string triplets, items, out;
    double held_out = 0.0;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--triplets", o->triplets, "Judgment JSONL (required)");
  a->add_option("--items", o->items, "Item id list, one per line (required)");
  a->add_option("--out", o->out, "Output embedding CSV (required)");
  add_soe_options(a, o->soe);
  a->add_option("--held-out", o->held_out,
                "Per-anchor fraction held out and scored (0 fits on everything)");
  cmd.run = [o] {
    require(o->triplets, "--triplets");
    require(o->items, "--items");
    require(o->out, "--out");
    o->soe.validate();
    const auto ids = load_item_ids(o->items);
    const auto index = build_id_index(ids);
    const auto judgments = load_judgments(o->triplets);
    const auto all = constraints_from_judgments(judgments, index);
    auto split = split_by_anchor(all, o->held_out, o->soe.seed);
    const auto fit = fit_soe(split.train, ids.size(), o->soe, split.held_out);
    save_embeddings(o->out, EmbeddingSet{ids, fit.coords});
    std::cout << "fitted " << ids.size() << " items in " << o->soe.dim << " dimensions on "
              << split.train.size() << " triplets; final loss "
              << format_double(fit.loss_history.back()) << '\n';
    if (fit.held_out_agreement) {
      std::cout << "held-out agreement " << format_double(*fit.held_out_agreement) << " ("
                << split.held_out.size() << " triplets)\n";
    }
    return 0;
  };
}

void add_pool_train(Commands& cmds, CLI::App& pool_app) {
  auto& cmd = add_command(cmds, pool_app, "train",
                          "Train the attention-pooling head on view pairs");
  struct Opts {
    SslConfig ssl;
    std::string views, out, loss = "vicreg", schedule = "cosine", pooling = "attention";
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--views", o->views, "Paired feature file (required)");
  a->add_option("--out", o->out, "Output head parameter file (required)");
  a->add_option("--loss", o->loss, "vicreg, triplet or contrastive");
  a->add_option("--lambda", o->ssl.lambda, "VICReg invariance weight");
  a->add_option("--mu", o->ssl.mu, "VICReg variance weight");
  a->add_option("--nu", o->ssl.nu, "VICReg covariance weight");
  a->add_option("--gamma", o->ssl.gamma, "VICReg target std");
  a->add_option("--eps-var", o->ssl.eps_var, "VICReg variance epsilon");
  a->add_option("--eps-ln", o->ssl.eps_ln, "Layer-norm epsilon");
  a->add_option("--margin", o->ssl.margin, "Triplet-loss margin");
  a->add_option("--temperature", o->ssl.temperature, "Contrastive temperature");
  a->add_option("--epochs", o->ssl.epochs, "Training epochs");
  a->add_option("--batch-size", o->ssl.batch_size,
                "Batch size (when not given: 8 for triplet, 128 for contrastive)");
  a->add_option("--lr", o->ssl.learning_rate, "Peak learning rate");
  a->add_option("--weight-decay", o->ssl.weight_decay, "Decoupled weight decay");
  a->add_option("--schedule", o->schedule, "cosine or constant");
  a->add_option("--hidden", o->ssl.hidden, "Attention MLP hidden width");
  a->add_option("--dim", o->ssl.dim, "Embedding dimension");
  a->add_option("--pooling", o->pooling, "attention or mean");
  a->add_option("--token-cap", o->ssl.token_cap, "Max tokens sampled per wound");
  a->add_option("--seed", o->ssl.seed, "Random seed");
  cmd.run = [o, a] {
    require(o->views, "--views");
    require(o->out, "--out");
    auto cfg = o->ssl;
    cfg.loss = parse_loss_kind(o->loss);
    if (a->get_option("--batch-size")->count() == 0) {
      cfg.batch_size = SslConfig::defaults_for(cfg.loss).batch_size;
    }
    if (o->schedule == "cosine") {
      cfg.lr_schedule = LrSchedule::Cosine;
    } else if (o->schedule == "constant") {
      cfg.lr_schedule = LrSchedule::Constant;
    } else {
      throw ConfigError("unknown schedule '" + o->schedule + "' (expected cosine or constant)");
    }
    cfg.pooling = parse_pooling(o->pooling);
    cfg.validate();
    const auto file = load_feature_file(o->views);
    if (!file.paired) throw DataError(o->views + " holds unpaired containers; need view pairs");
    const auto result = train_head(file.pairs, cfg);
    save_head_params(o->out, result.params);
    std::cout << "trained " << to_string(cfg.loss) << " head on " << file.pairs.size()
              << " pairs; final loss " << format_double(result.loss_history.back()) << '\n';
    return 0;
  };
}

void add_embed(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "embed", "Embed images with a trained head");
  struct Opts {
    std::string features, head, out;
    std::size_t token_cap = kDefaultTokenCap;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--features", o->features,
                "Feature file (required; paired files use the first view)");
  a->add_option("--head", o->head, "Head parameter file (required)");
  a->add_option("--out", o->out, "Output embedding CSV (required)");
  a->add_option("--token-cap", o->token_cap, "Max tokens sampled per wound");
  a->add_option("--seed", o->seed, "Token sampling seed");
  cmd.run = [o] {
    require(o->features, "--features");
    require(o->head, "--head");
    require(o->out, "--out");
    const auto head = load_head_params(o->head);
    const auto file = load_feature_file(o->features);
    std::vector<const FeatureContainer*> images;
    if (file.paired) {
      for (const auto& p : file.pairs) images.push_back(&p.view_a);
    } else {
      for (const auto& c : file.containers) images.push_back(&c);
    }
    EmbeddingSet out;
    out.coords.resize(static_cast<Eigen::Index>(images.size()), head.dim());
    for (std::size_t i = 0; i < images.size(); ++i) {
      out.ids.push_back(images[i]->item);
      out.coords.row(static_cast<Eigen::Index>(i)) =
          embed_image(*images[i], head, o->token_cap, o->seed).transpose();
    }
    save_embeddings(o->out, out);
    std::cout << "embedded " << images.size() << " images\n";
    return 0;
  };
}

void add_distances(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "distances", "Pairwise distances of an embedding");
  struct Opts {
    std::string embeddings, out, metric = "euclidean";
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--embeddings", o->embeddings, "Embedding CSV (required)");
  a->add_option("--metric", o->metric, "euclidean or cosine");
  a->add_option("--out", o->out, "Output distance CSV (required)");
  cmd.run = [o] {
    require(o->embeddings, "--embeddings");
    require(o->out, "--out");
    save_distances(o->out, pairwise_distances(load_embeddings(o->embeddings),
                                              parse_metric(o->metric)));
    return 0;
  };
}

void add_fuse(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "fuse", "Fuse vision and text distances");
  struct Opts {
    std::string vision_distances, text_distances, vision_embeddings, text_embeddings, out;
    std::string vision_metric = "euclidean", text_metric = "euclidean", mode = "uncertainty";
    double alpha = 0.7;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--vision-distances", o->vision_distances, "Vision distance CSV");
  a->add_option("--text-distances", o->text_distances, "Text distance CSV");
  a->add_option("--vision-embeddings", o->vision_embeddings, "Vision embedding CSV");
  a->add_option("--text-embeddings", o->text_embeddings, "Text embedding CSV");
  a->add_option("--vision-metric", o->vision_metric, "Metric for vision embeddings");
  a->add_option("--text-metric", o->text_metric, "Metric for text embeddings");
  a->add_option("--alpha", o->alpha, "Vision weight prior in [0, 1]");
  a->add_option("--mode", o->mode, "uncertainty or similarity");
  a->add_option("--out", o->out, "Output fused distance CSV (required)");
  cmd.run = [o] {
    require(o->out, "--out");
    FusionConfig cfg{o->alpha, parse_fusion_mode(o->mode)};
    cfg.validate();
    const auto vision = distances_from(o->vision_distances, o->vision_embeddings,
                                       o->vision_metric, "the vision modality");
    const auto text = align_to(distances_from(o->text_distances, o->text_embeddings,
                                              o->text_metric, "the text modality"),
                               vision.ids);
    save_distances(o->out, fuse(vision, text, cfg));
    return 0;
  };
}

void add_metrics(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "metrics", "Score distances against triplet judgments");
  struct Opts {
    std::string distances, embeddings, judgments, json_out, metric = "euclidean",
                                                         format = "json";
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--distances", o->distances, "Distance CSV");
  a->add_option("--embeddings", o->embeddings, "Embedding CSV (instead of --distances)");
  a->add_option("--metric", o->metric, "Metric for --embeddings");
  a->add_option("--judgments", o->judgments, "Judgment JSONL (required)");
  a->add_option("--format", o->format, "Stdout format: json, table or both");
  a->add_option("--json-out", o->json_out, "Also write the JSON report to this file");
  cmd.run = [o] {
    require(o->judgments, "--judgments");
    if (o->format != "json" && o->format != "table" && o->format != "both") {
      throw ConfigError("unknown format '" + o->format + "' (expected json, table or both)");
    }
    const auto d = distances_from(o->distances, o->embeddings, o->metric, "metrics");
    const auto report = evaluate_report(d, load_judgments(o->judgments));
    const auto json = report_to_json(report);
    if (o->format != "table") std::cout << json << '\n';
    if (o->format != "json") std::cout << report_to_table(report);
    if (!o->json_out.empty()) {
      std::ofstream out(o->json_out);
      out << json << '\n';
      if (!out) throw DataError("cannot write " + o->json_out);
    }
    return 0;
  };
}

void add_neighbors(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "neighbors", "Nearest neighbors of an item");
  struct Opts {
    std::string distances, embeddings, id, metric = "euclidean";
    std::size_t k = 5;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--distances", o->distances, "Distance CSV");
  a->add_option("--embeddings", o->embeddings, "Embedding CSV (instead of --distances)");
  a->add_option("--metric", o->metric, "Metric for --embeddings");
  a->add_option("--id", o->id, "Query item id (required)");
  a->add_option("-k,--k", o->k, "Number of neighbors");
  cmd.run = [o] {
    require(o->id, "--id");
    const auto d = distances_from(o->distances, o->embeddings, o->metric, "neighbors");
    std::cout << "rank,id,distance\n";
    std::size_t rank = 1;
    for (const auto& n : nearest_neighbors(d, o->id, o->k)) {
      std::cout << rank++ << ',' << n.id << ',' << format_double(n.distance) << '\n';
    }
    return 0;
  };
}

void add_serve(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "serve", "Run the triplet annotation service");
  struct Opts {
    std::string queue, assets, log, static_dir, host = "127.0.0.1";
    int port = 8080;
    double lease_timeout = 600.0;
  };
  auto o = std::make_shared<Opts>();
  auto* a = cmd.app;
  a->add_option("--queue", o->queue, "Triplet JSONL to serve, in order (required)");
  a->add_option("--assets", o->assets, "Directory of item images named <id>.<ext> (required)");
  a->add_option("--log", o->log, "Append-only judgment log (required)");
  a->add_option("--static", o->static_dir, "Directory of static UI files mounted at /");
  a->add_option("--host", o->host, "Bind address");
  a->add_option("--port", o->port, "Bind port (0 picks a free port)");
  a->add_option("--lease-timeout", o->lease_timeout, "Task lease duration in seconds");
  cmd.run = [o] {
    require(o->queue, "--queue");
    require(o->assets, "--assets");
    require(o->log, "--log");
    if (!(o->lease_timeout > 0.0)) throw ConfigError("--lease-timeout must be positive");
    ServiceConfig cfg;
    cfg.lease_timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(o->lease_timeout * 1000.0));
    AssetStore assets(o->assets);
    auto queue = load_queue(o->queue);
    std::size_t missing = 0;
    for (const auto& t : queue) {
      for (const auto* id : {&t.anchor, &t.left, &t.right}) {
        if (!assets.find(*id) && missing++ < 5) {
          std::cerr << "warning: no asset for item '" << *id << "'\n";
        }
      }
    }
    TripletService service(std::move(queue), o->log, cfg);
    std::optional<fs::path> static_dir;
    if (!o->static_dir.empty()) static_dir = o->static_dir;
    ServiceHttp http(service, std::move(assets), static_dir);
    const int port = http.bind(o->host, o->port);
    std::cout << "serving " << service.queue().size() << " triplets on http://" << o->host
              << ':' << port << std::endl;
    http.start();
    wait_for_signal();
    http.stop();
    return 0;
  };
}

void add_ablate(Commands& cmds, CLI::App& app) {
  auto& cmd = add_command(cmds, app, "ablate",
                          "Sweep SOE embedding dimension and triplet budget on planted data");
  struct Opts {
    AblationConfig cfg;
    bool synthetic = false;
    std::string dims = "2,3,4,5,6", budgets = "0.1,1,10,100", json_out;
  };
  auto o = std::make_shared<Opts>();
  o->cfg.n_seeds = 3;
  auto* a = cmd.app;
  a->add_flag("--synthetic", o->synthetic, "Use a planted corpus (the only supported source)");
  a->add_option("--n-items", o->cfg.synth.n_items, "Planted corpus size");
  a->add_option("--latent-dim", o->cfg.synth.latent_dim, "Planted latent dimension");
  a->add_option("--label-noise-sd", o->cfg.synth.label_noise_sd,
                "Noise added to the latent distance gap before labeling");
  a->add_option("--seeds", o->cfg.n_seeds, "Repetitions with consecutive seeds");
  a->add_option("--held-out", o->cfg.held_out_fraction, "Per-anchor held-out fraction");
  a->add_option("--dims", o->dims, "Comma-separated embedding dimensions");
  a->add_option("--budgets", o->budgets, "Comma-separated budgets in percent");
  a->add_option("--json-out", o->json_out, "Also write the results as JSON");
  add_soe_options(a, o->cfg.soe);
  cmd.run = [o] {
    if (!o->synthetic) throw ConfigError("ablate currently needs --synthetic");
    auto cfg = o->cfg;
    cfg.seed = cfg.soe.seed;
    cfg.synth.seed = cfg.soe.seed;
    cfg.dims.clear();
    for (const double d : parse_list(o->dims, "--dims")) {
      if (d < 1 || d != static_cast<double>(static_cast<std::size_t>(d))) {
        throw ConfigError("--dims entries must be positive integers");
      }
      cfg.dims.push_back(static_cast<std::size_t>(d));
    }
    cfg.budgets.clear();
    for (const double b : parse_list(o->budgets, "--budgets")) {
      if (!(b > 0.0 && b <= 100.0)) throw ConfigError("--budgets entries must lie in (0, 100]");
      cfg.budgets.push_back(b / 100.0);
    }
    const auto table = run_ablation(cfg);
    std::cout << ablation_to_table(table);
    if (!o->json_out.empty()) {
      nlohmann::json j;
      auto cells = [](const std::vector<AblationCell>& cs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& c : cs) {
          arr.push_back({{"dim", c.dim}, {"budget", c.budget}, {"per_seed", c.per_seed},
                         {"mean", c.mean}, {"sd", c.sd}});
        }
        return arr;
      };
      j["by_dim"] = cells(table.by_dim);
      j["by_budget"] = cells(table.by_budget);
      std::ofstream out(o->json_out);
      out << j.dump(2) << '\n';
      if (!out) throw DataError("cannot write " + o->json_out);
    }
    return 0;
  };
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Triplet-supervised similarity learning toolkit", "trisim"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough(false);

  Commands cmds;
  add_synth(cmds, app);
  add_oracle(cmds, app);
  add_mock_oracle(cmds, app);
  auto* soe = app.add_subcommand("soe", "Soft ordinal embedding");
  soe->require_subcommand(1);
  add_soe_fit(cmds, *soe);
  auto* pool = app.add_subcommand("pool", "Vision pooling head");
  pool->require_subcommand(1);
  add_pool_train(cmds, *pool);
  add_embed(cmds, app);
  add_distances(cmds, app);
  add_fuse(cmds, app);
  add_metrics(cmds, app);
  add_neighbors(cmds, app);
  add_serve(cmds, app);
  add_ablate(cmds, app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (auto& cmd : cmds) {
      if (!cmd->app->parsed()) continue;
      if (!cmd->config.empty()) apply_config(*cmd->app, cmd->config);
      return cmd->run();
    }
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const RemoteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
