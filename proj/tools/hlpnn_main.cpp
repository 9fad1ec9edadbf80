// hlpnn: end-to-end pipeline driver.
//
// Subcommands: synth, build-vocab, build-graph, embed-graph, train, eval,
// sweep-alpha, ablate. Every subcommand accepts --config, --seed, --threads.
// Exit 0 on success, 1 on runtime error (JSON error object on stdout),
// 2 on usage error. Logs go to stderr; results go to --out or stdout.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hlpnn/checkpoint.hpp"
#include "hlpnn/geo.hpp"
#include "hlpnn/graph.hpp"
#include "hlpnn/model.hpp"
#include "hlpnn/synth.hpp"
#include "hlpnn/text.hpp"
#include "hlpnn/train.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text << std::endl;
  else
    write_file(out_path, text);
}

// Full run manifest: model + train sections plus data paths. Unknown keys
// anywhere are rejected.
struct Manifest {
  hlpnn::ModelConfig model;
  hlpnn::TrainConfig train;
  hlpnn::WorldSpec world;
  std::string train_path, dev_path, test_path, registry_path, edges_path, embeddings_path;
};

Manifest load_manifest(const std::string& path) {
  Manifest m;
  if (path.empty()) return m;
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  for (auto& [key, val] : j.items())
    if (key != "model" && key != "train" && key != "world" && key != "paths")
      throw std::invalid_argument("config: unknown key '" + key + "'");
  if (j.contains("model")) m.model = hlpnn::ModelConfig::from_json(j["model"].dump());
  if (j.contains("train")) m.train = hlpnn::TrainConfig::from_json(j["train"].dump());
  if (j.contains("world")) m.world = hlpnn::WorldSpec::from_json(j["world"].dump());
  if (j.contains("paths")) {
    for (auto& [key, val] : j["paths"].items()) {
      if (key == "train") m.train_path = val.get<std::string>();
      else if (key == "dev") m.dev_path = val.get<std::string>();
      else if (key == "test") m.test_path = val.get<std::string>();
      else if (key == "registry") m.registry_path = val.get<std::string>();
      else if (key == "edges") m.edges_path = val.get<std::string>();
      else if (key == "embeddings") m.embeddings_path = val.get<std::string>();
      else throw std::invalid_argument("config: unknown path key '" + key + "'");
    }
  }
  return m;
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_path;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--seed", c.seed, "Seed override");
  cmd->add_option("--threads", c.threads, "Worker cap (training itself is single-threaded)");
  cmd->add_option("--out", c.out_path, "Output path");
}

std::optional<hlpnn::NetworkEmbeddings> maybe_load_net(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return hlpnn::NetworkEmbeddings::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical location prediction for social media users"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common c_synth, c_vocab, c_graph, c_embed, c_train, c_eval, c_sweep, c_ablate;

  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic world");
  add_common(cmd_synth, c_synth);

  auto* cmd_vocab = app.add_subcommand("build-vocab", "Build word/char vocabulary from JSONL");
  add_common(cmd_vocab, c_vocab);
  std::string vocab_data;
  int word_min = 10, char_min = 5;
  cmd_vocab->add_option("--data", vocab_data, "Training JSONL")->required();
  cmd_vocab->add_option("--word-min", word_min, "Strict word count threshold");
  cmd_vocab->add_option("--char-min", char_min, "Strict char count threshold");

  auto* cmd_graph = app.add_subcommand("build-graph", "Build the mention graph from JSONL");
  add_common(cmd_graph, c_graph);
  std::vector<std::string> graph_data;
  std::string graph_mode = "wnut";
  int celeb_threshold = 10;
  cmd_graph->add_option("--data", graph_data, "JSONL splits (repeatable)")->required();
  cmd_graph->add_option("--mode", graph_mode, "wnut | comention")
      ->check(CLI::IsMember({"wnut", "comention"}));
  cmd_graph->add_option("--celebrity-threshold", celeb_threshold,
                        "Remove nodes mentioned by more than this many distinct users");

  auto* cmd_embed = app.add_subcommand("embed-graph", "Train network embeddings on an edge list");
  add_common(cmd_embed, c_embed);
  std::string embed_edges;
  hlpnn::LineConfig line_cfg;
  cmd_embed->add_option("--edges", embed_edges, "Edge list TSV")->required();
  cmd_embed->add_option("--dim", line_cfg.dim, "Embedding dimension");
  cmd_embed->add_option("--samples", line_cfg.samples, "Edge samples");
  cmd_embed->add_option("--negatives", line_cfg.negatives, "Negative samples per edge");
  cmd_embed->add_option("--lr0", line_cfg.lr0, "Initial learning rate");

  auto* cmd_train = app.add_subcommand("train", "Train the model");
  add_common(cmd_train, c_train);
  std::string t_train, t_dev, t_registry, t_net, t_log;
  cmd_train->add_option("--train", t_train, "Training JSONL (overrides config paths)");
  cmd_train->add_option("--dev", t_dev, "Dev JSONL");
  cmd_train->add_option("--registry", t_registry, "City registry TSV");
  cmd_train->add_option("--net", t_net, "Network embeddings file");
  cmd_train->add_option("--log", t_log, "Per-epoch JSONL log path");

  auto* cmd_eval = app.add_subcommand("eval", "Score a dataset with a checkpoint");
  add_common(cmd_eval, c_eval);
  std::string e_ckpt, e_data, e_registry, e_net;
  cmd_eval->add_option("--checkpoint", e_ckpt, "Checkpoint file")->required();
  cmd_eval->add_option("--data", e_data, "JSONL to score")->required();
  cmd_eval->add_option("--registry", e_registry, "City registry TSV")->required();
  cmd_eval->add_option("--net", e_net, "Network embeddings file");

  auto* cmd_sweep = app.add_subcommand("sweep-alpha", "Country-loss weight sweep");
  add_common(cmd_sweep, c_sweep);
  std::string s_train, s_dev, s_registry, s_net;
  std::vector<double> s_alphas{0.0, 1.0};
  std::vector<std::uint64_t> s_seeds{1, 2, 3, 4, 5};
  cmd_sweep->add_option("--train", s_train, "Training JSONL");
  cmd_sweep->add_option("--dev", s_dev, "Dev JSONL");
  cmd_sweep->add_option("--registry", s_registry, "City registry TSV");
  cmd_sweep->add_option("--net", s_net, "Network embeddings file");
  cmd_sweep->add_option("--alphas", s_alphas, "Alpha values");
  cmd_sweep->add_option("--seeds", s_seeds, "Seeds per alpha");

  auto* cmd_ablate = app.add_subcommand("ablate", "Single-component ablation runs");
  add_common(cmd_ablate, c_ablate);
  std::string a_train, a_dev, a_registry, a_net;
  cmd_ablate->add_option("--train", a_train, "Training JSONL");
  cmd_ablate->add_option("--dev", a_dev, "Dev JSONL");
  cmd_ablate->add_option("--registry", a_registry, "City registry TSV");
  cmd_ablate->add_option("--net", a_net, "Network embeddings file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  try {
    if (*cmd_synth) {
      Manifest m = load_manifest(c_synth.config_path);
      if (c_synth.seed) m.world.seed = *c_synth.seed;
      const std::string out_dir = c_synth.out_path.empty() ? "." : c_synth.out_path;
      hlpnn::SynthWorld world = hlpnn::generate(m.world);
      hlpnn::write_world(world, out_dir);
      std::cerr << "synth: " << world.registry.n_cities() << " cities, "
                << (world.train.size() + world.dev.size() + world.test.size()) << " users -> "
                << out_dir << "\n";
    } else if (*cmd_vocab) {
      Manifest m = load_manifest(c_vocab.config_path);
      (void)m;
      const auto users = hlpnn::load_dataset(vocab_data);
      hlpnn::Vocabulary vocab = hlpnn::build_vocab(users, word_min, char_min);
      if (c_vocab.out_path.empty()) throw std::runtime_error("build-vocab requires --out");
      vocab.save_tsv(c_vocab.out_path);
      std::cerr << "build-vocab: " << vocab.n_words() << " words, " << vocab.n_chars()
                << " chars\n";
    } else if (*cmd_graph) {
      std::vector<hlpnn::UserRecord> users;
      for (const std::string& path : graph_data) {
        auto part = hlpnn::load_dataset(path);
        users.insert(users.end(), part.begin(), part.end());
      }
      const auto mode =
          graph_mode == "wnut" ? hlpnn::GraphMode::kWnut : hlpnn::GraphMode::kComention;
      hlpnn::MentionGraph graph = hlpnn::build_graph(users, mode);
      graph = hlpnn::remove_celebrities(graph, celeb_threshold);
      if (c_graph.out_path.empty()) throw std::runtime_error("build-graph requires --out");
      graph.save_tsv(c_graph.out_path);
      std::cerr << "build-graph: " << graph.n_nodes() << " nodes, " << graph.edges().size()
                << " edges\n";
    } else if (*cmd_embed) {
      if (c_embed.seed) line_cfg.seed = *c_embed.seed;
      hlpnn::MentionGraph graph = hlpnn::MentionGraph::load_tsv(embed_edges);
      hlpnn::NetworkEmbeddings emb = hlpnn::train_line(graph, line_cfg);
      if (c_embed.out_path.empty()) throw std::runtime_error("embed-graph requires --out");
      emb.save(c_embed.out_path);
      std::cerr << "embed-graph: " << graph.n_nodes() << " nodes, dim " << line_cfg.dim << "\n";
    } else if (*cmd_train) {
      Manifest m = load_manifest(c_train.config_path);
      if (!t_train.empty()) m.train_path = t_train;
      if (!t_dev.empty()) m.dev_path = t_dev;
      if (!t_registry.empty()) m.registry_path = t_registry;
      if (!t_net.empty()) m.embeddings_path = t_net;
      if (c_train.seed) m.train.seed = *c_train.seed;
      if (m.train_path.empty() || m.dev_path.empty() || m.registry_path.empty()) {
        std::cerr << "train: --train, --dev, and --registry are required (flags or config paths)\n";
        return 2;
      }
      const auto train_users = hlpnn::load_dataset(m.train_path);
      const auto dev_users = hlpnn::load_dataset(m.dev_path);
      const auto registry = hlpnn::CityRegistry::load_tsv(m.registry_path);
      const auto net = maybe_load_net(m.embeddings_path);
      hlpnn::TrainResult r = hlpnn::train(m.model, m.train, train_users, dev_users, registry,
                                          net ? &*net : nullptr);
      if (!t_log.empty()) r.record.save_jsonl(t_log);
      if (!c_train.out_path.empty()) {
        hlpnn::ParameterMap params;
        for (const auto& [name, p] : r.best_checkpoint.params)
          params.emplace(name, hlpnn::Tensor::from_data(p.rows, p.cols, p.values));
        hlpnn::save_checkpoint(c_train.out_path, r.best_checkpoint.config_json,
                               r.best_checkpoint.seed, params, r.best_checkpoint.aux);
      }
      std::cerr << "train: " << r.record.epochs.size() << " epochs, best dev accuracy "
                << r.best_dev.accuracy << "\n";
      std::cout << r.best_dev.to_json() << std::endl;
    } else if (*cmd_eval) {
      const hlpnn::Checkpoint ckpt = hlpnn::load_checkpoint(e_ckpt);
      const auto users = hlpnn::load_dataset(e_data);
      const auto registry = hlpnn::CityRegistry::load_tsv(e_registry);
      const auto net = maybe_load_net(e_net);
      const hlpnn::MetricsReport report =
          hlpnn::evaluate_checkpoint(ckpt, users, registry, net ? &*net : nullptr);
      emit(c_eval.out_path, report.to_json());
      if (!c_eval.out_path.empty()) std::cerr << "eval: " << report.to_json() << "\n";
    } else if (*cmd_sweep) {
      Manifest m = load_manifest(c_sweep.config_path);
      if (!s_train.empty()) m.train_path = s_train;
      if (!s_dev.empty()) m.dev_path = s_dev;
      if (!s_registry.empty()) m.registry_path = s_registry;
      if (!s_net.empty()) m.embeddings_path = s_net;
      if (m.train_path.empty() || m.dev_path.empty() || m.registry_path.empty()) {
        std::cerr << "sweep-alpha: --train, --dev, and --registry are required\n";
        return 2;
      }
      const auto train_users = hlpnn::load_dataset(m.train_path);
      const auto dev_users = hlpnn::load_dataset(m.dev_path);
      const auto registry = hlpnn::CityRegistry::load_tsv(m.registry_path);
      const auto net = maybe_load_net(m.embeddings_path);
      const auto rows = hlpnn::run_alpha_sweep(m.model, m.train, s_alphas, s_seeds, train_users,
                                               dev_users, registry, net ? &*net : nullptr);
      emit(c_sweep.out_path, hlpnn::sweep_to_csv(rows));
    } else if (*cmd_ablate) {
      Manifest m = load_manifest(c_ablate.config_path);
      if (!a_train.empty()) m.train_path = a_train;
      if (!a_dev.empty()) m.dev_path = a_dev;
      if (!a_registry.empty()) m.registry_path = a_registry;
      if (!a_net.empty()) m.embeddings_path = a_net;
      if (c_ablate.seed) m.train.seed = *c_ablate.seed;
      if (m.train_path.empty() || m.dev_path.empty() || m.registry_path.empty()) {
        std::cerr << "ablate: --train, --dev, and --registry are required\n";
        return 2;
      }
      const auto train_users = hlpnn::load_dataset(m.train_path);
      const auto dev_users = hlpnn::load_dataset(m.dev_path);
      const auto registry = hlpnn::CityRegistry::load_tsv(m.registry_path);
      const auto net = maybe_load_net(m.embeddings_path);
      const auto results = hlpnn::run_ablation(m.model, m.train, train_users, dev_users, registry,
                                               net ? &*net : nullptr);
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : results)
        j.push_back({{"variant", r.variant}, {"dev", nlohmann::json::parse(r.dev.to_json())}});
      emit(c_ablate.out_path, j.dump(2));
    }
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cout << err.dump() << std::endl;
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
