#include "hlpnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hlpnn {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (lr_reduced >= lr_initial)
    throw std::invalid_argument("train config: lr_reduced must be < lr_initial");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (extra_epochs_after_reduction < 0)
    throw std::invalid_argument("train config: extra epochs must be >= 0");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j{{"batch_size", batch_size},
                   {"lr_initial", lr_initial},
                   {"lr_reduced", lr_reduced},
                   {"extra_epochs_after_reduction", extra_epochs_after_reduction},
                   {"max_epochs", max_epochs},
                   {"seed", seed},
                   {"word_min_count", word_min_count},
                   {"char_min_count", char_min_count},
                   {"pretrained_embeddings", pretrained_embeddings}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig c;
  nlohmann::json defaults = nlohmann::json::parse(c.to_json());
  for (auto& [key, val] : j.items())
    if (!defaults.contains(key))
      throw std::invalid_argument("train config: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j[key].get<std::decay_t<decltype(dst)>>();
  };
  get("batch_size", c.batch_size);
  get("lr_initial", c.lr_initial);
  get("lr_reduced", c.lr_reduced);
  get("extra_epochs_after_reduction", c.extra_epochs_after_reduction);
  get("max_epochs", c.max_epochs);
  get("seed", c.seed);
  get("word_min_count", c.word_min_count);
  get("char_min_count", c.char_min_count);
  get("pretrained_embeddings", c.pretrained_embeddings);
  return c;
}

std::string RunRecord::to_jsonl() const {
  std::ostringstream out;
  for (const EpochRecord& e : epochs) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"dev", nlohmann::json::parse(e.dev.to_json())},
                     {"lr", e.lr},
                     {"lambda", e.lambda},
                     {"wall_seconds", e.wall_seconds}};
    out << j.dump() << '\n';
  }
  return out.str();
}

void RunRecord::save_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("run record: cannot write '" + path + "'");
  out << to_jsonl();
}

namespace {

std::vector<UserRecord> strip_metadata(std::vector<UserRecord> users) {
  for (UserRecord& u : users) {
    u.description.clear();
    u.profile_location.clear();
    u.name.clear();
    u.user_language.clear();
    u.time_zone.clear();
  }
  return users;
}

std::vector<EncodedUser> encode_users(const std::vector<UserRecord>& users,
                                      const Vocabulary& vocab, const CategoricalVocab& lang_vocab,
                                      const CategoricalVocab& tz_vocab,
                                      const CityRegistry& registry, const ModelConfig& cfg) {
  std::vector<EncodedUser> out;
  out.reserve(users.size());
  for (const UserRecord& u : users) {
    EncodedUser eu = assemble_user(u, vocab, lang_vocab, tz_vocab, cfg.max_tweets, cfg.max_tokens,
                                   cfg.max_chars);
    if (!u.city.empty()) {
      eu.gold_city = registry.city_index(u.city);
      if (eu.gold_city < 0)
        throw std::runtime_error("dataset: city '" + u.city + "' (user " + u.user_id +
                                 ") not in registry");
      eu.gold_country = registry.country_of(eu.gold_city);
    }
    out.push_back(std::move(eu));
  }
  return out;
}

std::vector<std::vector<double>> net_vectors(const std::vector<UserRecord>& users,
                                             const NetworkEmbeddings* net,
                                             const ModelConfig& cfg) {
  std::vector<std::vector<double>> out;
  if (net == nullptr || !cfg.use_network) return out;
  if (net->dim() != cfg.rep_dim())
    throw std::invalid_argument("network embeddings dimension " + std::to_string(net->dim()) +
                                " does not match 2D=" + std::to_string(cfg.rep_dim()));
  out.reserve(users.size());
  for (const UserRecord& u : users) out.push_back(net->lookup(u.user_id));
  return out;
}

Checkpoint snapshot_checkpoint(const HlpnnModel& model, const PreparedData& data,
                               std::uint64_t seed) {
  Checkpoint c;
  c.config_json = model.config().to_json();
  c.config_hash = fnv1a64(c.config_json);
  c.seed = seed;
  c.aux["vocab"] = data.vocab.to_tsv();
  c.aux["lang"] = nlohmann::json(data.lang_vocab.values()).dump();
  c.aux["tz"] = nlohmann::json(data.tz_vocab.values()).dump();
  for (const auto& [name, t] : model.params())
    c.params[name] = {t.rows(), t.cols(), t.data()};
  return c;
}

}  // namespace

PreparedData prepare_data(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                          const std::vector<UserRecord>& train_users,
                          const std::vector<UserRecord>& dev_users, const CityRegistry& registry,
                          const NetworkEmbeddings* net) {
  const std::vector<UserRecord> train_eff =
      model_cfg.use_metadata ? train_users : strip_metadata(train_users);
  const std::vector<UserRecord> dev_eff =
      model_cfg.use_metadata ? dev_users : strip_metadata(dev_users);
  PreparedData d;
  d.vocab = build_vocab(train_eff, train_cfg.word_min_count, train_cfg.char_min_count);
  for (const UserRecord& u : train_eff) {
    d.lang_vocab.add(u.user_language);
    d.tz_vocab.add(u.time_zone);
  }
  d.train = encode_users(train_eff, d.vocab, d.lang_vocab, d.tz_vocab, registry, model_cfg);
  d.dev = encode_users(dev_eff, d.vocab, d.lang_vocab, d.tz_vocab, registry, model_cfg);
  d.train_net = net_vectors(train_eff, net, model_cfg);
  d.dev_net = net_vectors(dev_eff, net, model_cfg);
  return d;
}

MetricsReport evaluate_model(HlpnnModel& model, const std::vector<EncodedUser>& users,
                             const std::vector<std::vector<double>>& net_vecs,
                             const CityRegistry& registry) {
  std::vector<int> preds;
  std::vector<GoldLabel> golds;
  preds.reserve(users.size());
  golds.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    const EncodedUser& u = users[i];
    if (u.gold_city < 0)
      throw std::runtime_error("evaluate: user " + u.user_id + " has no gold city");
    const auto p = model.predict(u, net_vecs.empty() ? std::vector<double>{} : net_vecs[i]);
    preds.push_back(p.city);
    golds.push_back({u.gold_city, {u.lat, u.lon}});
  }
  return evaluate(preds, golds, registry);
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const std::vector<UserRecord>& train_users,
                  const std::vector<UserRecord>& dev_users, const CityRegistry& registry,
                  const NetworkEmbeddings* net) {
  ModelConfig cfg = model_cfg;
  cfg.n_countries = registry.n_countries();
  cfg.n_cities = registry.n_cities();
  cfg.validate();
  train_cfg.validate();
  if (train_users.empty()) throw std::invalid_argument("train: empty training split");

  PreparedData data = prepare_data(cfg, train_cfg, train_users, dev_users, registry, net);

  Rng init_rng(train_cfg.seed);
  const Tensor bias = build_bias(registry);
  std::optional<HlpnnModel> model;
  if (!train_cfg.pretrained_embeddings.empty()) {
    Tensor word_table = load_pretrained_embeddings(train_cfg.pretrained_embeddings, data.vocab,
                                                   cfg.word_dim, init_rng);
    model.emplace(cfg, bias, std::move(word_table), data.vocab.n_chars(),
                  data.lang_vocab.size(), data.tz_vocab.size(), init_rng);
  } else {
    model.emplace(cfg, bias, data.vocab.n_words(), data.vocab.n_chars(),
                  data.lang_vocab.size(), data.tz_vocab.size(), init_rng);
  }

  // Batches group users of similar tweet counts to limit padding waste.
  std::vector<std::size_t> idx(data.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return data.train[a].t_used < data.train[b].t_used;
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < idx.size(); i += train_cfg.batch_size) {
    const std::size_t end = std::min(idx.size(), i + train_cfg.batch_size);
    batches.emplace_back(idx.begin() + i, idx.begin() + end);
  }

  Rng train_rng(train_cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  AdamState adam;
  LrSchedule schedule(train_cfg);
  TrainResult result;
  double best_acc = -1.0;

  for (int epoch = 1;; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Shuffle batch order per epoch.
    for (std::size_t i = batches.size(); i > 1; --i)
      std::swap(batches[i - 1],
                batches[static_cast<std::size_t>(train_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    double loss_sum = 0.0;
    for (const auto& batch_idx : batches) {
      std::vector<EncodedUser> batch;
      std::vector<std::vector<double>> batch_net;
      for (std::size_t bi : batch_idx) {
        batch.push_back(data.train[bi]);
        if (!data.train_net.empty()) batch_net.push_back(data.train_net[bi]);
      }
      zero_grad(model->params());
      const Tensor loss_t = model->loss(batch, batch_net, train_rng, true);
      backward(loss_t);
      clip_gradients(model->params());
      adam_step(model->params(), adam, schedule.lr());
      model->clamp_lambda_nonneg();
      loss_sum += loss_t.item();
      result.step_losses.push_back(loss_t.item());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.lr = schedule.lr();
    rec.lambda = model->lambda_value();
    rec.dev = evaluate_model(*model, data.dev, data.dev_net, registry);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.record.epochs.push_back(rec);

    if (rec.dev.accuracy > best_acc) {
      best_acc = rec.dev.accuracy;
      result.best_dev = rec.dev;
      result.best_checkpoint = snapshot_checkpoint(*model, data, train_cfg.seed);
    }
    if (schedule.observe(epoch, rec.dev.accuracy)) break;
  }
  result.record.reduced_at = schedule.reduced_at();
  return result;
}

MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<UserRecord>& users,
                                  const CityRegistry& registry, const NetworkEmbeddings* net) {
  const ModelConfig cfg = ModelConfig::from_json(ckpt.config_json);
  Vocabulary vocab = Vocabulary::from_tsv(ckpt.aux.at("vocab"));
  CategoricalVocab lang_vocab, tz_vocab;
  for (const auto& v : nlohmann::json::parse(ckpt.aux.at("lang")))
    lang_vocab.add(v.get<std::string>());
  for (const auto& v : nlohmann::json::parse(ckpt.aux.at("tz")))
    tz_vocab.add(v.get<std::string>());

  Rng dummy(0);
  HlpnnModel model(cfg, build_bias(registry), vocab.n_words(), vocab.n_chars(),
                   lang_vocab.size(), tz_vocab.size(), dummy);
  restore_parameters(ckpt, model.params());

  const std::vector<UserRecord> eff = cfg.use_metadata ? users : strip_metadata(users);
  const std::vector<EncodedUser> encoded =
      encode_users(eff, vocab, lang_vocab, tz_vocab, registry, cfg);
  const std::vector<std::vector<double>> nets = net_vectors(eff, net, cfg);
  return evaluate_model(model, encoded, nets, registry);
}

std::vector<AblationResult> run_ablation(const ModelConfig& base_cfg, const TrainConfig& train_cfg,
                                         const std::vector<UserRecord>& train_users,
                                         const std::vector<UserRecord>& dev_users,
                                         const CityRegistry& registry,
                                         const NetworkEmbeddings* net) {
  struct Variant {
    const char* name;
    void (*toggle)(ModelConfig&);
  };
  static const Variant variants[] = {
      {"full", [](ModelConfig&) {}},
      {"no_char_cnn", [](ModelConfig& c) { c.use_char_cnn = false; }},
      {"no_word_attention", [](ModelConfig& c) { c.use_word_attention = false; }},
      {"no_field_attention", [](ModelConfig& c) { c.use_field_attention = false; }},
      {"no_encoders", [](ModelConfig& c) { c.use_encoders = false; }},
      {"no_country", [](ModelConfig& c) { c.use_country_supervision = false; }},
  };
  std::vector<AblationResult> out;
  for (const Variant& v : variants) {
    ModelConfig cfg = base_cfg;
    v.toggle(cfg);
    const TrainResult r = train(cfg, train_cfg, train_users, dev_users, registry, net);
    out.push_back({v.name, r.best_dev});
  }
  return out;
}

std::vector<SweepRow> run_alpha_sweep(const ModelConfig& base_cfg, const TrainConfig& train_cfg,
                                      const std::vector<double>& alphas,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<UserRecord>& train_users,
                                      const std::vector<UserRecord>& dev_users,
                                      const CityRegistry& registry, const NetworkEmbeddings* net) {
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    for (std::uint64_t seed : seeds) {
      ModelConfig cfg = base_cfg;
      cfg.alpha = alpha;
      TrainConfig tc = train_cfg;
      tc.seed = seed;
      const TrainResult r = train(cfg, tc, train_users, dev_users, registry, net);
      rows.push_back({alpha, seed, r.best_dev.relative_country_error, r.best_dev.accuracy});
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "alpha,seed,rce,accuracy\n";
  for (const SweepRow& r : rows)
    out << r.alpha << ',' << r.seed << ',' << r.relative_country_error << ',' << r.accuracy
        << '\n';
  return out.str();
}

}  // namespace hlpnn
