#include "hlpnn/model.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace hlpnn {

namespace {

// Feature type rows: tweet, description, location, name, language, timezone,
// network.
enum FeatureType { kTweet = 0, kDesc, kLoc, kName, kLang, kTz, kNet, kNumTypes };

Tensor xavier(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  return Tensor::uniform(rows, cols, -bound, bound, rng, true);
}

}  // namespace

void ModelConfig::validate() const {
  if (word_dim <= 0 || char_dim <= 0 || heads <= 0 || layers <= 0 || ffn_dim <= 0)
    throw std::invalid_argument("config: dimensions must be positive");
  if (rep_dim() % heads != 0)
    throw std::invalid_argument("config: 2D=" + std::to_string(rep_dim()) +
                                " not divisible by heads=" + std::to_string(heads));
  if (use_char_cnn) {
    const int total = filters_per_size * static_cast<int>(filter_sizes.size());
    if (total != word_dim)
      throw std::invalid_argument("config: total char-CNN filters " + std::to_string(total) +
                                  " must equal word_dim " + std::to_string(word_dim));
    for (int l : filter_sizes)
      if (l < 1 || l > max_chars)
        throw std::invalid_argument("config: filter size " + std::to_string(l) +
                                    " out of range for max_chars " + std::to_string(max_chars));
  }
  if (dropout_lstm_in < 0.0 || dropout_lstm_in >= 1.0 || dropout_encoder < 0.0 ||
      dropout_encoder >= 1.0)
    throw std::invalid_argument("config: dropout rates must be in [0,1)");
  if (max_tweets < 0 || max_tokens <= 0 || max_chars <= 0)
    throw std::invalid_argument("config: sequence caps must be positive");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j{{"word_dim", word_dim},
                   {"char_dim", char_dim},
                   {"filter_sizes", filter_sizes},
                   {"filters_per_size", filters_per_size},
                   {"heads", heads},
                   {"layers", layers},
                   {"ffn_dim", ffn_dim},
                   {"lambda_init", lambda_init},
                   {"alpha", alpha},
                   {"n_countries", n_countries},
                   {"n_cities", n_cities},
                   {"max_tweets", max_tweets},
                   {"max_tokens", max_tokens},
                   {"max_chars", max_chars},
                   {"dropout_lstm_in", dropout_lstm_in},
                   {"dropout_encoder", dropout_encoder},
                   {"use_char_cnn", use_char_cnn},
                   {"use_word_attention", use_word_attention},
                   {"use_field_attention", use_field_attention},
                   {"use_encoders", use_encoders},
                   {"use_country_supervision", use_country_supervision},
                   {"use_metadata", use_metadata},
                   {"use_network", use_network},
                   {"clamp_lambda", clamp_lambda}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  nlohmann::json defaults = nlohmann::json::parse(c.to_json());
  for (auto& [key, val] : j.items())
    if (!defaults.contains(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j[key].get<std::decay_t<decltype(dst)>>();
  };
  get("word_dim", c.word_dim);
  get("char_dim", c.char_dim);
  get("filter_sizes", c.filter_sizes);
  get("filters_per_size", c.filters_per_size);
  get("heads", c.heads);
  get("layers", c.layers);
  get("ffn_dim", c.ffn_dim);
  get("lambda_init", c.lambda_init);
  get("alpha", c.alpha);
  get("n_countries", c.n_countries);
  get("n_cities", c.n_cities);
  get("max_tweets", c.max_tweets);
  get("max_tokens", c.max_tokens);
  get("max_chars", c.max_chars);
  get("dropout_lstm_in", c.dropout_lstm_in);
  get("dropout_encoder", c.dropout_encoder);
  get("use_char_cnn", c.use_char_cnn);
  get("use_word_attention", c.use_word_attention);
  get("use_field_attention", c.use_field_attention);
  get("use_encoders", c.use_encoders);
  get("use_country_supervision", c.use_country_supervision);
  get("use_metadata", c.use_metadata);
  get("use_network", c.use_network);
  get("clamp_lambda", c.clamp_lambda);
  return c;
}

HlpnnModel::HlpnnModel(const ModelConfig& cfg, const Tensor& bias_matrix, int n_words,
                       int n_chars, int n_langs, int n_tzs, Rng& init_rng)
    : cfg_(cfg), bias_(bias_matrix) {
  cfg_.validate();
  Tensor word_table = Tensor::uniform(n_words, cfg_.word_dim, -0.25, 0.25, init_rng, true);
  init_params(n_words, n_chars, n_langs, n_tzs, init_rng, std::move(word_table));
}

HlpnnModel::HlpnnModel(const ModelConfig& cfg, const Tensor& bias_matrix, Tensor word_table,
                       int n_chars, int n_langs, int n_tzs, Rng& init_rng)
    : cfg_(cfg), bias_(bias_matrix) {
  cfg_.validate();
  if (word_table.cols() != cfg_.word_dim)
    throw std::invalid_argument("model: word table width " + std::to_string(word_table.cols()) +
                                " does not match word_dim " + std::to_string(cfg_.word_dim));
  init_params(word_table.rows(), n_chars, n_langs, n_tzs, init_rng, std::move(word_table));
}

void HlpnnModel::init_params(int n_words, int n_chars, int n_langs, int n_tzs, Rng& rng,
                             Tensor word_table) {
  if (cfg_.n_countries <= 0 || cfg_.n_cities <= 0)
    throw std::invalid_argument("model: label counts not set");
  if (bias_.rows() != cfg_.n_countries || bias_.cols() != cfg_.n_cities)
    throw std::invalid_argument("model: bias matrix shape mismatch");
  const int d2 = cfg_.rep_dim();
  const int hdim = cfg_.word_dim;  // per-direction LSTM hidden size

  params_["word_emb"] = std::move(word_table);
  if (cfg_.use_char_cnn) {
    params_["char_emb"] = Tensor::uniform(n_chars, cfg_.char_dim, -1.0, 1.0, rng, true);
    for (int l : cfg_.filter_sizes) {
      params_["cnn.w" + std::to_string(l)] = xavier(l * cfg_.char_dim, cfg_.filters_per_size, rng);
      params_["cnn.b" + std::to_string(l)] = Tensor::zeros(1, cfg_.filters_per_size, true);
    }
  } else {
    // Ablation keeps the 2D width via a second lookup slice.
    params_["word_emb2"] = Tensor::uniform(n_words, cfg_.word_dim, -0.25, 0.25, rng, true);
  }
  for (const char* dir : {"fw", "bw"}) {
    const std::string p = std::string("lstm.") + dir + ".";
    params_[p + "wx"] = xavier(d2, 4 * hdim, rng);
    params_[p + "wh"] = xavier(hdim, 4 * hdim, rng);
    params_[p + "b"] = Tensor::zeros(1, 4 * hdim, true);
  }
  auto attn_block = [&](const std::string& prefix) {
    params_[prefix + "wq"] = xavier(d2, d2, rng);
    params_[prefix + "wk"] = xavier(d2, d2, rng);
    params_[prefix + "wv"] = xavier(d2, d2, rng);
    params_[prefix + "wo"] = xavier(d2, d2, rng);
  };
  params_["watt.q"] = Tensor::uniform(1, d2, -0.1, 0.1, rng, true);
  attn_block("watt.");
  params_["lang_emb"] = Tensor::uniform(n_langs, d2, -1.0, 1.0, rng, true);
  params_["tz_emb"] = Tensor::uniform(n_tzs, d2, -1.0, 1.0, rng, true);
  params_["type_emb"] = Tensor::uniform(kNumTypes, d2, -0.1, 0.1, rng, true);
  if (cfg_.use_encoders) {
    for (const char* stack : {"co", "ci"}) {
      for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = std::string("enc.") + stack + "." + std::to_string(l) + ".";
        attn_block(p + "attn.");
        params_[p + "ffn.w1"] = xavier(d2, cfg_.ffn_dim, rng);
        params_[p + "ffn.b1"] = Tensor::zeros(1, cfg_.ffn_dim, true);
        params_[p + "ffn.w2"] = xavier(cfg_.ffn_dim, d2, rng);
        params_[p + "ffn.b2"] = Tensor::zeros(1, d2, true);
        params_[p + "ln1.g"] = Tensor::full(1, d2, 1.0, true);
        params_[p + "ln1.b"] = Tensor::zeros(1, d2, true);
        params_[p + "ln2.g"] = Tensor::full(1, d2, 1.0, true);
        params_[p + "ln2.b"] = Tensor::zeros(1, d2, true);
      }
    }
  }
  if (cfg_.use_field_attention) {
    for (const char* stack : {"co", "ci"}) {
      const std::string p = std::string("fatt.") + stack + ".";
      params_[p + "q"] = Tensor::uniform(1, d2, -0.1, 0.1, rng, true);
      attn_block(p);
    }
  }
  params_["head.co.w"] = xavier(d2, cfg_.n_countries, rng);
  params_["head.co.b"] = Tensor::zeros(1, cfg_.n_countries, true);
  params_["head.ci.w"] = xavier(d2, cfg_.n_cities, rng);
  params_["head.ci.b"] = Tensor::zeros(1, cfg_.n_cities, true);
  params_["lambda"] = Tensor::scalar(cfg_.lambda_init, true);
}

void HlpnnModel::clamp_lambda_nonneg() {
  if (!cfg_.clamp_lambda) return;
  double& v = params_["lambda"].data()[0];
  if (v < 0.0) v = 0.0;
}

Tensor HlpnnModel::char_cnn_embed(const std::vector<int>& char_ids) {
  int max_l = 0;
  for (int l : cfg_.filter_sizes) max_l = std::max(max_l, l);
  std::vector<int> ids = char_ids;
  while (static_cast<int>(ids.size()) < max_l) ids.push_back(kPadId);  // pad short words
  const Tensor chars = embedding_lookup(params_.at("char_emb"), ids);
  std::vector<Tensor> pooled;
  for (int l : cfg_.filter_sizes) {
    const Tensor windows = unfold_rows(chars, l);
    const Tensor conv = relu(add_rowvec(matmul(windows, params_.at("cnn.w" + std::to_string(l))),
                                        params_.at("cnn.b" + std::to_string(l))));
    pooled.push_back(max_pool(conv, 0));
  }
  return concat(pooled, 1);
}

Tensor HlpnnModel::embed_word(int word_id, const std::vector<int>& char_ids) {
  const Tensor word_half = embedding_lookup(params_.at("word_emb"), {word_id});
  const Tensor char_half = cfg_.use_char_cnn
                               ? char_cnn_embed(char_ids)
                               : embedding_lookup(params_.at("word_emb2"), {word_id});
  return concat({word_half, char_half}, 1);
}

namespace {

// One-direction LSTM over all rows of x; returns stacked hidden states.
Tensor lstm_direction(const Tensor& x, const Tensor& wx, const Tensor& wh, const Tensor& b,
                      int hidden, bool backward_dir) {
  const int n = x.rows();
  Tensor h = Tensor::zeros(1, hidden);
  Tensor c = Tensor::zeros(1, hidden);
  std::vector<Tensor> states(n);
  for (int step = 0; step < n; ++step) {
    const int t = backward_dir ? n - 1 - step : step;
    const Tensor xt = slice_rows(x, t, t + 1);
    const Tensor gates = add(add(matmul(xt, wx), matmul(h, wh)), b);
    const Tensor i = sigmoid(slice_cols(gates, 0, hidden));
    const Tensor f = sigmoid(slice_cols(gates, hidden, 2 * hidden));
    const Tensor g = tanh_op(slice_cols(gates, 2 * hidden, 3 * hidden));
    const Tensor o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh_op(c));
    states[t] = h;
  }
  return concat(states, 0);
}

}  // namespace

Tensor HlpnnModel::bilstm(const Tensor& field, int length) {
  if (field.cols() != cfg_.rep_dim())
    throw std::invalid_argument("bilstm: expected width " + std::to_string(cfg_.rep_dim()));
  if (length < 0 || length > field.rows())
    throw std::invalid_argument("bilstm: length out of range");
  const int hidden = cfg_.word_dim;
  std::vector<Tensor> parts;
  if (length > 0) {
    const Tensor x = length == field.rows() ? field : slice_rows(field, 0, length);
    const Tensor fw = lstm_direction(x, params_.at("lstm.fw.wx"), params_.at("lstm.fw.wh"),
                                     params_.at("lstm.fw.b"), hidden, false);
    const Tensor bw = lstm_direction(x, params_.at("lstm.bw.wx"), params_.at("lstm.bw.wh"),
                                     params_.at("lstm.bw.b"), hidden, true);
    parts.push_back(concat({fw, bw}, 1));
  }
  if (length < field.rows())
    parts.push_back(Tensor::zeros(field.rows() - length, cfg_.rep_dim()));
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

Tensor HlpnnModel::multi_head(const Tensor& query, const Tensor& h, const std::string& prefix) {
  const int dk = cfg_.head_dim();
  const Tensor& wq = params_.at(prefix + "wq");
  const Tensor& wk = params_.at(prefix + "wk");
  const Tensor& wv = params_.at(prefix + "wv");
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> heads;
  heads.reserve(cfg_.heads);
  for (int i = 0; i < cfg_.heads; ++i) {
    const int c0 = i * dk, c1 = (i + 1) * dk;
    const Tensor q_h = matmul(query, slice_cols(wq, c0, c1));
    const Tensor k_h = matmul(h, slice_cols(wk, c0, c1));
    const Tensor v_h = matmul(h, slice_cols(wv, c0, c1));
    const Tensor scores = scale(matmul(q_h, transpose(k_h)), inv_sqrt_dk);
    heads.push_back(matmul(softmax(scores, 1), v_h));
  }
  return matmul(concat(heads, 1), params_.at(prefix + "wo"));
}

Tensor HlpnnModel::attend_text(const Tensor& q, const Tensor& h, int length) {
  if (length < 1 || length > h.rows())
    throw std::invalid_argument("attend_text: length out of range");
  const Tensor hs = length == h.rows() ? h : slice_rows(h, 0, length);
  if (!cfg_.use_word_attention) return mean_rows(hs);
  return multi_head(q, hs, "watt.");
}

Tensor HlpnnModel::field_representation(const EncodedField& field, Rng& rng, bool training) {
  // Empty fields fall back to a single PAD token so the fusion geometry
  // stays fixed at T_used+6 rows.
  const int n_eff = std::max(1, field.length);
  std::vector<Tensor> rows;
  rows.reserve(n_eff);
  for (int i = 0; i < n_eff; ++i) rows.push_back(embed_word(field.word_ids[i], field.char_ids[i]));
  Tensor x = rows.size() == 1 ? rows[0] : concat(rows, 0);
  x = dropout(x, cfg_.dropout_lstm_in, rng, training);
  const Tensor h = bilstm(x, n_eff);
  return attend_text(params_.at("watt.q"), h, n_eff);
}

Tensor HlpnnModel::fuse(const std::vector<Tensor>& text_reps, int lang_id, int tz_id,
                        const Tensor& net_vec) {
  if (net_vec.rows() != 1 || net_vec.cols() != cfg_.rep_dim())
    throw std::invalid_argument("fuse: network vector must be 1x" +
                                std::to_string(cfg_.rep_dim()));
  const Tensor& type_emb = params_.at("type_emb");
  const int n_text = static_cast<int>(text_reps.size());
  const int t_used = n_text - 3;
  if (t_used < 0) throw std::invalid_argument("fuse: need at least 3 metadata text rows");
  std::vector<Tensor> fused;
  fused.reserve(n_text + 3);
  for (int i = 0; i < n_text; ++i) {
    int type;
    if (i < t_used) type = kTweet;
    else type = kDesc + (i - t_used);
    fused.push_back(add(text_reps[i], embedding_lookup(type_emb, {type})));
  }
  fused.push_back(add(embedding_lookup(params_.at("lang_emb"), {lang_id}),
                      embedding_lookup(type_emb, {kLang})));
  fused.push_back(add(embedding_lookup(params_.at("tz_emb"), {tz_id}),
                      embedding_lookup(type_emb, {kTz})));
  fused.push_back(add(net_vec, embedding_lookup(type_emb, {kNet})));
  return concat(fused, 0);
}

Tensor HlpnnModel::encoder_layer(const Tensor& f_in, const std::string& prefix, Rng& rng,
                                 bool training) {
  const Tensor attn = multi_head(f_in, f_in, prefix + "attn.");
  const Tensor f_mid = layer_norm(add(dropout(attn, cfg_.dropout_encoder, rng, training), f_in),
                                  params_.at(prefix + "ln1.g"), params_.at(prefix + "ln1.b"));
  const Tensor ffn = add_rowvec(
      matmul(relu(add_rowvec(matmul(f_mid, params_.at(prefix + "ffn.w1")),
                             params_.at(prefix + "ffn.b1"))),
             params_.at(prefix + "ffn.w2")),
      params_.at(prefix + "ffn.b2"));
  return layer_norm(add(dropout(ffn, cfg_.dropout_encoder, rng, training), f_mid),
                    params_.at(prefix + "ln2.g"), params_.at(prefix + "ln2.b"));
}

UserOutput HlpnnModel::forward_user(const EncodedUser& user, const std::vector<double>& net_vec,
                                    Rng& rng, bool training) {
  std::vector<Tensor> reps;
  reps.reserve(user.fields.size());
  for (const EncodedField& f : user.fields) reps.push_back(field_representation(f, rng, training));

  Tensor net = net_vec.empty() ? Tensor::zeros(1, cfg_.rep_dim())
                               : Tensor::from_data(1, cfg_.rep_dim(), net_vec);
  const Tensor fused = fuse(reps, user.lang_id, user.tz_id, net);

  Tensor f_co_mat = fused, f_ci_mat = fused;
  if (cfg_.use_encoders) {
    for (int l = 0; l < cfg_.layers; ++l) {
      f_co_mat = encoder_layer(f_co_mat, "enc.co." + std::to_string(l) + ".", rng, training);
      f_ci_mat = encoder_layer(f_ci_mat, "enc.ci." + std::to_string(l) + ".", rng, training);
    }
  }
  Tensor f_co, f_ci;
  if (cfg_.use_field_attention) {
    f_co = multi_head(params_.at("fatt.co.q"), f_co_mat, "fatt.co.");
    f_ci = multi_head(params_.at("fatt.ci.q"), f_ci_mat, "fatt.ci.");
  } else {
    f_co = mean_rows(f_co_mat);
    f_ci = mean_rows(f_ci_mat);
  }

  UserOutput out;
  out.country_logits = add(matmul(f_co, params_.at("head.co.w")), params_.at("head.co.b"));
  out.country_probs = softmax(out.country_logits, 1);
  const Tensor penalty = mul_scalar(matmul(out.country_probs, bias_), params_.at("lambda"));
  out.city_logits =
      add(add(matmul(f_ci, params_.at("head.ci.w")), params_.at("head.ci.b")), penalty);
  out.city_probs = softmax(out.city_logits, 1);
  return out;
}

Tensor HlpnnModel::loss(const std::vector<EncodedUser>& batch,
                        const std::vector<std::vector<double>>& net_vecs, Rng& rng,
                        bool training) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  if (!net_vecs.empty() && net_vecs.size() != batch.size())
    throw std::invalid_argument("loss: net vector count mismatch");
  std::vector<Tensor> terms;
  terms.reserve(batch.size());
  const double alpha = cfg_.use_country_supervision ? cfg_.alpha : 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const EncodedUser& u = batch[i];
    if (u.gold_city < 0 || u.gold_city >= cfg_.n_cities)
      throw std::out_of_range("loss: gold city index out of range for user " + u.user_id);
    if (u.gold_country < 0 || u.gold_country >= cfg_.n_countries)
      throw std::out_of_range("loss: gold country index out of range for user " + u.user_id);
    const UserOutput out =
        forward_user(u, net_vecs.empty() ? std::vector<double>{} : net_vecs[i], rng, training);
    Tensor term = scale(pick(log_softmax_rows(out.city_logits), 0, u.gold_city), -1.0);
    if (alpha != 0.0)
      term = add(term,
                 scale(pick(log_softmax_rows(out.country_logits), 0, u.gold_country), -alpha));
    terms.push_back(term);
  }
  Tensor total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

HlpnnModel::Prediction HlpnnModel::predict(const EncodedUser& user,
                                           const std::vector<double>& net_vec) {
  Rng rng(0);  // unused in eval mode
  const UserOutput out = forward_user(user, net_vec, rng, false);
  auto argmax = [](const Tensor& t) {
    int best = 0;
    for (int j = 1; j < t.cols(); ++j)
      if (t.at(0, j) > t.at(0, best)) best = j;
    return best;
  };
  return {argmax(out.city_probs), argmax(out.country_probs)};
}

}  // namespace hlpnn
