#pragma once

#include <string>
#include <vector>

#include "hlpnn/geo.hpp"
#include "hlpnn/optim.hpp"
#include "hlpnn/rng.hpp"
#include "hlpnn/tensor.hpp"
#include "hlpnn/text.hpp"

namespace hlpnn {

struct ModelConfig {
  int word_dim = 300;                    // D
  int char_dim = 50;                     // d
  std::vector<int> filter_sizes = {3, 4, 5};
  int filters_per_size = 100;
  int heads = 10;                        // h
  int layers = 3;                        // L
  int ffn_dim = 2400;                    // D_ff
  double lambda_init = 1.0;
  double alpha = 1.0;
  int n_countries = 0;                   // M_co, from the registry
  int n_cities = 0;                      // M_ci
  int max_tweets = 100;                  // T_max
  int max_tokens = 30;                   // N_max per field
  int max_chars = 20;                    // K_max per word
  double dropout_lstm_in = 0.3;
  double dropout_encoder = 0.1;
  bool use_char_cnn = true;
  bool use_word_attention = true;
  bool use_field_attention = true;
  bool use_encoders = true;
  bool use_country_supervision = true;
  bool use_metadata = true;
  bool use_network = true;
  bool clamp_lambda = false;

  int rep_dim() const { return 2 * word_dim; }     // 2D
  int head_dim() const { return rep_dim() / heads; }

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct UserOutput {
  Tensor country_probs;  // 1 x M_co
  Tensor city_probs;     // 1 x M_ci
  Tensor country_logits;
  Tensor city_logits;    // constraint term included
};

// The full network. Parameters live in a named map so the optimizer,
// checkpointing, and gradient checks all see one flat view.
class HlpnnModel {
 public:
  HlpnnModel(const ModelConfig& cfg, const Tensor& bias_matrix, int n_words, int n_chars,
             int n_langs, int n_tzs, Rng& init_rng);
  // Variant with a pre-built word table (pretrained embeddings).
  HlpnnModel(const ModelConfig& cfg, const Tensor& bias_matrix, Tensor word_table, int n_chars,
             int n_langs, int n_tzs, Rng& init_rng);

  const ModelConfig& config() const { return cfg_; }
  ParameterMap& params() { return params_; }
  const ParameterMap& params() const { return params_; }
  double lambda_value() const { return params_.at("lambda").item(); }
  void clamp_lambda_nonneg();

  // ---- stages, exposed for unit testing ----
  // Char ids of one word -> 1 x D convolutional embedding.
  Tensor char_cnn_embed(const std::vector<int>& char_ids);
  // One token -> 1 x 2D embedding (word half + char half).
  Tensor embed_word(int word_id, const std::vector<int>& char_ids);
  // N x 2D inputs -> N x 2D hidden states; rows at and past `length` are zero.
  Tensor bilstm(const Tensor& field, int length);
  // Learned-context multi-head attention over the first `length` rows of H.
  Tensor attend_text(const Tensor& q, const Tensor& h, int length);
  // Text representations + categorical/network rows + type embeddings.
  Tensor fuse(const std::vector<Tensor>& text_reps, int lang_id, int tz_id,
              const Tensor& net_vec);
  Tensor encoder_layer(const Tensor& f_in, const std::string& prefix, Rng& rng, bool training);

  UserOutput forward_user(const EncodedUser& user, const std::vector<double>& net_vec, Rng& rng,
                          bool training);
  // Mean joint loss over a batch: city cross entropy + alpha * country term.
  Tensor loss(const std::vector<EncodedUser>& batch,
              const std::vector<std::vector<double>>& net_vecs, Rng& rng, bool training);

  struct Prediction {
    int city;
    int country;
  };
  Prediction predict(const EncodedUser& user, const std::vector<double>& net_vec);

 private:
  Tensor field_representation(const EncodedField& field, Rng& rng, bool training);
  Tensor multi_head(const Tensor& query, const Tensor& h, const std::string& prefix);
  void init_params(int n_words, int n_chars, int n_langs, int n_tzs, Rng& rng,
                   Tensor word_table);

  ModelConfig cfg_;
  Tensor bias_;  // constant M_co x M_ci
  ParameterMap params_;
};

}  // namespace hlpnn
