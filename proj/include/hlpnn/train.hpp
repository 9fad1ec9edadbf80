#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hlpnn/checkpoint.hpp"
#include "hlpnn/geo.hpp"
#include "hlpnn/graph.hpp"
#include "hlpnn/model.hpp"
#include "hlpnn/text.hpp"

namespace hlpnn {

struct TrainConfig {
  int batch_size = 64;
  double lr_initial = 1e-4;
  double lr_reduced = 1e-5;
  int extra_epochs_after_reduction = 3;
  int max_epochs = 10;
  std::uint64_t seed = 1;
  int word_min_count = 10;
  int char_min_count = 5;
  std::string pretrained_embeddings;  // optional Glove-style text file

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// Plateau rule: the first epoch whose dev accuracy does not exceed the best
// so far triggers a one-time reduction to lr_reduced, followed by exactly
// `extra_epochs_after_reduction` more epochs. Hard cap at max_epochs.
class LrSchedule {
 public:
  explicit LrSchedule(const TrainConfig& cfg)
      : lr_(cfg.lr_initial),
        reduced_lr_(cfg.lr_reduced),
        extra_(cfg.extra_epochs_after_reduction),
        max_epochs_(cfg.max_epochs) {}

  double lr() const { return lr_; }
  bool reduced() const { return reduced_at_ >= 0; }
  int reduced_at() const { return reduced_at_; }

  // Call once per finished epoch (1-based); returns true when training stops.
  bool observe(int epoch, double dev_accuracy) {
    if (dev_accuracy > best_) best_ = dev_accuracy;
    else if (reduced_at_ < 0) {
      reduced_at_ = epoch;
      lr_ = reduced_lr_;
    }
    if (reduced_at_ >= 0 && epoch >= reduced_at_ + extra_) return true;
    return epoch >= max_epochs_;
  }

 private:
  double lr_;
  double reduced_lr_;
  int extra_;
  int max_epochs_;
  int reduced_at_ = -1;
  double best_ = -1.0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  MetricsReport dev;
  double lr = 0.0;
  double lambda = 0.0;
  double wall_seconds = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  int reduced_at = -1;

  std::string to_jsonl() const;
  void save_jsonl(const std::string& path) const;
};

struct TrainResult {
  RunRecord record;
  MetricsReport best_dev;
  Checkpoint best_checkpoint;       // in-memory copy of the best-dev state
  std::vector<double> step_losses;  // one entry per optimizer step, in order
};

// Per-user model inputs with gold labels resolved against the registry.
struct PreparedData {
  Vocabulary vocab;
  CategoricalVocab lang_vocab;
  CategoricalVocab tz_vocab;
  std::vector<EncodedUser> train;
  std::vector<EncodedUser> dev;
  std::vector<std::vector<double>> train_net;
  std::vector<std::vector<double>> dev_net;
};

PreparedData prepare_data(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                          const std::vector<UserRecord>& train_users,
                          const std::vector<UserRecord>& dev_users, const CityRegistry& registry,
                          const NetworkEmbeddings* net);

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const std::vector<UserRecord>& train_users,
                  const std::vector<UserRecord>& dev_users, const CityRegistry& registry,
                  const NetworkEmbeddings* net = nullptr);

MetricsReport evaluate_model(HlpnnModel& model, const std::vector<EncodedUser>& users,
                             const std::vector<std::vector<double>>& net_vecs,
                             const CityRegistry& registry);

// Rebuilds the model and preprocessing state from a checkpoint and scores a
// dataset with it.
MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const std::vector<UserRecord>& users,
                                  const CityRegistry& registry, const NetworkEmbeddings* net);

struct AblationResult {
  std::string variant;
  MetricsReport dev;
};

// One flag toggled per run, shared seed.
std::vector<AblationResult> run_ablation(const ModelConfig& base_cfg, const TrainConfig& train_cfg,
                                         const std::vector<UserRecord>& train_users,
                                         const std::vector<UserRecord>& dev_users,
                                         const CityRegistry& registry,
                                         const NetworkEmbeddings* net = nullptr);

struct SweepRow {
  double alpha;
  std::uint64_t seed;
  double relative_country_error;
  double accuracy;
};

std::vector<SweepRow> run_alpha_sweep(const ModelConfig& base_cfg, const TrainConfig& train_cfg,
                                      const std::vector<double>& alphas,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<UserRecord>& train_users,
                                      const std::vector<UserRecord>& dev_users,
                                      const CityRegistry& registry,
                                      const NetworkEmbeddings* net = nullptr);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace hlpnn
