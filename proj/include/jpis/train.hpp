#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "jpis/metrics.hpp"
#include "jpis/model.hpp"

namespace jpis {

struct TrainConfig {
  ModelConfig model;
  double lambda = 0.5;
  double learning_rate = 4e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  bool intent_teacher_forcing = true;
  /// Global gradient-norm clip; 0 disables it.
  double clip_norm = 0.0;
  std::vector<double> lr_grid = {2e-4, 4e-4, 6e-4, 8e-4};
  std::vector<double> lambda_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  /// Model dims are checked once the vocabulary is known, in train().
  void validate() const;
};

/// Adam with bias correction. Parameters without a gradient in a given step
/// are left alone (their moments are not touched either).
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParameterStore& params);
  std::size_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

/// Independent generator streams derived from one run seed.
enum class RngStream : std::uint32_t { Init = 1, Shuffle = 2, Dropout = 3 };
std::uint64_t derive_seed(std::uint64_t seed, RngStream stream);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;         // mean joint loss over training utterances
  double intent_loss = 0.0;  // mean L_ID
  double slot_loss = 0.0;    // mean L_SF
  Metrics valid;

  bool operator==(const EpochLog&) const = default;
};

struct TrainResult {
  JpisModel model;  // parameters from the selected epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  Metrics best_valid;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Vocabulary comes from `train_set`. Throws NumericalError naming the epoch
/// and batch when the loss stops being finite.
TrainResult train(const TrainConfig& config, std::uint64_t seed,
                  const std::vector<data::CorpusRecord>& train_set,
                  const std::vector<data::CorpusRecord>& valid_set,
                  const EpochCallback& on_epoch = {});

std::vector<LabelledOutput> predict_all(const JpisModel& model,
                                        const std::vector<data::CorpusRecord>& records);
Metrics evaluate(const JpisModel& model, const std::vector<data::CorpusRecord>& records);

struct GridPoint {
  double learning_rate = 0.0;
  double lambda = 0.0;
  std::size_t best_epoch = 0;
  Metrics valid;
};

struct GridResult {
  std::vector<GridPoint> table;  // lr-major grid order
  std::size_t best = 0;
  std::optional<TrainResult> best_run;
};

/// One run per (lr, lambda) pair with seeds[0]; ties go to the earlier pair.
GridResult grid_search(const TrainConfig& config,
                       const std::vector<data::CorpusRecord>& train_set,
                       const std::vector<data::CorpusRecord>& valid_set,
                       const std::function<void(const GridPoint&)>& on_point = {});

struct MultiSeedResult {
  MetricsReport test;
  std::vector<std::vector<EpochLog>> logs;
};

/// Train and test once per seed in config.seeds.
MultiSeedResult multi_seed(const TrainConfig& config,
                           const std::vector<data::CorpusRecord>& train_set,
                           const std::vector<data::CorpusRecord>& valid_set,
                           const std::vector<data::CorpusRecord>& test_set,
                           const EpochCallback& on_epoch = {});

nlohmann::json epoch_log_to_json(const std::vector<EpochLog>& log);

}  // namespace jpis
