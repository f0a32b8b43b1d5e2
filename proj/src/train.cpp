#include "jpis/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "jpis/errors.hpp"
#include "jpis/ops.hpp"

namespace jpis {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in [0, 1]");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (seeds.empty()) throw ValidationError("seeds must not be empty");
  if (lr_grid.empty() || lambda_grid.empty()) throw ValidationError("grids must not be empty");
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw ValidationError("lr_grid entries must be positive");
  }
  for (double l : lambda_grid) {
    if (!(l >= 0.0 && l <= 1.0)) throw ValidationError("lambda_grid entries must be in [0, 1]");
  }
  if (!(clip_norm >= 0.0)) throw ValidationError("clip_norm must be >= 0");
  const double rate = model.encoder.dropout;
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("dropout must be in [0, 1)");
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ValidationError("adam: learning rate must be positive");
}

void Adam::step(ParameterStore& params) {
  if (!params.any_grad()) throw ValidationError("adam: step called before any backward pass");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.has_grad) continue;
    auto [it, fresh] = state_.try_emplace(p.name);
    if (fresh) {
      it->second.m = Tensor(p.value.shape());
      it->second.v = Tensor(p.value.shape());
    }
    auto w = p.value.data();
    auto g = p.grad.data();
    auto m = it->second.m.data();
    auto v = it->second.v.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

std::uint64_t derive_seed(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<LabelledOutput> predict_all(const JpisModel& model,
                                        const std::vector<data::CorpusRecord>& records) {
  std::vector<LabelledOutput> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const Prediction p = model.predict(model.make_example(r));
    out.push_back({model.labels().intent(p.intent), model.labels().tag_names(p.tags)});
  }
  return out;
}

Metrics evaluate(const JpisModel& model, const std::vector<data::CorpusRecord>& records) {
  return score(records, predict_all(model, records));
}

TrainResult train(const TrainConfig& config, std::uint64_t seed,
                  const std::vector<data::CorpusRecord>& train_set,
                  const std::vector<data::CorpusRecord>& valid_set,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ValidationError("train: training set is empty");

  JpisModel model(config.model, data::build_vocab(train_set),
                  derive_seed(seed, RngStream::Init));
  std::vector<Example> examples;
  examples.reserve(train_set.size());
  for (const auto& r : train_set) examples.push_back(model.make_example(r));

  TrainResult result{model, {}, 0, {}};
  if (config.epochs == 0) {
    EpochLog log;
    log.valid = evaluate(model, valid_set);
    result.log.push_back(log);
    result.best_valid = log.valid;
    if (on_epoch) on_epoch(log);
    return result;
  }

  Rng shuffle_rng(derive_seed(seed, RngStream::Shuffle));
  Rng dropout_rng(derive_seed(seed, RngStream::Dropout));
  const encoder::DropoutSpec dropout{config.model.encoder.dropout,
                                     config.model.encoder.dropout > 0.0 ? &dropout_rng : nullptr};
  Adam adam(config.learning_rate);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ParameterStore& params = model.params();
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double joint_sum = 0.0, intent_sum = 0.0, slot_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      Tape tape;
      std::vector<Var> joint;
      joint.reserve(end - begin);
      double batch_intent = 0.0, batch_slot = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        JpisModel::Loss l = model.loss(tape, examples[order[k]], config.lambda,
                                       config.intent_teacher_forcing, dropout);
        joint.push_back(l.joint);
        batch_intent += l.intent.value().item();
        batch_slot += l.slots.value().item();
      }
      const std::vector<double> weights(joint.size(), 1.0 / static_cast<double>(joint.size()));
      Var mean = weighted_sum(joint, weights);
      const double value = mean.value().item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index + 1));
      }
      params.zero_grad();
      tape.backward(mean);
      const double norm = params.grad_norm();
      if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch_index + 1));
      }
      if (config.clip_norm > 0.0 && norm > config.clip_norm) {
        params.scale_grads(config.clip_norm / norm);
      }
      adam.step(params);
      joint_sum += value * static_cast<double>(joint.size());
      intent_sum += batch_intent;
      slot_sum += batch_slot;
    }

    const double n = static_cast<double>(examples.size());
    EpochLog log{epoch, joint_sum / n, intent_sum / n, slot_sum / n, evaluate(model, valid_set)};
    result.log.push_back(log);
    if (!have_best || log.valid.overall_accuracy > result.best_valid.overall_accuracy) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_valid = log.valid;
      result.model.params().copy_values_from(params);
    }
    if (on_epoch) on_epoch(log);
  }
  return result;
}

GridResult grid_search(const TrainConfig& config,
                       const std::vector<data::CorpusRecord>& train_set,
                       const std::vector<data::CorpusRecord>& valid_set,
                       const std::function<void(const GridPoint&)>& on_point) {
  config.validate();
  GridResult result;
  for (double lr : config.lr_grid) {
    for (double lambda : config.lambda_grid) {
      TrainConfig c = config;
      c.learning_rate = lr;
      c.lambda = lambda;
      TrainResult run = train(c, config.seeds.front(), train_set, valid_set);
      GridPoint point{lr, lambda, run.best_epoch, run.best_valid};
      result.table.push_back(point);
      if (!result.best_run ||
          point.valid.overall_accuracy > result.table[result.best].valid.overall_accuracy) {
        result.best = result.table.size() - 1;
        result.best_run.emplace(std::move(run));
      }
      if (on_point) on_point(point);
    }
  }
  return result;
}

MultiSeedResult multi_seed(const TrainConfig& config,
                           const std::vector<data::CorpusRecord>& train_set,
                           const std::vector<data::CorpusRecord>& valid_set,
                           const std::vector<data::CorpusRecord>& test_set,
                           const EpochCallback& on_epoch) {
  config.validate();
  MultiSeedResult result;
  for (std::uint64_t seed : config.seeds) {
    TrainResult run = train(config, seed, train_set, valid_set, on_epoch);
    result.test.per_seed.push_back(evaluate(run.model, test_set));
    result.test.seeds.push_back(seed);
    result.logs.push_back(std::move(run.log));
  }
  result.test.mean = mean_metrics(result.test.per_seed);
  return result;
}

nlohmann::json epoch_log_to_json(const std::vector<EpochLog>& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : log) {
    out.push_back({{"epoch", e.epoch},
                   {"loss", e.loss},
                   {"intent_loss", e.intent_loss},
                   {"slot_loss", e.slot_loss},
                   {"valid", metrics_to_json(e.valid)}});
  }
  return out;
}

}  // namespace jpis
