#include "jpis/config.hpp"

#include <fstream>
#include <set>

#include "jpis/errors.hpp"

namespace jpis {

using nlohmann::json;

json train_config_to_json(const TrainConfig& c) {
  json j = model_config_to_json(c.model);
  j.erase("vocab_size");  // always derived from the training data
  j["lambda"] = c.lambda;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seeds"] = c.seeds;
  j["intent_teacher_forcing"] = c.intent_teacher_forcing;
  j["clip_norm"] = c.clip_norm;
  j["lr_grid"] = c.lr_grid;
  j["lambda_grid"] = c.lambda_grid;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  static const std::set<std::string> known = {
      "word_dim", "lstm_hidden", "sa_dim", "key_dim", "d_p", "dropout", "d_a", "d_c",
      "d_y", "ablation", "profile_manifest", "lambda", "learning_rate", "batch_size",
      "epochs", "seeds", "intent_teacher_forcing", "clip_norm", "lr_grid", "lambda_grid"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
  }
  TrainConfig c;
  c.model = model_config_from_json(j);
  try {
    c.lambda = j.value("lambda", c.lambda);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seeds = j.value("seeds", c.seeds);
    c.intent_teacher_forcing = j.value("intent_teacher_forcing", c.intent_teacher_forcing);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.lr_grid = j.value("lr_grid", c.lr_grid);
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j);
}

void save_train_config(const std::filesystem::path& path, const TrainConfig& c) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config " + path.string());
  out << train_config_to_json(c).dump(2) << '\n';
}

}  // namespace jpis
