#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpis/data.hpp"
#include "jpis/decoders.hpp"
#include "jpis/encoder.hpp"
#include "jpis/slot2intent.hpp"

namespace jpis {

enum class Ablation { None, NoSlotToIntent, NoUserProfile, NoContextAwareness, NoProfile };

/// "none", "no_slot2intent", "no_up", "no_ca", "no_profile".
std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);
encoder::ProfileMode profile_mode(Ablation a);

struct ModelConfig {
  encoder::EncoderConfig encoder;
  std::size_t d_a = 128;
  std::size_t d_c = 256;
  std::size_t d_y = 128;
  Ablation ablation = Ablation::None;

  std::size_t d_u() const { return encoder.d_u(profile_mode(ablation)); }
  void validate() const;
};

/// Model-ready form of a CorpusRecord. Labels absent from the vocabulary are
/// -1; such examples can be decoded but not trained on.
struct Example {
  std::vector<int> tokens;
  encoder::ProfileSet profile;
  int intent = -1;
  std::vector<int> tags;

  bool labelled() const;
};

struct Prediction {
  int intent = 0;
  std::vector<int> tags;
};

class JpisModel {
 public:
  /// Fresh parameters drawn from `seed`.
  JpisModel(ModelConfig config, data::Vocabularies vocab, std::uint64_t seed);
  /// Existing parameters; names and shapes must match the configuration.
  JpisModel(ModelConfig config, data::Vocabularies vocab, ParameterStore params);

  const ModelConfig& config() const { return config_; }
  const data::TokenVocabulary& tokens() const { return vocab_.tokens; }
  const data::LabelVocabulary& labels() const { return vocab_.labels; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  Example make_example(const data::CorpusRecord& record) const;

  struct Outputs {
    Var u;              // d_u x n
    Var g;              // d_u x 1
    Var intent_logits;  // |L_I| x 1
    int intent = 0;     // argmax of intent_logits
    Var emissions;      // n_tags x n
    Var transitions;
  };

  /// The slot decoder receives `slot_intent`, or the predicted intent when
  /// it is empty. `params` must be this model's store (or a copy of it).
  Outputs forward(Tape& tape, ParameterStore& params, const Example& ex,
                  std::optional<int> slot_intent,
                  encoder::DropoutSpec dropout = {}) const;
  Outputs forward(Tape& tape, const Example& ex, std::optional<int> slot_intent,
                  encoder::DropoutSpec dropout = {});

  struct Loss {
    Var intent;
    Var slots;
    Var joint;
  };
  /// Joint objective for one labelled example. With teacher forcing the gold
  /// intent feeds the slot decoder, otherwise the predicted one does.
  Loss loss(Tape& tape, const Example& ex, double lambda, bool teacher_forcing,
            encoder::DropoutSpec dropout = {});

  /// Evaluation-mode decoding: predicted intent, then Viterbi tags.
  Prediction predict(const Example& ex) const;

  nlohmann::json metadata() const;
  void save(const std::filesystem::path& path,
            const nlohmann::json& extra = nlohmann::json::object()) const;
  static JpisModel load(const std::filesystem::path& path,
                        nlohmann::json* extra = nullptr);

 private:
  void check_parameters() const;

  ModelConfig config_;
  data::Vocabularies vocab_;
  ParameterStore params_;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const encoder::ProfileManifest& m);
encoder::ProfileManifest manifest_from_json(const nlohmann::json& j);

}  // namespace jpis
