#include "jpis/model.hpp"

#include "jpis/checkpoint.hpp"
#include "jpis/errors.hpp"

namespace jpis {

using nlohmann::json;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoSlotToIntent: return "no_slot2intent";
    case Ablation::NoUserProfile: return "no_up";
    case Ablation::NoContextAwareness: return "no_ca";
    case Ablation::NoProfile: return "no_profile";
  }
  return "none";
}

Ablation parse_ablation(const std::string& s) {
  for (Ablation a : {Ablation::None, Ablation::NoSlotToIntent, Ablation::NoUserProfile,
                     Ablation::NoContextAwareness, Ablation::NoProfile}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown ablation '" + s +
                        "' (expected none, no_slot2intent, no_up, no_ca, no_profile)");
}

encoder::ProfileMode profile_mode(Ablation a) {
  switch (a) {
    case Ablation::NoUserProfile: return encoder::ProfileMode::NoUserProfile;
    case Ablation::NoContextAwareness: return encoder::ProfileMode::NoContextAwareness;
    case Ablation::NoProfile: return encoder::ProfileMode::NoProfile;
    default: return encoder::ProfileMode::Full;
  }
}

void ModelConfig::validate() const {
  encoder.validate(profile_mode(ablation));
  if (d_a == 0 || d_c == 0 || d_y == 0) {
    throw ValidationError("model config: d_a, d_c and d_y must be positive");
  }
}

bool Example::labelled() const {
  if (intent < 0) return false;
  for (int t : tags) {
    if (t < 0) return false;
  }
  return !tags.empty();
}

namespace {

ParameterStore init_store(const ModelConfig& c, const data::Vocabularies& v,
                          std::uint64_t seed) {
  Rng rng(seed);
  ParameterStore store;
  encoder::init_parameters(store, c.encoder, rng);
  slot2intent::init_parameters(
      store, {c.d_u(), c.d_a, c.d_c, v.labels.n_intents(), v.labels.n_slot_types()}, rng);
  decoders::init_parameters(store, {c.d_u(), c.d_y, v.labels.n_intents(), v.labels.n_tags()},
                            rng);
  return store;
}

ModelConfig with_vocab_size(ModelConfig c, const data::Vocabularies& v) {
  c.encoder.vocab_size = v.tokens.size();
  return c;
}

}  // namespace

JpisModel::JpisModel(ModelConfig config, data::Vocabularies vocab, std::uint64_t seed)
    : config_(with_vocab_size(std::move(config), vocab)), vocab_(std::move(vocab)) {
  config_.validate();
  params_ = init_store(config_, vocab_, seed);
}

JpisModel::JpisModel(ModelConfig config, data::Vocabularies vocab, ParameterStore params)
    : config_(with_vocab_size(std::move(config), vocab)),
      vocab_(std::move(vocab)),
      params_(std::move(params)) {
  config_.validate();
  check_parameters();
}

void JpisModel::check_parameters() const {
  const ParameterStore reference = init_store(config_, vocab_, 0);
  if (reference.size() != params_.size()) {
    throw ValidationError("checkpoint has " + std::to_string(params_.size()) +
                          " parameters, configuration expects " +
                          std::to_string(reference.size()));
  }
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const Parameter* p = params_.find(reference[i].name);
    if (!p || !(p->value.shape() == reference[i].value.shape())) {
      throw ValidationError("checkpoint parameter " + reference[i].name +
                            " missing or mis-shaped");
    }
  }
}

Example JpisModel::make_example(const data::CorpusRecord& r) const {
  Example ex;
  ex.tokens = vocab_.tokens.encode(r.tokens);
  ex.profile = r.profile;
  ex.intent = vocab_.labels.intent_id(r.intent).value_or(-1);
  ex.tags.reserve(r.tags.size());
  for (const auto& t : r.tags) ex.tags.push_back(vocab_.labels.tag_id(t).value_or(-1));
  return ex;
}

JpisModel::Outputs JpisModel::forward(Tape& tape, ParameterStore& ps, const Example& ex,
                                      std::optional<int> slot_intent,
                                      encoder::DropoutSpec dropout) const {
  const encoder::EncoderVars enc = encoder::bind_parameters(tape, ps, config_.encoder);
  Var u = encoder::encode_utterance(tape, ex.tokens, ex.profile, enc, config_.encoder,
                                    profile_mode(config_.ablation), dropout);
  const slot2intent::LabelAttentionVars att = slot2intent::bind_parameters(tape, ps);
  Var g = config_.ablation == Ablation::NoSlotToIntent
              ? slot2intent::baseline_summary(u, att.w_g)
              : slot2intent::summarize(u, att);
  const decoders::DecoderVars dec = decoders::bind_parameters(tape, ps);
  decoders::IntentPrediction pred = decoders::predict_intent(g, dec.w_id);
  Var feats = decoders::slot_features(u, slot_intent.value_or(pred.label), dec.intent_embed);
  return {u, g, pred.logits, pred.label, decoders::crf_emissions(feats, dec.emission),
          dec.transitions};
}

JpisModel::Outputs JpisModel::forward(Tape& tape, const Example& ex,
                                      std::optional<int> slot_intent,
                                      encoder::DropoutSpec dropout) {
  return forward(tape, params_, ex, slot_intent, dropout);
}

JpisModel::Loss JpisModel::loss(Tape& tape, const Example& ex, double lambda,
                                bool teacher_forcing, encoder::DropoutSpec dropout) {
  if (!ex.labelled()) {
    throw ValidationError("loss: example has labels outside the vocabulary");
  }
  std::optional<int> feed;
  if (teacher_forcing) feed = ex.intent;
  Outputs out = forward(tape, ex, feed, dropout);
  Loss l;
  l.intent = decoders::intent_loss(out.intent_logits, ex.intent);
  l.slots = decoders::crf_nll(out.emissions, out.transitions, ex.tags);
  l.joint = decoders::joint_loss(l.intent, l.slots, lambda);
  return l;
}

Prediction JpisModel::predict(const Example& ex) const {
  Tape tape(/*recording=*/false);
  // A non-recording tape never writes gradients, so the store is only read.
  Outputs out = forward(tape, const_cast<ParameterStore&>(params_), ex, std::nullopt);
  return {out.intent, decoders::viterbi_decode(out.emissions.value(), out.transitions.value())};
}

json manifest_to_json(const encoder::ProfileManifest& m) {
  json fields = json::array();
  for (const auto& f : m.fields) {
    fields.push_back({{"kind", f.kind == encoder::ProfileKind::UserProfile ? "UP" : "CA"},
                      {"name", f.name},
                      {"dim", f.dim},
                      {"distribution", f.distribution}});
  }
  return fields;
}

encoder::ProfileManifest manifest_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("profile_manifest must be an array");
  encoder::ProfileManifest m;
  for (const auto& f : j) {
    encoder::ProfileField field;
    const std::string kind = f.at("kind").get<std::string>();
    if (kind == "UP") {
      field.kind = encoder::ProfileKind::UserProfile;
    } else if (kind == "CA") {
      field.kind = encoder::ProfileKind::ContextAwareness;
    } else {
      throw ValidationError("profile field kind must be UP or CA, got " + kind);
    }
    field.name = f.at("name").get<std::string>();
    field.dim = f.at("dim").get<std::size_t>();
    field.distribution = f.value("distribution", false);
    m.fields.push_back(std::move(field));
  }
  m.validate();
  return m;
}

json model_config_to_json(const ModelConfig& c) {
  const auto& e = c.encoder;
  return {{"vocab_size", e.vocab_size}, {"word_dim", e.word_dim},
          {"lstm_hidden", e.lstm_hidden}, {"sa_dim", e.sa_dim},
          {"key_dim", e.key_dim},         {"d_p", e.d_p},
          {"dropout", e.dropout},         {"d_a", c.d_a},
          {"d_c", c.d_c},                 {"d_y", c.d_y},
          {"ablation", to_string(c.ablation)},
          {"profile_manifest", manifest_to_json(e.manifest)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  auto& e = c.encoder;
  try {
    e.vocab_size = j.value("vocab_size", e.vocab_size);
    e.word_dim = j.value("word_dim", e.word_dim);
    e.lstm_hidden = j.value("lstm_hidden", e.lstm_hidden);
    e.sa_dim = j.value("sa_dim", e.sa_dim);
    e.key_dim = j.value("key_dim", e.key_dim);
    e.d_p = j.value("d_p", e.d_p);
    e.dropout = j.value("dropout", e.dropout);
    c.d_a = j.value("d_a", c.d_a);
    c.d_c = j.value("d_c", c.d_c);
    c.d_y = j.value("d_y", c.d_y);
    c.ablation = parse_ablation(j.value("ablation", std::string("none")));
    if (j.contains("profile_manifest")) e.manifest = manifest_from_json(j.at("profile_manifest"));
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("model config: ") + ex.what());
  }
  return c;
}

json JpisModel::metadata() const {
  return {{"format", "jpis-model"},
          {"config", model_config_to_json(config_)},
          {"tokens", vocab_.tokens.tokens()},
          {"intents", vocab_.labels.intents()},
          {"slot_types", vocab_.labels.slot_types()},
          {"tagset", vocab_.labels.tags()}};
}

void JpisModel::save(const std::filesystem::path& path, const json& extra) const {
  json meta = metadata();
  meta["extra"] = extra;
  save_parameters(path, params_, meta.dump());
}

JpisModel JpisModel::load(const std::filesystem::path& path, json* extra) {
  ParameterArchive archive = load_parameters(path);
  json meta;
  try {
    meta = json::parse(archive.metadata);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint metadata: ") + e.what());
  }
  if (meta.value("format", "") != "jpis-model") {
    throw ValidationError("checkpoint is not a JPIS model");
  }
  std::vector<std::string> tokens = meta.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < 2) throw ValidationError("checkpoint token vocabulary is truncated");
  data::Vocabularies vocab{
      data::TokenVocabulary({tokens.begin() + 2, tokens.end()}),
      data::LabelVocabulary(meta.at("intents").get<std::vector<std::string>>(),
                            meta.at("slot_types").get<std::vector<std::string>>())};
  if (vocab.labels.tags() != meta.at("tagset").get<std::vector<std::string>>()) {
    throw ValidationError("checkpoint tagset does not match its slot types");
  }
  if (extra) *extra = meta.value("extra", json::object());
  return JpisModel(model_config_from_json(meta.at("config")), std::move(vocab),
                   std::move(archive.params));
}

}  // namespace jpis
