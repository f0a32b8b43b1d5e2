#include "jpis/encoder.hpp"

#include <cmath>
#include <set>

#include "jpis/errors.hpp"

namespace jpis::encoder {
namespace {

std::string field_param_name(const ProfileField& f) {
  return std::string(f.kind == ProfileKind::UserProfile ? "enc.profile.up."
                                                        : "enc.profile.ca.") +
         f.name;
}

void check_vector(const std::vector<double>& x, const ProfileField& field) {
  if (x.size() != field.dim) {
    throw ValidationError("profile field '" + field.name + "' expects dim " +
                          std::to_string(field.dim) + ", got " +
                          std::to_string(x.size()));
  }
  double total = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw ValidationError("profile field '" + field.name +
                            "' contains a non-finite value");
    }
    total += v;
  }
  if (field.distribution && std::abs(total - 1.0) > 1e-4) {
    throw ValidationError("profile field '" + field.name +
                          "' is a distribution but sums to " + std::to_string(total));
  }
}

}  // namespace

std::size_t ProfileManifest::m() const {
  std::size_t n = 0;
  for (const auto& f : fields) n += f.kind == ProfileKind::UserProfile;
  return n;
}

std::size_t ProfileManifest::t() const { return fields.size() - m(); }

void ProfileManifest::validate() const {
  bool seen_ca = false;
  std::set<std::string> names;
  for (const auto& f : fields) {
    if (f.kind == ProfileKind::ContextAwareness) {
      seen_ca = true;
    } else if (seen_ca) {
      throw ValidationError("profile manifest: UP field '" + f.name +
                            "' listed after a CA field");
    }
    if (f.name.empty() || f.name.find_first_of(" \t\n") != std::string::npos) {
      throw ValidationError("profile manifest: invalid field name '" + f.name + "'");
    }
    if (f.dim == 0) {
      throw ValidationError("profile manifest: field '" + f.name + "' has dim 0");
    }
    const std::string key = field_param_name(f);
    if (!names.insert(key).second) {
      throw ValidationError("profile manifest: duplicate field '" + f.name + "'");
    }
  }
}

void validate_profile(const ProfileSet& profile, const ProfileManifest& manifest) {
  if (profile.up.size() != manifest.m() || profile.ca.size() != manifest.t()) {
    throw ValidationError("profile has " + std::to_string(profile.up.size()) +
                          " UP and " + std::to_string(profile.ca.size()) +
                          " CA vectors; manifest expects " +
                          std::to_string(manifest.m()) + " and " +
                          std::to_string(manifest.t()));
  }
  for (std::size_t j = 0; j < profile.up.size(); ++j) {
    check_vector(profile.up[j], manifest.user_field(j));
  }
  for (std::size_t j = 0; j < profile.ca.size(); ++j) {
    check_vector(profile.ca[j], manifest.context_field(j));
  }
}

std::size_t EncoderConfig::d_u(ProfileMode mode) const {
  return mode == ProfileMode::NoProfile ? d_e() : d_e() + d_p;
}

void EncoderConfig::validate(ProfileMode mode) const {
  if (vocab_size == 0 || word_dim == 0 || lstm_hidden == 0 || sa_dim == 0 ||
      key_dim == 0 || d_p == 0) {
    throw ValidationError("encoder config: all dimensions must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ValidationError("encoder config: dropout must lie in [0, 1)");
  }
  manifest.validate();
  switch (mode) {
    case ProfileMode::Full:
      if (manifest.fields.empty()) {
        throw ValidationError("encoder config: profile fusion needs m + t >= 1");
      }
      break;
    case ProfileMode::NoUserProfile:
      if (manifest.t() == 0) {
        throw ValidationError("encoder config: no_up ablation needs t >= 1");
      }
      break;
    case ProfileMode::NoContextAwareness:
      if (manifest.m() == 0) {
        throw ValidationError("encoder config: no_ca ablation needs m >= 1");
      }
      break;
    case ProfileMode::NoProfile:
      break;
  }
}

void init_parameters(ParameterStore& store, const EncoderConfig& c, Rng& rng) {
  const std::size_t h4 = 4 * c.lstm_hidden;
  store.add("enc.embedding", uniform(c.vocab_size, c.word_dim, 0.1, rng));
  for (const char* dir : {"fwd", "bwd"}) {
    const std::string prefix = std::string("enc.lstm.") + dir;
    store.add(prefix + ".input", glorot_uniform(c.word_dim, h4, rng));
    store.add(prefix + ".recurrent", glorot_uniform(c.lstm_hidden, h4, rng));
    store.add(prefix + ".bias", Tensor::matrix(1, h4));
  }
  store.add("enc.sa.query", glorot_uniform(c.word_dim, c.key_dim, rng));
  store.add("enc.sa.key", glorot_uniform(c.word_dim, c.key_dim, rng));
  store.add("enc.sa.value", glorot_uniform(c.word_dim, c.sa_dim, rng));
  for (const auto& f : c.manifest.fields) {
    store.add(field_param_name(f), glorot_uniform(c.d_p, f.dim, rng));
  }
  store.add("enc.fusion", glorot_uniform(c.d_e(), c.d_p, rng));
}

EncoderVars bind_parameters(Tape& tape, ParameterStore& store,
                            const EncoderConfig& c) {
  auto lstm = [&](const std::string& dir) {
    const std::string prefix = "enc.lstm." + dir;
    return LstmWeights{tape.param(store.at(prefix + ".input")),
                       tape.param(store.at(prefix + ".recurrent")),
                       tape.param(store.at(prefix + ".bias"))};
  };
  EncoderVars v;
  v.embedding = tape.param(store.at("enc.embedding"));
  v.forward = lstm("fwd");
  v.backward = lstm("bwd");
  v.attention = {tape.param(store.at("enc.sa.query")),
                 tape.param(store.at("enc.sa.key")),
                 tape.param(store.at("enc.sa.value"))};
  for (const auto& f : c.manifest.fields) {
    Var w = tape.param(store.at(field_param_name(f)));
    (f.kind == ProfileKind::UserProfile ? v.up_proj : v.ca_proj).push_back(w);
  }
  v.fusion = tape.param(store.at("enc.fusion"));
  return v;
}

Var embed_tokens(Var table, std::span<const int> ids, DropoutSpec dropout) {
  return jpis::dropout(embedding(table, ids), dropout.rate, dropout.rng);
}

Var lstm_direction(Var inputs, const LstmWeights& w, bool reverse) {
  Tape& tape = inputs.tape();
  const std::size_t n = inputs.rows();
  const std::size_t hidden = w.recurrent.rows();
  if (w.input.cols() != 4 * hidden || w.recurrent.cols() != 4 * hidden ||
      w.bias.rows() != 1 || w.bias.cols() != 4 * hidden) {
    throw ShapeError("lstm: weights " + w.input.shape().str() + ", " +
                     w.recurrent.shape().str() + ", " + w.bias.shape().str() +
                     " inconsistent with hidden size " + std::to_string(hidden));
  }
  Var ones = tape.constant(Tensor::matrix(n, 1, 1.0));
  Var projected = add(matmul(inputs, w.input), matmul(ones, w.bias));

  std::vector<Var> states(n);
  Var h, c;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t pos = reverse ? n - 1 - step : step;
    Var z = slice(projected, 0, pos, 1);
    if (step > 0) z = add(z, matmul(h, w.recurrent));
    Var gates = sigmoid(z);
    Var in_gate = slice(gates, 1, 0, hidden);
    Var forget_gate = slice(gates, 1, hidden, hidden);
    Var candidate = tanh(slice(z, 1, 2 * hidden, hidden));
    Var out_gate = slice(gates, 1, 3 * hidden, hidden);
    Var written = mul(in_gate, candidate);
    c = step > 0 ? add(mul(forget_gate, c), written) : written;
    h = mul(out_gate, tanh(c));
    states[pos] = h;
  }
  return concat(states, 0);
}

Var bilstm_encode(Var embedded, const LstmWeights& forward,
                  const LstmWeights& backward) {
  return concat({lstm_direction(embedded, forward, false),
                 lstm_direction(embedded, backward, true)});
}

Var self_attention_encode(Var embedded, const AttentionWeights& w,
                          const std::vector<bool>* valid) {
  const std::size_t n = embedded.rows();
  if (valid && valid->size() != n) {
    throw ShapeError("self_attention_encode: mask length " +
                     std::to_string(valid->size()) + " for " + std::to_string(n) +
                     " positions");
  }
  Var q = matmul(embedded, w.query);
  Var k = matmul(embedded, w.key);
  Var v = matmul(embedded, w.value);
  Var scores = scale(matmul(q, transpose(k)),
                     1.0 / std::sqrt(static_cast<double>(w.query.cols())));
  Var attn;
  if (valid) {
    const Mask mask = column_mask(n, *valid);
    attn = softmax_rows(scores, &mask);
  } else {
    attn = softmax_rows(scores);
  }
  return matmul(attn, v);
}

Var concat_context(Var bilstm, Var self_attn) {
  if (bilstm.rows() != self_attn.rows()) {
    throw ShapeError("concat_context: row counts differ, " +
                     bilstm.shape().str() + " and " + self_attn.shape().str());
  }
  return concat({bilstm, self_attn});
}

Var project_profiles(Tape& tape, const ProfileSet& profile,
                     const ProfileManifest& manifest,
                     std::span<const Var> up_proj, std::span<const Var> ca_proj,
                     bool use_up, bool use_ca) {
  if (profile.up.size() != manifest.m() || up_proj.size() != manifest.m() ||
      profile.ca.size() != manifest.t() || ca_proj.size() != manifest.t()) {
    throw ValidationError("project_profiles: profile/projection counts do not "
                          "match the manifest");
  }
  std::vector<Var> columns;
  auto project = [&](const std::vector<double>& x, Var w, const ProfileField& f) {
    if (x.size() != f.dim || w.cols() != f.dim) {
      throw ValidationError("project_profiles: field '" + f.name + "' expects dim " +
                            std::to_string(f.dim) + ", vector has " +
                            std::to_string(x.size()) + ", projection " +
                            w.shape().str());
    }
    columns.push_back(matmul(w, tape.constant(Tensor::column(x))));
  };
  if (use_up) {
    for (std::size_t j = 0; j < manifest.m(); ++j) {
      project(profile.up[j], up_proj[j], manifest.user_field(j));
    }
  }
  if (use_ca) {
    for (std::size_t j = 0; j < manifest.t(); ++j) {
      project(profile.ca[j], ca_proj[j], manifest.context_field(j));
    }
  }
  if (columns.empty()) {
    throw ValidationError("project_profiles: restricted profile matrix is empty");
  }
  return concat(columns, 1);
}

FusionResult profile_fusion(Var context, Var profile_matrix, Var w_p) {
  if (context.cols() != w_p.rows() || w_p.cols() != profile_matrix.rows()) {
    throw ShapeError("profile_fusion: incompatible shapes " +
                     context.shape().str() + ", " + w_p.shape().str() + ", " +
                     profile_matrix.shape().str());
  }
  Var logits = matmul(matmul(context, w_p), profile_matrix);
  Var weights = softmax_rows(logits);
  return {weights, matmul(weights, transpose(profile_matrix))};
}

Var encode_utterance(Tape& tape, std::span<const int> ids,
                     const ProfileSet& profile, const EncoderVars& vars,
                     const EncoderConfig& config, ProfileMode mode,
                     DropoutSpec dropout) {
  if (ids.empty()) throw ValidationError("encode_utterance: empty utterance");
  Var embedded = embed_tokens(vars.embedding, ids, dropout);
  Var context = concat_context(bilstm_encode(embedded, vars.forward, vars.backward),
                               self_attention_encode(embedded, vars.attention));
  Var rows = context;
  if (mode != ProfileMode::NoProfile) {
    Var p = project_profiles(tape, profile, config.manifest, vars.up_proj,
                             vars.ca_proj, mode != ProfileMode::NoUserProfile,
                             mode != ProfileMode::NoContextAwareness);
    rows = concat({context, profile_fusion(context, p, vars.fusion).fused});
  }
  rows = jpis::dropout(rows, dropout.rate, dropout.rng);
  return transpose(rows);
}

}  // namespace jpis::encoder
