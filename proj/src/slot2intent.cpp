#include "jpis/slot2intent.hpp"

#include "jpis/errors.hpp"

namespace jpis::slot2intent {
namespace {

Var attend_tokens(Var logits, const std::vector<bool>* valid) {
  if (!valid) return softmax_rows(logits);
  if (valid->size() != logits.cols()) {
    throw ShapeError("label attention: mask length " + std::to_string(valid->size()) +
                     " for " + std::to_string(logits.cols()) + " tokens");
  }
  const Mask mask = column_mask(logits.rows(), *valid);
  return softmax_rows(logits, &mask);
}

}  // namespace

const std::vector<const char*>& parameter_names() {
  static const std::vector<const char*> names{
      "s2i.z_intent", "s2i.z_slot",  "s2i.q_intent", "s2i.q_slot", "s2i.w_coattn",
      "s2i.w_intent", "s2i.w_slot",  "s2i.w_attn",   "s2i.w_g"};
  return names;
}

const std::vector<const char*>& slot_path_parameter_names() {
  static const std::vector<const char*> names{
      "s2i.z_intent", "s2i.z_slot", "s2i.q_intent", "s2i.q_slot",
      "s2i.w_coattn", "s2i.w_intent", "s2i.w_slot", "s2i.w_attn"};
  return names;
}

void init_parameters(ParameterStore& store, const Dims& d, Rng& rng) {
  if (d.n_intents == 0 || d.n_slot_types == 0) {
    throw ValidationError("slot2intent: label sets must be nonempty");
  }
  store.add("s2i.z_intent", glorot_uniform(d.n_intents, d.d_a, rng));
  store.add("s2i.z_slot", glorot_uniform(d.n_slot_types, d.d_a, rng));
  store.add("s2i.q_intent", glorot_uniform(d.d_a, d.d_u, rng));
  store.add("s2i.q_slot", glorot_uniform(d.d_a, d.d_u, rng));
  store.add("s2i.w_coattn", glorot_uniform(d.d_u, d.d_u, rng));
  store.add("s2i.w_intent", glorot_uniform(d.d_c, d.d_u, rng));
  store.add("s2i.w_slot", glorot_uniform(d.d_c, d.d_u, rng));
  store.add("s2i.w_attn", glorot_uniform(1, d.d_c, rng));
  store.add("s2i.w_g", glorot_uniform(1, d.d_u, rng));
}

LabelAttentionVars bind_parameters(Tape& tape, ParameterStore& store) {
  auto p = [&](const char* name) { return tape.param(store.at(name)); };
  return {p("s2i.z_intent"), p("s2i.z_slot"),  p("s2i.q_intent"),
          p("s2i.q_slot"),   p("s2i.w_coattn"), p("s2i.w_intent"),
          p("s2i.w_slot"),   p("s2i.w_attn"),   p("s2i.w_g")};
}

LabelReps label_specific_reps(Var u, Var z_intent, Var q_intent, Var z_slot,
                              Var q_slot, const std::vector<bool>* valid) {
  LabelReps r;
  r.attn_intent = attend_tokens(matmul(z_intent, tanh(matmul(q_intent, u))), valid);
  r.attn_slot = attend_tokens(matmul(z_slot, tanh(matmul(q_slot, u))), valid);
  r.v_intent = matmul(u, transpose(r.attn_intent));
  r.v_slot = matmul(u, transpose(r.attn_slot));
  return r;
}

Var coattention_matrix(Var v_intent, Var v_slot, Var w_coattn) {
  return tanh(matmul(matmul(transpose(v_slot), w_coattn), v_intent));
}

Var intent_attention_weights(Var v_intent, Var v_slot, Var c, Var w_intent,
                             Var w_slot, Var w_attn) {
  Var h = tanh(add(matmul(w_intent, v_intent), matmul(matmul(w_slot, v_slot), c)));
  return softmax_rows(matmul(w_attn, h));
}

Var intent_summary(Var v_intent, Var a) {
  if (a.rows() != 1 || a.cols() != v_intent.cols()) {
    throw ShapeError("intent_summary: weights " + a.shape().str() +
                     " do not match V_I " + v_intent.shape().str());
  }
  return matmul(v_intent, transpose(a));
}

Var baseline_summary(Var u, Var w_g, const std::vector<bool>* valid) {
  Var beta = attend_tokens(matmul(w_g, u), valid);
  return matmul(u, transpose(beta));
}

Var summarize(Var u, const LabelAttentionVars& v, const std::vector<bool>* valid) {
  LabelReps reps = label_specific_reps(u, v.z_intent, v.q_intent, v.z_slot,
                                       v.q_slot, valid);
  Var c = coattention_matrix(reps.v_intent, reps.v_slot, v.w_coattn);
  Var a = intent_attention_weights(reps.v_intent, reps.v_slot, c, v.w_intent,
                                   v.w_slot, v.w_attn);
  return intent_summary(reps.v_intent, a);
}

}  // namespace jpis::slot2intent
