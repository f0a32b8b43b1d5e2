#pragma once

#include <cstddef>
#include <vector>

#include "jpis/ops.hpp"

namespace jpis::slot2intent {

struct Dims {
  std::size_t d_u = 384;
  std::size_t d_a = 128;
  std::size_t d_c = 256;
  std::size_t n_intents = 0;
  std::size_t n_slot_types = 0;
};

struct LabelAttentionVars {
  Var z_intent;  // |L_I| x d_a
  Var z_slot;    // |L_S| x d_a
  Var q_intent;  // d_a x d_u
  Var q_slot;    // d_a x d_u
  Var w_coattn;  // d_u x d_u
  Var w_intent;  // d_c x d_u
  Var w_slot;    // d_c x d_u
  Var w_attn;    // 1 x d_c
  Var w_g;       // 1 x d_u, only read by baseline_summary
};

/// Parameter names registered by init_parameters, in registration order.
const std::vector<const char*>& parameter_names();
/// The parameters the slot-to-intent path reads and the baseline form does not.
const std::vector<const char*>& slot_path_parameter_names();

void init_parameters(ParameterStore& store, const Dims& dims, Rng& rng);
LabelAttentionVars bind_parameters(Tape& tape, ParameterStore& store);

struct LabelReps {
  Var attn_intent;  // A^I, |L_I| x n
  Var attn_slot;    // A^S, |L_S| x n
  Var v_intent;     // V^I, d_u x |L_I|
  Var v_slot;       // V^S, d_u x |L_S|
};

/// Label attention over the token axis of U (d_u x n). Tokens flagged false
/// in `valid` receive zero weight.
LabelReps label_specific_reps(Var u, Var z_intent, Var q_intent, Var z_slot,
                              Var q_slot, const std::vector<bool>* valid = nullptr);

/// C = tanh(V_S^T W_C V_I), |L_S| x |L_I|.
Var coattention_matrix(Var v_intent, Var v_slot, Var w_coattn);

/// H = tanh(W_I V_I + (W_S V_S) C); a = softmax(w_a H) as a 1 x |L_I| row.
Var intent_attention_weights(Var v_intent, Var v_slot, Var c, Var w_intent,
                             Var w_slot, Var w_attn);

/// g = sum_j a_j V_I[:, j] as a d_u x 1 column.
Var intent_summary(Var v_intent, Var a);

/// Attention pooling used when the slot-to-intent path is ablated:
/// beta = softmax(w_g U), g = U beta^T.
Var baseline_summary(Var u, Var w_g, const std::vector<bool>* valid = nullptr);

/// Full slot-to-intent pipeline from U to g.
Var summarize(Var u, const LabelAttentionVars& vars,
              const std::vector<bool>* valid = nullptr);

}  // namespace jpis::slot2intent
