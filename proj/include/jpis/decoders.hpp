#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jpis/ops.hpp"

namespace jpis::decoders {

struct Dims {
  std::size_t d_u = 384;
  std::size_t d_y = 128;
  std::size_t n_intents = 0;
  /// BIO tag count, 2|L_S| + 1.
  std::size_t n_tags = 0;
};

struct DecoderVars {
  Var w_id;          // |L_I| x d_u
  Var intent_embed;  // |L_I| x d_y
  Var emission;      // n_tags x (d_u + d_y)
  Var transitions;   // (n_tags + 2) x (n_tags + 2); row/col n_tags = BOS, n_tags+1 = EOS
};

void init_parameters(ParameterStore& store, const Dims& dims, Rng& rng);
DecoderVars bind_parameters(Tape& tape, ParameterStore& store);

/// Index of the maximum; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

struct IntentPrediction {
  Var logits;  // |L_I| x 1
  int label = 0;
};

IntentPrediction predict_intent(Var g, Var w_id);
/// -log softmax(logits)[gold]; rejects gold outside the label set.
Var intent_loss(Var logits, int gold);

/// Column i is u_i (+) intent_embed[intent]: (d_u + d_y) x n.
Var slot_features(Var u, int intent, Var intent_embed);
/// Per-position tag scores, n_tags x n.
Var crf_emissions(Var slot_feats, Var emission);

std::size_t bos_index(const Tensor& transitions);
std::size_t eos_index(const Tensor& transitions);

/// Score of one tag path including the BOS and EOS transitions.
double crf_path_score(const Tensor& emissions, const Tensor& transitions,
                      std::span<const int> tags);
/// log of the sum of exp(path score) over every tag path (forward algorithm).
double crf_log_partition(const Tensor& emissions, const Tensor& transitions);

/// Negative log-likelihood of `gold` under the linear-chain CRF: logZ - score.
/// Gradients come from forward-backward marginals.
Var crf_nll(Var emissions, Var transitions, std::span<const int> gold);

/// Highest-scoring tag path; ties resolve to the lowest tag index at every
/// backtrack step.
std::vector<int> viterbi_decode(const Tensor& emissions, const Tensor& transitions);

/// lambda * l_id + (1 - lambda) * l_sf, lambda in [0, 1].
Var joint_loss(Var l_id, Var l_sf, double lambda);

}  // namespace jpis::decoders
