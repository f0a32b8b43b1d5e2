#include "jpis/decoders.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "jpis/errors.hpp"

namespace jpis::decoders {
namespace {

void check_crf_shapes(const Tensor& emissions, const Tensor& transitions) {
  require_matrix(emissions, "crf");
  require_matrix(transitions, "crf");
  const std::size_t k = emissions.rows() + 2;
  if (transitions.rows() != k || transitions.cols() != k) {
    throw ShapeError("crf: transitions " + transitions.shape().str() +
                     " do not match " + std::to_string(emissions.rows()) +
                     " tags plus BOS/EOS");
  }
}

void check_tags(std::span<const int> tags, const Tensor& emissions) {
  if (tags.size() != emissions.cols()) {
    throw ShapeError("crf: " + std::to_string(tags.size()) + " tags for " +
                     std::to_string(emissions.cols()) + " positions");
  }
  for (int t : tags) {
    if (t < 0 || static_cast<std::size_t>(t) >= emissions.rows()) {
      throw ValidationError("crf: tag index " + std::to_string(t) + " out of range");
    }
  }
}

// alpha(i, k): log-sum of scores of all prefixes ending in tag k at i.
Tensor forward_scores(const Tensor& phi, const Tensor& trans) {
  const std::size_t K = phi.rows(), n = phi.cols(), bos = K;
  Tensor alpha = Tensor::matrix(n, K);
  std::vector<double> terms(K);
  for (std::size_t k = 0; k < K; ++k) alpha(0, k) = trans(bos, k) + phi(k, 0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < K; ++j) terms[j] = alpha(i - 1, j) + trans(j, k);
      alpha(i, k) = phi(k, i) + logsumexp_value(terms);
    }
  }
  return alpha;
}

// beta(i, k): log-sum of scores of all suffixes after tag k at i, EOS included.
Tensor backward_scores(const Tensor& phi, const Tensor& trans) {
  const std::size_t K = phi.rows(), n = phi.cols(), eos = K + 1;
  Tensor beta = Tensor::matrix(n, K);
  std::vector<double> terms(K);
  for (std::size_t k = 0; k < K; ++k) beta(n - 1, k) = trans(k, eos);
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        terms[k] = trans(j, k) + phi(k, i + 1) + beta(i + 1, k);
      }
      beta(i, j) = logsumexp_value(terms);
    }
  }
  return beta;
}

double final_log_partition(const Tensor& alpha, const Tensor& trans) {
  const std::size_t K = alpha.cols(), n = alpha.rows(), eos = K + 1;
  std::vector<double> terms(K);
  for (std::size_t k = 0; k < K; ++k) terms[k] = alpha(n - 1, k) + trans(k, eos);
  return logsumexp_value(terms);
}

// log Z - score(gold), with every path scored relative to the gold path so
// the gold path contributes exactly zero.
double relative_nll(const Tensor& phi, const Tensor& trans, std::span<const int> gold) {
  const std::size_t K = phi.rows(), n = phi.cols(), bos = K, eos = K + 1;
  const auto g = [&](std::size_t i) { return static_cast<std::size_t>(gold[i]); };
  std::vector<double> prev(K), cur(K), terms(K);
  for (std::size_t k = 0; k < K; ++k) {
    prev[k] = (trans(bos, k) - trans(bos, g(0))) + (phi(k, 0) - phi(g(0), 0));
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double gold_step = trans(g(i - 1), g(i));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = 0; j < K; ++j) terms[j] = prev[j] + (trans(j, k) - gold_step);
      cur[k] = (phi(k, i) - phi(g(i), i)) + logsumexp_value(terms);
    }
    std::swap(prev, cur);
  }
  const double gold_end = trans(g(n - 1), eos);
  for (std::size_t k = 0; k < K; ++k) terms[k] = prev[k] + (trans(k, eos) - gold_end);
  return logsumexp_value(terms);
}

}  // namespace

void init_parameters(ParameterStore& store, const Dims& d, Rng& rng) {
  if (d.n_intents == 0 || d.n_tags == 0) {
    throw ValidationError("decoders: label sets must be nonempty");
  }
  store.add("dec.intent_out", glorot_uniform(d.n_intents, d.d_u, rng));
  store.add("dec.intent_embed", uniform(d.n_intents, d.d_y, 0.1, rng));
  store.add("dec.emission", glorot_uniform(d.n_tags, d.d_u + d.d_y, rng));
  store.add("dec.transitions", glorot_uniform(d.n_tags + 2, d.n_tags + 2, rng));
}

DecoderVars bind_parameters(Tape& tape, ParameterStore& store) {
  return {tape.param(store.at("dec.intent_out")),
          tape.param(store.at("dec.intent_embed")),
          tape.param(store.at("dec.emission")),
          tape.param(store.at("dec.transitions"))};
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

IntentPrediction predict_intent(Var g, Var w_id) {
  Var logits = matmul(w_id, g);
  return {logits, static_cast<int>(argmax(logits.value().data()))};
}

Var intent_loss(Var logits, int gold) {
  if (gold < 0 || static_cast<std::size_t>(gold) >= logits.value().numel()) {
    throw ValidationError("intent_loss: gold label " + std::to_string(gold) +
                          " outside the intent set of size " +
                          std::to_string(logits.value().numel()));
  }
  return cross_entropy_with_logits(logits, static_cast<std::size_t>(gold));
}

Var slot_features(Var u, int intent, Var intent_embed) {
  if (intent < 0 || static_cast<std::size_t>(intent) >= intent_embed.rows()) {
    throw ValidationError("slot_features: intent " + std::to_string(intent) +
                          " outside the intent set");
  }
  Tape& tape = u.tape();
  Var e_y = transpose(slice(intent_embed, 0, static_cast<std::size_t>(intent), 1));
  Var tiled = matmul(e_y, tape.constant(Tensor::matrix(1, u.cols(), 1.0)));
  return concat({u, tiled}, 0);
}

Var crf_emissions(Var slot_feats, Var emission) {
  return matmul(emission, slot_feats);
}

std::size_t bos_index(const Tensor& transitions) { return transitions.rows() - 2; }
std::size_t eos_index(const Tensor& transitions) { return transitions.rows() - 1; }

double crf_path_score(const Tensor& phi, const Tensor& trans,
                      std::span<const int> tags) {
  check_crf_shapes(phi, trans);
  check_tags(tags, phi);
  const std::size_t bos = bos_index(trans), eos = eos_index(trans);
  double score = trans(bos, tags[0]);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    score += phi(tags[i], i);
    if (i + 1 < tags.size()) score += trans(tags[i], tags[i + 1]);
  }
  return score + trans(tags.back(), eos);
}

double crf_log_partition(const Tensor& phi, const Tensor& trans) {
  check_crf_shapes(phi, trans);
  return final_log_partition(forward_scores(phi, trans), trans);
}

Var crf_nll(Var emissions, Var transitions, std::span<const int> gold) {
  const Tensor& phi = emissions.value();
  const Tensor& trans = transitions.value();
  check_crf_shapes(phi, trans);
  if (gold.empty()) throw ValidationError("crf_nll: empty sequence");
  check_tags(gold, phi);

  Tensor alpha = forward_scores(phi, trans);
  const double log_z = final_log_partition(alpha, trans);
  const double nll = relative_nll(phi, trans, gold);

  const std::size_t ie = emissions.id(), it = transitions.id();
  std::vector<int> tags(gold.begin(), gold.end());
  return emissions.tape().record(
      Tensor::scalar(nll), {emissions, transitions},
      [ie, it, tags = std::move(tags), alpha = std::move(alpha), log_z](
          Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& phi = t.value(ie);
        const Tensor& trans = t.value(it);
        const Tensor beta = backward_scores(phi, trans);
        const std::size_t K = phi.rows(), n = phi.cols();
        const std::size_t bos = K, eos = K + 1;
        if (t.needs_grad(ie)) {
          Tensor& gphi = t.grad(ie);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
              gphi(k, i) += g * std::exp(alpha(i, k) + beta(i, k) - log_z);
            }
            gphi(tags[i], i) -= g;
          }
        }
        if (t.needs_grad(it)) {
          Tensor& gt = t.grad(it);
          for (std::size_t k = 0; k < K; ++k) {
            gt(bos, k) += g * std::exp(alpha(0, k) + beta(0, k) - log_z);
            gt(k, eos) += g * std::exp(alpha(n - 1, k) + beta(n - 1, k) - log_z);
          }
          gt(bos, tags[0]) -= g;
          gt(tags[n - 1], eos) -= g;
          for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = 0; j < K; ++j) {
              for (std::size_t k = 0; k < K; ++k) {
                gt(j, k) += g * std::exp(alpha(i, j) + trans(j, k) + phi(k, i + 1) +
                                         beta(i + 1, k) - log_z);
              }
            }
            gt(tags[i], tags[i + 1]) -= g;
          }
        }
      });
}

std::vector<int> viterbi_decode(const Tensor& phi, const Tensor& trans) {
  check_crf_shapes(phi, trans);
  const std::size_t K = phi.rows(), n = phi.cols();
  const std::size_t bos = K, eos = K + 1;
  Tensor delta = Tensor::matrix(n, K);
  std::vector<std::vector<int>> back(n, std::vector<int>(K, 0));
  for (std::size_t k = 0; k < K; ++k) delta(0, k) = trans(bos, k) + phi(k, 0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      std::size_t best = 0;
      double best_score = delta(i - 1, 0) + trans(0, k);
      for (std::size_t j = 1; j < K; ++j) {
        const double s = delta(i - 1, j) + trans(j, k);
        if (s > best_score) {
          best_score = s;
          best = j;
        }
      }
      delta(i, k) = best_score + phi(k, i);
      back[i][k] = static_cast<int>(best);
    }
  }
  std::vector<double> final_scores(K);
  for (std::size_t k = 0; k < K; ++k) final_scores[k] = delta(n - 1, k) + trans(k, eos);
  std::vector<int> path(n);
  path[n - 1] = static_cast<int>(argmax(final_scores));
  for (std::size_t i = n - 1; i > 0; --i) path[i - 1] = back[i][path[i]];
  return path;
}

Var joint_loss(Var l_id, Var l_sf, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("joint_loss: lambda must lie in [0, 1]");
  }
  const double w[2] = {lambda, 1.0 - lambda};
  return weighted_sum({l_id, l_sf}, w);
}

}  // namespace jpis::decoders
