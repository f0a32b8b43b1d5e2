#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "jpis/ops.hpp"

namespace jpis::encoder {

enum class ProfileKind { UserProfile, ContextAwareness };

struct ProfileField {
  ProfileKind kind = ProfileKind::UserProfile;
  std::string name;
  std::size_t dim = 0;
  /// When set, every vector supplied for this field must sum to 1 +- 1e-4.
  bool distribution = false;
};

/// Ordered profile layout: all UP fields first, then all CA fields.
struct ProfileManifest {
  std::vector<ProfileField> fields;

  std::size_t m() const;
  std::size_t t() const;
  /// Field i of the UP block / CA block.
  const ProfileField& user_field(std::size_t i) const { return fields[i]; }
  const ProfileField& context_field(std::size_t i) const { return fields[m() + i]; }
  void validate() const;
};

/// Supporting profile information for one utterance.
struct ProfileSet {
  std::vector<std::vector<double>> up;
  std::vector<std::vector<double>> ca;

  bool operator==(const ProfileSet&) const = default;
};

void validate_profile(const ProfileSet& profile, const ProfileManifest& manifest);

/// Which profile columns enter the fusion attention.
enum class ProfileMode { Full, NoUserProfile, NoContextAwareness, NoProfile };

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t word_dim = 256;
  std::size_t lstm_hidden = 64;
  std::size_t sa_dim = 128;
  std::size_t key_dim = 64;
  std::size_t d_p = 128;
  double dropout = 0.4;
  ProfileManifest manifest;

  std::size_t d_e() const { return sa_dim + 2 * lstm_hidden; }
  /// Width of U: d_e + d_p, or d_e alone when profiles are ablated.
  std::size_t d_u(ProfileMode mode) const;
  void validate(ProfileMode mode) const;
};

/// Gate order within the 4H columns: input, forget, cell candidate, output.
struct LstmWeights {
  Var input;      // in x 4H
  Var recurrent;  // H x 4H
  Var bias;       // 1 x 4H
};

struct AttentionWeights {
  Var query;  // word_dim x key_dim
  Var key;    // word_dim x key_dim
  Var value;  // word_dim x sa_dim
};

struct EncoderVars {
  Var embedding;
  LstmWeights forward;
  LstmWeights backward;
  AttentionWeights attention;
  std::vector<Var> up_proj;  // d_p x dim(x_j^UP)
  std::vector<Var> ca_proj;  // d_p x dim(x_j^CA)
  Var fusion;                // d_e x d_p
};

/// Registers every encoder parameter under the "enc." prefix.
void init_parameters(ParameterStore& store, const EncoderConfig& config, Rng& rng);
EncoderVars bind_parameters(Tape& tape, ParameterStore& store,
                            const EncoderConfig& config);

struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;  // null: evaluation mode
};

Var embed_tokens(Var table, std::span<const int> ids, DropoutSpec dropout = {});

/// One LSTM direction with zero initial state; row i is the state after
/// consuming input row i (scanning right-to-left when `reverse`).
Var lstm_direction(Var inputs, const LstmWeights& w, bool reverse);
/// n x 2H: forward state then backward state for every position.
Var bilstm_encode(Var embedded, const LstmWeights& forward,
                  const LstmWeights& backward);

/// Single-head scaled dot-product attention. Keys whose `valid` flag is
/// false are excluded from every query's softmax.
Var self_attention_encode(Var embedded, const AttentionWeights& w,
                          const std::vector<bool>* valid = nullptr);

/// e_i = BiLSTM_i (+) SA_i.
Var concat_context(Var bilstm, Var self_attn);

/// d_p x (m+t) matrix of projected profile vectors, UP columns first. Blocks
/// switched off by `use_up` / `use_ca` are omitted.
Var project_profiles(Tape& tape, const ProfileSet& profile,
                     const ProfileManifest& manifest,
                     std::span<const Var> up_proj, std::span<const Var> ca_proj,
                     bool use_up = true, bool use_ca = true);

struct FusionResult {
  Var weights;  // n x (m+t), rows sum to 1
  Var fused;    // n x d_p, row i = e_i'
};

/// Multiplicative attention of each token over the profile columns.
FusionResult profile_fusion(Var context, Var profile_matrix, Var w_p);

/// U (d_u x n). Dropout, when enabled, hits the word embeddings and U.
Var encode_utterance(Tape& tape, std::span<const int> ids,
                     const ProfileSet& profile, const EncoderVars& vars,
                     const EncoderConfig& config, ProfileMode mode,
                     DropoutSpec dropout = {});

}  // namespace jpis::encoder
