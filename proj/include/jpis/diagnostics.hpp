#pragma once

#include <cstdint>

#include "jpis/grad_check.hpp"
#include "jpis/model.hpp"

namespace jpis {

inline constexpr double kTinyLambda = 0.5;

/// A three-token utterance over 3 intents and 4 slot types, with every
/// hidden size set to 8 and dropout off. Used by `gradcheck`.
struct TinySetup {
  JpisModel model;
  Example example;
};
TinySetup make_tiny_setup(Ablation ablation, std::uint64_t seed);

/// Adam steps on the single example until the joint loss drops below
/// `target_loss`. Returns the final loss.
double fit_tiny(TinySetup& setup, double target_loss, std::size_t max_steps);

/// Central-difference check of the joint loss (teacher forcing on) over
/// every parameter of the tiny model. With target_loss > 0 the model is
/// first fitted down to that loss: finite differences lose absolute
/// precision in proportion to the loss value, and near-zero gradients are
/// judged against an absolute floor, so the check is only meaningful where
/// the loss is O(0.1) or smaller.
GradCheckReport tiny_grad_check(Ablation ablation, std::uint64_t seed, double epsilon,
                                double target_loss = 0.0);

}  // namespace jpis
