#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jpis/autograd.hpp"

// Differentiable primitives. Every primitive validates operand shapes and
// throws ShapeError naming itself and the offending shapes. Matrix
// primitives operate on rank-2 tensors; vectors are 1 x d or d x 1.
namespace jpis {

/// One flag per element, row-major; false marks an excluded position.
using Mask = std::vector<bool>;

/// Broadcasts a per-column validity vector to every row of a rows x cols mask.
Mask column_mask(std::size_t rows, const std::vector<bool>& valid_cols);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Concatenation of matrices along `axis` (1 = last axis, the default).
Var concat(const std::vector<Var>& parts, std::size_t axis = 1);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t count);

Var tanh(Var a);
Var sigmoid(Var a);

/// Softmax over each row. Masked elements get probability exactly 0; a row
/// with every element masked is all zeros.
Var softmax_rows(Var a, const Mask* mask = nullptr);

/// Row i of the result is row ids[i] of `table`.
Var embedding(Var table, std::span<const int> ids);

/// Inverted dropout: zeroes each element with probability `rate` and scales
/// survivors by 1/(1-rate). Identity when `rng` is null or rate is 0.
Var dropout(Var a, double rate, Rng* rng);

/// log(sum(exp(a))) over all elements, computed as max + log(sum(exp(a-max))).
Var logsumexp(Var a);
Var sum(Var a);
/// sum_k weights[k] * parts[k]; all parts share one shape.
Var weighted_sum(const std::vector<Var>& parts, std::span<const double> weights);
/// -log softmax(logits)[gold] over the flattened logits.
Var cross_entropy_with_logits(Var logits, std::size_t gold);

/// Non-differentiable helper shared by several modules.
double logsumexp_value(std::span<const double> values);

}  // namespace jpis
