#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "jpis/tensor.hpp"

namespace jpis {

using Rng = std::mt19937_64;

/// A trainable tensor with its gradient slot.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Set when a backward pass has accumulated into `grad` since the last
  /// zero_grad().
  bool has_grad = false;
};

/// Named, insertion-ordered collection of parameters. Parameter addresses
/// are stable for the lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter& add(std::string name, Tensor value);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  bool any_grad() const;
  double grad_norm() const;
  void scale_grads(double factor);

  /// Copies values (not gradients) from a store with identical names/shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Uniform(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))) for a rows x cols matrix.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng);

}  // namespace jpis
