#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "jpis/parameter.hpp"
#include "jpis/tensor.hpp"

namespace jpis {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive applications in execution order and replays them in
/// reverse to compute gradients. One tape per batch; discard after use.
///
/// Nodes whose inputs are all constants are stored without a backward
/// closure. Parameter leaves reference the parameter's value in place, so a
/// parameter must not be modified while a tape bound to it is alive.
class Tape {
 public:
  /// Receives the tape and the id of the node whose gradient is ready.
  using Backward = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; repeated calls return the same node.
  Var param(Parameter& p);

  /// Appends a node. `backward` is dropped when recording is off or when
  /// no input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, const std::vector<Var>& inputs, Backward backward);

  const Tensor& value(std::size_t id) const;
  /// Gradient slot of node `id`, allocated as zeros on first access.
  Tensor& grad(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Reverse sweep from a one-element `loss`, then accumulates leaf
  /// gradients into the bound parameters (`grad += scale * dloss/dvalue`).
  void backward(Var loss, double scale = 1.0);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Set by primitives whose output depends on random draws (dropout).
  void mark_stochastic() { stochastic_ = true; }
  bool stochastic() const { return stochastic_; }

 private:
  struct Node {
    Tensor own;
    const Tensor* external = nullptr;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  bool any_needs_grad(std::span<const Var> inputs) const;

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool recording_;
  bool stochastic_ = false;
};

}  // namespace jpis
