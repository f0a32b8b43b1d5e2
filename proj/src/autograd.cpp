#include "jpis/autograd.hpp"

#include "jpis/errors.hpp"

namespace jpis {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = recording_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

bool Tape::any_needs_grad(std::span<const Var> inputs) const {
  for (const Var& v : inputs) {
    if (v.tape_ != this) {
      throw ValidationError("primitive input recorded on a different tape");
    }
    if (nodes_[v.id_].needs_grad) return true;
  }
  return false;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs,
                 Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs,
                 Backward backward) {
  Node n;
  n.own = std::move(value);
  if (recording_ && any_needs_grad(inputs)) {
    n.needs_grad = true;
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.own;
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss, double scale) {
  if (loss.tape_ != this) {
    throw ValidationError("backward: loss belongs to a different tape");
  }
  if (value(loss.id_).numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     value(loss.id_).shape().str());
  }
  if (!recording_) {
    throw ValidationError("backward: tape was not recording");
  }
  grad(loss.id_)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    auto dst = n.param->grad.data();
    auto src = n.grad.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    n.param->has_grad = true;
  }
}

}  // namespace jpis
