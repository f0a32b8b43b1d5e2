#include "jpis/parameter.hpp"

#include <cmath>

#include "jpis/errors.hpp"

namespace jpis {

ParameterStore::ParameterStore(const ParameterStore& other) { *this = other; }

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    Parameter& mine = add(p->name, p->value);
    mine.grad = p->grad;
    mine.has_grad = p->has_grad;
  }
  return *this;
}

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (index_.count(name)) {
    throw ValidationError("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(value.shape(), 0.0);
  p->value = std::move(value);
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  if (Parameter* p = find(name)) return *p;
  throw ValidationError("unknown parameter: " + name);
}

const Parameter& ParameterStore::at(const std::string& name) const {
  if (const Parameter* p = find(name)) return *p;
  throw ValidationError("unknown parameter: " + name);
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) {
    p->grad.fill(0.0);
    p->has_grad = false;
  }
}

bool ParameterStore::any_grad() const {
  for (const auto& p : params_) {
    if (p->has_grad) return true;
  }
  return false;
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (double g : p->grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

void ParameterStore::scale_grads(double factor) {
  for (auto& p : params_) {
    for (double& g : p->grad.data()) g *= factor;
  }
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) {
    throw ValidationError("parameter store size mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Parameter& src = other[i];
    Parameter& dst = *params_[i];
    if (src.name != dst.name || !(src.value.shape() == dst.value.shape())) {
      throw ValidationError("parameter layout mismatch at " + dst.name);
    }
    dst.value = src.value;
  }
}

Tensor uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  return uniform(rows, cols,
                 std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

}  // namespace jpis
