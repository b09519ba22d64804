#include "newsrec/autodiff.hpp"

#include <algorithm>

#include "newsrec/error.hpp"

namespace newsrec {

Parameter::Parameter(std::string name_, Tensor init, bool trainable_)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(Tensor::zeros_like(value)),
      adam_m(Tensor::zeros_like(value)),
      adam_v(Tensor::zeros_like(value)),
      trainable(trainable_) {}

void Parameter::zero_grad() {
  grad.fill(0.0);
  has_grad = true;
}

void Parameter::clear_grad() {
  grad.fill(0.0);
  has_grad = false;
}

Parameter& ParameterStore::add(std::string name, Tensor init, bool trainable) {
  if (index_.contains(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, params_.size());
  return params_.emplace_back(std::move(name), std::move(init), trainable);
}

Parameter* ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter& ParameterStore::get(std::string_view name) {
  Parameter* p = find(name);
  if (!p) throw UsageError("no parameter named '" + std::string(name) + "'");
  return *p;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<Tensor> ParameterStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) {
    throw UsageError("snapshot holds " + std::to_string(values.size()) +
                     " tensors, store has " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i].value.shape()) {
      throw DimensionError("snapshot shape mismatch for " + params_[i].name);
    }
    params_[i].value = values[i];
  }
}

void ParameterStore::round_to_storage() {
  for (auto& p : params_) {
    for (double& v : p.value.values()) v = static_cast<float>(v);
  }
}

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node& node = nodes_.emplace_back();
  node.value = std::move(value);
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node& node = nodes_.emplace_back();
  node.external = &param.value;
  if (param.trainable) {
    node.param = &param;
    node.needs_grad = true;
  }
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&param, id);
  return Var(this, id);
}

Var Tape::record(Tensor value, std::vector<int> inputs, Backprop backprop) {
  bool needs = false;
  for (int in : inputs) needs = needs || nodes_[in].needs_grad;
  Node& node = nodes_.emplace_back();
  node.value = std::move(value);
  node.needs_grad = needs;
  if (needs) {
    node.inputs = std::move(inputs);
    node.backprop = std::move(backprop);
  }
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Tensor& Tape::value(int id) const {
  const Node& node = nodes_[id];
  return node.external ? *node.external : node.value;
}

Tensor& Tape::grad(int id) {
  Node& node = nodes_[id];
  if (node.param) {
    Parameter& p = *node.param;
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor::zeros_like(p.value);
    node.has_grad = true;
    return p.grad;
  }
  if (!node.has_grad) {
    node.grad = Tensor::zeros_like(value(id));
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw UsageError("loss does not belong to this tape");
  if (loss.value().size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " +
                     to_string(loss.shape()));
  }
  for (auto& [param, id] : param_nodes_) {
    if (nodes_[id].param) {
      Parameter& p = *nodes_[id].param;
      if (!p.has_grad) p.zero_grad();
    }
  }
  if (!nodes_[loss.id_].needs_grad) return;
  grad(loss.id_)[0] += 1.0;
  for (int id = loss.id_; id >= 0; --id) {
    Node& node = nodes_[id];
    if (node.has_grad && node.backprop) node.backprop(*this, id);
  }
}

}  // namespace newsrec
