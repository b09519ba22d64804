#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "newsrec/tensor.hpp"

namespace newsrec {

/// Trainable weight with its gradient and Adam moment accumulators.
struct Parameter {
  Parameter(std::string name, Tensor init, bool trainable = true);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step_count = 0;
  bool trainable = true;
  bool has_grad = false;

  void zero_grad();
  void clear_grad();
};

/// Owns every parameter of a model in registration order. Addresses are
/// stable for the lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(std::string name, Tensor init, bool trainable = true);
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;
  Parameter& get(std::string_view name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);
  /// Rounds every value to the nearest float, the persisted precision.
  void round_to_storage();

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to one node of a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Ordered record of primitive applications. Nodes are appended in
/// evaluation order, so every input precedes its consumers and a reverse
/// sweep is a valid reverse-topological traversal.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. Non-trainable parameters behave as constants.
  /// Repeated calls for the same parameter return the same node.
  Var parameter(Parameter& param);
  /// Appends the result of a primitive. `backprop` is dropped when no input
  /// needs a gradient.
  Var record(Tensor value, std::vector<int> inputs, Backprop backprop);

  const Tensor& value(int id) const;
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  /// Gradient accumulator of a node, zero-allocated on first access.
  Tensor& grad(int id);

  /// Reverse sweep from a scalar loss. Gradients accumulate into every
  /// parameter bound to this tape; bound parameters off the loss path end
  /// with an explicit zero gradient.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Parameter* param = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    std::vector<int> inputs;
    Backprop backprop;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace newsrec
