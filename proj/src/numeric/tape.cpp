#include "tmn/tape.hpp"

#include <algorithm>
#include <string>

#include "tmn/error.hpp"

namespace tmn {

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf: non-finite input value");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tensor Tape::evaluate(const Node& node) const {
  std::vector<const Tensor*> inputs;
  inputs.reserve(node.inputs.size());
  for (std::size_t i : node.inputs) inputs.push_back(&nodes_[i].value);
  Tensor out = node.primitive->forward(inputs);
  if (!out.all_finite()) {
    throw NumericError(std::string(node.primitive->name()) + ": produced a non-finite value");
  }
  return out;
}

Var Tape::apply(std::unique_ptr<Primitive> primitive, std::vector<Var> inputs) {
  Node node;
  node.primitive = std::move(primitive);
  node.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    if (v.index >= nodes_.size()) throw ContractError("tape: input from another tape");
    node.inputs.push_back(v.index);
    node.requires_grad = node.requires_grad || nodes_[v.index].requires_grad;
  }
  node.value = evaluate(node);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::set_leaf(Var v, Tensor value) {
  Node& node = nodes_.at(v.index);
  if (node.primitive) throw ContractError("set_leaf: node is not a leaf");
  if (!value.same_shape(node.value)) {
    throw DimensionError("set_leaf: shape " + value.shape_string() + " does not match " +
                         node.value.shape_string());
  }
  if (!value.all_finite()) throw NumericError("leaf: non-finite input value");
  node.value = std::move(value);
}

void Tape::replay() {
  for (Node& node : nodes_) {
    if (node.primitive) node.value = evaluate(node);
  }
}

void Tape::backward(Var root, double seed) {
  if (root.index >= nodes_.size()) throw ContractError("backward: unknown root");
  if (!nodes_[root.index].value.is_scalar()) {
    throw ContractError("backward: root has shape " + nodes_[root.index].value.shape_string() +
                        ", expected a scalar");
  }
  for (Node& node : nodes_) {
    node.grad = node.requires_grad ? Tensor(node.value.rows(), node.value.cols()) : Tensor();
  }
  if (!nodes_[root.index].requires_grad) return;
  nodes_[root.index].grad[0] = seed;

  std::vector<const Tensor*> inputs;
  std::vector<Tensor*> input_grads;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.primitive || !node.requires_grad) continue;
    inputs.clear();
    input_grads.clear();
    bool any = false;
    for (std::size_t in : node.inputs) {
      inputs.push_back(&nodes_[in].value);
      Tensor* g = nodes_[in].requires_grad ? &nodes_[in].grad : nullptr;
      any = any || g != nullptr;
      input_grads.push_back(g);
    }
    if (any) node.primitive->backward(inputs, node.value, node.grad, input_grads);
  }
}

double Tape::kink_distance() const {
  double best = std::numeric_limits<double>::infinity();
  std::vector<const Tensor*> inputs;
  for (const Node& node : nodes_) {
    if (!node.primitive) continue;
    inputs.clear();
    for (std::size_t in : node.inputs) inputs.push_back(&nodes_[in].value);
    best = std::min(best, node.primitive->kink_distance(inputs));
  }
  return best;
}

}  // namespace tmn
