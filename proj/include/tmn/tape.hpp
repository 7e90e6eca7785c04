#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "tmn/tensor.hpp"

namespace tmn {

/// A differentiable operation recorded on a Tape.
///
/// `forward` validates shapes (throwing DimensionError) and returns the output.
/// `backward` accumulates into the non-null entries of `input_grads`; a null
/// entry means that input does not need a gradient.
class Primitive {
 public:
  virtual ~Primitive() = default;
  virtual std::string_view name() const = 0;
  virtual Tensor forward(std::span<const Tensor* const> inputs) const = 0;
  virtual void backward(std::span<const Tensor* const> inputs, const Tensor& output,
                        const Tensor& output_grad, std::span<Tensor* const> input_grads) const = 0;
  /// Distance from the inputs to the nearest non-differentiable point.
  virtual double kink_distance(std::span<const Tensor* const> /*inputs*/) const {
    return std::numeric_limits<double>::infinity();
  }
};

/// Handle to a node on a Tape.
struct Var {
  std::size_t index = 0;
};

/// Eager reverse-mode tape. Every op is evaluated as it is recorded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Adds an input. Non-finite values raise NumericError.
  Var leaf(Tensor value, bool requires_grad = true);
  Var apply(std::unique_ptr<Primitive> primitive, std::vector<Var> inputs);

  const Tensor& value(Var v) const { return nodes_.at(v.index).value; }
  /// Adjoint from the last backward pass; empty if the node needs no gradient.
  const Tensor& grad(Var v) const { return nodes_.at(v.index).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }
  bool is_leaf(Var v) const { return !nodes_.at(v.index).primitive; }
  std::size_t size() const { return nodes_.size(); }

  /// Replaces a leaf value. Call replay() to refresh dependent nodes.
  void set_leaf(Var v, Tensor value);
  /// Recomputes every non-leaf node from the current leaf values.
  void replay();
  /// Reverse pass from a 1×1 root. Adjoints are reset to zero first.
  void backward(Var root, double seed = 1.0);

  /// Smallest kink distance over all recorded primitives.
  double kink_distance() const;

 private:
  struct Node {
    std::unique_ptr<Primitive> primitive;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
  };

  Tensor evaluate(const Node& node) const;

  std::vector<Node> nodes_;
};

}  // namespace tmn
