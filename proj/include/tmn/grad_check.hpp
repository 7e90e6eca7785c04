#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tmn/tape.hpp"

namespace tmn {

/// Builds a computation on `tape` from the given input leaves.
using Graph = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct Evaluation {
  Tape tape;
  std::vector<Var> inputs;
  Var output;
};

/// Records `graph` on a fresh tape with every input as a differentiable leaf.
Evaluation forward_eval(const Graph& graph, std::vector<Tensor> inputs);

/// Reverse pass from the scalar output; one gradient per input.
std::vector<Tensor> backward_grad(Evaluation& eval, double seed = 1.0);

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  /// Distance of the evaluation point from the nearest kink of a piecewise primitive.
  double kink_distance = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares reverse-mode gradients with central differences of step h.
/// Error per entry is |analytic − numeric| / max(1, |analytic|).
FiniteDiffReport finite_diff_report(const Graph& graph, std::vector<Tensor> inputs, double h);
double finite_diff_check(const Graph& graph, std::vector<Tensor> inputs, double h);

/// Same comparison on an already recorded tape, restricted to `leaves`.
FiniteDiffReport finite_diff_report(Tape& tape, std::span<const Var> leaves, Var output, double h);

}  // namespace tmn
