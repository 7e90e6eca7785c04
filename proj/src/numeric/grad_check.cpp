#include "tmn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "tmn/error.hpp"

namespace tmn {

Evaluation forward_eval(const Graph& graph, std::vector<Tensor> inputs) {
  Evaluation eval;
  eval.inputs.reserve(inputs.size());
  for (Tensor& t : inputs) eval.inputs.push_back(eval.tape.leaf(std::move(t)));
  eval.output = graph(eval.tape, eval.inputs);
  return eval;
}

std::vector<Tensor> backward_grad(Evaluation& eval, double seed) {
  eval.tape.backward(eval.output, seed);
  std::vector<Tensor> grads;
  grads.reserve(eval.inputs.size());
  for (Var v : eval.inputs) grads.push_back(eval.tape.grad(v));
  return grads;
}

FiniteDiffReport finite_diff_report(Tape& tape, std::span<const Var> leaves, Var output, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ContractError("finite_diff_check: step outside [1e-7, 1e-3]");
  FiniteDiffReport report;
  report.kink_distance = tape.kink_distance();
  tape.backward(output);
  std::vector<Tensor> analytic;
  for (Var v : leaves) analytic.push_back(tape.grad(v));

  for (std::size_t l = 0; l < leaves.size(); ++l) {
    if (!tape.requires_grad(leaves[l])) continue;
    Tensor point = tape.value(leaves[l]);
    for (std::size_t i = 0; i < point.size(); ++i) {
      Tensor shifted = point;
      shifted[i] = point[i] + h;
      tape.set_leaf(leaves[l], shifted);
      tape.replay();
      const double up = tape.value(output).item();
      shifted[i] = point[i] - h;
      tape.set_leaf(leaves[l], shifted);
      tape.replay();
      const double down = tape.value(output).item();
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[l][i];
      report.max_relative_error =
          std::max(report.max_relative_error, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
      ++report.entries_checked;
    }
    tape.set_leaf(leaves[l], point);
  }
  tape.replay();
  return report;
}

FiniteDiffReport finite_diff_report(const Graph& graph, std::vector<Tensor> inputs, double h) {
  Evaluation eval = forward_eval(graph, std::move(inputs));
  return finite_diff_report(eval.tape, eval.inputs, eval.output, h);
}

double finite_diff_check(const Graph& graph, std::vector<Tensor> inputs, double h) {
  return finite_diff_report(graph, std::move(inputs), h).max_relative_error;
}

}  // namespace tmn
