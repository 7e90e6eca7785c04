#include <algorithm>
#include <optional>

#include "tmn/error.hpp"
#include "tmn/model.hpp"
#include "tmn/ops.hpp"

namespace tmn {

std::vector<double> GatingSet::flatten() const {
  std::vector<double> flat;
  for (const Tensor& g : gates) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      for (std::size_t k = 0; k < g.rows(); ++k) flat.push_back(g(k, j));
    }
  }
  return flat;
}

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad) {
  BoundParams bound;
  bound.params = &params;
  bound.leaves.reserve(params.blocks.size());
  for (const auto& b : params.blocks) bound.leaves.push_back(tape.leaf(b.value, requires_grad));
  return bound;
}

namespace {

bool shared_gating(ModelKind kind) {
  return kind == ModelKind::ablation_a || kind == ModelKind::ablation_b;
}

// [object embedding ; attribute embedding], one row per pair.
Var pair_embeddings(Tape& tape, const BoundParams& bound, std::span<const ConceptPair> pairs) {
  std::vector<std::size_t> objects, attributes;
  for (ConceptPair p : pairs) {
    bound.params->vocab.check(p);
    objects.push_back(p.object);
    attributes.push_back(p.attribute);
  }
  const Var parts[] = {ops::gather_rows(tape, bound["object_embedding"], std::move(objects)),
                       ops::gather_rows(tape, bound["attribute_embedding"], std::move(attributes))};
  return ops::concat_cols(tape, parts);
}

void check_features(const Tape& tape, const ModelParams& params, Var features) {
  const Tensor& x = tape.value(features);
  if (x.cols() != params.config.input_dim) {
    throw DimensionError("features have " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(params.config.input_dim));
  }
}

// Layers 2..L on top of the layer-1 output h. Layer 1 has a single source
// module, so its gates are exactly 1 and it needs no mixing.
Var upper_layers(Tape& tape, const BoundParams& bound, Var h, Var logits, std::size_t row) {
  const ModularNetConfig& c = bound.params->config;
  for (std::size_t i = 2; i <= c.num_layers(); ++i) {
    const std::string stem = "module" + std::to_string(i);
    const Var g = layer_gates(tape, c, logits, row, i);
    const Var mixed = ops::module_mix(tape, h, g);
    h = ops::relu(tape, ops::block_affine(tape, bound[stem + "_w"], bound[stem + "_b"], mixed,
                                          c.modules_out(i)));
  }
  return h;
}

Var first_layer(Tape& tape, const BoundParams& bound, Var features) {
  return ops::relu(tape, ops::affine(tape, bound["module1_w"], bound["module1_b"], features));
}

// Logits are stored destination-major, so the flat slice is M_out×M_in.
Var layer_logits(Tape& tape, const ModularNetConfig& c, Var logits, std::size_t row,
                 std::size_t layer) {
  return ops::transpose(tape, ops::slice_reshape(tape, logits, row, c.gate_offset(layer),
                                                 c.modules_out(layer), c.modules_in(layer)));
}

Var pair_row(Tape& tape, Var table, std::size_t p) { return ops::gather_rows(tape, table, {p}); }

// Layer-1 pre-activation split into its image part (shared by all pairs) and
// its pair part, so that the concatenated input is never materialised.
struct SplitInput {
  Var image;  // rows × M1·d, no bias
  Var pairs;  // pairs × M1·d, with bias
};

SplitInput split_first_layer(Tape& tape, const BoundParams& bound, Var features,
                             std::span<const ConceptPair> pairs) {
  const ModularNetConfig& c = bound.params->config;
  const Var w = bound["module1_w"];
  const Var wx = ops::slice_cols(tape, w, 0, c.input_dim);
  const Var we = ops::slice_cols(tape, w, c.input_dim, 2 * c.embedding_dim);
  const Var zero = tape.leaf(Tensor(1, c.modules_out(1) * c.module_dim), false);
  return {ops::affine(tape, wx, zero, features),
          ops::affine(tape, we, bound["module1_b"], pair_embeddings(tape, bound, pairs))};
}

Var image_embedding(Tape& tape, const BoundParams& bound, Var features) {
  const Var h = ops::relu(
      tape, ops::affine(tape, bound["image_hidden_w"], bound["image_hidden_b"], features));
  return ops::affine(tape, bound["image_out_w"], bound["image_out_b"], h);
}

Var label_embedding(Tape& tape, const BoundParams& bound, std::span<const ConceptPair> pairs) {
  const Var h = ops::relu(tape, ops::affine(tape, bound["pair_hidden_w"], bound["pair_hidden_b"],
                                            pair_embeddings(tape, bound, pairs)));
  return ops::affine(tape, bound["pair_out_w"], bound["pair_out_b"], h);
}

Var score_block_impl(Tape& tape, const BoundParams& bound, Var features,
                     std::span<const ConceptPair> pairs, std::optional<Var> cached_logits) {
  const ModelParams& params = *bound.params;
  check_features(tape, params, features);
  if (pairs.empty()) throw ContractError("score_block: no candidate pairs");

  switch (params.kind) {
    case ModelKind::tmn: {
      const Var h1 = first_layer(tape, bound, features);
      const Var logits = cached_logits ? *cached_logits : gate_logits(tape, bound, pairs);
      std::vector<Var> columns;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const Var h = upper_layers(tape, bound, h1, logits, p);
        columns.push_back(ops::affine(tape, bound["proj_w"], bound["proj_b"], h));
      }
      return ops::concat_cols(tape, columns);
    }
    case ModelKind::ablation_a: {
      const SplitInput in = split_first_layer(tape, bound, features, pairs);
      const Var logits = bound["shared_gate_logits"];
      std::vector<Var> columns;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const Var h1 = ops::relu(tape, ops::add_row(tape, in.image, pair_row(tape, in.pairs, p)));
        const Var h = upper_layers(tape, bound, h1, logits, 0);
        columns.push_back(ops::affine(tape, bound["proj_w"], bound["proj_b"], h));
      }
      return ops::concat_cols(tape, columns);
    }
    case ModelKind::ablation_b: {
      const Var f =
          upper_layers(tape, bound, first_layer(tape, bound, features), bound["shared_gate_logits"], 0);
      const Var q = ops::affine(tape, bound["pair_proj_w"], bound["pair_proj_b"],
                                pair_embeddings(tape, bound, pairs));
      return ops::matmul(tape, f, ops::transpose(tape, q));
    }
    case ModelKind::labelembed: {
      const Var fi = image_embedding(tape, bound, features);
      const Var fp = label_embedding(tape, bound, pairs);
      return ops::matmul(tape, fi, ops::transpose(tape, fp));
    }
  }
  throw ContractError("score_block: unknown model kind");
}

void require_kind(const ModelParams& params, ModelKind kind, std::string_view op) {
  if (params.kind != kind) {
    throw ContractError(std::string(op) + " needs a " + std::string(to_string(kind)) +
                        " model, got " + std::string(to_string(params.kind)));
  }
}

Tensor as_row(const Tensor& x) {
  if (x.rows() == 1) return x;
  if (x.cols() == 1) return Tensor(1, x.rows(), std::vector<double>(x.values().begin(), x.values().end()));
  throw DimensionError("expected a single feature vector, got " + x.shape_string());
}

}  // namespace

Var gate_logits(Tape& tape, const BoundParams& bound, std::span<const ConceptPair> pairs) {
  const ModelParams& params = *bound.params;
  if (shared_gating(params.kind)) {
    for (ConceptPair p : pairs) params.vocab.check(p);
    return bound["shared_gate_logits"];
  }
  if (params.kind != ModelKind::tmn) {
    throw ContractError("model " + std::string(to_string(params.kind)) + " has no gating network");
  }
  const Var e = pair_embeddings(tape, bound, pairs);
  const Var h =
      ops::relu(tape, ops::affine(tape, bound["gate_hidden_w"], bound["gate_hidden_b"], e));
  return ops::affine(tape, bound["gate_out_w"], bound["gate_out_b"], h);
}

Var layer_gates(Tape& tape, const ModularNetConfig& config, Var logits, std::size_t row,
                std::size_t layer) {
  return ops::column_softmax(tape, layer_logits(tape, config, logits, row, layer));
}

Var score_block(Tape& tape, const BoundParams& bound, Var features,
                std::span<const ConceptPair> pairs) {
  return score_block_impl(tape, bound, features, pairs, std::nullopt);
}

Var feature_block(Tape& tape, const BoundParams& bound, Var features, ConceptPair pair) {
  const ModelParams& params = *bound.params;
  check_features(tape, params, features);
  const ConceptPair pairs[] = {pair};
  switch (params.kind) {
    case ModelKind::tmn:
      return upper_layers(tape, bound, first_layer(tape, bound, features),
                          gate_logits(tape, bound, pairs), 0);
    case ModelKind::ablation_a: {
      const SplitInput in = split_first_layer(tape, bound, features, pairs);
      const Var h1 = ops::relu(tape, ops::add_row(tape, in.image, in.pairs));
      return upper_layers(tape, bound, h1, bound["shared_gate_logits"], 0);
    }
    case ModelKind::ablation_b:
      params.vocab.check(pair);
      return upper_layers(tape, bound, first_layer(tape, bound, features),
                          bound["shared_gate_logits"], 0);
    case ModelKind::labelembed:
      params.vocab.check(pair);
      return image_embedding(tape, bound, features);
  }
  throw ContractError("feature_block: unknown model kind");
}

GatingSet gate(const ModelParams& params, ConceptPair pair) {
  Tape tape;
  const BoundParams bound = bind(tape, params, false);
  const ConceptPair pairs[] = {pair};
  const Var logits = gate_logits(tape, bound, pairs);
  const ModularNetConfig& c = params.config;
  GatingSet set;
  for (std::size_t i = 1; i <= c.num_layers(); ++i) {
    const Var q = layer_logits(tape, c, logits, 0, i);
    set.logits.push_back(tape.value(q));
    set.gates.push_back(tape.value(ops::column_softmax(tape, q)));
  }
  return set;
}

Tensor modular_forward(const ModelParams& params, const Tensor& x, const GatingSet& gates) {
  if (params.kind == ModelKind::labelembed) {
    throw ContractError("modular_forward: labelembed has no modular network");
  }
  const ModularNetConfig& c = params.config;
  if (gates.gates.size() != c.num_layers()) {
    throw DimensionError("modular_forward: " + std::to_string(gates.gates.size()) +
                         " gate layers for a " + std::to_string(c.num_layers()) + "-layer network");
  }
  Tape tape;
  Var h = tape.leaf(as_row(x), false);
  for (std::size_t i = 1; i <= c.num_layers(); ++i) {
    const Tensor& g = gates.gates[i - 1];
    if (g.rows() != c.modules_in(i) || g.cols() != c.modules_out(i)) {
      throw DimensionError("modular_forward: layer " + std::to_string(i) + " gates are " +
                           g.shape_string() + ", expected " + std::to_string(c.modules_in(i)) +
                           "x" + std::to_string(c.modules_out(i)));
    }
    const std::string stem = "module" + std::to_string(i);
    const Var w = tape.leaf(params.at(stem + "_w"), false);
    const Var b = tape.leaf(params.at(stem + "_b"), false);
    const Var mixed = ops::module_mix(tape, h, tape.leaf(g, false));
    h = ops::relu(tape, ops::block_affine(tape, w, b, mixed, c.modules_out(i)));
  }
  return tape.value(h);
}

double score(const ModelParams& params, const Tensor& x, ConceptPair pair) {
  Tape tape;
  const BoundParams bound = bind(tape, params, false);
  const Var features = tape.leaf(as_row(x), false);
  const ConceptPair pairs[] = {pair};
  return tape.value(score_block(tape, bound, features, pairs)).item();
}

double variant_task_agnostic_score(const ModelParams& params, const Tensor& x, ConceptPair pair) {
  require_kind(params, ModelKind::ablation_a, "variant_task_agnostic_score");
  return score(params, x, pair);
}

double variant_no_joint_score(const ModelParams& params, const Tensor& x, ConceptPair pair) {
  require_kind(params, ModelKind::ablation_b, "variant_no_joint_score");
  return score(params, x, pair);
}

double baseline_labelembed_score(const ModelParams& params, const Tensor& x, ConceptPair pair) {
  require_kind(params, ModelKind::labelembed, "baseline_labelembed_score");
  return score(params, x, pair);
}

Tensor score_matrix(const ModelParams& params, const Tensor& samples,
                    std::span<const ConceptPair> pairs, bool cache_gates) {
  if (pairs.empty()) throw ContractError("score_matrix: no candidate pairs");
  if (samples.rows() == 0) throw ContractError("score_matrix: no samples");
  if (samples.cols() != params.config.input_dim) {
    throw DimensionError("score_matrix: samples have " + std::to_string(samples.cols()) +
                         " columns, model expects " + std::to_string(params.config.input_dim));
  }
  Tensor out(samples.rows(), pairs.size());

  if (!cache_gates) {
    for (std::size_t r = 0; r < samples.rows(); ++r) {
      const Tensor x = Tensor::row(samples.row_span(r));
      for (std::size_t p = 0; p < pairs.size(); ++p) out(r, p) = score(params, x, pairs[p]);
    }
    return out;
  }

  std::optional<Tensor> logits;
  if (params.kind == ModelKind::tmn) {
    Tape tape;
    const BoundParams bound = bind(tape, params, false);
    logits = tape.value(gate_logits(tape, bound, pairs));
  }

  // Chunks bound the tape size; each entry depends only on its own row and pair.
  constexpr std::size_t kRowChunk = 256;
  constexpr std::size_t kPairChunk = 64;
  for (std::size_t r0 = 0; r0 < samples.rows(); r0 += kRowChunk) {
    const std::size_t nr = std::min(kRowChunk, samples.rows() - r0);
    Tensor rows(nr, samples.cols(),
                std::vector<double>(samples.data() + r0 * samples.cols(),
                                    samples.data() + (r0 + nr) * samples.cols()));
    for (std::size_t p0 = 0; p0 < pairs.size(); p0 += kPairChunk) {
      const std::size_t np = std::min(kPairChunk, pairs.size() - p0);
      Tape tape;
      const BoundParams bound = bind(tape, params, false);
      const Var features = tape.leaf(rows, false);
      std::optional<Var> cached;
      if (logits) {
        Tensor part(np, logits->cols(),
                    std::vector<double>(logits->data() + p0 * logits->cols(),
                                        logits->data() + (p0 + np) * logits->cols()));
        cached = tape.leaf(std::move(part), false);
      }
      const Tensor& s =
          tape.value(score_block_impl(tape, bound, features, pairs.subspan(p0, np), cached));
      for (std::size_t r = 0; r < nr; ++r) {
        for (std::size_t p = 0; p < np; ++p) out(r0 + r, p0 + p) = s(r, p);
      }
    }
  }
  return out;
}

DenseLayer dense_equivalent(const ModelParams& params, const GatingSet& gates, std::size_t layer) {
  const ModularNetConfig& c = params.config;
  if (layer < 1 || layer > c.num_layers()) {
    throw ContractError("dense_equivalent: layer " + std::to_string(layer) + " outside 1.." +
                        std::to_string(c.num_layers()));
  }
  const std::string stem = "module" + std::to_string(layer);
  const Tensor& w = params.at(stem + "_w");
  const Tensor& g = gates.gates.at(layer - 1);
  const std::size_t m_in = c.modules_in(layer);
  const std::size_t m_out = c.modules_out(layer);
  const std::size_t d_out = c.module_dim;
  const std::size_t d_in = w.cols();
  if (g.rows() != m_in || g.cols() != m_out) {
    throw DimensionError("dense_equivalent: gates " + g.shape_string() + " for layer " +
                         std::to_string(layer));
  }
  DenseLayer dense{Tensor(m_out * d_out, m_in * d_in), params.at(stem + "_b")};
  for (std::size_t j = 0; j < m_out; ++j) {
    for (std::size_t k = 0; k < m_in; ++k) {
      for (std::size_t a = 0; a < d_out; ++a) {
        for (std::size_t b = 0; b < d_in; ++b) {
          dense.weight(j * d_out + a, k * d_in + b) = g(k, j) * w(j * d_out + a, b);
        }
      }
    }
  }
  return dense;
}

}  // namespace tmn
