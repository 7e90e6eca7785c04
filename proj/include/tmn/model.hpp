#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmn/concepts.hpp"
#include "tmn/tape.hpp"
#include "tmn/tensor.hpp"

namespace tmn {

/// Scoring model family.
///  - tmn:        task-driven gating of the modular network.
///  - ablation_a: one learned gating shared by all pairs; pair embedding fed at the input.
///  - ablation_b: shared gating; pair embedding compared with the output feature.
///  - labelembed: two MLPs embedding image feature and pair into a joint space.
enum class ModelKind { tmn, ablation_a, ablation_b, labelembed };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Shape of the modular network and its gating MLP.
///
/// Layer i (1-based, i = 1..L) has M^(i) modules; M^(0) = 1 stands for the input
/// feature and M^(L) = 1 for the single module feeding the scalar projection.
struct ModularNetConfig {
  std::size_t input_dim = 512;
  /// M^(1) .. M^(L−1); L = hidden_modules.size() + 1.
  std::vector<std::size_t> hidden_modules{24, 24};
  std::size_t module_dim = 16;
  std::size_t gating_hidden = 64;
  std::size_t embedding_dim = 300;

  std::size_t num_layers() const { return hidden_modules.size() + 1; }
  std::size_t modules_in(std::size_t layer) const;
  std::size_t modules_out(std::size_t layer) const;
  std::size_t layer_input_dim(std::size_t layer) const;
  /// Offset of layer `layer`'s logits in the flat gating vector.
  std::size_t gate_offset(std::size_t layer) const;
  /// Σ_i M^(i−1)·M^(i).
  std::size_t gate_count() const;

  void validate() const;

  /// Three layers of 24 modules: larger vocabularies.
  static ModularNetConfig mit_states(std::size_t input_dim);
  /// Two layers of 24 modules: small vocabularies.
  static ModularNetConfig ut_zappos(std::size_t input_dim);

  friend bool operator==(const ModularNetConfig&, const ModularNetConfig&) = default;
};

/// Parameters that see the image feature vs. parameters that see the concept.
/// The two groups are optimised with separate step sizes.
enum class ParamGroup { feature, gating };

struct ParamBlock {
  std::string name;
  ParamGroup group = ParamGroup::feature;
  Tensor value;
};

/// Full learnable state. Block order is fixed per model kind and is part of the
/// checkpoint format.
struct ModelParams {
  ModelKind kind = ModelKind::tmn;
  ModularNetConfig config;
  Vocab vocab;
  std::vector<ParamBlock> blocks;

  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);
  std::size_t index_of(std::string_view name) const;
  bool has(std::string_view name) const;
  std::size_t parameter_count() const;
  bool has_gating() const { return kind != ModelKind::labelembed; }
};

/// Pretrained word vectors keyed by normalize_token(name).
struct PretrainedEmbeddings {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;
};

/// Glorot-uniform weights, zero biases, embeddings from `pretrained` where the
/// normalised name matches and Normal(0, 0.6²) otherwise. Deterministic in `seed`.
ModelParams init_params(ModelKind kind, const ModularNetConfig& config, const Vocab& vocab,
                        std::uint64_t seed, const PretrainedEmbeddings* pretrained = nullptr);

/// Glorot bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

/// Per-layer gating for one concept. Matrix i has shape M^(i−1)×M^(i); column j
/// holds the weights of the edges entering module j.
struct GatingSet {
  std::vector<Tensor> logits;
  std::vector<Tensor> gates;

  /// Gates flattened layer-major, destination-major (the logit layout).
  std::vector<double> flatten() const;
};

/// Parameter leaves of one ModelParams on a tape, in block order.
struct BoundParams {
  const ModelParams* params = nullptr;
  std::vector<Var> leaves;

  Var operator[](std::string_view name) const { return leaves[params->index_of(name)]; }
};

BoundParams bind(Tape& tape, const ModelParams& params, bool requires_grad);

/// Gate logits, pairs × gate_count. Shared-gating models return their single row.
Var gate_logits(Tape& tape, const BoundParams& bound, std::span<const ConceptPair> pairs);
/// Column-softmaxed gates of one layer for row `row` of `logits`.
Var layer_gates(Tape& tape, const ModularNetConfig& config, Var logits, std::size_t row,
                std::size_t layer);

/// Scores of every (feature row, pair) combination; rows × pairs.
Var score_block(Tape& tape, const BoundParams& bound, Var features,
                std::span<const ConceptPair> pairs);

/// Feature just before the final projection, one row per feature row, for one pair.
/// For ablation_b and labelembed the result does not depend on the pair.
Var feature_block(Tape& tape, const BoundParams& bound, Var features, ConceptPair pair);

GatingSet gate(const ModelParams& params, ConceptPair pair);
/// Runs the modular network on one input row with the given gates and returns o^(L).
Tensor modular_forward(const ModelParams& params, const Tensor& x, const GatingSet& gates);
double score(const ModelParams& params, const Tensor& x, ConceptPair pair);

double variant_task_agnostic_score(const ModelParams& params, const Tensor& x, ConceptPair pair);
double variant_no_joint_score(const ModelParams& params, const Tensor& x, ConceptPair pair);
double baseline_labelembed_score(const ModelParams& params, const Tensor& x, ConceptPair pair);

/// Dense samples × pairs score table. With `cache_gates` false the gating is
/// recomputed for every (sample, pair) combination.
Tensor score_matrix(const ModelParams& params, const Tensor& samples,
                    std::span<const ConceptPair> pairs, bool cache_gates = true);

struct DenseLayer {
  Tensor weight;  ///< (M^(i)·d_out) × (M^(i−1)·d_in)
  Tensor bias;    ///< 1 × (M^(i)·d_out)
};

/// Block matrix whose (j, k) block is g_{k→j}·W_j, so that
/// ReLU(weight·concat(o^(i−1)) + bias) = concat(o^(i)). `layer` is 1-based.
DenseLayer dense_equivalent(const ModelParams& params, const GatingSet& gates, std::size_t layer);

struct LayerParameterCount {
  std::size_t weights = 0;
  std::size_t biases = 0;
};
/// M modules of width d: M·d² weights, M·d biases.
LayerParameterCount modular_layer_parameters(std::size_t modules, std::size_t width);
/// Fully connected layer of width M·d: (M·d)² weights, M·d biases.
LayerParameterCount dense_layer_parameters(std::size_t modules, std::size_t width);

/// Checkpoint: "TMN1", a text header (kind, config, vocabulary, block names and
/// shapes), then every block as little-endian 64-bit doubles.
void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

}  // namespace tmn
