#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tmn/data.hpp"
#include "tmn/model.hpp"

namespace tmn {

struct TrainConfig {
  double lr_feature = 0.001;
  double lr_gating = 0.01;
  std::size_t batch_size = 256;
  /// Negatives per sample; 0 means every available training pair.
  std::size_t negatives = 0;
  double concept_drop = 0.05;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  /// Keeps the object and attribute embedding tables at their initial values.
  bool freeze_embeddings = false;

  /// Throws ConfigError.
  void validate() const;
};

/// Samples with their own candidate lists. Each list holds the sample's label exactly once.
struct Batch {
  Tensor features;
  std::vector<ConceptPair> labels;
  std::vector<std::vector<ConceptPair>> candidates;
};

/// −log softmax(scores)[target], stabilised by log-sum-exp.
double softmax_loss(std::span<const double> scores, std::size_t target);

/// Mean per-sample cross-entropy over each sample's candidates. Throws
/// ContractError when a label is missing from its candidates or repeated.
double cross_entropy_loss(const ModelParams& params, const Batch& batch);

struct LossGradient {
  double loss = 0.0;
  /// Fraction of samples whose label has the top score among its candidates.
  double accuracy = 0.0;
  /// One gradient per parameter block, in block order.
  std::vector<Tensor> grads;
};

/// Loss and its gradient. Candidates are scored in chunks of at most
/// `max_entries` (rows × pairs) per tape.
LossGradient loss_gradient(const ModelParams& params, const Batch& batch,
                           std::size_t max_entries = 65536);

/// Up to K training pairs drawn uniformly without replacement, excluding the
/// true pair and dropped pairs. K = 0 returns the whole pool in training order.
/// Throws ConfigError when fewer than K pairs are available.
std::vector<ConceptPair> sample_negatives(ConceptPair true_pair,
                                          std::span<const ConceptPair> train_pairs,
                                          const std::set<ConceptPair>& dropped, std::size_t k,
                                          std::mt19937_64& rng);

/// round(fraction·|train_pairs|) pairs chosen uniformly.
std::set<ConceptPair> concept_drop(std::span<const ConceptPair> train_pairs, double fraction,
                                   std::mt19937_64& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_auc = 0.0;
  std::vector<ConceptPair> dropped;
  double seconds = 0.0;
};

/// `epoch<TAB>loss<TAB>train_acc<TAB>val_auc` with a header row.
std::string format_epoch_logs(const std::vector<EpochLog>& logs);

struct FitResult {
  /// Parameters of the epoch with the best validation AUC@1 (the earliest on ties).
  ModelParams best;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> logs;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on two groups (feature and gating step sizes), shuffled minibatches,
/// per-epoch ConceptDrop. Deterministic in `config.seed`. With zero epochs the
/// initial parameters are returned.
FitResult fit(const ModelParams& initial, const Dataset& dataset, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace tmn
