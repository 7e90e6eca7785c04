#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "tmn/adam.hpp"
#include "tmn/error.hpp"
#include "tmn/evaluation.hpp"
#include "tmn/ops.hpp"
#include "tmn/text.hpp"
#include "tmn/training.hpp"

namespace tmn {

void TrainConfig::validate() const {
  if (!(lr_feature > 0.0) || !std::isfinite(lr_feature)) {
    throw ConfigError("lr_feature must be positive, got " + format_double(lr_feature));
  }
  if (!(lr_gating > 0.0) || !std::isfinite(lr_gating)) {
    throw ConfigError("lr_gating must be positive, got " + format_double(lr_gating));
  }
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(concept_drop >= 0.0 && concept_drop < 1.0)) {
    throw ConfigError("concept_drop must lie in [0, 1), got " + format_double(concept_drop));
  }
}

double softmax_loss(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) throw ContractError("softmax_loss: target outside the scores");
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - top);
  return top + std::log(sum) - scores[target];
}

namespace {

// The batch's candidates as one column set with a per-entry membership mask.
struct UnionLayout {
  std::vector<ConceptPair> pairs;
  std::vector<unsigned char> mask;  // rows × pairs
  std::vector<std::size_t> targets;
};

UnionLayout layout_of(const ModelParams& params, const Batch& batch) {
  const std::size_t rows = batch.labels.size();
  if (batch.features.rows() != rows || batch.candidates.size() != rows) {
    throw ContractError("batch: " + std::to_string(batch.features.rows()) + " feature rows, " +
                        std::to_string(rows) + " labels, " +
                        std::to_string(batch.candidates.size()) + " candidate lists");
  }
  if (rows == 0) throw ContractError("batch is empty");
  UnionLayout u;
  std::map<ConceptPair, std::size_t> column;
  for (const auto& list : batch.candidates) {
    for (ConceptPair p : list) {
      params.vocab.check(p);
      if (column.emplace(p, u.pairs.size()).second) u.pairs.push_back(p);
    }
  }
  u.mask.assign(rows * u.pairs.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t hits = 0;
    for (ConceptPair p : batch.candidates[r]) {
      unsigned char& m = u.mask[r * u.pairs.size() + column.at(p)];
      if (m) throw ContractError("candidate '" + params.vocab.describe(p) + "' listed twice");
      m = 1;
      hits += p == batch.labels[r];
    }
    if (hits != 1) {
      throw ContractError("true pair '" + params.vocab.describe(batch.labels[r]) +
                          "' missing from its candidates");
    }
    u.targets.push_back(column.at(batch.labels[r]));
  }
  return u;
}

struct LossParts {
  double loss = 0.0;
  double accuracy = 0.0;
  Tensor grad;  // d loss / d scores
};

LossParts masked_loss(const Tensor& s, const UnionLayout& u) {
  const std::size_t rows = s.rows(), cols = s.cols();
  LossParts out;
  out.grad = Tensor(rows, cols);
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const unsigned char* m = u.mask.data() + r * cols;
    const std::size_t t = u.targets[r];
    double top = s(r, t);
    bool best = true;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!m[c]) continue;
      top = std::max(top, s(r, c));
      if (c != t && (s(r, c) > s(r, t) || (s(r, c) == s(r, t) && c < t))) best = false;
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (m[c]) sum += std::exp(s(r, c) - top);
    }
    const double lse = top + std::log(sum);
    out.loss += lse - s(r, t);
    out.accuracy += best;
    for (std::size_t c = 0; c < cols; ++c) {
      if (m[c]) out.grad(r, c) = std::exp(s(r, c) - lse) * inv;
    }
    out.grad(r, t) -= inv;
  }
  out.loss *= inv;
  out.accuracy *= inv;
  if (!std::isfinite(out.loss)) throw NumericError("cross-entropy loss is not finite");
  return out;
}

Tensor columns(const Tensor& t, std::size_t begin, std::size_t count) {
  Tensor out(t.rows(), count);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = t(r, begin + c);
  }
  return out;
}

// Adds the gradient of sum(S ⊙ seed) over one block of candidate columns.
void accumulate(const ModelParams& params, const Tensor& features,
                std::span<const ConceptPair> pairs, Tensor seed, std::vector<Tensor>& grads) {
  Tape tape;
  const BoundParams bound = bind(tape, params, true);
  const Var x = tape.leaf(features, false);
  const Var s = score_block(tape, bound, x, pairs);
  const Var root = ops::sum(tape, ops::mul(tape, s, tape.leaf(std::move(seed), false)));
  tape.backward(root);
  for (std::size_t b = 0; b < grads.size(); ++b) {
    const Tensor& g = tape.grad(bound.leaves[b]);
    for (std::size_t i = 0; i < g.size(); ++i) grads[b][i] += g[i];
  }
}

}  // namespace

double cross_entropy_loss(const ModelParams& params, const Batch& batch) {
  const UnionLayout u = layout_of(params, batch);
  return masked_loss(score_matrix(params, batch.features, u.pairs), u).loss;
}

LossGradient loss_gradient(const ModelParams& params, const Batch& batch,
                           std::size_t max_entries) {
  const UnionLayout u = layout_of(params, batch);
  const std::size_t rows = batch.features.rows();
  const std::size_t chunk = std::max<std::size_t>(1, max_entries / rows);
  LossGradient out;
  for (const auto& b : params.blocks) out.grads.emplace_back(b.value.rows(), b.value.cols());

  if (u.pairs.size() <= chunk) {
    Tape tape;
    const BoundParams bound = bind(tape, params, true);
    const Var x = tape.leaf(batch.features, false);
    const Var s = score_block(tape, bound, x, u.pairs);
    LossParts parts = masked_loss(tape.value(s), u);
    const Var root = ops::sum(tape, ops::mul(tape, s, tape.leaf(std::move(parts.grad), false)));
    tape.backward(root);
    for (std::size_t b = 0; b < out.grads.size(); ++b) out.grads[b] = tape.grad(bound.leaves[b]);
    out.loss = parts.loss;
    out.accuracy = parts.accuracy;
    return out;
  }

  // The softmax normaliser needs every score first; the second pass
  // back-propagates each chunk with its slice of d loss / d scores.
  const LossParts parts = masked_loss(score_matrix(params, batch.features, u.pairs), u);
  const std::span<const ConceptPair> all(u.pairs);
  for (std::size_t p0 = 0; p0 < u.pairs.size(); p0 += chunk) {
    const std::size_t n = std::min(chunk, u.pairs.size() - p0);
    accumulate(params, batch.features, all.subspan(p0, n), columns(parts.grad, p0, n), out.grads);
  }
  out.loss = parts.loss;
  out.accuracy = parts.accuracy;
  return out;
}

std::vector<ConceptPair> sample_negatives(ConceptPair true_pair,
                                          std::span<const ConceptPair> train_pairs,
                                          const std::set<ConceptPair>& dropped, std::size_t k,
                                          std::mt19937_64& rng) {
  std::vector<ConceptPair> pool;
  for (ConceptPair p : train_pairs) {
    if (p != true_pair && !dropped.count(p)) pool.push_back(p);
  }
  if (k == 0) return pool;
  if (k > pool.size()) {
    throw ConfigError("cannot draw " + std::to_string(k) + " negatives from " +
                      std::to_string(pool.size()) + " available training pairs");
  }
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

std::set<ConceptPair> concept_drop(std::span<const ConceptPair> train_pairs, double fraction,
                                   std::mt19937_64& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ConfigError("concept_drop fraction must lie in [0, 1), got " + format_double(fraction));
  }
  const auto n = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(train_pairs.size())));
  std::vector<ConceptPair> pool(train_pairs.begin(), train_pairs.end());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  return std::set<ConceptPair>(pool.begin(), pool.begin() + static_cast<long>(n));
}

std::string format_epoch_logs(const std::vector<EpochLog>& logs) {
  std::string out = "epoch\tloss\ttrain_acc\tval_auc\n";
  for (const auto& l : logs) {
    out += std::to_string(l.epoch) + '\t' + format_double(l.loss) + '\t' +
           format_double(l.train_acc) + '\t' + format_double(l.val_auc) + '\n';
  }
  return out;
}

namespace {

double validation_auc(const ModelParams& params, const Dataset& dataset) {
  const ScoreMatrix m =
      build_score_matrix(params, dataset.val, evaluation_candidates(dataset.splits, Split::val));
  return auc(calibration_sweep(m, 1));
}

Tensor gather(const Tensor& features, std::span<const std::size_t> rows) {
  Tensor out(rows.size(), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(features.data() + rows[i] * features.cols(), features.cols(),
                out.data() + i * features.cols());
  }
  return out;
}

}  // namespace

FitResult fit(const ModelParams& initial, const Dataset& dataset, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  initial.config.validate();
  if (dataset.feature_dim != initial.config.input_dim) {
    throw ConfigError("dataset features have " + std::to_string(dataset.feature_dim) +
                      " dimensions, model expects " + std::to_string(initial.config.input_dim));
  }
  if (!(dataset.vocab == initial.vocab)) {
    throw ConfigError("model vocabulary differs from the dataset vocabulary");
  }
  FitResult result{initial, 0, {}};
  if (config.epochs == 0) return result;

  const std::vector<ConceptPair> train_pairs = dataset.splits.train_pairs();
  const SampleSet& train = dataset.train;
  if (train.size() == 0) throw ConfigError("no training samples");

  ModelParams params = initial;
  AdamHyper feature_hyper, gating_hyper;
  feature_hyper.step_size = config.lr_feature;
  gating_hyper.step_size = config.lr_gating;
  std::vector<std::size_t> group_blocks[2];
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const std::string& name = params.blocks[b].name;
    if (config.freeze_embeddings && (name == "object_embedding" || name == "attribute_embedding")) {
      continue;
    }
    group_blocks[params.blocks[b].group == ParamGroup::gating].push_back(b);
  }
  AdamState states[2];
  for (int g = 0; g < 2; ++g) {
    std::vector<Tensor> values;
    for (std::size_t b : group_blocks[g]) values.push_back(params.blocks[b].value);
    states[g] = AdamState(g == 0 ? feature_hyper : gating_hyper, values);
  }

  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32)};
  std::mt19937_64 rng(seq);
  double best_auc = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    try {
      const std::set<ConceptPair> dropped = concept_drop(train_pairs, config.concept_drop, rng);
      log.dropped.assign(dropped.begin(), dropped.end());
      std::vector<std::size_t> order;
      for (std::size_t i = 0; i < train.size(); ++i) {
        if (!dropped.count(train.labels[i])) order.push_back(i);
      }
      std::shuffle(order.begin(), order.end(), rng);

      double loss_sum = 0.0, acc_sum = 0.0;
      for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch_size) {
        const std::span<const std::size_t> rows =
            std::span(order).subspan(b0, std::min(config.batch_size, order.size() - b0));
        Batch batch;
        batch.features = gather(train.features, rows);
        for (std::size_t r : rows) {
          const ConceptPair label = train.labels[r];
          batch.labels.push_back(label);
          std::vector<ConceptPair> cands{label};
          for (ConceptPair p : sample_negatives(label, train_pairs, dropped, config.negatives, rng)) {
            cands.push_back(p);
          }
          batch.candidates.push_back(std::move(cands));
        }
        const LossGradient lg = loss_gradient(params, batch);
        loss_sum += lg.loss * static_cast<double>(rows.size());
        acc_sum += lg.accuracy * static_cast<double>(rows.size());
        for (int g = 0; g < 2; ++g) {
          std::vector<Tensor*> values;
          std::vector<const Tensor*> grads;
          for (std::size_t b : group_blocks[g]) {
            values.push_back(&params.blocks[b].value);
            grads.push_back(&lg.grads[b]);
          }
          adam_step(values, grads, states[g]);
        }
      }
      for (const auto& b : params.blocks) {
        for (double v : b.value.values()) {
          if (!std::isfinite(v)) throw NumericError("parameter block '" + b.name + "' diverged");
        }
      }
      const double n = static_cast<double>(std::max<std::size_t>(order.size(), 1));
      log.loss = loss_sum / n;
      log.train_acc = acc_sum / n;
      log.val_auc = validation_auc(params, dataset);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log.val_auc > best_auc) {
      best_auc = log.val_auc;
      result.best = params;
      result.best_epoch = epoch;
    }
    result.logs.push_back(log);
    if (on_epoch) on_epoch(result.logs.back());
  }
  return result;
}

}  // namespace tmn
