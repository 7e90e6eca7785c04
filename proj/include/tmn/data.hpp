#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmn/concepts.hpp"
#include "tmn/model.hpp"
#include "tmn/tensor.hpp"

namespace tmn {

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

/// One row of a split file.
struct SplitEntry {
  Split split = Split::train;
  bool unseen = false;
  ConceptPair pair;
  friend bool operator==(const SplitEntry&, const SplitEntry&) = default;
};

/// Pair lists of the three splits, kept in file order.
///
/// Validity: train pairs are seen; val/test pairs flagged unseen are not train
/// pairs, pairs flagged seen are; every object and attribute occurs in a train
/// pair; no pair is listed twice within a split.
struct SplitSpec {
  std::vector<SplitEntry> entries;

  std::vector<ConceptPair> pairs(Split split) const;
  std::vector<ConceptPair> seen_pairs(Split split) const;
  std::vector<ConceptPair> unseen_pairs(Split split) const;
  std::vector<ConceptPair> train_pairs() const { return pairs(Split::train); }

  /// Throws FormatError naming the offending pair.
  void validate(const Vocab& vocab) const;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Candidate set used to evaluate a split: train pairs followed by the split's
/// unseen pairs (seen split pairs are train pairs already).
struct CandidateSet {
  std::vector<ConceptPair> pairs;
  std::vector<unsigned char> unseen;
};
CandidateSet evaluation_candidates(const SplitSpec& splits, Split split);

/// Samples of one split. Row r of `features` belongs to ids[r] / labels[r].
struct SampleSet {
  std::vector<std::string> ids;
  Tensor features;
  std::vector<ConceptPair> labels;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

struct Dataset {
  Vocab vocab;
  SplitSpec splits;
  std::size_t feature_dim = 0;
  SampleSet train, val, test;

  const SampleSet& samples(Split split) const;
  SampleSet& samples(Split split);
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Reads `split<TAB>seen|unseen<TAB>object<TAB>attribute` rows. The vocabulary
/// is built in order of first appearance. Errors carry the line number.
std::pair<Vocab, SplitSpec> load_splits(const std::string& path);
std::pair<Vocab, SplitSpec> parse_splits(std::string_view text, std::string_view source);

/// Reads a `#D <dim>` feature file whose labels must be pairs of `split`.
SampleSet load_features(const std::string& path, const Vocab& vocab, const SplitSpec& splits,
                        Split split);
SampleSet parse_features(std::string_view text, std::string_view source, const Vocab& vocab,
                         const SplitSpec& splits, Split split);

/// Dataset directory: splits.tsv plus train.tsv, val.tsv and test.tsv.
Dataset load_dataset(const std::string& dir);
/// Explicit paths; `features` lists the train, val and test feature files.
Dataset load_dataset(const std::string& splits_path, const std::string& train_features,
                     const std::string& val_features, const std::string& test_features);
void save_dataset(const Dataset& dataset, const std::string& dir);

std::string format_splits(const Vocab& vocab, const SplitSpec& splits);
std::string format_features(const Vocab& vocab, const SampleSet& samples, std::size_t dim);

/// Published split sizes of the two benchmark datasets.
struct DatasetProfile {
  std::string name;
  std::size_t objects, attributes;
  std::size_t train_pairs;
  std::size_t val_seen, val_unseen;
  std::size_t test_seen, test_unseen;
};
DatasetProfile mit_states_profile();
DatasetProfile ut_zappos_profile();
/// Throws FormatError listing every count that differs from `profile`.
void check_profile(const Vocab& vocab, const SplitSpec& splits, const DatasetProfile& profile);

struct EmbeddingTable {
  PretrainedEmbeddings vectors;
  /// Vocabulary names (objects, then attributes) without a vector.
  std::vector<std::string> missing;
};
/// Reads `token v1 ... vK` lines. Tokens are matched to vocabulary names after
/// normalize_token on both sides.
EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab);
EmbeddingTable parse_embeddings(std::string_view text, std::string_view source, const Vocab& vocab);

struct SynthConfig {
  std::size_t objects = 20;
  std::size_t attributes = 15;
  std::size_t latent_dim = 12;
  std::size_t feature_dim = 64;
  std::size_t samples_per_pair = 20;
  double noise = 0.1;
  /// Fraction of all pairs held out as unseen, split evenly between val and test.
  double unseen_fraction = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Features x = tanh(P·[u_o ; v_a ; u_o⊙v_a]) + ε with latent u_o, v_a ~ N(0, I)
/// and a fixed projection P. The product term makes the effect of an attribute
/// depend on the object.
Dataset generate_synthetic(const SynthConfig& cfg);

}  // namespace tmn
