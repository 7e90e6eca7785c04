#pragma once

#include <span>
#include <string>
#include <vector>

#include "tmn/data.hpp"
#include "tmn/model.hpp"

namespace tmn {

/// Edge k→j entering layer `layer` (1-based); modules are 0-based.
struct EdgeId {
  std::size_t layer = 1;
  std::size_t src = 0;
  std::size_t dst = 0;
  friend auto operator<=>(const EdgeId&, const EdgeId&) = default;
};

struct ModuleId {
  std::size_t layer = 1;
  std::size_t module = 0;
  friend bool operator==(const ModuleId&, const ModuleId&) = default;
};

struct Attribution {
  ConceptPair pair;
  double strength = 0.0;
};

struct EdgeAttribution {
  EdgeId edge;
  std::vector<Attribution> top;
};

struct ModuleAttribution {
  ModuleId module;
  std::vector<Attribution> top;
};

/// For every gate edge, the n pairs with the largest gate value. Ties keep the
/// order of `pairs`. Throws ContractError for labelembed or n outside 1..|pairs|.
std::vector<EdgeAttribution> top_pairs_per_edge(const ModelParams& params,
                                                std::span<const ConceptPair> pairs, std::size_t n);

/// For modules of layers 1..L−1, the n pairs with the largest sum of outgoing gates.
std::vector<ModuleAttribution> top_pairs_per_module(const ModelParams& params,
                                                    std::span<const ConceptPair> pairs,
                                                    std::size_t n);

/// Reference maximum of the topology threshold.
enum class TopologyRule {
  per_destination,  ///< max over the edges entering the same module
  per_layer,        ///< max over all edges entering the same layer
};

struct TopologyEdge {
  EdgeId edge;
  double weight = 0.0;
};

struct TopologyGraph {
  ConceptPair pair;
  double tolerance = 0.03;
  TopologyRule rule = TopologyRule::per_destination;
  std::vector<TopologyEdge> edges;
};

/// Keeps edge k→j iff g ≥ (1 − tolerance)·max, with the max taken per `rule`.
/// Throws ContractError unless 0 < tolerance < 1.
TopologyGraph topology_graph(const ModelParams& params, ConceptPair pair, double tolerance = 0.03,
                             TopologyRule rule = TopologyRule::per_destination);

/// Edges kept in both graphs.
std::vector<EdgeId> shared_edges(const TopologyGraph& a, const TopologyGraph& b);

/// `layer<TAB>src<TAB>dst<TAB>weight` with a header row.
std::string format_topology(const TopologyGraph& graph);

enum class Representation { gatings, features, scores };
Representation parse_representation(std::string_view name);

/// TSV with a header row.
///  - gatings:  one row per pair, `object attribute g1..gG` (flattened gates).
///  - features: one row per (sample, pair), `sample_id object attribute valid f1..fd`
///              with the feature just before the final projection.
///  - scores:   one row per (sample, pair), `sample_id object attribute valid score`.
/// `valid` is 1 exactly when the pair is the sample's label.
std::string export_representations(const ModelParams& params, const SampleSet& samples,
                                   std::span<const ConceptPair> pairs, Representation which);

struct RetrievalHit {
  std::string sample_id;
  double score = 0.0;
};

/// The n samples scoring highest for `pair`, lowest index first on ties.
std::vector<RetrievalHit> retrieve(const ModelParams& params, ConceptPair pair,
                                   const SampleSet& samples, std::size_t n);

std::string format_attributions(const ModelParams& params,
                                const std::vector<EdgeAttribution>& edges);
std::string format_attributions(const ModelParams& params,
                                const std::vector<ModuleAttribution>& modules);

}  // namespace tmn
