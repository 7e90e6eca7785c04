#include <algorithm>
#include <numeric>

#include "tmn/analysis.hpp"
#include "tmn/error.hpp"
#include "tmn/text.hpp"

namespace tmn {

namespace {

void require_gating(const ModelParams& params, std::string_view op) {
  if (!params.has_gating()) {
    throw ContractError(std::string(op) + ": model " + std::string(to_string(params.kind)) +
                        " has no gating network");
  }
}

void require_count(std::size_t n, std::size_t available, std::string_view op) {
  if (n == 0 || n > available) {
    throw ContractError(std::string(op) + ": n = " + std::to_string(n) + " outside 1.." +
                        std::to_string(available));
  }
}

// Indices of the n largest values, ties in index order.
std::vector<Attribution> top_n(std::span<const ConceptPair> pairs, const std::vector<double>& v,
                               std::size_t n) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<Attribution> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({pairs[order[i]], v[order[i]]});
  return out;
}

std::vector<GatingSet> gates_of(const ModelParams& params, std::span<const ConceptPair> pairs) {
  std::vector<GatingSet> out;
  for (ConceptPair p : pairs) out.push_back(gate(params, p));
  return out;
}

std::string pair_fields(const Vocab& v, ConceptPair p) {
  return v.objects()[p.object] + '\t' + v.attributes()[p.attribute];
}

}  // namespace

std::vector<EdgeAttribution> top_pairs_per_edge(const ModelParams& params,
                                                std::span<const ConceptPair> pairs, std::size_t n) {
  require_gating(params, "top_pairs_per_edge");
  require_count(n, pairs.size(), "top_pairs_per_edge");
  const std::vector<GatingSet> gates = gates_of(params, pairs);
  const ModularNetConfig& c = params.config;
  std::vector<EdgeAttribution> out;
  for (std::size_t i = 1; i <= c.num_layers(); ++i) {
    for (std::size_t j = 0; j < c.modules_out(i); ++j) {
      for (std::size_t k = 0; k < c.modules_in(i); ++k) {
        std::vector<double> v;
        for (const auto& g : gates) v.push_back(g.gates[i - 1](k, j));
        out.push_back({{i, k, j}, top_n(pairs, v, n)});
      }
    }
  }
  return out;
}

std::vector<ModuleAttribution> top_pairs_per_module(const ModelParams& params,
                                                    std::span<const ConceptPair> pairs,
                                                    std::size_t n) {
  require_gating(params, "top_pairs_per_module");
  require_count(n, pairs.size(), "top_pairs_per_module");
  const std::vector<GatingSet> gates = gates_of(params, pairs);
  const ModularNetConfig& c = params.config;
  std::vector<ModuleAttribution> out;
  for (std::size_t i = 1; i < c.num_layers(); ++i) {
    for (std::size_t k = 0; k < c.modules_out(i); ++k) {
      std::vector<double> v;
      for (const auto& g : gates) {
        const Tensor& next = g.gates[i];
        double s = 0.0;
        for (std::size_t j = 0; j < next.cols(); ++j) s += next(k, j);
        v.push_back(s);
      }
      out.push_back({{i, k}, top_n(pairs, v, n)});
    }
  }
  return out;
}

TopologyGraph topology_graph(const ModelParams& params, ConceptPair pair, double tolerance,
                             TopologyRule rule) {
  require_gating(params, "topology_graph");
  if (!(tolerance > 0.0 && tolerance < 1.0)) {
    throw ContractError("topology_graph: tolerance must lie in (0, 1), got " +
                        format_double(tolerance));
  }
  const GatingSet g = gate(params, pair);
  TopologyGraph graph{pair, tolerance, rule, {}};
  for (std::size_t i = 1; i <= g.gates.size(); ++i) {
    const Tensor& w = g.gates[i - 1];
    const double layer_max = *std::max_element(w.values().begin(), w.values().end());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double ref = layer_max;
      if (rule == TopologyRule::per_destination) {
        ref = w(0, j);
        for (std::size_t k = 1; k < w.rows(); ++k) ref = std::max(ref, w(k, j));
      }
      for (std::size_t k = 0; k < w.rows(); ++k) {
        if (w(k, j) >= (1.0 - tolerance) * ref) graph.edges.push_back({{i, k, j}, w(k, j)});
      }
    }
  }
  return graph;
}

std::vector<EdgeId> shared_edges(const TopologyGraph& a, const TopologyGraph& b) {
  std::vector<EdgeId> ea, eb, out;
  for (const auto& e : a.edges) ea.push_back(e.edge);
  for (const auto& e : b.edges) eb.push_back(e.edge);
  std::sort(ea.begin(), ea.end());
  std::sort(eb.begin(), eb.end());
  std::set_intersection(ea.begin(), ea.end(), eb.begin(), eb.end(), std::back_inserter(out));
  return out;
}

std::string format_topology(const TopologyGraph& graph) {
  std::string out = "layer\tsrc\tdst\tweight\n";
  for (const auto& e : graph.edges) {
    out += std::to_string(e.edge.layer) + '\t' + std::to_string(e.edge.src) + '\t' +
           std::to_string(e.edge.dst) + '\t' + format_double(e.weight) + '\n';
  }
  return out;
}

Representation parse_representation(std::string_view name) {
  if (name == "gatings") return Representation::gatings;
  if (name == "features") return Representation::features;
  if (name == "scores") return Representation::scores;
  throw ConfigError("unknown representation '" + std::string(name) +
                    "' (expected gatings, features or scores)");
}

std::string export_representations(const ModelParams& params, const SampleSet& samples,
                                   std::span<const ConceptPair> pairs, Representation which) {
  if (pairs.empty()) throw ContractError("export_representations: no pairs");
  const Vocab& v = params.vocab;
  std::string out;
  if (which == Representation::gatings) {
    require_gating(params, "export_representations");
    out = "object\tattribute";
    for (std::size_t i = 0; i < params.config.gate_count(); ++i) out += "\tg" + std::to_string(i + 1);
    out += '\n';
    for (ConceptPair p : pairs) {
      out += pair_fields(v, p);
      for (double g : gate(params, p).flatten()) out += '\t' + format_double(g);
      out += '\n';
    }
    return out;
  }

  if (samples.size() == 0) throw ContractError("export_representations: no samples");
  if (which == Representation::scores) {
    const Tensor s = score_matrix(params, samples.features, pairs);
    out = "sample_id\tobject\tattribute\tvalid\tscore\n";
    for (std::size_t r = 0; r < samples.size(); ++r) {
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        out += samples.ids[r] + '\t' + pair_fields(v, pairs[p]) + '\t' +
               (pairs[p] == samples.labels[r] ? "1" : "0") + '\t' + format_double(s(r, p)) + '\n';
      }
    }
    return out;
  }

  std::vector<Tensor> features;
  for (ConceptPair p : pairs) {
    Tape tape;
    const BoundParams bound = bind(tape, params, false);
    const Var x = tape.leaf(samples.features, false);
    features.push_back(tape.value(feature_block(tape, bound, x, p)));
  }
  out = "sample_id\tobject\tattribute\tvalid";
  for (std::size_t i = 0; i < features.front().cols(); ++i) out += "\tf" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t r = 0; r < samples.size(); ++r) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      out += samples.ids[r] + '\t' + pair_fields(v, pairs[p]) + '\t' +
             (pairs[p] == samples.labels[r] ? "1" : "0");
      for (double f : features[p].row_span(r)) out += '\t' + format_double(f);
      out += '\n';
    }
  }
  return out;
}

std::vector<RetrievalHit> retrieve(const ModelParams& params, ConceptPair pair,
                                   const SampleSet& samples, std::size_t n) {
  require_count(n, samples.size(), "retrieve");
  const ConceptPair query[] = {pair};
  const Tensor s = score_matrix(params, samples.features, query);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s(a, 0) > s(b, 0); });
  std::vector<RetrievalHit> hits;
  for (std::size_t i = 0; i < n; ++i) hits.push_back({samples.ids[order[i]], s(order[i], 0)});
  return hits;
}

std::string format_attributions(const ModelParams& params,
                                const std::vector<EdgeAttribution>& edges) {
  std::string out = "layer\tsrc\tdst\trank\tobject\tattribute\tgate\n";
  for (const auto& e : edges) {
    for (std::size_t r = 0; r < e.top.size(); ++r) {
      out += std::to_string(e.edge.layer) + '\t' + std::to_string(e.edge.src) + '\t' +
             std::to_string(e.edge.dst) + '\t' + std::to_string(r + 1) + '\t' +
             pair_fields(params.vocab, e.top[r].pair) + '\t' + format_double(e.top[r].strength) +
             '\n';
    }
  }
  return out;
}

std::string format_attributions(const ModelParams& params,
                                const std::vector<ModuleAttribution>& modules) {
  std::string out = "layer\tmodule\trank\tobject\tattribute\toutgoing\n";
  for (const auto& m : modules) {
    for (std::size_t r = 0; r < m.top.size(); ++r) {
      out += std::to_string(m.module.layer) + '\t' + std::to_string(m.module.module) + '\t' +
             std::to_string(r + 1) + '\t' + pair_fields(params.vocab, m.top[r].pair) + '\t' +
             format_double(m.top[r].strength) + '\n';
    }
  }
  return out;
}

}  // namespace tmn
