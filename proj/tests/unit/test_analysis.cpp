#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "tmn/analysis.hpp"
#include "tmn/error.hpp"
#include "tmn/text.hpp"

using namespace tmn;
using namespace tmn::testing;

namespace {

ModelParams uniform_gating(const ModularNetConfig& c, const Vocab& v) {
  ModelParams p = init_params(ModelKind::tmn, c, v, 3);
  p.at("gate_out_w").fill(0.0);
  p.at("gate_out_b").fill(0.0);
  return p;
}

// Pair (1, ·) puts gate 0.9 on edge 0→0 of layer 2 and pair (0, ·) gate 0.1;
// every other gate is uniform.
ModelParams hand_gating(const ModularNetConfig& c, const Vocab& v) {
  ModelParams p = uniform_gating(c, v);
  p.at("object_embedding").fill(0.0);
  p.at("object_embedding")(1, 0) = 1.0;
  p.at("gate_hidden_w").fill(0.0);
  p.at("gate_hidden_w")(0, 0) = 1.0;
  p.at("gate_hidden_b").fill(0.0);
  const std::size_t edge = c.gate_offset(2);
  p.at("gate_out_w")(edge, 0) = std::log(81.0);
  p.at("gate_out_b")(0, edge) = std::log(2.0 / 9.0);
  return p;
}

SampleSet random_samples(std::mt19937_64& rng, const ModelParams& p, std::size_t n) {
  SampleSet s;
  s.features = random_tensor(rng, n, p.config.input_dim);
  const auto pairs = all_pairs(p.vocab);
  for (std::size_t i = 0; i < n; ++i) {
    s.ids.push_back("img" + std::to_string(i));
    s.labels.push_back(pairs[i % pairs.size()]);
  }
  return s;
}

}  // namespace

TEST_CASE("uniform gating ties every pair") {
  const ModularNetConfig c = tiny_config();
  const Vocab v = small_vocab(4, 3);
  const ModelParams p = uniform_gating(c, v);
  const auto pairs = all_pairs(v);
  const auto edges = top_pairs_per_edge(p, pairs, 4);
  CHECK(edges.size() == c.gate_count());
  for (const auto& e : edges) {
    REQUIRE(e.top.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(e.top[r].pair == pairs[r]);
      CHECK(std::abs(e.top[r].strength - 1.0 / static_cast<double>(c.modules_in(e.edge.layer))) <=
            1e-15);
    }
  }
  const auto modules = top_pairs_per_module(p, pairs, 2);
  CHECK(modules.size() == 3 + 2);
  for (const auto& m : modules) {
    CHECK(m.module.layer < c.num_layers());
    const double expected = static_cast<double>(c.modules_out(m.module.layer + 1)) /
                            static_cast<double>(c.modules_out(m.module.layer));
    for (const auto& a : m.top) CHECK(std::abs(a.strength - expected) <= 1e-12);
    CHECK(m.top[0].pair == pairs[0]);
  }
}

TEST_CASE("hand-set gates rank pairs") {
  const ModularNetConfig c = tiny_config();
  const Vocab v = small_vocab(4, 3);
  const ModelParams p = hand_gating(c, v);
  const std::vector<ConceptPair> pairs{{0, 2}, {1, 2}};
  const auto edges = top_pairs_per_edge(p, pairs, 2);
  const auto it = std::find_if(edges.begin(), edges.end(),
                               [](const EdgeAttribution& e) { return e.edge == EdgeId{2, 0, 0}; });
  REQUIRE(it != edges.end());
  CHECK(it->top[0].pair == pairs[1]);
  CHECK(std::abs(it->top[0].strength - 0.9) <= 1e-12);
  CHECK(it->top[1].pair == pairs[0]);
  CHECK(std::abs(it->top[1].strength - 0.1) <= 1e-12);

  const auto modules = top_pairs_per_module(p, pairs, 2);
  const auto m = std::find_if(modules.begin(), modules.end(), [](const ModuleAttribution& a) {
    return a.module == ModuleId{1, 0};
  });
  REQUIRE(m != modules.end());
  CHECK(m->top[0].pair == pairs[1]);
  CHECK(std::abs(m->top[0].strength - (0.9 + 1.0 / 3.0)) <= 1e-12);
  CHECK(std::abs(m->top[1].strength - (0.1 + 1.0 / 3.0)) <= 1e-12);

  CHECK_THROWS_AS(top_pairs_per_edge(p, pairs, 3), ContractError);
  CHECK_THROWS_AS(top_pairs_per_module(p, pairs, 0), ContractError);
  const std::string table = format_attributions(p, modules);
  CHECK(table.rfind("layer\tmodule\trank\tobject\tattribute\toutgoing\n1\t0\t1\tobj1\tattr2\t", 0) == 0);
}

TEST_CASE("topology graphs") {
  const ModularNetConfig c = tiny_config();
  const Vocab v = small_vocab(4, 3);

  const TopologyGraph all = topology_graph(uniform_gating(c, v), {0, 0});
  CHECK(all.edges.size() == c.gate_count());

  ModelParams one_hot = uniform_gating(c, v);
  for (std::size_t i = 1; i <= c.num_layers(); ++i) {
    for (std::size_t j = 0; j < c.modules_out(i); ++j) {
      one_hot.at("gate_out_b")(0, c.gate_offset(i) + j * c.modules_in(i) + (j % c.modules_in(i))) = 60.0;
    }
  }
  const TopologyGraph g = topology_graph(one_hot, {1, 1});
  std::size_t destinations = 0;
  for (std::size_t i = 1; i <= c.num_layers(); ++i) destinations += c.modules_out(i);
  CHECK(g.edges.size() == destinations);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : g.edges) {
    CHECK(seen.insert({e.edge.layer, e.edge.dst}).second);
    CHECK(e.edge.src == e.edge.dst % c.modules_in(e.edge.layer));
  }
  CHECK(format_topology(g).rfind("layer\tsrc\tdst\tweight\n1\t0\t0\t1\n", 0) == 0);
  CHECK_THROWS_AS(topology_graph(one_hot, {0, 0}, 0.0), ContractError);
  CHECK_THROWS_AS(topology_graph(one_hot, {0, 0}, 1.0), ContractError);
  CHECK_THROWS_AS(topology_graph(random_params(ModelKind::labelembed, c, 1), {0, 0}), ContractError);
}

TEST_CASE("topology threshold rule holds exactly") {
  const ModularNetConfig c = tiny_config({5, 4});
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ModelParams p = random_params(ModelKind::tmn, c, seed, 1.5);
    for (TopologyRule rule : {TopologyRule::per_destination, TopologyRule::per_layer}) {
      for (double tol : {0.03, 0.3}) {
        const ConceptPair pair{seed % 4, seed % 3};
        const TopologyGraph g = topology_graph(p, pair, tol, rule);
        const GatingSet gs = gate(p, pair);
        std::set<EdgeId> kept;
        for (const auto& e : g.edges) kept.insert(e.edge);
        for (std::size_t i = 1; i <= c.num_layers(); ++i) {
          const Tensor& w = gs.gates[i - 1];
          for (std::size_t j = 0; j < w.cols(); ++j) {
            double ref = 0.0;
            for (std::size_t k = 0; k < w.rows(); ++k) {
              if (rule == TopologyRule::per_layer) {
                for (std::size_t jj = 0; jj < w.cols(); ++jj) ref = std::max(ref, w(k, jj));
              } else {
                ref = std::max(ref, w(k, j));
              }
            }
            for (std::size_t k = 0; k < w.rows(); ++k) {
              CHECK((kept.count({i, k, j}) == 1) == (w(k, j) >= (1.0 - tol) * ref));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("shared edges equal the set intersection") {
  const ModularNetConfig c = tiny_config({6, 5});
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ModelParams p = random_params(ModelKind::tmn, c, seed, 2.0);
    const TopologyGraph a = topology_graph(p, {0, 1}, 0.3);
    const TopologyGraph b = topology_graph(p, {2, 2}, 0.3);
    std::vector<EdgeId> expected;
    for (const auto& ea : a.edges) {
      for (const auto& eb : b.edges) {
        if (ea.edge == eb.edge) expected.push_back(ea.edge);
      }
    }
    std::sort(expected.begin(), expected.end());
    CHECK(shared_edges(a, b) == expected);
  }
}

TEST_CASE("representation exports") {
  std::mt19937_64 rng(14);
  const ModularNetConfig c = tiny_config();
  const ModelParams p = random_params(ModelKind::tmn, c, 9);
  const SampleSet s = random_samples(rng, p, 5);
  const auto pairs = all_pairs(p.vocab);

  const std::string gatings = export_representations(p, s, pairs, Representation::gatings);
  auto lines = split_lines(gatings);
  REQUIRE(lines.size() == pairs.size() + 1);
  CHECK(split_fields(lines[0], '\t').size() == 2 + c.gate_count());
  const auto flat = gate(p, pairs[5]).flatten();
  const auto row = split_fields(lines[6], '\t');
  for (std::size_t i = 0; i < flat.size(); ++i) CHECK(*parse_double(row[2 + i]) == flat[i]);

  const std::string features = export_representations(p, s, pairs, Representation::features);
  lines = split_lines(features);
  REQUIRE(lines.size() == s.size() * pairs.size() + 1);
  for (std::size_t r = 0; r < s.size(); ++r) {
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto f = split_fields(lines[1 + r * pairs.size() + q], '\t');
      REQUIRE(f.size() == 4 + c.module_dim);
      CHECK(f[0] == s.ids[r]);
      CHECK((f[3] == "1") == (pairs[q] == s.labels[r]));
      const GatingSet g = gate(p, pairs[q]);
      const Tensor o = modular_forward(p, Tensor::row(s.features.row_span(r)), g);
      for (std::size_t i = 0; i < c.module_dim; ++i) CHECK(*parse_double(f[4 + i]) == o[i]);
    }
  }

  const std::string scores = export_representations(p, s, pairs, Representation::scores);
  lines = split_lines(scores);
  REQUIRE(lines.size() == s.size() * pairs.size() + 1);
  const auto f = split_fields(lines[1 + 2 * pairs.size() + 7], '\t');
  CHECK(*parse_double(f[4]) == score(p, Tensor::row(s.features.row_span(2)), pairs[7]));

  CHECK_THROWS_AS(export_representations(random_params(ModelKind::labelembed, c, 1), s, pairs,
                                         Representation::gatings),
                  ContractError);
  CHECK(parse_representation("features") == Representation::features);
  CHECK_THROWS_AS(parse_representation("tsne"), ConfigError);
}

TEST_CASE("gating vector length for the three-layer profile") {
  const ModularNetConfig c = ModularNetConfig::mit_states(512);
  CHECK(c.gate_count() == 624);
  ModularNetConfig small = c;
  small.input_dim = 4;
  small.embedding_dim = 3;
  const ModelParams p = init_params(ModelKind::tmn, small, small_vocab(2, 2), 1);
  const auto pairs = all_pairs(p.vocab);
  const std::string text = export_representations(p, SampleSet{}, pairs, Representation::gatings);
  CHECK(split_fields(split_lines(text)[1], '\t').size() == 2 + 624);
}

TEST_CASE("retrieval") {
  std::mt19937_64 rng(15);
  const ModularNetConfig c = tiny_config();
  ModelParams p = random_params(ModelKind::tmn, c, 10);
  const SampleSet s = random_samples(rng, p, 9);
  const auto all = retrieve(p, {1, 2}, s, 9);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < all.size(); ++i) {
    ids.insert(all[i].sample_id);
    if (i > 0) CHECK(all[i - 1].score >= all[i].score);
  }
  CHECK(ids.size() == 9);
  CHECK(retrieve(p, {1, 2}, s, 3).size() == 3);

  p.at("proj_w").fill(0.0);
  const auto flat = retrieve(p, {1, 2}, s, 9);
  for (std::size_t i = 0; i < 9; ++i) CHECK(flat[i].sample_id == s.ids[i]);
  CHECK_THROWS_AS(retrieve(p, {1, 2}, s, 10), ContractError);
  CHECK_THROWS_AS(retrieve(p, {1, 2}, s, 0), ContractError);
}
