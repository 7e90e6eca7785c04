#include <cmath>
#include <random>

#include "tmn/error.hpp"
#include "tmn/model.hpp"

namespace tmn {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::tmn: return "tmn";
    case ModelKind::ablation_a: return "ablation_a";
    case ModelKind::ablation_b: return "ablation_b";
    case ModelKind::labelembed: return "labelembed";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::tmn, ModelKind::ablation_a, ModelKind::ablation_b,
                      ModelKind::labelembed}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(name) +
                    "' (expected tmn, ablation_a, ablation_b or labelembed)");
}

std::size_t ModularNetConfig::modules_in(std::size_t layer) const {
  return layer <= 1 ? 1 : hidden_modules.at(layer - 2);
}

std::size_t ModularNetConfig::modules_out(std::size_t layer) const {
  return layer >= num_layers() ? 1 : hidden_modules.at(layer - 1);
}

std::size_t ModularNetConfig::layer_input_dim(std::size_t layer) const {
  return layer <= 1 ? input_dim : module_dim;
}

std::size_t ModularNetConfig::gate_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t i = 1; i < layer; ++i) offset += modules_in(i) * modules_out(i);
  return offset;
}

std::size_t ModularNetConfig::gate_count() const { return gate_offset(num_layers() + 1); }

void ModularNetConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be at least 1");
  if (module_dim == 0) throw ConfigError("module_dim must be at least 1");
  if (gating_hidden == 0) throw ConfigError("gating_hidden must be at least 1");
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be at least 1");
  for (std::size_t m : hidden_modules) {
    if (m == 0) throw ConfigError("every layer needs at least one module");
  }
}

ModularNetConfig ModularNetConfig::mit_states(std::size_t input_dim) {
  ModularNetConfig c;
  c.input_dim = input_dim;
  c.hidden_modules = {24, 24};
  return c;
}

ModularNetConfig ModularNetConfig::ut_zappos(std::size_t input_dim) {
  ModularNetConfig c;
  c.input_dim = input_dim;
  c.hidden_modules = {24};
  return c;
}

std::size_t ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name == name) return i;
  }
  throw ContractError("model " + std::string(to_string(kind)) + " has no parameter block '" +
                      std::string(name) + "'");
}

const Tensor& ModelParams::at(std::string_view name) const { return blocks[index_of(name)].value; }
Tensor& ModelParams::at(std::string_view name) { return blocks[index_of(name)].value; }

bool ModelParams::has(std::string_view name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return true;
  }
  return false;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.value.size();
  return n;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

enum class Init { glorot, zero, embedding };

struct BlockSpec {
  std::string name;
  ParamGroup group;
  std::size_t rows, cols;
  Init init;
  // Glorot fans; module weights use the per-module shape.
  std::size_t fan_in = 0, fan_out = 0;
};

void add_linear(std::vector<BlockSpec>& specs, const std::string& stem, ParamGroup group,
                std::size_t out, std::size_t in) {
  specs.push_back({stem + "_w", group, out, in, Init::glorot, in, out});
  specs.push_back({stem + "_b", group, 1, out, Init::zero});
}

void add_modules(std::vector<BlockSpec>& specs, const ModularNetConfig& c, std::size_t first_in) {
  const std::size_t d = c.module_dim;
  for (std::size_t i = 1; i <= c.num_layers(); ++i) {
    const std::size_t m = c.modules_out(i);
    const std::size_t in = i == 1 ? first_in : d;
    const std::string stem = "module" + std::to_string(i);
    specs.push_back({stem + "_w", ParamGroup::feature, m * d, in, Init::glorot, in, d});
    specs.push_back({stem + "_b", ParamGroup::feature, 1, m * d, Init::zero});
  }
}

std::vector<BlockSpec> layout(ModelKind kind, const ModularNetConfig& c, const Vocab& vocab) {
  const std::size_t e = c.embedding_dim;
  const std::size_t h = c.gating_hidden;
  std::vector<BlockSpec> specs;
  specs.push_back({"object_embedding", ParamGroup::gating, vocab.num_objects(), e, Init::embedding});
  specs.push_back(
      {"attribute_embedding", ParamGroup::gating, vocab.num_attributes(), e, Init::embedding});
  switch (kind) {
    case ModelKind::tmn:
      add_linear(specs, "gate_hidden", ParamGroup::gating, h, 2 * e);
      add_linear(specs, "gate_out", ParamGroup::gating, c.gate_count(), h);
      add_modules(specs, c, c.input_dim);
      add_linear(specs, "proj", ParamGroup::feature, 1, c.module_dim);
      break;
    case ModelKind::ablation_a:
      specs.push_back({"shared_gate_logits", ParamGroup::gating, 1, c.gate_count(), Init::zero});
      add_modules(specs, c, c.input_dim + 2 * e);
      add_linear(specs, "proj", ParamGroup::feature, 1, c.module_dim);
      break;
    case ModelKind::ablation_b:
      specs.push_back({"shared_gate_logits", ParamGroup::gating, 1, c.gate_count(), Init::zero});
      add_modules(specs, c, c.input_dim);
      add_linear(specs, "pair_proj", ParamGroup::gating, c.module_dim, 2 * e);
      break;
    case ModelKind::labelembed:
      add_linear(specs, "image_hidden", ParamGroup::feature, h, c.input_dim);
      add_linear(specs, "image_out", ParamGroup::feature, h, h);
      add_linear(specs, "pair_hidden", ParamGroup::gating, h, 2 * e);
      add_linear(specs, "pair_out", ParamGroup::gating, h, h);
      break;
  }
  return specs;
}

}  // namespace

ModelParams init_params(ModelKind kind, const ModularNetConfig& config, const Vocab& vocab,
                        std::uint64_t seed, const PretrainedEmbeddings* pretrained) {
  config.validate();
  if (vocab.num_objects() == 0 || vocab.num_attributes() == 0) {
    throw ConfigError("vocabulary needs at least one object and one attribute");
  }
  if (pretrained && !pretrained->vectors.empty() && pretrained->dim != config.embedding_dim) {
    throw FormatError("pretrained embeddings have dimension " + std::to_string(pretrained->dim) +
                      ", model expects " + std::to_string(config.embedding_dim));
  }

  ModelParams params;
  params.kind = kind;
  params.config = config;
  params.vocab = vocab;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.6);
  for (const auto& spec : layout(kind, config, vocab)) {
    Tensor t(spec.rows, spec.cols);
    if (spec.init == Init::glorot) {
      std::uniform_real_distribution<double> uniform(-glorot_bound(spec.fan_in, spec.fan_out),
                                                     glorot_bound(spec.fan_in, spec.fan_out));
      for (double& v : t.values()) v = uniform(rng);
    } else if (spec.init == Init::embedding) {
      for (double& v : t.values()) v = normal(rng);
      if (pretrained) {
        const auto& names =
            spec.name == "object_embedding" ? vocab.objects() : vocab.attributes();
        for (std::size_t r = 0; r < names.size(); ++r) {
          auto it = pretrained->vectors.find(normalize_token(names[r]));
          if (it == pretrained->vectors.end()) continue;
          if (it->second.size() != spec.cols) {
            throw FormatError("pretrained vector for '" + names[r] + "' has length " +
                              std::to_string(it->second.size()) + ", expected " +
                              std::to_string(spec.cols));
          }
          std::copy(it->second.begin(), it->second.end(), t.row_span(r).begin());
        }
      }
    }
    params.blocks.push_back({spec.name, spec.group, std::move(t)});
  }
  return params;
}

LayerParameterCount modular_layer_parameters(std::size_t modules, std::size_t width) {
  return {modules * width * width, modules * width};
}

LayerParameterCount dense_layer_parameters(std::size_t modules, std::size_t width) {
  return {modules * width * modules * width, modules * width};
}

}  // namespace tmn
