#include "tmn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "tmn/analysis.hpp"
#include "tmn/data.hpp"
#include "tmn/error.hpp"
#include "tmn/evaluation.hpp"
#include "tmn/model.hpp"
#include "tmn/text.hpp"
#include "tmn/training.hpp"

namespace tmn::cli {

std::map<std::string, std::string> parse_config(std::string_view text, std::string_view source) {
  std::map<std::string, std::string> out;
  const auto lines = split_lines(text);
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return std::string_view{};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = std::string(source) + ":" + std::to_string(i + 1) + ": ";
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) throw ConfigError(where + "expected 'key = value'");
    if (!out.emplace(key, value).second) throw ConfigError(where + "key '" + key + "' repeated");
  }
  return out;
}

namespace {

struct SynthOptions {
  std::string out;
  SynthConfig cfg;
};

struct TrainOptions {
  std::string data, out, model = "tmn", profile = "ut-zappos", embeddings, negatives = "all";
  std::uint64_t seed = 1;
  std::size_t layers = 2, modules = 24, module_dim = 16, gating_hidden = 64, embedding_dim = 300;
  double lr_feat = 0.001, lr_gate = 0.01, concept_drop = 0.05;
  bool freeze_embeddings = false;
  std::size_t batch = 256, epochs = 30;
};

struct EvalOptions {
  std::string ckpt, data, split = "val", out;
  std::size_t topk = 3;
};

struct InspectOptions {
  std::string ckpt, data, split = "test", out, rule = "per-destination";
  std::vector<std::string> pairs;
  std::size_t topk = 5;
  double tolerance = 0.03;
};

struct RetrieveOptions {
  std::string ckpt, data, split = "test", out, pair;
  std::size_t topk = 10;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Every option of the subcommand with its resolved value, sorted by name.
void write_manifest(const CLI::App& sub, const std::string& dir) {
  std::map<std::string, std::string> values;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    std::string v;
    if (opt->count() > 0) {
      for (const auto& r : opt->reduced_results()) v += (v.empty() ? "" : ",") + r;
    } else {
      v = opt->get_default_str();
    }
    if (!v.empty()) values[opt->get_lnames().front()] = v;
  }
  std::string text = "command = " + sub.get_name() + "\nversion = " TMN_VERSION "\n";
  for (const auto& [k, v] : values) text += k + " = " + v + "\n";
  write_file(join(dir, "manifest"), text);
}

ConceptPair parse_pair_arg(const Vocab& vocab, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw ConfigError("--pair expects \"object,attribute\", got '" + text + "'");
  }
  const std::string object = text.substr(0, comma), attribute = text.substr(comma + 1);
  const auto pair = vocab.find_pair(object, attribute);
  if (!pair) throw VocabularyError("unknown pair '" + text + "'");
  return *pair;
}

ModelParams load_compatible(const std::string& ckpt, const Dataset& data) {
  ModelParams params = load_checkpoint(ckpt);
  if (!(params.vocab == data.vocab)) {
    throw ConfigError("checkpoint vocabulary differs from the dataset vocabulary");
  }
  if (params.config.input_dim != data.feature_dim) {
    throw ConfigError("checkpoint expects " + std::to_string(params.config.input_dim) +
                      "-dimensional features, dataset has " + std::to_string(data.feature_dim));
  }
  return params;
}

std::size_t parse_negatives(const std::string& text) {
  if (text == "all") return 0;
  const auto k = parse_size(text);
  if (!k || *k == 0) throw ConfigError("--negatives expects a positive count or 'all', got '" + text + "'");
  return *k;
}

int do_synth(const CLI::App& sub, const SynthOptions& o, std::ostream& out) {
  const Dataset d = generate_synthetic(o.cfg);
  ensure_dir(o.out);
  save_dataset(d, o.out);
  write_manifest(sub, o.out);
  out << "wrote " << d.train.size() << " train, " << d.val.size() << " val, " << d.test.size()
      << " test samples to " << o.out << "\n";
  return kOk;
}

int do_train(CLI::App& sub, TrainOptions o, std::ostream& out) {
  if (o.profile != "ut-zappos" && o.profile != "mit-states") {
    throw ConfigError("unknown profile '" + o.profile + "' (expected ut-zappos or mit-states)");
  }
  const bool mit = o.profile == "mit-states";
  if (sub.count("--layers") == 0) {
    o.layers = mit ? 3 : 2;
    sub.get_option("--layers")->default_str(std::to_string(o.layers));
  }
  if (sub.count("--negatives") == 0) {
    o.negatives = mit ? "600" : "all";
    sub.get_option("--negatives")->default_str(o.negatives);
  }
  if (o.layers == 0) throw ConfigError("--layers must be at least 1");

  const Dataset data = load_dataset(o.data);
  ModularNetConfig config;
  config.input_dim = data.feature_dim;
  config.hidden_modules.assign(o.layers - 1, o.modules);
  config.module_dim = o.module_dim;
  config.gating_hidden = o.gating_hidden;
  config.embedding_dim = o.embedding_dim;

  EmbeddingTable table;
  const PretrainedEmbeddings* pretrained = nullptr;
  if (!o.embeddings.empty()) {
    table = load_embeddings(o.embeddings, data.vocab);
    if (table.vectors.dim != 0) {
      if (sub.count("--embedding-dim") == 0) {
        config.embedding_dim = table.vectors.dim;
        sub.get_option("--embedding-dim")->default_str(std::to_string(config.embedding_dim));
      }
      pretrained = &table.vectors;
    }
  }
  config.validate();

  TrainConfig tc;
  tc.lr_feature = o.lr_feat;
  tc.lr_gating = o.lr_gate;
  tc.batch_size = o.batch;
  tc.negatives = parse_negatives(o.negatives);
  tc.concept_drop = o.concept_drop;
  tc.epochs = o.epochs;
  tc.seed = o.seed;
  tc.freeze_embeddings = o.freeze_embeddings;
  tc.validate();

  const ModelParams initial =
      init_params(parse_model_kind(o.model), config, data.vocab, o.seed, pretrained);
  ensure_dir(o.out);
  write_manifest(sub, o.out);
  out << "epoch\tloss\ttrain_acc\tval_auc\n";
  const FitResult r = fit(initial, data, tc, [&](const EpochLog& l) {
    out << l.epoch << '\t' << format_double(l.loss) << '\t' << format_double(l.train_acc) << '\t'
        << format_double(l.val_auc) << std::endl;
  });
  save_checkpoint(r.best, join(o.out, "best"));
  write_file(join(o.out, "epochs.tsv"), format_epoch_logs(r.logs));
  out << "best epoch " << r.best_epoch << ", checkpoint " << join(o.out, "best") << "\n";
  return kOk;
}

int do_eval(const CLI::App& sub, EvalOptions o, std::ostream& out) {
  if (o.out.empty()) {
    o.out = (std::filesystem::path(o.ckpt).parent_path() / ("eval_" + o.split)).string();
  }
  if (o.topk == 0) throw ConfigError("--topk must be at least 1");
  const Split split = parse_split(o.split);
  if (split == Split::train) throw ConfigError("--split must be val or test");
  const Dataset data = load_dataset(o.data);
  const ModelParams params = load_compatible(o.ckpt, data);
  const ScoreMatrix m =
      build_score_matrix(params, data.samples(split), evaluation_candidates(data.splits, split));
  ensure_dir(o.out);
  write_manifest(sub, o.out);
  for (std::size_t k = 1; k <= o.topk; ++k) {
    write_file(join(o.out, "curve_k" + std::to_string(k) + ".tsv"),
               format_curve(calibration_sweep(m, k)));
  }
  const std::string summary = format_summary(summarize(m));
  write_file(join(o.out, "summary.tsv"), summary);
  out << summary;
  return kOk;
}

int do_inspect(const CLI::App& sub, const InspectOptions& o, std::ostream& out) {
  TopologyRule rule;
  if (o.rule == "per-destination") {
    rule = TopologyRule::per_destination;
  } else if (o.rule == "per-layer") {
    rule = TopologyRule::per_layer;
  } else {
    throw ConfigError("unknown topology rule '" + o.rule + "' (expected per-destination or per-layer)");
  }
  const ModelParams params = load_checkpoint(o.ckpt);
  std::vector<ConceptPair> all;
  for (std::size_t ob = 0; ob < params.vocab.num_objects(); ++ob) {
    for (std::size_t a = 0; a < params.vocab.num_attributes(); ++a) all.push_back({ob, a});
  }
  std::optional<Dataset> data;
  std::vector<ConceptPair> pairs = all;
  if (!o.data.empty()) {
    data = load_dataset(o.data);
    if (!(params.vocab == data->vocab)) {
      throw ConfigError("checkpoint vocabulary differs from the dataset vocabulary");
    }
    pairs = data->splits.pairs(Split::train);
    for (ConceptPair p : data->splits.unseen_pairs(Split::val)) pairs.push_back(p);
    for (ConceptPair p : data->splits.unseen_pairs(Split::test)) pairs.push_back(p);
  }
  std::vector<ConceptPair> queries;
  for (const auto& text : o.pairs) queries.push_back(parse_pair_arg(params.vocab, text));

  ensure_dir(o.out);
  write_manifest(sub, o.out);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(join(o.out, name), text);
    written.push_back(name);
  };
  if (params.has_gating()) {
    const std::size_t n = std::min(o.topk, pairs.size());
    emit("edges.tsv", format_attributions(params, top_pairs_per_edge(params, pairs, n)));
    if (params.config.num_layers() > 1) {
      emit("modules.tsv", format_attributions(params, top_pairs_per_module(params, pairs, n)));
    }
    emit("gatings.tsv", export_representations(params, SampleSet{}, pairs, Representation::gatings));
    std::vector<TopologyGraph> graphs;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      graphs.push_back(topology_graph(params, queries[i], o.tolerance, rule));
      emit("topology_" + std::to_string(i + 1) + ".tsv", format_topology(graphs.back()));
    }
    if (graphs.size() >= 2) {
      TopologyGraph shared{queries[0], o.tolerance, rule, {}};
      for (const EdgeId& e : shared_edges(graphs[0], graphs[1])) {
        for (const auto& te : graphs[0].edges) {
          if (te.edge == e) shared.edges.push_back(te);
        }
      }
      emit("shared_edges.tsv", format_topology(shared));
    }
  }
  if (data) {
    const SampleSet& samples = data->samples(parse_split(o.split));
    const CandidateSet cand = evaluation_candidates(data->splits, parse_split(o.split));
    emit("features.tsv", export_representations(params, samples, cand.pairs, Representation::features));
    emit("scores.tsv", export_representations(params, samples, cand.pairs, Representation::scores));
  }
  for (const auto& w : written) out << join(o.out, w) << "\n";
  return kOk;
}

int do_retrieve(const CLI::App& sub, const RetrieveOptions& o, std::ostream& out) {
  const Dataset data = load_dataset(o.data);
  const ModelParams params = load_compatible(o.ckpt, data);
  const ConceptPair pair = parse_pair_arg(params.vocab, o.pair);
  const SampleSet& samples = data.samples(parse_split(o.split));
  const std::size_t n = std::min(o.topk, samples.size());
  if (o.topk == 0) throw ConfigError("--topk must be at least 1");
  std::string text = "rank\tsample_id\tscore\tobject\tattribute\n";
  const auto hits = retrieve(params, pair, samples, n);
  std::map<std::string, ConceptPair> label;
  for (std::size_t i = 0; i < samples.size(); ++i) label.emplace(samples.ids[i], samples.labels[i]);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const ConceptPair l = label.at(hits[i].sample_id);
    text += std::to_string(i + 1) + '\t' + hits[i].sample_id + '\t' + format_double(hits[i].score) +
            '\t' + params.vocab.objects()[l.object] + '\t' + params.vocab.attributes()[l.attribute] +
            '\n';
  }
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_manifest(sub, o.out);
    write_file(join(o.out, "ranking.tsv"), text);
  }
  out << text;
  return kOk;
}

// Inserts `--key value` for config-file entries right after the subcommand,
// so that later command-line flags take precedence.
std::vector<std::string> with_config(const CLI::App& app, std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands({})) {
    if (s->get_name() == args[0]) sub = s;
  }
  if (!sub) return args;
  const auto entries = parse_config(read_file(path), path);
  std::vector<std::string> injected;
  for (const auto& [key, value] : entries) {
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt || key == "config" || key == "help") {
      throw ConfigError(path + ": unknown key '" + key + "' for " + args[0]);
    }
    injected.push_back("--" + key);
    injected.push_back(value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int run(const std::vector<std::string>& input, std::ostream& out, std::ostream& err) {
  CLI::App app{"Task-driven modular networks for compositional zero-shot learning", "tmn"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(TMN_VERSION));

  SynthOptions so;
  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--seed", so.cfg.seed, "Random seed");
  synth->add_option("--objects", so.cfg.objects);
  synth->add_option("--attributes", so.cfg.attributes);
  synth->add_option("--latent-dim", so.cfg.latent_dim);
  synth->add_option("--feature-dim", so.cfg.feature_dim);
  synth->add_option("--samples-per-pair", so.cfg.samples_per_pair);
  synth->add_option("--noise", so.cfg.noise);
  synth->add_option("--unseen-fraction", so.cfg.unseen_fraction);

  TrainOptions to;
  CLI::App* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", to.data, "Dataset directory")->required();
  train->add_option("--out", to.out, "Output directory")->required();
  train->add_option("--seed", to.seed, "Initialisation and training seed");
  train->add_option("--model", to.model, "tmn, ablation_a, ablation_b or labelembed");
  train->add_option("--profile", to.profile, "ut-zappos (2 layers, all negatives) or mit-states (3 layers, 600 negatives)");
  train->add_option("--layers", to.layers, "Modular layers L");
  train->add_option("--modules", to.modules, "Modules per hidden layer");
  train->add_option("--module-dim", to.module_dim);
  train->add_option("--gating-hidden", to.gating_hidden);
  train->add_option("--embedding-dim", to.embedding_dim);
  train->add_option("--embeddings", to.embeddings, "Pretrained word vectors, 'token v1 .. vK' per line");
  train->add_option("--freeze-embeddings", to.freeze_embeddings, "true keeps the embedding tables fixed");
  train->add_option("--lr-feat", to.lr_feat);
  train->add_option("--lr-gate", to.lr_gate);
  train->add_option("--batch", to.batch);
  train->add_option("--negatives", to.negatives, "Negatives per sample or 'all'");
  train->add_option("--concept-drop", to.concept_drop);
  train->add_option("--epochs", to.epochs);

  EvalOptions eo;
  CLI::App* eval = app.add_subcommand("eval", "Generalized evaluation of a checkpoint");
  eval->add_option("--ckpt", eo.ckpt, "Checkpoint file")->required();
  eval->add_option("--data", eo.data, "Dataset directory")->required();
  eval->add_option("--split", eo.split, "val or test");
  eval->add_option("--out", eo.out, "Output directory; defaults to eval_<split> beside the checkpoint");
  eval->add_option("--topk", eo.topk, "Write curves for k = 1..topk");

  InspectOptions io;
  CLI::App* inspect = app.add_subcommand("inspect", "Gating attributions, topologies and exports");
  inspect->add_option("--ckpt", io.ckpt, "Checkpoint file")->required();
  inspect->add_option("--out", io.out, "Output directory")->required();
  inspect->add_option("--data", io.data, "Dataset directory for feature and score exports");
  inspect->add_option("--split", io.split, "val or test");
  inspect->add_option("--pair", io.pairs, "\"object,attribute\" for a topology graph; repeatable")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  inspect->add_option("--topk", io.topk, "Pairs listed per edge and module");
  inspect->add_option("--tolerance", io.tolerance);
  inspect->add_option("--topology-rule", io.rule, "per-destination or per-layer");

  RetrieveOptions ro;
  CLI::App* retr = app.add_subcommand("retrieve", "Rank samples for a pair");
  retr->add_option("--ckpt", ro.ckpt, "Checkpoint file")->required();
  retr->add_option("--data", ro.data, "Dataset directory")->required();
  retr->add_option("--pair", ro.pair, "\"object,attribute\"")->required();
  retr->add_option("--split", ro.split, "val or test");
  retr->add_option("--topk", ro.topk);
  retr->add_option("--out", ro.out, "Output directory");

  for (CLI::App* s : {synth, train, eval, inspect, retr}) {
    s->add_option("--config", "Flat 'key = value' file; flags override it");
  }

  try {
    std::vector<std::string> args = with_config(app, input);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (synth->parsed()) return do_synth(*synth, so, out);
    if (train->parsed()) return do_train(*train, to, out);
    if (eval->parsed()) return do_eval(*eval, eo, out);
    if (inspect->parsed()) return do_inspect(*inspect, io, out);
    return do_retrieve(*retr, ro, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << TMN_VERSION << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const VocabularyError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ProtocolError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kFormatError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace tmn::cli
