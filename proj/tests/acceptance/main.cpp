// Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Optional arguments select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "../unit/helpers.hpp"
#include "tmn/cli.hpp"
#include "tmn/error.hpp"
#include "tmn/evaluation.hpp"
#include "tmn/ops.hpp"
#include "tmn/text.hpp"
#include "tmn/training.hpp"

using namespace tmn;
using namespace tmn::testing;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kDenseTol = 1e-6;
constexpr double kSimplexTol = 1e-9;
constexpr double kOracleTol = 1e-6;
constexpr double kLossTol = 1e-12;
constexpr double kZslFactor = 10.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

const std::vector<ModelKind> kAllKinds{ModelKind::tmn, ModelKind::ablation_a, ModelKind::ablation_b,
                                       ModelKind::labelembed};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Same layout the command-line tool uses by default: two modular layers.
ModularNetConfig desk_config(std::size_t input_dim) {
  return ModularNetConfig::ut_zappos(input_dim);
}

Batch random_batch(const ModelParams& p, std::mt19937_64& rng, std::size_t rows,
                   std::size_t negatives) {
  const std::vector<ConceptPair> pairs = all_pairs(p.vocab);
  Batch b;
  b.features = random_tensor(rng, rows, p.config.input_dim);
  for (std::size_t r = 0; r < rows; ++r) {
    const ConceptPair label = pairs[rng() % pairs.size()];
    b.labels.push_back(label);
    std::vector<ConceptPair> c{label};
    for (ConceptPair n : sample_negatives(label, pairs, {}, negatives, rng)) c.push_back(n);
    b.candidates.push_back(c);
  }
  return b;
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::size_t entries = 0;
  for (ModelKind kind : kAllKinds) {
    for (std::uint64_t instance = 0; instance < 20; ++instance) {
      const std::vector<std::size_t> hidden =
          instance % 2 ? std::vector<std::size_t>{3, 2} : std::vector<std::size_t>{2};
      const ModelParams p = random_params(kind, tiny_config(hidden), 1000 + instance);
      const Batch b = random_batch(p, rng, 3, instance % 3 == 0 ? 0 : 4);
      const LossGradient lg = loss_gradient(p, b);
      for (std::size_t blk = 0; blk < p.blocks.size(); ++blk) {
        for (std::size_t i = 0; i < p.blocks[blk].value.size(); ++i) {
          ModelParams q = p;
          q.blocks[blk].value[i] += kGradStep;
          const double up = cross_entropy_loss(q, b);
          q.blocks[blk].value[i] -= 2 * kGradStep;
          const double down = cross_entropy_loss(q, b);
          const double numeric = (up - down) / (2 * kGradStep);
          const double analytic = lg.grads[blk][i];
          worst = std::max(worst, std::abs(numeric - analytic) / std::max(1.0, std::abs(analytic)));
          ++entries;
        }
      }
    }
  }
  return {worst <= kGradTol, "max relative error " + fmt(worst) + " over " + std::to_string(entries) +
                                 " entries, 4 kinds x 20 instances"};
}

Outcome dense_equivalence() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModularNetConfig c = tiny_config({2 + static_cast<std::size_t>(trial % 5), 3});
    const ModelParams p = random_params(ModelKind::tmn, c, 2000 + trial);
    const Tensor x = random_tensor(rng, 1, c.input_dim);
    GatingSet g;
    for (std::size_t i = 1; i <= c.num_layers(); ++i) {
      Tape tape;
      g.logits.push_back(random_tensor(rng, c.modules_in(i), c.modules_out(i), 2.0));
      g.gates.push_back(tape.value(ops::column_softmax(tape, tape.leaf(g.logits.back(), false))));
    }
    Tape tape;
    Var h = tape.leaf(x, false);
    for (std::size_t i = 1; i <= c.num_layers(); ++i) {
      const DenseLayer dl = dense_equivalent(p, g, i);
      h = ops::relu(tape, ops::affine(tape, tape.leaf(dl.weight, false), tape.leaf(dl.bias, false), h));
    }
    const Tensor modular = modular_forward(p, x, g);
    const Tensor& dense = tape.value(h);
    for (std::size_t i = 0; i < dense.size(); ++i) worst = std::max(worst, std::abs(dense[i] - modular[i]));
  }
  return {worst <= kDenseTol, "max abs difference " + fmt(worst) + " over 100 instances"};
}

Outcome gating_simplex() {
  double worst = 0.0;
  bool positive = true;
  for (std::uint64_t draw = 0; draw < 1000; ++draw) {
    const ModelKind kind = draw % 2 ? ModelKind::tmn : ModelKind::ablation_a;
    const ModelParams p = random_params(kind, tiny_config({4, 3}), 3000 + draw, 2.0);
    const ConceptPair pair{draw % 4, (draw / 4) % 3};
    for (const Tensor& m : gate(p, pair).gates) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m.rows(); ++k) {
          positive = positive && m(k, j) > 0.0;
          s += m(k, j);
        }
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
  }
  return {positive && worst <= kSimplexTol,
          std::string(positive ? "all gates positive" : "non-positive gate found") +
              ", max |sum - 1| " + fmt(worst) + " over 1000 draws"};
}

Outcome parameter_ratio() {
  std::string detail;
  bool pass = true;
  for (std::size_t m : {12u, 18u, 24u, 30u}) {
    ModularNetConfig c = desk_config(8);
    c.hidden_modules = {m, m};
    const ModelParams p = init_params(ModelKind::tmn, c, small_vocab(2, 2), 1);
    GatingSet g = gate(p, {0, 0});
    const std::size_t modular = p.at("module2_w").size();
    const std::size_t dense = dense_equivalent(p, g, 2).weight.size();
    const LayerParameterCount counted = modular_layer_parameters(m, c.module_dim);
    const LayerParameterCount counted_dense = dense_layer_parameters(m, c.module_dim);
    const bool ok = dense == m * modular && counted.weights == modular &&
                    counted_dense.weights == dense;
    pass = pass && ok;
    detail += (detail.empty() ? "" : ", ") + std::string("M=") + std::to_string(m) + " " +
              std::to_string(dense) + "/" + std::to_string(modular);
  }
  return {pass, "dense/modular weights " + detail};
}

ScoreMatrix random_matrix(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pairs_dist(2, 8), samples_dist(2, 10), lattice(-16, 16);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n = static_cast<std::size_t>(pairs_dist(rng));
  const std::size_t b = static_cast<std::size_t>(samples_dist(rng));
  ScoreMatrix m;
  m.unseen.resize(n);
  for (auto& u : m.unseen) u = coin(rng);
  m.unseen[0] = 0;
  m.unseen[1] = 1;
  std::vector<std::size_t> seen_cols, unseen_cols;
  for (std::size_t i = 0; i < n; ++i) (m.unseen[i] ? unseen_cols : seen_cols).push_back(i);
  for (std::size_t i = 0; i < n; ++i) m.pairs.push_back({i, 0});
  m.scores = Tensor(b, n);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t c = 0; c < n; ++c) m.scores(r, c) = lattice(rng) / 8.0;
    const auto& pool = r == 0 ? seen_cols : r == 1 ? unseen_cols : coin(rng) ? seen_cols : unseen_cols;
    m.labels.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]);
    m.sample_ids.push_back("s" + std::to_string(r));
  }
  return m;
}

// Brute force: rank every candidate by s + bias·unseen, lower index first on ties.
std::pair<double, double> brute_accuracy(const ScoreMatrix& m, double bias, std::size_t k) {
  double seen_hit = 0, seen_n = 0, unseen_hit = 0, unseen_n = 0;
  for (std::size_t r = 0; r < m.scores.rows(); ++r) {
    const std::size_t t = m.labels[r];
    const double st = m.scores(r, t) + (m.unseen[t] ? bias : 0.0);
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < m.scores.cols(); ++c) {
      const double sc = m.scores(r, c) + (m.unseen[c] ? bias : 0.0);
      if (sc > st || (sc == st && c < t)) ++ahead;
    }
    const bool hit = ahead < k;
    if (m.unseen[t]) {
      ++unseen_n;
      unseen_hit += hit;
    } else {
      ++seen_n;
      seen_hit += hit;
    }
  }
  return {seen_hit / seen_n, unseen_hit / unseen_n};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  std::size_t violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const ScoreMatrix m = random_matrix(rng);
    for (std::size_t k = 1; k <= std::min<std::size_t>(3, m.scores.cols()); ++k) {
      const CalibrationCurve curve = calibration_sweep(m, k);
      for (std::size_t i = 1; i < curve.points.size(); ++i) {
        if (curve.points[i].seen_acc > curve.points[i - 1].seen_acc ||
            curve.points[i].unseen_acc < curve.points[i - 1].unseen_acc) {
          ++violations;
        }
      }
      std::vector<std::pair<double, double>> grid;  // (unseen, seen) in bias order
      grid.push_back({0.0, brute_accuracy(m, -INFINITY, k).first});
      for (int g = 0; g < 10000; ++g) {
        const auto [s, u] = brute_accuracy(m, -5.0 + (g + 0.5) * 1e-3, k);
        grid.push_back({u, s});
      }
      grid.push_back({brute_accuracy(m, INFINITY, k).second, 0.0});
      double area = 0.0;
      for (std::size_t i = 1; i < grid.size(); ++i) {
        area += (grid[i].first - grid[i - 1].first) * (grid[i].second + grid[i - 1].second) / 2;
      }
      worst = std::max(worst, std::abs(area - auc(curve)));
    }
  }
  return {worst <= kOracleTol && violations == 0,
          "max |AUC - oracle| " + fmt(worst) + ", " + std::to_string(violations) +
              " monotonicity violations over 50 matrices, k = 1..3"};
}

Outcome loss_sanity() {
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (ModelKind kind : kAllKinds) {
    const ModelParams p = random_params(kind, tiny_config(), 61);
    const Batch b = random_batch(p, rng, 6, 0);
    const std::vector<ConceptPair> pairs = all_pairs(p.vocab);
    const Tensor s = score_matrix(p, b.features, pairs);
    double full = 0.0;
    for (std::size_t r = 0; r < b.labels.size(); ++r) {
      const std::size_t t = static_cast<std::size_t>(
          std::find(pairs.begin(), pairs.end(), b.labels[r]) - pairs.begin());
      double mx = -INFINITY, z = 0.0;
      for (std::size_t c = 0; c < pairs.size(); ++c) mx = std::max(mx, s(r, c));
      for (std::size_t c = 0; c < pairs.size(); ++c) z += std::exp(s(r, c) - mx);
      full += mx + std::log(z) - s(r, t);
    }
    full /= static_cast<double>(b.labels.size());
    worst = std::max(worst, std::abs(cross_entropy_loss(p, b) - full));
  }
  const double tie[] = {0.75, 0.75};
  const double ln2_err = std::abs(softmax_loss(tie, 0) - std::log(2.0));
  return {worst <= kLossTol && ln2_err <= kLossTol,
          "K=all vs full softmax " + fmt(worst) + ", two-way tie vs ln 2 " + fmt(ln2_err)};
}

FitResult train_desk(const Dataset& data, ModelKind kind, std::uint64_t seed, std::size_t epochs) {
  TrainConfig tc;
  tc.seed = seed;
  tc.epochs = epochs;
  return fit(init_params(kind, desk_config(data.feature_dim), data.vocab, seed), data, tc);
}

Outcome desk_zero_shot() {
  const Dataset data = generate_synthetic(SynthConfig{});
  const std::size_t unseen = data.splits.unseen_pairs(Split::val).size() +
                             data.splits.unseen_pairs(Split::test).size();
  const FitResult r = train_desk(data, ModelKind::tmn, 1, 30);
  const ScoreMatrix m = build_score_matrix(r.best, data.test,
                                           evaluation_candidates(data.splits, Split::test));
  const double acc = closed_world_accuracy(m, 1);
  const double chance = 1.0 / static_cast<double>(unseen);
  const double ln_k = std::log(static_cast<double>(data.splits.train_pairs().size()));
  const double final_loss = r.logs.back().loss;
  return {acc >= kZslFactor * chance && final_loss < ln_k,
          "test closed-world top-1 " + fmt(acc) + " vs 10 x chance " + fmt(kZslFactor * chance) +
              " (" + std::to_string(unseen) + " unseen pairs), final loss " + fmt(final_loss) +
              " < ln K " + fmt(ln_k)};
}

// Seed s draws both the synthetic dataset and the model initialisation.
Outcome ablation_direction() {
  double mean[3] = {0, 0, 0};
  const ModelKind kinds[3] = {ModelKind::tmn, ModelKind::ablation_a, ModelKind::ablation_b};
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    const Dataset data = generate_synthetic(sc);
    for (int i = 0; i < 3; ++i) {
      const FitResult r = train_desk(data, kinds[i], seed, 30);
      const double v = r.logs[r.best_epoch - 1].val_auc;
      mean[i] += v / 3.0;
      per_seed += " " + std::string(to_string(kinds[i])) + "@" + std::to_string(seed) + "=" + fmt(v);
    }
  }
  return {mean[0] > mean[1] && mean[0] > mean[2] && mean[1] > mean[2],
          "mean val AUC@1 tmn " + fmt(mean[0]) + ", ablation_a " + fmt(mean[1]) + ", ablation_b " +
              fmt(mean[2]) + ";" + per_seed};
}

int run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// Every file of a run directory; manifest lines naming paths are dropped.
std::map<std::string, std::string> run_files(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string text = read_file(e.path().string());
    if (e.path().filename() == "manifest") {
      std::string kept;
      for (std::string_view line : split_lines(text)) {
        if (line.starts_with("out =") || line.starts_with("data =") || line.starts_with("ckpt =")) continue;
        kept += std::string(line) + "\n";
      }
      text = kept;
    }
    out[std::filesystem::relative(e.path(), dir).string()] = text;
  }
  return out;
}

Outcome determinism() {
  std::map<std::string, std::string> runs[2];
  for (int i = 0; i < 2; ++i) {
    TempDir d("acc_det");
    const std::string data = d.file("data"), model = d.file("model"), eval = d.file("eval");
    if (run_cli({"synth", "--seed", "1", "--out", data}) != 0 ||
        run_cli({"train", "--data", data, "--out", model, "--seed", "1", "--epochs", "3"}) != 0 ||
        run_cli({"eval", "--ckpt", model + "/best", "--data", data, "--split", "test", "--out", eval}) != 0) {
      return {false, "command failed"};
    }
    runs[i] = run_files(d.str());
  }
  std::size_t differing = 0;
  for (const auto& [name, text] : runs[0]) differing += !runs[1].count(name) || runs[1].at(name) != text;
  return {differing == 0 && runs[0].size() == runs[1].size() && runs[0].count("model/best"),
          std::to_string(runs[0].size()) + " files compared (dataset, checkpoint, epoch log, curves, "
          "summary, manifests), " + std::to_string(differing) + " differ"};
}

Outcome format_fidelity() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  SynthConfig sc;
  sc.objects = 8;
  sc.attributes = 6;
  sc.feature_dim = 10;
  sc.samples_per_pair = 3;
  const Dataset d = generate_synthetic(sc);
  TempDir a("acc_fmt_a"), b("acc_fmt_b");
  save_dataset(d, a.str());
  const Dataset loaded = load_dataset(a.str());
  save_dataset(loaded, b.str());
  expect(loaded == d, "dataset reload differs");
  for (const char* f : {"splits.tsv", "train.tsv", "val.tsv", "test.tsv"}) {
    expect(read_file(a.file(f)) == read_file(b.file(f)), std::string("dataset file ") + f);
  }

  for (ModelKind kind : kAllKinds) {
    const ModelParams p = random_params(kind, tiny_config(), 7);
    std::ostringstream first, second;
    save_checkpoint(p, first);
    std::istringstream in(first.str());
    save_checkpoint(load_checkpoint(in), second);
    expect(first.str() == second.str(), "checkpoint " + std::string(to_string(kind)));
  }

  for (const DatasetProfile& profile : {mit_states_profile(), ut_zappos_profile()}) {
    const std::string text = profile_split_text(profile);
    const auto [vocab, splits] = parse_splits(text, "splits.tsv");
    try {
      check_profile(vocab, splits, profile);
    } catch (const FormatError& e) {
      failures.push_back(profile.name + " rejected: " + e.what());
    }
    const std::string short_text = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    const auto [v2, s2] = parse_splits(short_text, "splits.tsv");
    bool rejected = false;
    try {
      check_profile(v2, s2, profile);
    } catch (const FormatError&) {
      rejected = true;
    }
    expect(rejected, profile.name + " accepted a short split file");
  }
  const DatasetProfile mit = mit_states_profile(), ut = ut_zappos_profile();
  expect(mit.train_pairs == 1262 && mit.val_seen == 300 && mit.val_unseen == 300 &&
             mit.test_seen == 400 && mit.test_unseen == 400,
         "MIT-States counts");
  expect(ut.train_pairs == 83 && ut.val_seen == 15 && ut.val_unseen == 15 && ut.test_seen == 18 &&
             ut.test_unseen == 18,
         "UT-Zappos counts");

  for (const char* bad : {"train\tseen\tapple\n", "train\tmaybe\tapple\tsliced\n",
                          "val\tunseen\tapple\tsliced\n", "holdout\tseen\tapple\tsliced\n"}) {
    bool rejected = false;
    try {
      parse_splits(bad, "splits.tsv");
    } catch (const FormatError&) {
      rejected = true;
    }
    expect(rejected, "accepted malformed split line");
  }

  std::string detail = failures.empty() ? "dataset and checkpoint round trips byte-identical, "
                                          "published counts accepted, malformed files rejected"
                                        : "";
  for (const auto& f : failures) detail += (detail.empty() ? "" : "; ") + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "dense equivalence", 5, dense_equivalence},
      {3, "gating simplex", 5, gating_simplex},
      {4, "parameter-count ratio", 1, parameter_ratio},
      {5, "metric oracle", 60, metric_oracle},
      {6, "loss sanity", 1, loss_sanity},
      {7, "desk-scale zero-shot learning", 300, desk_zero_shot},
      {8, "ablation direction", 1200, ablation_direction},
      {9, "determinism", 600, determinism},
      {10, "format fidelity", 5, format_fidelity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << " " << c.name << ": "
              << o.detail << " [" << fmt(seconds) << " s, limit " << c.limit_seconds << " s"
              << (in_time ? "" : ", over time") << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
