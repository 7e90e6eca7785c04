#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include <set>

#include "tmn/data.hpp"
#include "tmn/model.hpp"

namespace tmn::testing {

inline Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                            double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(rows, cols);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

inline Vocab small_vocab(std::size_t objects, std::size_t attributes) {
  std::vector<std::string> o, a;
  for (std::size_t i = 0; i < objects; ++i) o.push_back("obj" + std::to_string(i));
  for (std::size_t i = 0; i < attributes; ++i) a.push_back("attr" + std::to_string(i));
  return Vocab(o, a);
}

inline ModularNetConfig tiny_config(std::vector<std::size_t> hidden = {3, 2}) {
  ModularNetConfig c;
  c.input_dim = 5;
  c.hidden_modules = std::move(hidden);
  c.module_dim = 3;
  c.gating_hidden = 4;
  c.embedding_dim = 3;
  return c;
}

/// Every block (biases and shared logits included) drawn from Normal(0, scale²).
inline ModelParams random_params(ModelKind kind, const ModularNetConfig& c, std::uint64_t seed,
                                 double scale = 0.7) {
  ModelParams p = init_params(kind, c, small_vocab(4, 3), seed);
  std::mt19937_64 rng(seed ^ 0x5eed);
  for (auto& b : p.blocks) b.value = random_tensor(rng, b.value.rows(), b.value.cols(), scale);
  return p;
}

inline std::vector<ConceptPair> all_pairs(const Vocab& v) {
  std::vector<ConceptPair> out;
  for (std::size_t o = 0; o < v.num_objects(); ++o) {
    for (std::size_t a = 0; a < v.num_attributes(); ++a) out.push_back({o, a});
  }
  return out;
}

/// Split-file text whose counts match `profile`: a covering set of train pairs
/// listed first, unseen pairs taken from the remaining grid.
inline std::string profile_split_text(const DatasetProfile& profile) {
  const std::size_t no = profile.objects, na = profile.attributes;
  std::vector<ConceptPair> train;
  std::set<ConceptPair> used;
  for (std::size_t i = 0; i < std::max(no, na); ++i) {
    if (used.insert({i % no, i % na}).second) train.push_back({i % no, i % na});
  }
  std::vector<ConceptPair> unseen;
  for (std::size_t o = 0; o < no; ++o) {
    for (std::size_t a = 0; a < na; ++a) {
      if (used.count({o, a})) continue;
      if (train.size() < profile.train_pairs) {
        train.push_back({o, a});
        used.insert({o, a});
      } else {
        unseen.push_back({o, a});
      }
    }
  }
  auto row = [&](const char* split, const char* flag, ConceptPair c) {
    return std::string(split) + "\t" + flag + "\tobject" + std::to_string(c.object) +
           "\tattribute" + std::to_string(c.attribute) + "\n";
  };
  std::string text;
  for (ConceptPair c : train) text += row("train", "seen", c);
  for (std::size_t i = 0; i < profile.val_seen; ++i) text += row("val", "seen", train[i]);
  for (std::size_t i = 0; i < profile.val_unseen; ++i) text += row("val", "unseen", unseen[i]);
  for (std::size_t i = 0; i < profile.test_seen; ++i) text += row("test", "seen", train[i]);
  for (std::size_t i = 0; i < profile.test_unseen; ++i) {
    text += row("test", "unseen", unseen[profile.val_unseen + i]);
  }
  return text;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tmn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace tmn::testing
