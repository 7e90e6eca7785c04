#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "tmn/data.hpp"
#include "tmn/error.hpp"

namespace tmn {

void SynthConfig::validate() const {
  if (objects == 0 || attributes == 0) throw ConfigError("synth: need at least one object and attribute");
  if (latent_dim == 0 || feature_dim == 0) throw ConfigError("synth: dimensions must be positive");
  if (samples_per_pair == 0) throw ConfigError("synth: samples_per_pair must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synth: noise must be >= 0");
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) {
    throw ConfigError("synth: unseen_fraction must lie in (0, 1)");
  }
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

std::string numbered(const char* stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02zu", stem, i);
  return buf;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t no = cfg.objects, na = cfg.attributes, p = cfg.latent_dim, dim = cfg.feature_dim;
  const std::size_t total = no * na;
  const std::size_t cover = std::max(no, na);
  const auto unseen_count = static_cast<std::size_t>(std::llround(cfg.unseen_fraction * total));
  if (unseen_count < 2) throw ConfigError("synth: fewer than two unseen pairs; raise unseen_fraction");
  if (unseen_count > total - cover) {
    throw ConfigError("synth: " + std::to_string(unseen_count) + " unseen pairs leave too few seen "
                      "pairs to cover every object and attribute");
  }
  const std::size_t val_unseen = unseen_count / 2;
  const std::size_t test_unseen = unseen_count - val_unseen;
  const std::size_t seen_count = total - unseen_count;
  if (test_unseen > seen_count) throw ConfigError("synth: not enough seen pairs for evaluation");

  std::vector<std::string> objects, attributes;
  for (std::size_t i = 0; i < no; ++i) objects.push_back(numbered("obj", i));
  for (std::size_t i = 0; i < na; ++i) attributes.push_back(numbered("attr", i));

  // Latent codes and the projection.
  auto latent_rng = stream(cfg.seed, 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> u(no, std::vector<double>(p)), v(na, std::vector<double>(p));
  for (auto& row : u) for (double& x : row) x = unit(latent_rng);
  for (auto& row : v) for (double& x : row) x = unit(latent_rng);
  auto proj_rng = stream(cfg.seed, 2);
  std::normal_distribution<double> proj_dist(0.0, std::sqrt(1.0 / (3.0 * static_cast<double>(p))));
  std::vector<double> proj(dim * 3 * p);
  for (double& x : proj) x = proj_dist(proj_rng);

  // Pair partition. The diagonal-like covering set (i mod |O|, i mod |A|) is
  // always seen and is listed first, so first-appearance order in the split
  // file reproduces the vocabulary order.
  auto split_rng = stream(cfg.seed, 3);
  std::vector<ConceptPair> covering;
  std::set<ConceptPair> forced;
  for (std::size_t i = 0; i < cover; ++i) {
    const ConceptPair c{i % no, i % na};
    if (forced.insert(c).second) covering.push_back(c);
  }
  std::vector<ConceptPair> rest;
  for (std::size_t o = 0; o < no; ++o) {
    for (std::size_t a = 0; a < na; ++a) {
      if (!forced.count({o, a})) rest.push_back({o, a});
    }
  }
  std::shuffle(rest.begin(), rest.end(), split_rng);
  std::vector<ConceptPair> unseen(rest.begin(), rest.begin() + static_cast<long>(unseen_count));
  std::vector<ConceptPair> seen_rest(rest.begin() + static_cast<long>(unseen_count), rest.end());
  std::sort(seen_rest.begin(), seen_rest.end());
  std::vector<ConceptPair> seen = covering;
  seen.insert(seen.end(), seen_rest.begin(), seen_rest.end());

  std::vector<ConceptPair> val_u(unseen.begin(), unseen.begin() + static_cast<long>(val_unseen));
  std::vector<ConceptPair> test_u(unseen.begin() + static_cast<long>(val_unseen), unseen.end());
  std::sort(val_u.begin(), val_u.end());
  std::sort(test_u.begin(), test_u.end());
  auto pick_seen = [&](std::size_t n) {
    std::vector<ConceptPair> s = seen;
    std::shuffle(s.begin(), s.end(), split_rng);
    s.resize(n);
    std::sort(s.begin(), s.end());
    return s;
  };
  const std::vector<ConceptPair> val_s = pick_seen(val_unseen);
  const std::vector<ConceptPair> test_s = pick_seen(test_unseen);

  Dataset d;
  d.vocab = Vocab(objects, attributes);
  d.feature_dim = dim;
  for (ConceptPair c : seen) d.splits.entries.push_back({Split::train, false, c});
  for (ConceptPair c : val_s) d.splits.entries.push_back({Split::val, false, c});
  for (ConceptPair c : val_u) d.splits.entries.push_back({Split::val, true, c});
  for (ConceptPair c : test_s) d.splits.entries.push_back({Split::test, false, c});
  for (ConceptPair c : test_u) d.splits.entries.push_back({Split::test, true, c});
  d.splits.validate(d.vocab);

  auto noise_rng = stream(cfg.seed, 4);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> z(3 * p);
  for (Split s : {Split::train, Split::val, Split::test}) {
    SampleSet& set = d.samples(s);
    std::vector<double> values;
    for (ConceptPair c : d.splits.pairs(s)) {
      for (std::size_t i = 0; i < p; ++i) {
        z[i] = u[c.object][i];
        z[p + i] = v[c.attribute][i];
        z[2 * p + i] = u[c.object][i] * v[c.attribute][i];
      }
      std::vector<double> clean(dim);
      for (std::size_t r = 0; r < dim; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 3 * p; ++i) acc += proj[r * 3 * p + i] * z[i];
        clean[r] = std::tanh(acc);
      }
      for (std::size_t k = 0; k < cfg.samples_per_pair; ++k) {
        char id[48];
        std::snprintf(id, sizeof id, "%s_%05zu", to_string(s).data(), set.ids.size());
        set.ids.push_back(id);
        set.labels.push_back(c);
        for (std::size_t r = 0; r < dim; ++r) values.push_back(clean[r] + cfg.noise * noise(noise_rng));
      }
    }
    set.features = Tensor(set.ids.size(), dim, std::move(values));
  }
  return d;
}

}  // namespace tmn
