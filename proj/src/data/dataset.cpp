#include <algorithm>
#include <filesystem>
#include <set>
#include <unordered_set>

#include "tmn/data.hpp"
#include "tmn/error.hpp"
#include "tmn/text.hpp"

namespace tmn {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::vector<ConceptPair> SplitSpec::pairs(Split split) const {
  std::vector<ConceptPair> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(e.pair);
  }
  return out;
}

std::vector<ConceptPair> SplitSpec::seen_pairs(Split split) const {
  std::vector<ConceptPair> out;
  for (const auto& e : entries) {
    if (e.split == split && !e.unseen) out.push_back(e.pair);
  }
  return out;
}

std::vector<ConceptPair> SplitSpec::unseen_pairs(Split split) const {
  std::vector<ConceptPair> out;
  for (const auto& e : entries) {
    if (e.split == split && e.unseen) out.push_back(e.pair);
  }
  return out;
}

namespace {

std::string quoted(const Vocab& vocab, ConceptPair p) { return "'" + vocab.describe(p) + "'"; }

// Semantic checks shared by the file parser and in-memory validation. `where`
// gives the location prefix of entry i.
template <class Where>
void check_entries(const Vocab& vocab, const std::vector<SplitEntry>& entries, Where where) {
  std::set<ConceptPair> train;
  std::set<std::pair<Split, ConceptPair>> listed;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SplitEntry& e = entries[i];
    vocab.check(e.pair);
    if (!listed.insert({e.split, e.pair}).second) {
      throw FormatError(where(i) + "pair " + quoted(vocab, e.pair) + " listed twice in " +
                        std::string(to_string(e.split)));
    }
    if (e.split == Split::train) {
      if (e.unseen) throw FormatError(where(i) + "train pairs must be flagged seen");
      train.insert(e.pair);
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const SplitEntry& e = entries[i];
    if (e.split == Split::train) continue;
    const bool in_train = train.count(e.pair) > 0;
    if (e.unseen && in_train) {
      throw FormatError(where(i) + "unseen " + std::string(to_string(e.split)) + " pair " +
                        quoted(vocab, e.pair) + " is also a train pair");
    }
    if (!e.unseen && !in_train) {
      throw FormatError(where(i) + "seen " + std::string(to_string(e.split)) + " pair " +
                        quoted(vocab, e.pair) + " is not a train pair");
    }
  }
  if (train.empty()) throw FormatError("split file has no train pairs");
  std::vector<bool> object_seen(vocab.num_objects()), attribute_seen(vocab.num_attributes());
  for (ConceptPair p : train) {
    object_seen[p.object] = true;
    attribute_seen[p.attribute] = true;
  }
  for (std::size_t o = 0; o < object_seen.size(); ++o) {
    if (!object_seen[o]) {
      throw FormatError("object '" + vocab.objects()[o] + "' occurs in no train pair");
    }
  }
  for (std::size_t a = 0; a < attribute_seen.size(); ++a) {
    if (!attribute_seen[a]) {
      throw FormatError("attribute '" + vocab.attributes()[a] + "' occurs in no train pair");
    }
  }
}

std::string location(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of("\t\n\r") != std::string::npos) {
    throw FormatError("name '" + name + "' cannot be written to a TSV file");
  }
}

}  // namespace

void SplitSpec::validate(const Vocab& vocab) const {
  check_entries(vocab, entries, [](std::size_t) { return std::string(); });
}

CandidateSet evaluation_candidates(const SplitSpec& splits, Split split) {
  CandidateSet c;
  c.pairs = splits.train_pairs();
  c.unseen.assign(c.pairs.size(), 0);
  for (ConceptPair p : splits.unseen_pairs(split)) {
    c.pairs.push_back(p);
    c.unseen.push_back(1);
  }
  return c;
}

const SampleSet& Dataset::samples(Split split) const {
  switch (split) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return train;
}

SampleSet& Dataset::samples(Split split) {
  return const_cast<SampleSet&>(static_cast<const Dataset&>(*this).samples(split));
}

std::pair<Vocab, SplitSpec> parse_splits(std::string_view text, std::string_view source) {
  Vocab vocab;
  SplitSpec spec;
  std::vector<std::size_t> line_of;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string_view line = lines[n];
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 4) {
      throw FormatError(location(source, n + 1) + "expected 4 tab-separated fields, got " +
                        std::to_string(f.size()));
    }
    SplitEntry e;
    if (f[0] == "train") e.split = Split::train;
    else if (f[0] == "val") e.split = Split::val;
    else if (f[0] == "test") e.split = Split::test;
    else throw FormatError(location(source, n + 1) + "unknown split '" + std::string(f[0]) + "'");
    if (f[1] == "seen") e.unseen = false;
    else if (f[1] == "unseen") e.unseen = true;
    else throw FormatError(location(source, n + 1) + "expected seen or unseen, got '" +
                           std::string(f[1]) + "'");
    if (f[2].empty() || f[3].empty()) throw FormatError(location(source, n + 1) + "empty name");
    e.pair = {vocab.intern_object(std::string(f[2])), vocab.intern_attribute(std::string(f[3]))};
    spec.entries.push_back(e);
    line_of.push_back(n + 1);
  }
  check_entries(vocab, spec.entries,
                [&](std::size_t i) { return location(source, line_of[i]); });
  return {std::move(vocab), std::move(spec)};
}

std::pair<Vocab, SplitSpec> load_splits(const std::string& path) {
  return parse_splits(read_file(path), path);
}

SampleSet parse_features(std::string_view text, std::string_view source, const Vocab& vocab,
                         const SplitSpec& splits, Split split) {
  const auto lines = split_lines(text);
  std::size_t n = 0;
  while (n < lines.size() && lines[n].empty()) ++n;
  if (n == lines.size()) throw FormatError(std::string(source) + ": missing '#D <dim>' header");
  std::optional<std::size_t> dim;
  if (lines[n].substr(0, 3) == "#D ") dim = parse_size(lines[n].substr(3));
  if (!dim || *dim == 0) {
    throw FormatError(location(source, n + 1) + "expected header '#D <dim>', got '" +
                      std::string(lines[n]) + "'");
  }
  const std::vector<ConceptPair> allowed_list = splits.pairs(split);
  const std::set<ConceptPair> allowed(allowed_list.begin(), allowed_list.end());

  SampleSet set;
  std::vector<double> values;
  std::unordered_set<std::string> ids;
  for (++n; n < lines.size(); ++n) {
    const std::string_view line = lines[n];
    if (line.empty()) continue;
    const std::string where = location(source, n + 1);
    const auto f = split_fields(line, '\t');
    if (f.size() != 3 + *dim) {
      throw FormatError(where + "expected " + std::to_string(*dim) + " feature values, got " +
                        std::to_string(f.size() < 3 ? 0 : f.size() - 3));
    }
    std::string id(f[0]);
    if (id.empty()) throw FormatError(where + "empty sample id");
    if (!ids.insert(id).second) throw FormatError(where + "duplicate sample id '" + id + "'");
    const auto object = vocab.find_object(f[1]);
    const auto attribute = vocab.find_attribute(f[2]);
    if (!object || !attribute) {
      throw FormatError(where + "unknown pair '" + std::string(f[2]) + " " + std::string(f[1]) +
                        "'");
    }
    const ConceptPair label{*object, *attribute};
    if (!allowed.count(label)) {
      throw FormatError(where + "pair " + quoted(vocab, label) + " is not a " +
                        std::string(to_string(split)) + " pair");
    }
    for (std::size_t i = 0; i < *dim; ++i) {
      const auto v = parse_double(f[3 + i]);
      if (!v) {
        throw FormatError(where + "bad feature value '" + std::string(f[3 + i]) + "' in column " +
                          std::to_string(4 + i));
      }
      values.push_back(*v);
    }
    set.ids.push_back(std::move(id));
    set.labels.push_back(label);
  }
  set.features = Tensor(set.ids.size(), *dim, std::move(values));
  return set;
}

SampleSet load_features(const std::string& path, const Vocab& vocab, const SplitSpec& splits,
                        Split split) {
  return parse_features(read_file(path), path, vocab, splits, split);
}

Dataset load_dataset(const std::string& splits_path, const std::string& train_features,
                     const std::string& val_features, const std::string& test_features) {
  Dataset d;
  std::tie(d.vocab, d.splits) = load_splits(splits_path);
  const std::string paths[] = {train_features, val_features, test_features};
  const Split order[] = {Split::train, Split::val, Split::test};
  std::unordered_set<std::string> ids;
  for (int s = 0; s < 3; ++s) {
    SampleSet set = load_features(paths[s], d.vocab, d.splits, order[s]);
    const std::size_t dim = set.features.cols();
    if (s == 0) d.feature_dim = dim;
    if (dim != d.feature_dim) {
      throw FormatError(paths[s] + ": feature dimension " + std::to_string(dim) + " differs from " +
                        std::to_string(d.feature_dim) + " in " + paths[0]);
    }
    for (const auto& id : set.ids) {
      if (!ids.insert(id).second) {
        throw FormatError(paths[s] + ": sample id '" + id + "' also used in another split");
      }
    }
    d.samples(order[s]) = std::move(set);
  }
  return d;
}

Dataset load_dataset(const std::string& dir) {
  const std::filesystem::path p(dir);
  return load_dataset((p / "splits.tsv").string(), (p / "train.tsv").string(),
                      (p / "val.tsv").string(), (p / "test.tsv").string());
}

std::string format_splits(const Vocab& vocab, const SplitSpec& splits) {
  std::string out;
  for (const auto& e : splits.entries) {
    vocab.check(e.pair);
    const std::string& o = vocab.objects()[e.pair.object];
    const std::string& a = vocab.attributes()[e.pair.attribute];
    check_name(o);
    check_name(a);
    out += std::string(to_string(e.split)) + '\t' + (e.unseen ? "unseen" : "seen") + '\t' + o +
           '\t' + a + '\n';
  }
  return out;
}

std::string format_features(const Vocab& vocab, const SampleSet& samples, std::size_t dim) {
  std::string out = "#D " + std::to_string(dim) + "\n";
  for (std::size_t r = 0; r < samples.size(); ++r) {
    check_name(samples.ids[r]);
    out += samples.ids[r];
    out += '\t' + vocab.objects()[samples.labels[r].object];
    out += '\t' + vocab.attributes()[samples.labels[r].attribute];
    for (double v : samples.features.row_span(r)) out += '\t' + format_double(v);
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  dataset.splits.validate(dataset.vocab);
  std::filesystem::create_directories(dir);
  const std::filesystem::path p(dir);
  write_file((p / "splits.tsv").string(), format_splits(dataset.vocab, dataset.splits));
  for (Split s : {Split::train, Split::val, Split::test}) {
    write_file((p / (std::string(to_string(s)) + ".tsv")).string(),
               format_features(dataset.vocab, dataset.samples(s), dataset.feature_dim));
  }
}

DatasetProfile mit_states_profile() { return {"mit-states", 245, 115, 1262, 300, 300, 400, 400}; }
DatasetProfile ut_zappos_profile() { return {"ut-zappos", 12, 16, 83, 15, 15, 18, 18}; }

void check_profile(const Vocab& vocab, const SplitSpec& splits, const DatasetProfile& profile) {
  std::string problems;
  auto expect = [&](std::string_view what, std::size_t got, std::size_t want) {
    if (got == want) return;
    if (!problems.empty()) problems += "; ";
    problems += std::string(what) + " " + std::to_string(got) + " (expected " +
                std::to_string(want) + ")";
  };
  expect("objects", vocab.num_objects(), profile.objects);
  expect("attributes", vocab.num_attributes(), profile.attributes);
  expect("train pairs", splits.train_pairs().size(), profile.train_pairs);
  expect("val seen pairs", splits.seen_pairs(Split::val).size(), profile.val_seen);
  expect("val unseen pairs", splits.unseen_pairs(Split::val).size(), profile.val_unseen);
  expect("test seen pairs", splits.seen_pairs(Split::test).size(), profile.test_seen);
  expect("test unseen pairs", splits.unseen_pairs(Split::test).size(), profile.test_unseen);
  if (!problems.empty()) {
    throw FormatError("split does not match the " + profile.name + " profile: " + problems);
  }
}

EmbeddingTable parse_embeddings(std::string_view text, std::string_view source, const Vocab& vocab) {
  std::set<std::string> wanted;
  for (const auto& n : vocab.objects()) wanted.insert(normalize_token(n));
  for (const auto& n : vocab.attributes()) wanted.insert(normalize_token(n));

  EmbeddingTable table;
  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    std::vector<std::string_view> f;
    for (auto field : split_fields(lines[n], ' ')) {
      if (!field.empty()) f.push_back(field);
    }
    if (f.size() < 2) throw FormatError(location(source, n + 1) + "token without a vector");
    const std::size_t len = f.size() - 1;
    if (table.vectors.dim == 0) table.vectors.dim = len;
    if (len != table.vectors.dim) {
      throw FormatError(location(source, n + 1) + "vector has " + std::to_string(len) +
                        " values, earlier lines have " + std::to_string(table.vectors.dim));
    }
    std::vector<double> v;
    for (std::size_t i = 1; i < f.size(); ++i) {
      const auto x = parse_double(f[i]);
      if (!x) throw FormatError(location(source, n + 1) + "bad value '" + std::string(f[i]) + "'");
      v.push_back(*x);
    }
    const std::string token = normalize_token(f[0]);
    if (wanted.count(token)) table.vectors.vectors.emplace(token, std::move(v));
  }
  for (const auto* names : {&vocab.objects(), &vocab.attributes()}) {
    for (const auto& name : *names) {
      if (!table.vectors.vectors.count(normalize_token(name))) table.missing.push_back(name);
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab) {
  return parse_embeddings(read_file(path), path, vocab);
}

}  // namespace tmn
