#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "tmn/error.hpp"
#include "tmn/model.hpp"

namespace tmn {
namespace {

constexpr std::string_view kMagic = "TMN1";

std::string_view group_name(ParamGroup g) { return g == ParamGroup::feature ? "feature" : "gating"; }

void write_names(std::ostream& out, std::string_view label, const std::vector<std::string>& names) {
  out << label << ' ' << names.size() << '\n';
  for (const auto& n : names) {
    if (n.empty() || n.find_first_of("\n\r") != std::string::npos) {
      throw FormatError("cannot store vocabulary name '" + n + "' in a checkpoint");
    }
    out << n << '\n';
  }
}

void write_double(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double read_double(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw FormatError("checkpoint: truncated data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

// Reads one header line of the form "<key> <rest>".
std::string expect_line(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("checkpoint: missing '" + std::string(key) + "'");
  if (line.rfind(std::string(key) + ' ', 0) != 0) {
    throw FormatError("checkpoint: expected '" + std::string(key) + "', got '" + line + "'");
  }
  return line.substr(key.size() + 1);
}

std::size_t parse_count(const std::string& text, std::string_view key) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) {
    throw FormatError("checkpoint: bad value '" + text + "' for " + std::string(key));
  }
  return static_cast<std::size_t>(v);
}

std::vector<std::string> read_names(std::istream& in, std::string_view key) {
  const std::size_t n = parse_count(expect_line(in, key), key);
  std::vector<std::string> names(n);
  for (auto& name : names) {
    if (!std::getline(in, name)) throw FormatError("checkpoint: truncated " + std::string(key));
  }
  return names;
}

}  // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  const ModularNetConfig& c = params.config;
  out << kMagic << '\n';
  out << "kind " << to_string(params.kind) << '\n';
  out << "input_dim " << c.input_dim << '\n';
  out << "hidden_modules " << c.hidden_modules.size();
  for (std::size_t m : c.hidden_modules) out << ' ' << m;
  out << '\n';
  out << "module_dim " << c.module_dim << '\n';
  out << "gating_hidden " << c.gating_hidden << '\n';
  out << "embedding_dim " << c.embedding_dim << '\n';
  write_names(out, "objects", params.vocab.objects());
  write_names(out, "attributes", params.vocab.attributes());
  out << "blocks " << params.blocks.size() << '\n';
  for (const auto& b : params.blocks) {
    out << b.name << ' ' << group_name(b.group) << ' ' << b.value.rows() << ' ' << b.value.cols()
        << '\n';
  }
  out << "data\n";
  for (const auto& b : params.blocks) {
    for (double v : b.value.values()) write_double(out, v);
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  save_checkpoint(params, out);
}

ModelParams load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw FormatError("not a TMN1 checkpoint");

  const ModelKind kind = parse_model_kind(expect_line(in, "kind"));
  ModularNetConfig c;
  c.input_dim = parse_count(expect_line(in, "input_dim"), "input_dim");
  {
    std::istringstream hm(expect_line(in, "hidden_modules"));
    std::size_t n = 0;
    if (!(hm >> n)) throw FormatError("checkpoint: bad hidden_modules");
    c.hidden_modules.assign(n, 0);
    for (auto& m : c.hidden_modules) {
      if (!(hm >> m)) throw FormatError("checkpoint: bad hidden_modules");
    }
  }
  c.module_dim = parse_count(expect_line(in, "module_dim"), "module_dim");
  c.gating_hidden = parse_count(expect_line(in, "gating_hidden"), "gating_hidden");
  c.embedding_dim = parse_count(expect_line(in, "embedding_dim"), "embedding_dim");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  std::vector<std::string> objects = read_names(in, "objects");
  Vocab vocab(std::move(objects), read_names(in, "attributes"));

  // The expected layout comes from a fresh initialisation of the same shape.
  ModelParams params = init_params(kind, c, vocab, 0);
  const std::size_t n = parse_count(expect_line(in, "blocks"), "blocks");
  if (n != params.blocks.size()) {
    throw FormatError("checkpoint: " + std::to_string(n) + " blocks, " +
                      std::string(to_string(kind)) + " needs " +
                      std::to_string(params.blocks.size()));
  }
  for (auto& b : params.blocks) {
    if (!std::getline(in, line)) throw FormatError("checkpoint: truncated block list");
    std::ostringstream want;
    want << b.name << ' ' << group_name(b.group) << ' ' << b.value.rows() << ' ' << b.value.cols();
    if (line != want.str()) {
      throw FormatError("checkpoint: block '" + line + "', expected '" + want.str() + "'");
    }
  }
  if (!std::getline(in, line) || line != "data") throw FormatError("checkpoint: missing data");
  for (auto& b : params.blocks) {
    for (double& v : b.value.values()) v = read_double(in);
    if (!b.value.all_finite()) throw FormatError("checkpoint: non-finite value in " + b.name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return params;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace tmn
