#include "tmn/concepts.hpp"

#include <cctype>

#include "tmn/error.hpp"

namespace tmn {

Vocab::Vocab(std::vector<std::string> objects, std::vector<std::string> attributes) {
  for (const std::string& name : objects) {
    if (object_ids_.count(name)) throw FormatError("vocab: duplicate object name '" + name + "'");
    intern_object(name);
  }
  for (const std::string& name : attributes) {
    if (attribute_ids_.count(name)) {
      throw FormatError("vocab: duplicate attribute name '" + name + "'");
    }
    intern_attribute(name);
  }
}

std::size_t Vocab::intern_object(const std::string& name) {
  auto [it, inserted] = object_ids_.try_emplace(name, objects_.size());
  if (inserted) objects_.push_back(name);
  return it->second;
}

std::size_t Vocab::intern_attribute(const std::string& name) {
  auto [it, inserted] = attribute_ids_.try_emplace(name, attributes_.size());
  if (inserted) attributes_.push_back(name);
  return it->second;
}

std::optional<std::size_t> Vocab::find_object(std::string_view name) const {
  auto it = object_ids_.find(std::string(name));
  if (it == object_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Vocab::find_attribute(std::string_view name) const {
  auto it = attribute_ids_.find(std::string(name));
  if (it == attribute_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<ConceptPair> Vocab::find_pair(std::string_view object,
                                            std::string_view attribute) const {
  auto o = find_object(object);
  auto a = find_attribute(attribute);
  if (!o || !a) return std::nullopt;
  return ConceptPair{*o, *a};
}

void Vocab::check(ConceptPair pair) const {
  if (pair.object >= objects_.size()) {
    throw VocabularyError("object id " + std::to_string(pair.object) + " outside vocabulary of " +
                          std::to_string(objects_.size()));
  }
  if (pair.attribute >= attributes_.size()) {
    throw VocabularyError("attribute id " + std::to_string(pair.attribute) +
                          " outside vocabulary of " + std::to_string(attributes_.size()));
  }
}

std::string Vocab::describe(ConceptPair pair) const {
  check(pair);
  return attributes_[pair.attribute] + " " + objects_[pair.object];
}

std::string normalize_token(std::string_view name) {
  std::string out(name);
  for (char& c : out) {
    c = c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace tmn
