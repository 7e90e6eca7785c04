#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tmn {

/// An (object, attribute) label; the unit of composition.
struct ConceptPair {
  std::size_t object = 0;
  std::size_t attribute = 0;
  friend auto operator<=>(const ConceptPair&, const ConceptPair&) = default;
};

/// Ordered object and attribute names. Ids are positions in the lists.
class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::string> objects, std::vector<std::string> attributes);

  /// Returns the id of `name`, appending it if new.
  std::size_t intern_object(const std::string& name);
  std::size_t intern_attribute(const std::string& name);

  std::optional<std::size_t> find_object(std::string_view name) const;
  std::optional<std::size_t> find_attribute(std::string_view name) const;
  std::optional<ConceptPair> find_pair(std::string_view object, std::string_view attribute) const;

  const std::vector<std::string>& objects() const { return objects_; }
  const std::vector<std::string>& attributes() const { return attributes_; }
  std::size_t num_objects() const { return objects_.size(); }
  std::size_t num_attributes() const { return attributes_.size(); }

  /// Throws VocabularyError when either id is out of range.
  void check(ConceptPair pair) const;
  /// "attribute object", e.g. "wrinkled envelope".
  std::string describe(ConceptPair pair) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.objects_ == b.objects_ && a.attributes_ == b.attributes_;
  }

 private:
  std::vector<std::string> objects_;
  std::vector<std::string> attributes_;
  std::unordered_map<std::string, std::size_t> object_ids_;
  std::unordered_map<std::string, std::size_t> attribute_ids_;
};

/// Lowercases and maps '_' to ' ' so "Cut_Open" and "cut open" compare equal.
std::string normalize_token(std::string_view name);

}  // namespace tmn
