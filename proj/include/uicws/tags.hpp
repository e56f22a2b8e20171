#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "uicws/errors.hpp"

namespace uicws {

/// Entity mention [start, end) with a type label.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string type;

  std::size_t length() const noexcept { return end - start; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class TagPos { O, B, I, E, S };

/// A parsed tag string: position prefix plus entity type ("" for O).
struct TagParts {
  TagPos pos = TagPos::O;
  std::string type;
};

inline std::optional<TagParts> split_tag(const std::string& tag) {
  if (tag == "O") return TagParts{TagPos::O, {}};
  if (tag.size() < 3 || tag[1] != '-') return std::nullopt;
  TagParts parts;
  switch (tag[0]) {
    case 'B': parts.pos = TagPos::B; break;
    case 'I': parts.pos = TagPos::I; break;
    case 'E': parts.pos = TagPos::E; break;
    case 'S': parts.pos = TagPos::S; break;
    default: return std::nullopt;
  }
  parts.type = tag.substr(2);
  return parts;
}

/// BIOES tags over an ordered list of entity types. Id 0 is O; type t owns
/// ids 1+4t .. 4+4t in the order B, I, E, S.
class TagScheme {
 public:
  TagScheme() { rebuild(); }
  explicit TagScheme(std::vector<std::string> entity_types) : types_(std::move(entity_types)) {
    std::vector<std::string> sorted = types_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("duplicate entity type in tag scheme");
    }
    for (const auto& t : types_) {
      if (t.empty()) throw ConfigError("empty entity type in tag scheme");
    }
    rebuild();
  }

  const std::vector<std::string>& entity_types() const noexcept { return types_; }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  std::size_t size() const noexcept { return tags_.size(); }

  std::optional<std::size_t> id(const std::string& tag) const {
    auto it = tag_to_id_.find(tag);
    if (it == tag_to_id_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& tag(std::size_t id) const { return tags_.at(id); }

  TagPos position(std::size_t id) const {
    if (id == 0) return TagPos::O;
    return static_cast<TagPos>(1 + (id - 1) % 4);
  }
  /// Entity type index of a non-O tag.
  std::size_t type_index(std::size_t id) const { return (id - 1) / 4; }

  std::size_t tag_id(TagPos pos, std::size_t type_index) const {
    if (pos == TagPos::O) return 0;
    return 1 + 4 * type_index + (static_cast<std::size_t>(pos) - 1);
  }

  /// Whether tag `next` may directly follow tag `prev`.
  bool allowed(std::size_t prev, std::size_t next) const {
    const TagPos p = position(prev);
    const TagPos n = position(next);
    if (p == TagPos::B || p == TagPos::I) {
      return (n == TagPos::I || n == TagPos::E) && type_index(prev) == type_index(next);
    }
    return n == TagPos::O || n == TagPos::B || n == TagPos::S;
  }
  bool allowed_start(std::size_t id) const {
    const TagPos p = position(id);
    return p == TagPos::O || p == TagPos::B || p == TagPos::S;
  }
  bool allowed_end(std::size_t id) const {
    const TagPos p = position(id);
    return p == TagPos::O || p == TagPos::E || p == TagPos::S;
  }

  friend bool operator==(const TagScheme& a, const TagScheme& b) { return a.types_ == b.types_; }

 private:
  void rebuild() {
    tags_.assign(1, "O");
    for (const auto& t : types_) {
      for (const char* p : {"B-", "I-", "E-", "S-"}) tags_.push_back(p + t);
    }
    tag_to_id_.clear();
    for (std::size_t i = 0; i < tags_.size(); ++i) tag_to_id_.emplace(tags_[i], i);
  }

  std::vector<std::string> types_;
  std::vector<std::string> tags_;
  std::map<std::string, std::size_t> tag_to_id_;
};

/// Encodes non-overlapping in-bounds spans as a BIOES tag sequence of length n.
inline std::vector<std::string> spans_to_bioes(std::size_t n, std::vector<Span> spans) {
  std::sort(spans.begin(), spans.end());
  std::vector<std::string> tags(n, "O");
  std::size_t covered_until = 0;
  for (const auto& s : spans) {
    if (s.end <= s.start || s.end > n || s.start < covered_until || s.type.empty()) {
      throw OverlappingSpans("(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ", " + s.type +
                             ") in sequence of length " + std::to_string(n));
    }
    if (s.length() == 1) {
      tags[s.start] = "S-" + s.type;
    } else {
      tags[s.start] = "B-" + s.type;
      for (std::size_t i = s.start + 1; i + 1 < s.end; ++i) tags[i] = "I-" + s.type;
      tags[s.end - 1] = "E-" + s.type;
    }
    covered_until = s.end;
  }
  return tags;
}

/// Decodes a BIOES sequence into spans. Throws IllegalTagSequence on any
/// grammar violation (unknown tag, I/E without B, unterminated B, type switch).
inline std::vector<Span> bioes_to_spans(const std::vector<std::string>& tags, std::size_t sentence_index = 0) {
  std::vector<Span> spans;
  std::optional<Span> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    auto parts = split_tag(tags[i]);
    if (!parts) throw IllegalTagSequence(sentence_index, i, "unknown tag '" + tags[i] + "'");
    const auto fail = [&](const char* why) { throw IllegalTagSequence(sentence_index, i, why); };
    switch (parts->pos) {
      case TagPos::O:
        if (open) fail("entity not closed before O");
        break;
      case TagPos::S:
        if (open) fail("entity not closed before S");
        spans.push_back({i, i + 1, parts->type});
        break;
      case TagPos::B:
        if (open) fail("entity not closed before B");
        open = Span{i, i + 1, parts->type};
        break;
      case TagPos::I:
        if (!open || open->type != parts->type) fail("I without matching B");
        break;
      case TagPos::E:
        if (!open || open->type != parts->type) fail("E without matching B");
        open->end = i + 1;
        spans.push_back(*open);
        open.reset();
        break;
    }
  }
  if (open) throw IllegalTagSequence(sentence_index, tags.size(), "entity not closed at end of sentence");
  return spans;
}

/// Converts an IOB2 sequence to BIOES. Throws IllegalTagSequence for I without B.
inline std::vector<std::string> bio_to_bioes(const std::vector<std::string>& tags, std::size_t sentence_index = 0) {
  std::vector<Span> spans;
  std::optional<Span> open;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      if (open) spans.push_back(*open), open.reset();
      continue;
    }
    if (t.size() < 3 || t[1] != '-' || (t[0] != 'B' && t[0] != 'I')) {
      throw IllegalTagSequence(sentence_index, i, "unknown BIO tag '" + t + "'");
    }
    const std::string type = t.substr(2);
    if (t[0] == 'B') {
      if (open) spans.push_back(*open);
      open = Span{i, i + 1, type};
    } else {
      if (!open || open->type != type) throw IllegalTagSequence(sentence_index, i, "I without matching B");
      open->end = i + 1;
    }
  }
  if (open) spans.push_back(*open);
  return spans_to_bioes(tags.size(), spans);
}

}  // namespace uicws
