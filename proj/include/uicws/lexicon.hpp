#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "uicws/errors.hpp"
#include "uicws/utf8.hpp"

namespace uicws {

/// Word lexicon backed by a character trie. Immutable once built.
class Lexicon {
 public:
  static constexpr std::size_t kMaxWordLen = 4;

  Lexicon() : nodes_(1) {}

  /// Builds a lexicon from words. Duplicates are merged. Throws WordTooLong
  /// (listing every offender) or EmptyWord.
  static Lexicon build(const std::vector<std::u32string>& words) {
    std::string too_long;
    for (const auto& w : words) {
      if (w.empty()) throw EmptyWord();
      if (w.size() > kMaxWordLen) {
        if (!too_long.empty()) too_long += ", ";
        too_long += utf8::encode(w);
      }
    }
    if (!too_long.empty()) throw WordTooLong(too_long);
    Lexicon lex;
    for (const auto& w : words) lex.insert(w);
    return lex;
  }

  static Lexicon build(const std::vector<std::string>& utf8_words) {
    std::vector<std::u32string> words;
    words.reserve(utf8_words.size());
    for (const auto& w : utf8_words) words.push_back(utf8::decode(w));
    return build(words);
  }

  /// One word per line; blank lines and lines starting with '#' are ignored.
  static Lexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file: " + path);
    std::vector<std::u32string> words;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto last = line.find_last_not_of(" \t");
      try {
        words.push_back(utf8::decode(std::string_view(line).substr(first, last - first + 1)));
      } catch (const DataError& e) {
        throw ParseError(lineno, path + ": " + e.what());
      }
    }
    return build(words);
  }

  bool contains(std::u32string_view word) const {
    if (word.empty() || word.size() > kMaxWordLen) return false;
    int node = 0;
    for (char32_t c : word) {
      node = child(node, c);
      if (node < 0) return false;
    }
    return nodes_[node].terminal;
  }

  bool contains(std::string_view utf8_word) const { return contains(utf8::decode(utf8_word)); }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  /// All entries in lexicographic (code point) order.
  std::vector<std::u32string> words() const {
    std::vector<std::u32string> out;
    std::u32string prefix;
    collect(0, prefix, out);
    return out;
  }

  /// Walks the trie from `sentence[start]` and calls `fn(end)` for every
  /// entry sentence[start..end).
  template <class Fn>
  void for_each_prefix_match(std::u32string_view sentence, std::size_t start, Fn&& fn) const {
    int node = 0;
    const std::size_t stop = std::min(sentence.size(), start + kMaxWordLen);
    for (std::size_t j = start; j < stop; ++j) {
      node = child(node, sentence[j]);
      if (node < 0) return;
      if (nodes_[node].terminal) fn(j + 1);
    }
  }

 private:
  struct Node {
    std::map<char32_t, int> next;
    bool terminal = false;
  };

  int child(int node, char32_t c) const {
    const auto& next = nodes_[node].next;
    auto it = next.find(c);
    return it == next.end() ? -1 : it->second;
  }

  void insert(const std::u32string& word) {
    int node = 0;
    for (char32_t c : word) {
      int nxt = child(node, c);
      if (nxt < 0) {
        nxt = static_cast<int>(nodes_.size());
        nodes_[node].next.emplace(c, nxt);
        nodes_.emplace_back();
      }
      node = nxt;
    }
    if (!nodes_[node].terminal) {
      nodes_[node].terminal = true;
      ++size_;
    }
  }

  void collect(int node, std::u32string& prefix, std::vector<std::u32string>& out) const {
    if (nodes_[node].terminal) out.push_back(prefix);
    for (const auto& [c, nxt] : nodes_[node].next) {
      prefix.push_back(c);
      collect(nxt, prefix, out);
      prefix.pop_back();
    }
  }

  std::vector<Node> nodes_;
  std::size_t size_ = 0;
};

/// A lexicon word found inside a sentence: surface == sentence[start, end).
struct CandidateWord {
  std::size_t start = 0;
  std::size_t end = 0;
  std::u32string surface;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const CandidateWord&, const CandidateWord&) = default;
};

/// Column order of a candidacy row.
enum CandidateSlot : std::size_t { kBegin = 0, kInside = 1, kEnd = 2, kSingle = 3 };

/// Per-character 4-bit candidacy vectors, columns [B, I, E, S].
struct CandidateMatrix {
  std::vector<std::array<std::uint8_t, 4>> rows;

  std::size_t size() const noexcept { return rows.size(); }
  friend bool operator==(const CandidateMatrix&, const CandidateMatrix&) = default;
};

/// Every lexicon word occurring in the sentence, sorted by (start, end).
inline std::vector<CandidateWord> scan_candidates(std::u32string_view sentence, const Lexicon& lex) {
  std::vector<CandidateWord> out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    lex.for_each_prefix_match(sentence, i, [&](std::size_t end) {
      out.push_back({i, end, std::u32string(sentence.substr(i, end - i))});
    });
  }
  return out;
}

inline CandidateMatrix candidate_matrix(std::size_t n, const std::vector<CandidateWord>& words) {
  CandidateMatrix m;
  m.rows.assign(n, {0, 0, 0, 0});
  for (const auto& w : words) {
    if (w.length() == 1) {
      m.rows[w.start][kSingle] = 1;
      continue;
    }
    m.rows[w.start][kBegin] = 1;
    m.rows[w.end - 1][kEnd] = 1;
    for (std::size_t i = w.start + 1; i + 1 < w.end; ++i) m.rows[i][kInside] = 1;
  }
  return m;
}

inline CandidateMatrix candidate_positions(std::u32string_view sentence, const Lexicon& lex) {
  return candidate_matrix(sentence.size(), scan_candidates(sentence, lex));
}

}  // namespace uicws
