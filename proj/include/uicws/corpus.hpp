#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uicws/errors.hpp"
#include "uicws/lexicon.hpp"
#include "uicws/tags.hpp"
#include "uicws/utf8.hpp"

namespace uicws {

/// One annotated sentence. `tags` is empty for untagged input.
struct Sentence {
  std::u32string chars;
  std::vector<Span> spans;
  std::vector<std::string> tags;

  std::size_t size() const noexcept { return chars.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

inline Sentence make_sentence(std::u32string chars, std::vector<Span> spans) {
  Sentence s;
  s.tags = spans_to_bioes(chars.size(), spans);
  std::sort(spans.begin(), spans.end());
  s.spans = std::move(spans);
  s.chars = std::move(chars);
  return s;
}

struct ConllOptions {
  /// Zero-based column holding the tag (column 0 is the character).
  std::size_t tag_column = 1;
  /// Lines with a single column are accepted and the sentence has no tags.
  bool allow_untagged = false;
  /// Tags are IOB2 and get converted to BIOES on input.
  bool bio_input = false;
};

namespace detail {
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  const char* sep = line.find('\t') != std::string_view::npos ? "\t" : " ";
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = line.find_first_of(sep, pos);
    const auto field = line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (!field.empty()) out.push_back(field);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}
}  // namespace detail

/// Parses `<char>TAB<tag>` lines with blank-line sentence separation.
inline std::vector<Sentence> parse_conll(std::istream& in, const ConllOptions& opts = {},
                                         const std::string& source = "<stream>") {
  std::vector<Sentence> out;
  Sentence cur;
  std::vector<std::size_t> line_of;
  bool tagged = false;
  bool untagged = false;
  const auto flush = [&] {
    if (cur.chars.empty()) return;
    const std::size_t index = out.size();
    if (tagged) {
      try {
        if (opts.bio_input) cur.tags = bio_to_bioes(cur.tags, index);
        cur.spans = bioes_to_spans(cur.tags, index);
      } catch (const IllegalTagSequence& e) {
        const std::size_t line = e.position() < line_of.size() ? line_of[e.position()] : line_of.back();
        throw IllegalTagSequence(e.sentence_index(), e.position(),
                                 source + " line " + std::to_string(line) + ": " + std::string(e.what()));
      }
    }
    out.push_back(std::move(cur));
    cur = Sentence{};
    line_of.clear();
    tagged = untagged = false;
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    const auto fields = detail::split_fields(line);
    std::u32string ch;
    try {
      ch = utf8::decode(fields[0]);
    } catch (const DataError& e) {
      throw ParseError(lineno, source + ": " + e.what());
    }
    if (ch.size() != 1) throw ParseError(lineno, source + ": first column must be a single character");
    if (fields.size() > opts.tag_column) {
      const std::string tag(fields[opts.tag_column]);
      if (tag != "O" && !split_tag(tag)) throw ParseError(lineno, source + ": unknown tag '" + tag + "'");
      if (opts.bio_input && tag != "O" && tag[0] != 'B' && tag[0] != 'I') {
        throw ParseError(lineno, source + ": not an IOB2 tag '" + tag + "'");
      }
      cur.tags.push_back(tag);
      tagged = true;
    } else if (opts.allow_untagged && fields.size() == 1) {
      untagged = true;
    } else {
      throw ParseError(lineno, source + ": expected a tag in column " + std::to_string(opts.tag_column + 1));
    }
    if (tagged && untagged) throw ParseError(lineno, source + ": sentence mixes tagged and untagged lines");
    cur.chars.push_back(ch[0]);
    line_of.push_back(lineno);
  }
  flush();
  return out;
}

inline std::vector<Sentence> parse_conll(const std::string& path, const ConllOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return parse_conll(in, opts, path);
}

/// Writes sentences as CoNLL; `extra` (optional) appends a column per character.
inline void write_conll(std::ostream& out, const std::vector<Sentence>& sentences,
                        const std::vector<std::vector<std::string>>* extra = nullptr,
                        const std::string& missing_tag = "_") {
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& sent = sentences[s];
    for (std::size_t i = 0; i < sent.size(); ++i) {
      out << utf8::encode(sent.chars[i]) << '\t' << (sent.tags.empty() ? missing_tag : sent.tags[i]);
      if (extra) out << '\t' << (*extra)[s][i];
      out << '\n';
    }
    out << '\n';
  }
}

/// Entity types appearing in a corpus, sorted.
inline TagScheme scheme_from(const std::vector<Sentence>& sentences) {
  std::vector<std::string> types;
  for (const auto& s : sentences)
    for (const auto& sp : s.spans) types.push_back(sp.type);
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  return TagScheme(std::move(types));
}

/// Throws IllegalTagSequence if a sentence uses a type the scheme lacks.
inline void validate_against(const std::vector<Sentence>& sentences, const TagScheme& scheme) {
  for (std::size_t s = 0; s < sentences.size(); ++s)
    for (std::size_t i = 0; i < sentences[s].tags.size(); ++i)
      if (!scheme.id(sentences[s].tags[i])) {
        throw IllegalTagSequence(s, i, "tag '" + sentences[s].tags[i] + "' not in tag scheme");
      }
}

/// Pretrained character vectors. Absent characters map to `unk`, padding is zero.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> tokens;  // file order
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::vector<double> unk;
  std::vector<double> pad;

  const std::vector<double>& lookup(const std::string& token) const {
    auto it = vectors.find(token);
    return it == vectors.end() ? unk : it->second;
  }
  const std::vector<double>& lookup(char32_t c) const { return lookup(utf8::encode(c)); }
  bool contains(char32_t c) const { return vectors.count(utf8::encode(c)) != 0; }
};

inline constexpr std::uint64_t kUnkSeed = 20200601;

inline std::vector<double> make_unk_vector(std::size_t dim) {
  std::mt19937_64 rng(kUnkSeed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<double> v(dim);
  for (auto& x : v) x = u(rng);
  return v;
}

inline EmbeddingTable load_embeddings(std::istream& in, std::size_t expected_dim) {
  EmbeddingTable table;
  table.dim = expected_dim;
  table.unk = make_unk_vector(expected_dim);
  table.pad.assign(expected_dim, 0.0);
  std::string line;
  std::size_t lineno = 0;
  const auto parse_double = [&](std::string_view f) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size()) {
      throw MalformedLine(lineno, "not a number '" + std::string(f) + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (!rest.empty()) {
      const auto b = rest.find_first_not_of(" \t");
      if (b == std::string_view::npos) break;
      rest.remove_prefix(b);
      const auto e = rest.find_first_of(" \t");
      fields.push_back(rest.substr(0, e));
      if (e == std::string_view::npos) break;
      rest.remove_prefix(e);
    }
    if (fields.empty()) continue;
    if (lineno == 1 && fields.size() == 2) {
      std::size_t count = 0, dim = 0;
      const bool a = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count).ec == std::errc();
      const bool b = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), dim).ec == std::errc();
      if (a && b) {
        if (dim != expected_dim) throw DimMismatch(dim, expected_dim);
        continue;
      }
    }
    if (fields.size() - 1 != expected_dim) {
      if (fields.size() < 2) throw MalformedLine(lineno, "token without values");
      throw DimMismatch(fields.size() - 1, expected_dim);
    }
    std::vector<double> vec(expected_dim);
    for (std::size_t k = 0; k < expected_dim; ++k) vec[k] = parse_double(fields[k + 1]);
    std::string token(fields[0]);
    if (table.vectors.emplace(token, std::move(vec)).second) table.tokens.push_back(std::move(token));
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  return load_embeddings(in, expected_dim);
}

/// Character ids. Id 0 is padding, id 1 the shared unknown character.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<char32_t> chars) : chars_(std::move(chars)) {
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      if (!index_.emplace(chars_[i], i + 2).second) throw DataError("duplicate character in vocabulary");
    }
  }

  /// Sorted distinct characters of a corpus.
  static Vocabulary from_corpus(const std::vector<Sentence>& sentences) {
    std::vector<char32_t> chars;
    for (const auto& s : sentences) chars.insert(chars.end(), s.chars.begin(), s.chars.end());
    std::sort(chars.begin(), chars.end());
    chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
    return Vocabulary(std::move(chars));
  }

  /// Single-character tokens of an embedding table, in file order.
  static Vocabulary from_table(const EmbeddingTable& table) {
    std::vector<char32_t> chars;
    std::map<char32_t, bool> seen;
    for (const auto& tok : table.tokens) {
      std::u32string u;
      try {
        u = utf8::decode(tok);
      } catch (const DataError&) {
        continue;
      }
      if (u.size() == 1 && seen.emplace(u[0], true).second) chars.push_back(u[0]);
    }
    return Vocabulary(std::move(chars));
  }

  std::size_t id(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnk : it->second;
  }
  std::size_t size() const noexcept { return chars_.size() + 2; }
  const std::vector<char32_t>& chars() const noexcept { return chars_; }

  std::vector<std::size_t> encode(std::u32string_view s) const {
    std::vector<std::size_t> ids(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) ids[i] = id(s[i]);
    return ids;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.chars_ == b.chars_; }

 private:
  std::vector<char32_t> chars_;
  std::map<char32_t, std::size_t> index_;
};

/// Padded mini-batch, B x L. Padding cells hold kPad, zero candidacy and kIgnoreTag.
struct Batch {
  static constexpr int kIgnoreTag = -1;

  std::size_t batch_size = 0;
  std::size_t max_len = 0;
  std::vector<std::size_t> char_ids;           // B * L
  std::vector<std::array<std::uint8_t, 4>> cand_pos;  // B * L
  std::vector<int> tag_ids;                    // B * L
  std::vector<std::uint8_t> mask;              // B * L
  std::vector<std::size_t> lengths;            // B
  std::vector<std::size_t> sentence_index;     // B, position in the source corpus

  std::size_t at(std::size_t b, std::size_t j) const { return b * max_len + j; }
};

/// Batches in corpus order, or shuffled deterministically when a seed is given.
/// Untagged sentences get kIgnoreTag everywhere.
inline std::vector<Batch> make_batches(const std::vector<Sentence>& sentences, const Lexicon& lexicon,
                                       const TagScheme& scheme, const Vocabulary& vocab, std::size_t batch_size,
                                       std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> batches;
  for (std::size_t first = 0; first < order.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - first);
    Batch b;
    b.batch_size = count;
    for (std::size_t k = 0; k < count; ++k) b.max_len = std::max(b.max_len, sentences[order[first + k]].size());
    const std::size_t cells = count * b.max_len;
    b.char_ids.assign(cells, Vocabulary::kPad);
    b.cand_pos.assign(cells, {0, 0, 0, 0});
    b.tag_ids.assign(cells, Batch::kIgnoreTag);
    b.mask.assign(cells, 0);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t idx = order[first + k];
      const Sentence& s = sentences[idx];
      const auto cand = candidate_positions(s.chars, lexicon);
      b.lengths.push_back(s.size());
      b.sentence_index.push_back(idx);
      for (std::size_t j = 0; j < s.size(); ++j) {
        const std::size_t cell = b.at(k, j);
        b.char_ids[cell] = vocab.id(s.chars[j]);
        b.cand_pos[cell] = cand.rows[j];
        b.mask[cell] = 1;
        if (!s.tags.empty()) {
          const auto id = scheme.id(s.tags[j]);
          if (!id) throw IllegalTagSequence(idx, j, "tag '" + s.tags[j] + "' not in tag scheme");
          b.tag_ids[cell] = static_cast<int>(*id);
        }
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

/// Deterministic validation split: sorted indices of the held-out sentences.
inline std::vector<std::size_t> validation_indices(std::size_t corpus_size, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(corpus_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(static_cast<double>(corpus_size) * val_fraction + 0.5);
  order.resize(std::min(n_val, corpus_size));
  std::sort(order.begin(), order.end());
  return order;
}

struct CorpusSplit {
  std::vector<Sentence> train;
  std::vector<Sentence> val;
  std::vector<std::size_t> val_indices;
};

inline CorpusSplit split_corpus(const std::vector<Sentence>& corpus, double val_fraction, std::uint64_t seed) {
  CorpusSplit split;
  split.val_indices = validation_indices(corpus.size(), val_fraction, seed);
  std::size_t v = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (v < split.val_indices.size() && split.val_indices[v] == i) {
      split.val.push_back(corpus[i]);
      ++v;
    } else {
      split.train.push_back(corpus[i]);
    }
  }
  return split;
}

inline void write_split_manifest(const std::string& path, const std::vector<std::size_t>& val_indices,
                                 std::uint64_t seed, double val_fraction) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split manifest: " + path);
  out << "# validation sentence indices (0-based)\n";
  out << "# seed " << seed << " val_fraction " << val_fraction << "\n";
  for (std::size_t i : val_indices) out << i << '\n';
}

}  // namespace uicws
