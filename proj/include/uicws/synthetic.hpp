#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "uicws/corpus.hpp"
#include "uicws/lexicon.hpp"

namespace uicws {

/// A toy lexicon-entity task. Entity words and distractor words are built
/// from the same characters, so only the lexicon word identity in context
/// tells an entity apart. Every planted entity-word occurrence is gold.
struct SyntheticOptions {
  std::size_t alphabet = 30;
  std::size_t entity_words = 40;
  std::size_t distractor_words = 40;
  std::size_t min_len = 10;
  std::size_t max_len = 20;
  std::size_t train = 600;
  std::size_t val = 150;
  std::size_t test = 150;
  std::string entity_type = "ENT";
  std::uint64_t seed = 7;
};

struct SyntheticTask {
  std::u32string alphabet;
  std::vector<std::u32string> entities;
  std::vector<std::u32string> distractors;
  Lexicon lexicon;  // entities and distractors
  std::vector<Sentence> train, val, test;
};

namespace detail {

inline bool contains_any(const std::u32string& s, const std::set<std::u32string>& words) {
  for (const auto& w : words)
    if (s.find(w) != std::u32string::npos) return true;
  return false;
}

/// Start positions of every occurrence of any of `words` in `s`.
inline std::vector<Span> occurrences(const std::u32string& s, const std::vector<std::u32string>& words,
                                     const std::string& type) {
  std::vector<Span> out;
  for (const auto& w : words)
    for (auto pos = s.find(w); pos != std::u32string::npos; pos = s.find(w, pos + 1))
      out.push_back(Span{pos, pos + w.size(), type});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

inline SyntheticTask make_synthetic_task(const SyntheticOptions& o = {}) {
  if (o.alphabet < 4 || o.entity_words == 0 || o.min_len < 3 || o.max_len < o.min_len) {
    throw ConfigError("synthetic: invalid options");
  }
  std::mt19937_64 rng(o.seed);
  const auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  SyntheticTask task;
  // CJK unified ideographs, spaced out so they are visually distinct.
  for (std::size_t i = 0; i < o.alphabet; ++i) task.alphabet.push_back(static_cast<char32_t>(0x4E00 + 0x101 * i));

  std::set<std::u32string> entity_set;
  std::size_t guard = 0;
  while (task.entities.size() < o.entity_words) {
    if (++guard > 100000) throw ConfigError("synthetic: cannot draw enough entity words");
    std::u32string w(2 + pick(2), U'\0');
    for (auto& c : w) c = task.alphabet[pick(o.alphabet)];
    if (w[0] == w[1] || entity_set.count(w)) continue;
    // No entity word may sit inside another: gold would be ambiguous.
    bool nested = false;
    for (const auto& e : task.entities)
      if (e.find(w) != std::u32string::npos || w.find(e) != std::u32string::npos) nested = true;
    if (nested) continue;
    entity_set.insert(w);
    task.entities.push_back(w);
  }

  // Distractors reuse entity characters: half start with an entity word's last
  // character, half end with an entity word's first one, so they chain onto
  // entities and overlap them as candidates.
  std::set<std::u32string> distractor_set;
  guard = 0;
  while (task.distractors.size() < o.distractor_words) {
    if (++guard > 100000) throw ConfigError("synthetic: cannot draw enough distractor words");
    const auto& anchor = task.entities[pick(task.entities.size())];
    const auto& donor = task.entities[pick(task.entities.size())];
    std::u32string w;
    const std::size_t len = 2 + pick(2);
    if (task.distractors.size() % 2 == 0) {
      w.push_back(anchor.back());
      for (std::size_t i = 1; i < len; ++i) w.push_back(donor[pick(donor.size())]);
    } else {
      for (std::size_t i = 1; i < len; ++i) w.push_back(donor[pick(donor.size())]);
      w.push_back(anchor.front());
    }
    if (entity_set.count(w) || distractor_set.count(w) || detail::contains_any(w, entity_set)) continue;
    bool inside_entity = false;
    for (const auto& e : task.entities)
      if (e.find(w) != std::u32string::npos) inside_entity = true;
    if (inside_entity) continue;
    distractor_set.insert(w);
    task.distractors.push_back(w);
  }
  std::vector<std::u32string> all = task.entities;
  all.insert(all.end(), task.distractors.begin(), task.distractors.end());
  task.lexicon = Lexicon::build(all);

  const auto make_sentence_once = [&]() -> std::optional<Sentence> {
    const std::size_t n = o.min_len + pick(o.max_len - o.min_len + 1);
    std::u32string s(n, U'\0');
    std::vector<bool> used(n, false);
    std::vector<Span> planted;
    const auto place = [&](const std::u32string& w, bool entity) {
      if (w.size() > n) return false;
      const std::size_t at = pick(n - w.size() + 1);
      for (std::size_t i = 0; i < w.size(); ++i)
        if (used[at + i] && s[at + i] != w[i]) return false;
      for (std::size_t i = 0; i < w.size(); ++i) {
        s[at + i] = w[i];
        used[at + i] = true;
      }
      if (entity) planted.push_back(Span{at, at + w.size(), o.entity_type});
      return true;
    };
    const std::size_t n_entities = 1 + pick(2);
    for (std::size_t k = 0; k < n_entities; ++k) place(task.entities[pick(task.entities.size())], true);
    const std::size_t n_distractors = 1 + pick(3);
    for (std::size_t k = 0; k < n_distractors; ++k) place(task.distractors[pick(task.distractors.size())], false);
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i]) s[i] = task.alphabet[pick(o.alphabet)];
    std::sort(planted.begin(), planted.end());
    planted.erase(std::unique(planted.begin(), planted.end()), planted.end());
    // Every entity-word occurrence must be one that was planted, and planted
    // entities must not overlap; otherwise the sentence is redrawn.
    if (detail::occurrences(s, task.entities, o.entity_type) != planted) return std::nullopt;
    for (std::size_t k = 1; k < planted.size(); ++k)
      if (planted[k].start < planted[k - 1].end) return std::nullopt;
    return make_sentence(std::move(s), std::move(planted));
  };
  const auto draw = [&](std::size_t count, std::vector<Sentence>& out) {
    std::size_t tries = 0;
    while (out.size() < count) {
      if (++tries > 1000 * (count + 1)) throw ConfigError("synthetic: sentence rejection rate too high");
      if (auto s = make_sentence_once()) out.push_back(std::move(*s));
    }
  };
  draw(o.train, task.train);
  draw(o.val, task.val);
  draw(o.test, task.test);
  return task;
}

}  // namespace uicws
