#pragma once

// Oracles and random generators shared by the test binaries.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "uicws/crf.hpp"
#include "uicws/lexicon.hpp"
#include "uicws/tags.hpp"

namespace uicws::oracle {

inline std::u32string U(const std::string& utf8) { return utf8::decode(utf8); }

/// Candidacy matrix from an all-substring membership test.
inline CandidateMatrix brute_force_candidates(const std::u32string& s, const std::vector<std::u32string>& words) {
  CandidateMatrix m;
  m.rows.assign(s.size(), {0, 0, 0, 0});
  const auto member = [&](const std::u32string& w) {
    for (const auto& x : words)
      if (x == w) return true;
    return false;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t len = 1; len <= 4 && i + len <= s.size(); ++len) {
      if (!member(s.substr(i, len))) continue;
      if (len == 1) {
        m.rows[i][kSingle] = 1;
        continue;
      }
      m.rows[i][kBegin] = 1;
      m.rows[i + len - 1][kEnd] = 1;
      for (std::size_t k = i + 1; k + 1 < i + len; ++k) m.rows[k][kInside] = 1;
    }
  }
  return m;
}

inline std::u32string random_string(std::mt19937_64& rng, std::size_t len, std::size_t alphabet) {
  std::uniform_int_distribution<std::size_t> c(0, alphabet - 1);
  std::u32string s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char32_t>(U'a' + c(rng)));
  return s;
}

inline std::vector<std::u32string> random_words(std::mt19937_64& rng, std::size_t count, std::size_t alphabet) {
  std::uniform_int_distribution<std::size_t> len(1, 4);
  std::vector<std::u32string> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_string(rng, len(rng), alphabet));
  return out;
}

/// Random non-overlapping spans over n positions.
inline std::vector<Span> random_spans(std::mt19937_64& rng, std::size_t n, const std::vector<std::string>& types) {
  std::vector<Span> spans;
  std::uniform_int_distribution<int> coin(0, 2);
  std::uniform_int_distribution<std::size_t> len(1, 4);
  std::uniform_int_distribution<std::size_t> ty(0, types.size() - 1);
  std::size_t i = 0;
  while (i < n) {
    if (coin(rng) == 0) {
      const std::size_t l = std::min(len(rng), n - i);
      spans.push_back(Span{i, i + l, types[ty(rng)]});
      i += l;
    } else {
      ++i;
    }
  }
  return spans;
}

/// Calls fn on every tag sequence of length n over T tags.
inline void for_each_sequence(std::size_t n, std::size_t T, const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> seq(n, 0);
  while (true) {
    fn(seq);
    std::size_t k = 0;
    while (k < n && ++seq[k] == T) seq[k++] = 0;
    if (k == n) return;
  }
}

/// log Z by enumerating every legal sequence.
inline double enumerated_log_partition(const Tensor<double>& em, const CrfParams<double>& p) {
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  for_each_sequence(em.rows(), p.num_tags(), [&](const std::vector<std::size_t>& s) {
    if (!p.constraints.legal(s)) return;
    scores.push_back(crf::sequence_score(em, s, p));
    m = std::max(m, scores.back());
  });
  double acc = 0;
  for (double s : scores) acc += std::exp(s - m);
  return m + std::log(acc);
}

/// Best legal sequence by enumeration. Only meaningful without ties.
inline std::pair<std::vector<std::size_t>, double> enumerated_argmax(const Tensor<double>& em, const CrfParams<double>& p) {
  std::vector<std::size_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for_each_sequence(em.rows(), p.num_tags(), [&](const std::vector<std::size_t>& s) {
    if (!p.constraints.legal(s)) return;
    const double sc = crf::sequence_score(em, s, p);
    if (sc > best_score) {
      best_score = sc;
      best = s;
    }
  });
  return {best, best_score};
}

inline Tensor<double> random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Tensor<double> t(rows, cols);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

inline CrfParams<double> random_crf(std::mt19937_64& rng, TransitionConstraints c, double scale = 1.0) {
  auto p = CrfParams<double>::zeros(std::move(c));
  const std::size_t T = p.num_tags();
  p.transitions = random_tensor(rng, T, T, scale);
  p.start = random_tensor(rng, 1, T, scale);
  p.end = random_tensor(rng, 1, T, scale);
  return p;
}

/// Types for a scheme with the given number of tags (1 + 4k); 0 types gives only O.
inline TagScheme scheme_with_types(std::size_t k) {
  std::vector<std::string> types;
  for (std::size_t i = 0; i < k; ++i) types.push_back("T" + std::to_string(i));
  return TagScheme(types);
}

}  // namespace uicws::oracle
