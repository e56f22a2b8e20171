#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "uicws/autodiff.hpp"
#include "uicws/errors.hpp"
#include "uicws/tags.hpp"
#include "uicws/tensor.hpp"

namespace uicws {

/// Which tag transitions (and first/last tags) are permitted.
struct TransitionConstraints {
  std::size_t num_tags = 0;
  std::vector<std::uint8_t> transition;  // num_tags x num_tags, [prev * T + next]
  std::vector<std::uint8_t> start;
  std::vector<std::uint8_t> end;

  static TransitionConstraints none(std::size_t num_tags) {
    return {num_tags, std::vector<std::uint8_t>(num_tags * num_tags, 1), std::vector<std::uint8_t>(num_tags, 1),
            std::vector<std::uint8_t>(num_tags, 1)};
  }

  static TransitionConstraints bioes(const TagScheme& scheme) {
    const std::size_t T = scheme.size();
    TransitionConstraints c{T, std::vector<std::uint8_t>(T * T), std::vector<std::uint8_t>(T),
                            std::vector<std::uint8_t>(T)};
    for (std::size_t i = 0; i < T; ++i) {
      c.start[i] = scheme.allowed_start(i);
      c.end[i] = scheme.allowed_end(i);
      for (std::size_t j = 0; j < T; ++j) c.transition[i * T + j] = scheme.allowed(i, j);
    }
    return c;
  }

  bool allowed(std::size_t prev, std::size_t next) const { return transition[prev * num_tags + next] != 0; }

  /// Index of the first violation, or the sequence length when legal. A bad
  /// end tag reports position n - 1.
  std::size_t first_violation(const std::vector<std::size_t>& tags) const {
    for (std::size_t t = 0; t < tags.size(); ++t) {
      if (tags[t] >= num_tags) return t;
      if (t == 0 && !start[tags[0]]) return 0;
      if (t > 0 && !allowed(tags[t - 1], tags[t])) return t;
    }
    if (!tags.empty() && !end[tags.back()]) return tags.size() - 1;
    return tags.size();
  }
  bool legal(const std::vector<std::size_t>& tags) const { return first_violation(tags) == tags.size(); }

  /// Masks (1 = forbidden) in the layout of the transition/start/end tensors.
  std::vector<std::uint8_t> forbidden_transitions() const { return invert(transition); }
  std::vector<std::uint8_t> forbidden_start() const { return invert(start); }
  std::vector<std::uint8_t> forbidden_end() const { return invert(end); }

 private:
  static std::vector<std::uint8_t> invert(const std::vector<std::uint8_t>& m) {
    std::vector<std::uint8_t> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] ? 0 : 1;
    return out;
  }
};

/// Transition scores: transitions(i, j) scores tag j following tag i.
template <class Real>
struct CrfParams {
  Tensor<Real> transitions;  // T x T
  Tensor<Real> start;        // 1 x T
  Tensor<Real> end;          // 1 x T
  TransitionConstraints constraints;

  std::size_t num_tags() const { return constraints.num_tags; }

  static CrfParams zeros(TransitionConstraints c) {
    const std::size_t T = c.num_tags;
    return {Tensor<Real>(T, T), Tensor<Real>(1, T), Tensor<Real>(1, T), std::move(c)};
  }
};

namespace crf {

namespace detail {
template <class Real>
void check_emissions(const Tensor<Real>& emissions, const CrfParams<Real>& p) {
  if (emissions.rank() != 2 || emissions.cols() != p.num_tags() || emissions.rows() == 0) {
    throw ShapeMismatch("crf", emissions.shape(), {0, p.num_tags()});
  }
}
}  // namespace detail

/// Unnormalized score of a tag sequence (emissions + transitions + start/end).
template <class Real>
Real sequence_score(const Tensor<Real>& emissions, const std::vector<std::size_t>& tags, const CrfParams<Real>& p) {
  detail::check_emissions(emissions, p);
  if (tags.size() != emissions.rows()) throw ShapeMismatch("crf::sequence_score", emissions.shape(), {tags.size()});
  Real s = p.start[tags.front()] + p.end[tags.back()];
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += emissions(t, tags[t]);
    if (t > 0) s += p.transitions(tags[t - 1], tags[t]);
  }
  return s;
}

/// log Z over all constraint-legal sequences (forward algorithm).
template <class Real>
Real log_partition(const Tensor<Real>& emissions, const CrfParams<Real>& p) {
  detail::check_emissions(emissions, p);
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  const std::size_t n = emissions.rows(), T = p.num_tags();
  std::vector<Real> alpha(T), next(T), terms(T);
  for (std::size_t j = 0; j < T; ++j) alpha[j] = p.constraints.start[j] ? p.start[j] + emissions(0, j) : kNegInf;
  const auto lse = [&](const std::vector<Real>& v) {
    Real m = kNegInf;
    for (Real x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    Real s = 0;
    for (Real x : v) s += std::exp(x - m);
    return m + std::log(s);
  };
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < T; ++j) {
      for (std::size_t i = 0; i < T; ++i)
        terms[i] = p.constraints.allowed(i, j) ? alpha[i] + p.transitions(i, j) : kNegInf;
      next[j] = lse(terms) + emissions(t, j);
    }
    std::swap(alpha, next);
  }
  for (std::size_t j = 0; j < T; ++j) terms[j] = p.constraints.end[j] ? alpha[j] + p.end[j] : kNegInf;
  return lse(terms);
}

/// log p(gold | emissions). Throws IllegalGoldSequence for a forbidden gold path.
template <class Real>
Real log_likelihood(const Tensor<Real>& emissions, const std::vector<std::size_t>& gold, const CrfParams<Real>& p) {
  detail::check_emissions(emissions, p);
  if (gold.size() != emissions.rows()) throw ShapeMismatch("crf::log_likelihood", emissions.shape(), {gold.size()});
  const std::size_t bad = p.constraints.first_violation(gold);
  if (bad != gold.size()) throw IllegalGoldSequence(bad);
  return sequence_score(emissions, gold, p) - log_partition(emissions, p);
}

template <class Real>
struct ViterbiResult {
  std::vector<std::size_t> tags;
  Real score = 0;
};

/// Best legal sequence. Ties go to the lowest tag id at every step.
template <class Real>
ViterbiResult<Real> viterbi(const Tensor<Real>& emissions, const CrfParams<Real>& p) {
  detail::check_emissions(emissions, p);
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  const std::size_t n = emissions.rows(), T = p.num_tags();
  std::vector<Real> delta(T), next(T);
  std::vector<std::size_t> back(n * T, 0);
  for (std::size_t j = 0; j < T; ++j) delta[j] = p.constraints.start[j] ? p.start[j] + emissions(0, j) : kNegInf;
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < T; ++j) {
      Real best = kNegInf;
      std::size_t arg = 0;
      bool found = false;
      for (std::size_t i = 0; i < T; ++i) {
        if (!p.constraints.allowed(i, j) || delta[i] == kNegInf) continue;
        const Real s = delta[i] + p.transitions(i, j);
        if (!found || s > best) {
          best = s;
          arg = i;
          found = true;
        }
      }
      next[j] = found ? best + emissions(t, j) : kNegInf;
      back[t * T + j] = arg;
    }
    std::swap(delta, next);
  }
  Real best = kNegInf;
  std::size_t arg = 0;
  bool found = false;
  for (std::size_t j = 0; j < T; ++j) {
    if (!p.constraints.end[j] || delta[j] == kNegInf) continue;
    const Real s = delta[j] + p.end[j];
    if (!found || s > best) {
      best = s;
      arg = j;
      found = true;
    }
  }
  if (!found) throw Error("crf::viterbi: no sequence satisfies the transition constraints");
  ViterbiResult<Real> r;
  r.tags.assign(n, 0);
  r.tags[n - 1] = arg;
  for (std::size_t t = n - 1; t > 0; --t) r.tags[t - 1] = back[t * T + r.tags[t]];
  r.score = best;
  return r;
}

/// Transition parameters on a tape with forbidden entries filled.
template <class Real>
struct MaskedTransitions {
  Var<Real> transitions;
  Var<Real> start;
  Var<Real> end;
};

template <class Real>
MaskedTransitions<Real> mask_transitions(Var<Real> transitions, Var<Real> start, Var<Real> end,
                                         const TransitionConstraints& c) {
  const Real fill = forbidden_score<Real>();
  return {ad::masked_fill(transitions, c.forbidden_transitions(), fill), ad::masked_fill(start, c.forbidden_start(), fill),
          ad::masked_fill(end, c.forbidden_end(), fill)};
}

/// Negative log-likelihood of `gold` for one sentence, composed from tape
/// primitives. `emissions` is n x T.
template <class Real>
Var<Real> negative_log_likelihood(Var<Real> emissions, const MaskedTransitions<Real>& m,
                                  const std::vector<std::size_t>& gold, const TransitionConstraints& c) {
  const std::size_t n = emissions.rows(), T = emissions.cols();
  if (gold.size() != n || T != c.num_tags) throw ShapeMismatch("crf::negative_log_likelihood", emissions.shape(), {gold.size(), c.num_tags});
  const std::size_t bad = c.first_violation(gold);
  if (bad != n) throw IllegalGoldSequence(bad);

  Var<Real> alpha = ad::add(m.start, ad::window_slice(emissions, 0, 1));
  for (std::size_t t = 1; t < n; ++t) {
    auto scores = ad::add(ad::reshape(alpha, T, 1), m.transitions);
    alpha = ad::add(ad::logsumexp(scores, 0), ad::window_slice(emissions, static_cast<std::ptrdiff_t>(t), 1));
  }
  auto log_z = ad::logsumexp(ad::add(alpha, m.end), 1);

  std::vector<std::size_t> emit_idx(n), trans_idx;
  for (std::size_t t = 0; t < n; ++t) {
    emit_idx[t] = t * T + gold[t];
    if (t > 0) trans_idx.push_back(gold[t - 1] * T + gold[t]);
  }
  auto score = ad::add(ad::sum(ad::pick(emissions, emit_idx)),
                       ad::add(ad::pick(m.start, {gold.front()}), ad::pick(m.end, {gold.back()})));
  if (!trans_idx.empty()) score = ad::add(score, ad::sum(ad::pick(m.transitions, trans_idx)));
  return ad::add(log_z, ad::scale(score, Real(-1)));
}

}  // namespace crf
}  // namespace uicws
