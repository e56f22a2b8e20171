#pragma once

#include <random>
#include <string>
#include <vector>

#include "uicws/crf.hpp"
#include "uicws/encoder.hpp"
#include "uicws/gradcheck.hpp"
#include "uicws/lexicon.hpp"
#include "uicws/tags.hpp"

namespace uicws {

/// A random sentence with a random legal gold labelling and a lexicon drawn
/// partly from its own substrings, so candidacy rows are non-trivial.
struct LossCheckInstance {
  EncoderConfig cfg;
  Ablation level = Ablation::AWC;
  TagScheme scheme;
  TransitionConstraints constraints;
  ModelParams<double> params;
  PackedInput<double> input;
  std::vector<std::size_t> gold;

  /// Full model loss: CRF negative log-likelihood of `gold`, dropout off.
  Var<double> loss(Tape<double>& tape) {
    std::mt19937_64 rng(0);
    const auto f = encoder::forward(tape, params, cfg, level, input, false, rng);
    const auto m = crf::mask_transitions(tape.param(params.crf_transitions), tape.param(params.crf_start),
                                         tape.param(params.crf_end), constraints);
    return crf::negative_log_likelihood(f.emissions, m, gold, constraints);
  }
};

inline LossCheckInstance make_loss_check_instance(const EncoderConfig& cfg, std::size_t length, std::size_t entity_types,
                                                  std::uint64_t seed, Ablation level = Ablation::AWC) {
  if (length == 0) throw ConfigError("loss check sentence must be non-empty");
  std::mt19937_64 rng(seed);
  constexpr std::size_t kAlphabet = 6;
  const auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::u32string sentence;
  for (std::size_t i = 0; i < length; ++i) sentence.push_back(static_cast<char32_t>(U'a' + pick(kAlphabet)));
  std::vector<std::u32string> words;
  for (int k = 0; k < 4; ++k) {
    const std::size_t len = 1 + pick(std::min<std::size_t>(4, length));
    words.push_back(sentence.substr(pick(length - len + 1), len));
  }
  for (int k = 0; k < 4; ++k) {
    std::u32string w;
    for (std::size_t j = 0, len = 1 + pick(4); j < len; ++j) w.push_back(static_cast<char32_t>(U'a' + pick(kAlphabet)));
    words.push_back(w);
  }
  const auto cand = candidate_positions(sentence, Lexicon::build(words));

  std::vector<std::string> types;
  for (std::size_t t = 0; t < entity_types; ++t) types.push_back("T" + std::to_string(t));
  std::vector<Span> spans;
  for (std::size_t i = 0; i < length;) {
    if (entity_types > 0 && pick(2) == 0) {
      const std::size_t len = std::min(1 + pick(3), length - i);
      spans.push_back(Span{i, i + len, types[pick(entity_types)]});
      i += len;
    } else {
      ++i;
    }
  }

  LossCheckInstance inst{cfg, level, TagScheme(types), {}, {}, {}, {}};
  inst.constraints = TransitionConstraints::bioes(inst.scheme);
  const std::size_t vocab = kAlphabet + 2;
  inst.params = ModelParams<double>::init(cfg, vocab, inst.scheme.size(), seed + 1);
  // Random biases and CRF scores; zero-initialized ones would hide terms.
  std::normal_distribution<double> g(0.0, 0.3);
  for (auto* p : inst.params.all()) {
    const bool bias = p->name.size() > 2 && p->name.compare(p->name.size() - 2, 2, ".b") == 0;
    if (bias || p->name.rfind("crf.", 0) == 0)
      for (auto& v : p->value.values()) v = g(rng);
  }
  std::vector<std::size_t> ids;
  for (char32_t c : sentence) ids.push_back(2 + static_cast<std::size_t>(c - U'a'));
  inst.input = PackedInput<double>::single(ids, cand);
  for (const auto& tag : spans_to_bioes(length, spans)) inst.gold.push_back(*inst.scheme.id(tag));
  return inst;
}

/// Finite-difference check of every parameter of the full model loss.
inline GradCheckResult check_model_gradients(LossCheckInstance& inst, const GradCheckOptions& opts = {}) {
  return finite_diff_check([&](Tape<double>& tape) { return inst.loss(tape); }, inst.params.all(), opts);
}

}  // namespace uicws
