#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uicws/checkpoint.hpp"
#include "uicws/corpus.hpp"
#include "uicws/crf.hpp"
#include "uicws/encoder.hpp"
#include "uicws/lexicon.hpp"
#include "uicws/tags.hpp"

namespace uicws {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

namespace detail {
inline std::string hex_codepoints(std::u32string_view s, char sep) {
  std::string out;
  char buf[16];
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out.push_back(sep);
    const auto r = std::to_chars(buf, buf + sizeof(buf), static_cast<std::uint32_t>(s[i]), 16);
    out.append(buf, r.ptr);
  }
  return out;
}

inline std::u32string parse_hex_codepoints(const std::string& s, char sep) {
  std::u32string out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) next = s.size();
    std::uint32_t cp = 0;
    const auto r = std::from_chars(s.data() + pos, s.data() + next, cp, 16);
    if (r.ec != std::errc() || r.ptr != s.data() + next) throw CheckpointError("bad code point '" + s.substr(pos, next - pos) + "'");
    out.push_back(static_cast<char32_t>(cp));
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}
}  // namespace detail

/// Encoder + CRF with the vocabulary, tag scheme and lexicon it was built for.
template <class Real>
class Model {
 public:
  Model(EncoderConfig cfg, Ablation level, TagScheme scheme, Vocabulary vocab, Lexicon lexicon, std::uint64_t seed,
        const EmbeddingTable* pretrained = nullptr)
      : cfg_(cfg),
        level_(level),
        scheme_(std::move(scheme)),
        vocab_(std::move(vocab)),
        lexicon_(std::move(lexicon)),
        constraints_(TransitionConstraints::bioes(scheme_)),
        params_(ModelParams<Real>::init(cfg_, vocab_.size(), scheme_.size(), seed, &vocab_, pretrained)) {}

  const EncoderConfig& config() const noexcept { return cfg_; }
  Ablation ablation() const noexcept { return level_; }
  const TagScheme& scheme() const noexcept { return scheme_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const Lexicon& lexicon() const noexcept { return lexicon_; }
  const TransitionConstraints& constraints() const noexcept { return constraints_; }
  ModelParams<Real>& params() noexcept { return params_; }
  const ModelParams<Real>& params() const noexcept { return params_; }

  CrfParams<Real> crf() const {
    return {params_.crf_transitions.value, params_.crf_start.value, params_.crf_end.value, constraints_};
  }

  /// Mean negative log-likelihood over the sentences of a batch.
  template <class Rng>
  Var<Real> batch_loss(Tape<Real>& tape, const Batch& batch, bool train, Rng& rng) {
    const auto in = PackedInput<Real>::from_batch(batch);
    auto fwd = encoder::forward(tape, params_, cfg_, level_, in, train, rng);
    auto masked = crf::mask_transitions(tape.param(params_.crf_transitions), tape.param(params_.crf_start),
                                        tape.param(params_.crf_end), constraints_);
    Var<Real> total{};
    for (std::size_t k = 0; k < batch.batch_size; ++k) {
      const auto& seg = in.segments[k];
      std::vector<std::size_t> gold(seg.length());
      for (std::size_t j = 0; j < seg.length(); ++j) {
        const int t = batch.tag_ids[batch.at(k, j)];
        if (t < 0) throw DataError("batch_loss: sentence " + std::to_string(batch.sentence_index[k]) + " has no gold tags");
        gold[j] = static_cast<std::size_t>(t);
      }
      auto em = ad::window_slice(fwd.emissions, static_cast<std::ptrdiff_t>(seg.begin), seg.length());
      Var<Real> nll;
      try {
        nll = crf::negative_log_likelihood(em, masked, gold, constraints_);
      } catch (const IllegalGoldSequence& e) {
        throw IllegalTagSequence(batch.sentence_index[k], 0, e.what());
      }
      total = k == 0 ? nll : ad::add(total, nll);
    }
    return ad::scale(total, Real(1) / static_cast<Real>(batch.batch_size));
  }

  /// Emission scores of every sentence in a batch (no dropout).
  std::vector<Tensor<Real>> batch_emissions(const Batch& batch) const {
    Tape<Real> tape;
    std::mt19937_64 rng(0);
    const auto in = PackedInput<Real>::from_batch(batch);
    // Evaluation only reads parameter values; nothing writes through this reference.
    auto& p = const_cast<ModelParams<Real>&>(params_);
    const auto& em = encoder::forward(tape, p, cfg_, level_, in, false, rng).emissions.value();
    std::vector<Tensor<Real>> out;
    for (const auto& seg : in.segments) {
      Tensor<Real> e(seg.length(), em.cols());
      for (std::size_t i = 0; i < seg.length(); ++i)
        for (std::size_t j = 0; j < em.cols(); ++j) e(i, j) = em(seg.begin + i, j);
      out.push_back(std::move(e));
    }
    return out;
  }

  std::vector<std::vector<std::size_t>> decode_batch(const Batch& batch) const {
    const auto crf_params = crf();
    std::vector<std::vector<std::size_t>> out;
    for (const auto& em : batch_emissions(batch)) out.push_back(crf::viterbi(em, crf_params).tags);
    return out;
  }

  /// Predicted tag ids for each sentence, in input order.
  std::vector<std::vector<std::size_t>> decode(const std::vector<Sentence>& sentences, std::size_t batch_size = 64) const {
    std::vector<std::vector<std::size_t>> out(sentences.size());
    std::vector<Sentence> untagged;
    untagged.reserve(sentences.size());
    for (const auto& s : sentences) untagged.push_back(Sentence{s.chars, {}, {}});
    for (const auto& b : make_batches(untagged, lexicon_, scheme_, vocab_, batch_size, std::nullopt)) {
      auto tags = decode_batch(b);
      for (std::size_t k = 0; k < b.batch_size; ++k) out[b.sentence_index[k]] = std::move(tags[k]);
    }
    return out;
  }

  std::vector<std::string> tag_strings(const std::vector<std::size_t>& ids) const {
    std::vector<std::string> out;
    for (auto id : ids) out.push_back(scheme_.tag(id));
    return out;
  }

  /// Predicted spans per sentence.
  std::vector<std::vector<Span>> predict_spans(const std::vector<Sentence>& sentences) const {
    std::vector<std::vector<Span>> out;
    std::size_t index = 0;
    for (const auto& ids : decode(sentences)) out.push_back(bioes_to_spans(tag_strings(ids), index++));
    return out;
  }

  EncoderTrace<Real> trace(std::u32string_view sentence) const {
    if (sentence.empty()) throw DataError("cannot trace an empty sentence");
    Tape<Real> tape;
    std::mt19937_64 rng(0);
    const auto in = PackedInput<Real>::single(vocab_.encode(sentence), candidate_positions(sentence, lexicon_));
    auto& p = const_cast<ModelParams<Real>&>(params_);
    return EncoderTrace<Real>::from(encoder::forward(tape, p, cfg_, level_, in, false, rng));
  }

  void save(std::ostream& out) const { write_checkpoint<Real>(out, meta(), params_.all()); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    save(out);
  }

  static Model load(std::istream& in, const CheckpointManifest& m) {
    EncoderConfig cfg;
    const auto num = [&](const char* key) { return static_cast<std::size_t>(std::stoull(m.get(key))); };
    cfg.d_e = num("encoder.d_e");
    cfg.d_p = num("encoder.d_p");
    cfg.d_v = num("encoder.d_v");
    cfg.n_filters = num("encoder.n_filters");
    cfg.d_w = num("encoder.d_w");
    cfg.dropout = parse_double(m.get("encoder.dropout"));
    std::vector<char32_t> chars;
    for (char32_t c : detail::parse_hex_codepoints(m.get("vocab"), ' ')) chars.push_back(c);
    std::vector<std::u32string> words;
    for (const auto& w : detail::split_words(m.get("lexicon"))) words.push_back(detail::parse_hex_codepoints(w, '.'));
    Model model(cfg, ablation_from_string(m.get("ablation")), TagScheme(detail::split_words(m.get("entity_types"))),
                Vocabulary(std::move(chars)), Lexicon::build(words), 0);
    auto loaded = read_params<Real>(in, m);
    auto targets = model.params_.all();
    if (loaded.size() != targets.size()) throw CheckpointError("checkpoint has " + std::to_string(loaded.size()) + " params, model expects " + std::to_string(targets.size()));
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (loaded[i].name != targets[i]->name || loaded[i].value.shape() != targets[i]->value.shape()) {
        throw CheckpointError("checkpoint param '" + loaded[i].name + "' does not match model param '" + targets[i]->name + "'");
      }
      targets[i]->value = std::move(loaded[i].value);
    }
    return model;
  }

  static Model load(std::istream& in) { return load(in, read_manifest(in)); }

  static Model load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    return load(in);
  }

 private:
  std::vector<std::pair<std::string, std::string>> meta() const {
    std::string types;
    for (const auto& t : scheme_.entity_types()) types += (types.empty() ? "" : " ") + t;
    std::string words;
    for (const auto& w : lexicon_.words()) words += (words.empty() ? "" : " ") + detail::hex_codepoints(w, '.');
    std::u32string chars(vocab_.chars().begin(), vocab_.chars().end());
    return {{"ablation", to_string(level_)},
            {"encoder.d_e", std::to_string(cfg_.d_e)},
            {"encoder.d_p", std::to_string(cfg_.d_p)},
            {"encoder.d_v", std::to_string(cfg_.d_v)},
            {"encoder.n_filters", std::to_string(cfg_.n_filters)},
            {"encoder.d_w", std::to_string(cfg_.d_w)},
            {"encoder.dropout", format_double(cfg_.dropout)},
            {"entity_types", types},
            {"vocab", detail::hex_codepoints(chars, ' ')},
            {"lexicon", words}};
  }

  EncoderConfig cfg_;
  Ablation level_;
  TagScheme scheme_;
  Vocabulary vocab_;
  Lexicon lexicon_;
  TransitionConstraints constraints_;
  ModelParams<Real> params_;
};

}  // namespace uicws
