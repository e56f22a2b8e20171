#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uicws/autodiff.hpp"
#include "uicws/corpus.hpp"
#include "uicws/errors.hpp"
#include "uicws/lexicon.hpp"

namespace uicws {

/// Cumulative encoder levels: each enables one more step of the encoder.
enum class Ablation { Baseline, CPE, PSA, AWC };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Baseline: return "baseline";
    case Ablation::CPE: return "cpe";
    case Ablation::PSA: return "psa";
    case Ablation::AWC: return "awc";
  }
  return "awc";
}

inline Ablation ablation_from_string(std::string s) {
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "baseline") return Ablation::Baseline;
  if (s == "cpe") return Ablation::CPE;
  if (s == "psa") return Ablation::PSA;
  if (s == "awc") return Ablation::AWC;
  throw ConfigError("unknown ablation level '" + s + "' (expected baseline, cpe, psa or awc)");
}

struct EncoderConfig {
  std::size_t d_e = 100;        // character embedding
  std::size_t d_p = 100;        // candidate-position projection; must equal d_e
  std::size_t d_v = 25;         // accepted for config compatibility, unused
  std::size_t n_filters = 100;  // per window length
  std::size_t d_w = 100;        // subword convolution output; must equal d_e
  double dropout = 0.5;

  static constexpr std::array<std::size_t, 4> kWindows{2, 3, 4, 5};
  /// Rows of the subword feature map: back 3, 2, 1, centre, forward 1, 2, 3.
  static constexpr std::size_t kSubwordRows = 7;

  void validate() const {
    if (d_e == 0 || d_p == 0 || n_filters == 0 || d_w == 0) throw ConfigError("encoder dimensions must be >= 1");
    if (d_p != d_e) throw ConfigError("encoder: d_p must equal d_e (position projection is added to the embedding)");
    if (d_w != d_e) throw ConfigError("encoder: d_w must equal d_e (subword features are added to W_v v)");
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("encoder: dropout must lie in [0, 1)");
  }

  std::size_t conv_dim() const { return kWindows.size() * n_filters; }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Every trainable tensor of the model.
template <class Real>
struct ModelParams {
  Param<Real> char_embed;                 // |V| x d_e
  Param<Real> position_proj;              // 4 x d_p
  std::array<Param<Real>, 4> conv_w;      // (l * d_e) x n_filters, l = 2..5
  std::array<Param<Real>, 4> conv_b;      // 1 x n_filters
  Param<Real> attn_proj;                  // 4 n_filters x 4
  Param<Real> attn_embed;                 // 4 x d_e
  std::array<Param<Real>, 4> back_w;      // ((k + 1) d_e) x d_w, k = 0..3
  std::array<Param<Real>, 4> back_b;
  std::array<Param<Real>, 3> fwd_w;       // k = 1..3
  std::array<Param<Real>, 3> fwd_b;
  Param<Real> subword_score;              // d_w x 1
  Param<Real> emit_w;                     // (4 n_filters + d_w) x |tags|
  Param<Real> emit_b;                     // 1 x |tags|
  Param<Real> crf_transitions;            // |tags| x |tags|
  Param<Real> crf_start;                  // 1 x |tags|
  Param<Real> crf_end;                    // 1 x |tags|

  /// Checkpoint order.
  std::vector<Param<Real>*> all() {
    std::vector<Param<Real>*> out{&char_embed, &position_proj};
    for (std::size_t i = 0; i < 4; ++i) out.push_back(&conv_w[i]), out.push_back(&conv_b[i]);
    out.push_back(&attn_proj);
    out.push_back(&attn_embed);
    for (std::size_t k = 0; k < 4; ++k) out.push_back(&back_w[k]), out.push_back(&back_b[k]);
    for (std::size_t k = 0; k < 3; ++k) out.push_back(&fwd_w[k]), out.push_back(&fwd_b[k]);
    for (auto* p : {&subword_score, &emit_w, &emit_b, &crf_transitions, &crf_start, &crf_end}) out.push_back(p);
    return out;
  }
  std::vector<const Param<Real>*> all() const {
    auto v = const_cast<ModelParams*>(this)->all();
    return {v.begin(), v.end()};
  }

  void zero_grad() {
    for (auto* p : all()) p->zero_grad();
  }

  /// Glorot-uniform weights, zero biases and transitions. Embedding rows come
  /// from `pretrained` when given (unknown characters share its unk vector),
  /// otherwise uniform(-0.1, 0.1); the padding row is zero.
  static ModelParams init(const EncoderConfig& cfg, std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed,
                          const Vocabulary* vocab = nullptr, const EmbeddingTable* pretrained = nullptr) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const auto glorot = [&](const std::string& name, std::size_t rows, std::size_t cols) {
      Tensor<Real> t(rows, cols);
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : t.values()) v = static_cast<Real>(u(rng));
      return Param<Real>(name, std::move(t));
    };
    const auto zeros = [](const std::string& name, std::size_t rows, std::size_t cols) {
      return Param<Real>(name, Tensor<Real>(rows, cols));
    };
    const std::size_t d = cfg.d_e, nf = cfg.n_filters;
    ModelParams p;
    {
      Tensor<Real> e(vocab_size, d);
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      for (std::size_t r = 1; r < vocab_size; ++r)
        for (std::size_t j = 0; j < d; ++j) e(r, j) = static_cast<Real>(u(rng));
      if (pretrained) {
        if (pretrained->dim != d) throw DimMismatch(pretrained->dim, d);
        for (std::size_t j = 0; j < d; ++j) e(Vocabulary::kUnk, j) = static_cast<Real>(pretrained->unk[j]);
        if (vocab) {
          for (std::size_t i = 0; i < vocab->chars().size(); ++i) {
            const auto& vec = pretrained->lookup(vocab->chars()[i]);
            for (std::size_t j = 0; j < d; ++j) e(i + 2, j) = static_cast<Real>(vec[j]);
          }
        }
      }
      p.char_embed = Param<Real>("embed.char", std::move(e));
    }
    p.position_proj = glorot("cpe.W_p", 4, cfg.d_p);
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t l = EncoderConfig::kWindows[i];
      p.conv_w[i] = glorot("conv" + std::to_string(l) + ".W", l * d, nf);
      p.conv_b[i] = zeros("conv" + std::to_string(l) + ".b", 1, nf);
    }
    p.attn_proj = glorot("psa.W_a", 4 * nf, 4);
    p.attn_embed = glorot("psa.W_v", 4, d);
    for (std::size_t k = 0; k < 4; ++k) {
      p.back_w[k] = glorot("awc.back" + std::to_string(k) + ".W", (k + 1) * d, cfg.d_w);
      p.back_b[k] = zeros("awc.back" + std::to_string(k) + ".b", 1, cfg.d_w);
    }
    for (std::size_t k = 1; k <= 3; ++k) {
      p.fwd_w[k - 1] = glorot("awc.fwd" + std::to_string(k) + ".W", (k + 1) * d, cfg.d_w);
      p.fwd_b[k - 1] = zeros("awc.fwd" + std::to_string(k) + ".b", 1, cfg.d_w);
    }
    p.subword_score = glorot("awc.W_alpha", cfg.d_w, 1);
    p.emit_w = glorot("emit.W", cfg.conv_dim() + cfg.d_w, num_tags);
    p.emit_b = zeros("emit.b", 1, num_tags);
    p.crf_transitions = zeros("crf.transitions", num_tags, num_tags);
    p.crf_start = zeros("crf.start", 1, num_tags);
    p.crf_end = zeros("crf.end", 1, num_tags);
    return p;
  }
};

/// Sentences packed row-wise into one sequence; windows never cross segments.
template <class Real>
struct PackedInput {
  std::vector<std::size_t> char_ids;
  Tensor<Real> cand;  // N x 4, columns B, I, E, S
  std::vector<Segment> segments;

  std::size_t rows() const { return char_ids.size(); }

  static PackedInput from_batch(const Batch& b) {
    PackedInput in;
    std::size_t total = 0;
    for (auto len : b.lengths) total += len;
    in.cand = Tensor<Real>(total, 4);
    std::size_t row = 0;
    for (std::size_t k = 0; k < b.batch_size; ++k) {
      in.segments.push_back({row, row + b.lengths[k]});
      for (std::size_t j = 0; j < b.lengths[k]; ++j, ++row) {
        const std::size_t cell = b.at(k, j);
        in.char_ids.push_back(b.char_ids[cell]);
        for (std::size_t c = 0; c < 4; ++c) in.cand(row, c) = b.cand_pos[cell][c];
      }
    }
    return in;
  }

  static PackedInput single(std::vector<std::size_t> ids, const CandidateMatrix& cand) {
    PackedInput in;
    in.cand = Tensor<Real>(ids.size(), 4);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t c = 0; c < 4; ++c) in.cand(i, c) = cand.rows[i][c];
    in.segments.push_back({0, ids.size()});
    in.char_ids = std::move(ids);
    return in;
  }
};

namespace encoder {

/// x_i = embed(c_i) + W_p^T cand_i.
template <class Real>
Var<Real> step1_compose(Tape<Real>& tape, ModelParams<Real>& p, const std::vector<std::size_t>& char_ids,
                        const Tensor<Real>& cand) {
  if (cand.rank() != 2 || cand.cols() != 4 || cand.rows() != char_ids.size()) {
    throw ShapeMismatch("step1_compose", cand.shape(), {char_ids.size(), 4});
  }
  auto embed = ad::embedding_lookup(tape, p.char_embed, char_ids);
  auto proj = ad::matmul(tape.constant(cand), tape.param(p.position_proj));
  return ad::add(embed, proj);
}

template <class Real>
struct AttendResult {
  Var<Real> h;  // N x 4 n_filters
  Var<Real> A;  // N x 4
  Var<Real> v;  // N x 4
};

/// Convolution bank over windows starting at each character, then
/// A = tanh(h W_a) and v = softmax over the four position slots.
template <class Real>
AttendResult<Real> step2_attend(Var<Real> x, ModelParams<Real>& p, const std::vector<Segment>& segments) {
  auto& tape = *x.tape;
  std::vector<Var<Real>> parts;
  for (std::size_t i = 0; i < EncoderConfig::kWindows.size(); ++i) {
    const std::size_t l = EncoderConfig::kWindows[i];
    auto windows = ad::unfold(x, segments, 0, l);
    parts.push_back(ad::relu(ad::add(ad::matmul(windows, tape.param(p.conv_w[i])), tape.param(p.conv_b[i]))));
  }
  auto h = ad::concat(parts, 1);
  auto A = ad::tanh(ad::matmul(h, tape.param(p.attn_proj)));
  auto v = ad::softmax(A, 1);
  return {h, A, v};
}

template <class Real>
struct AdaptResult {
  Var<Real> z;                                            // N x d_e
  std::array<Var<Real>, EncoderConfig::kSubwordRows> F;   // each N x d_w
  Var<Real> alpha;                                        // N x 7
  Var<Real> w;                                            // N x d_w
};

/// Directional subword convolutions over z_i = embed(c_i) + W_v^T v_i, then
/// w_i = sum_f alpha_if F_if. With `fuse` false the rows are averaged.
template <class Real>
AdaptResult<Real> step3_adapt(Tape<Real>& tape, ModelParams<Real>& p, const std::vector<std::size_t>& char_ids,
                              Var<Real> v, const std::vector<Segment>& segments, bool fuse = true) {
  if (v.rows() != char_ids.size() || v.cols() != 4) throw ShapeMismatch("step3_adapt", v.shape(), {char_ids.size(), 4});
  AdaptResult<Real> r;
  auto position_ctx = ad::matmul(v, tape.param(p.attn_embed));
  r.z = ad::add(ad::embedding_lookup(tape, p.char_embed, char_ids), position_ctx);
  const auto conv = [&](std::ptrdiff_t offset, std::size_t len, Param<Real>& w, Param<Real>& b) {
    return ad::relu(ad::add(ad::matmul(ad::unfold(r.z, segments, offset, len), tape.param(w)), tape.param(b)));
  };
  // Backward windows z_{i-k}..z_i for k = 3, 2, 1, then the character alone.
  for (std::size_t k = 3; k >= 1; --k) r.F[3 - k] = conv(-static_cast<std::ptrdiff_t>(k), k + 1, p.back_w[k], p.back_b[k]);
  r.F[3] = conv(0, 1, p.back_w[0], p.back_b[0]);
  for (std::size_t k = 1; k <= 3; ++k) r.F[3 + k] = conv(0, k + 1, p.fwd_w[k - 1], p.fwd_b[k - 1]);

  const std::size_t n = char_ids.size();
  if (fuse) {
    std::vector<Var<Real>> scores;
    auto score_w = tape.param(p.subword_score);
    for (const auto& f : r.F) scores.push_back(ad::tanh(ad::matmul(ad::add(f, position_ctx), score_w)));
    r.alpha = ad::softmax(ad::concat(scores, 1), 1);
  } else {
    r.alpha = tape.constant(Tensor<Real>(n, EncoderConfig::kSubwordRows, Real(1) / Real(EncoderConfig::kSubwordRows)));
  }
  Var<Real> w = ad::mul(r.F[0], ad::slice_cols(r.alpha, 0, 1));
  for (std::size_t f = 1; f < EncoderConfig::kSubwordRows; ++f) w = ad::add(w, ad::mul(r.F[f], ad::slice_cols(r.alpha, f, 1)));
  r.w = w;
  return r;
}

/// emission_i = W_emit^T [h_i ; w_i] + b_emit, dropout on the concatenation.
template <class Real, class Rng>
Var<Real> emissions(Var<Real> h, Var<Real> w, ModelParams<Real>& p, Real dropout, bool train, Rng& rng) {
  auto& tape = *h.tape;
  if (h.rows() != w.rows()) throw ShapeMismatch("emissions", h.shape(), w.shape());
  auto joined = ad::dropout(ad::concat(std::vector<Var<Real>>{h, w}, 1), dropout, train, rng);
  return ad::add(ad::matmul(joined, tape.param(p.emit_w)), tape.param(p.emit_b));
}

template <class Real>
struct Forward {
  Var<Real> x;
  AttendResult<Real> attend;
  std::optional<AdaptResult<Real>> adapt;
  Var<Real> w;
  Var<Real> emissions;
};

/// Full encoder at a given ablation level. Below PSA the word slot of the
/// emission input is zero; at PSA the subword rows are averaged; AWC fuses
/// them with learned attention. Baseline zeroes the candidacy input.
template <class Real, class Rng>
Forward<Real> forward(Tape<Real>& tape, ModelParams<Real>& p, const EncoderConfig& cfg, Ablation level,
                      const PackedInput<Real>& in, bool train, Rng& rng) {
  Forward<Real> out;
  const Tensor<Real> zero_cand(in.rows(), 4);
  out.x = step1_compose(tape, p, in.char_ids, level == Ablation::Baseline ? zero_cand : in.cand);
  auto x = ad::dropout(out.x, static_cast<Real>(cfg.dropout), train, rng);
  out.attend = step2_attend(x, p, in.segments);
  if (level >= Ablation::PSA) {
    out.adapt = step3_adapt(tape, p, in.char_ids, out.attend.v, in.segments, level == Ablation::AWC);
    out.w = out.adapt->w;
  } else {
    out.w = tape.constant(Tensor<Real>(in.rows(), cfg.d_w));
  }
  out.emissions = emissions(out.attend.h, out.w, p, static_cast<Real>(cfg.dropout), train, rng);
  return out;
}

}  // namespace encoder

/// Activations of one sentence, for inspection and tests.
template <class Real>
struct EncoderTrace {
  Tensor<Real> x, h, A, v, z;
  Tensor<Real> F;  // n x 7 x d_w
  Tensor<Real> alpha, w, emissions;

  template <class Fwd>
  static EncoderTrace from(const Fwd& f) {
    EncoderTrace t;
    t.x = f.x.value();
    t.h = f.attend.h.value();
    t.A = f.attend.A.value();
    t.v = f.attend.v.value();
    t.w = f.w.value();
    t.emissions = f.emissions.value();
    if (f.adapt) {
      t.z = f.adapt->z.value();
      t.alpha = f.adapt->alpha.value();
      const std::size_t n = t.w.rows(), d = t.w.cols();
      t.F = Tensor<Real>(std::vector<std::size_t>{n, EncoderConfig::kSubwordRows, d});
      for (std::size_t r = 0; r < EncoderConfig::kSubwordRows; ++r) {
        const auto& fr = f.adapt->F[r].value();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) t.F[(i * EncoderConfig::kSubwordRows + r) * d + j] = fr(i, j);
      }
    }
    return t;
  }
};

}  // namespace uicws
