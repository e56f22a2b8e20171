#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "uicws/encoder.hpp"
#include "uicws/gradcheck.hpp"

using namespace uicws;
using oracle::random_tensor;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.d_e = c.d_p = c.d_w = 4;
  c.n_filters = 3;
  c.dropout = 0.0;
  return c;
}

constexpr std::size_t kVocab = 9;
constexpr std::size_t kTags = 5;

ModelParams<double> random_params(std::uint64_t seed, const EncoderConfig& cfg = tiny_config()) {
  auto p = ModelParams<double>::init(cfg, kVocab, kTags, seed);
  // Non-zero biases and CRF scores so every term of the computation is exercised.
  std::mt19937_64 rng(seed + 1000);
  for (auto* q : p.all())
    if (q->name.ends_with(".b") || q->name.rfind("crf.", 0) == 0) q->value = random_tensor(rng, q->value.rows(), q->value.cols(), 0.3);
  return p;
}

PackedInput<double> random_input(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> ids(n);
  CandidateMatrix cand;
  for (auto& id : ids) id = 1 + rng() % (kVocab - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::uint8_t, 4> row{};
    for (auto& b : row) b = static_cast<std::uint8_t>(rng() % 2);
    cand.rows.push_back(row);
  }
  return PackedInput<double>::single(ids, cand);
}

EncoderTrace<double> run(ModelParams<double>& p, const PackedInput<double>& in, Ablation level = Ablation::AWC,
                         const EncoderConfig& cfg = tiny_config()) {
  Tape<double> tape;
  std::mt19937_64 rng(0);
  return EncoderTrace<double>::from(encoder::forward(tape, p, cfg, level, in, false, rng));
}

double relu(double x) { return x > 0 ? x : 0; }

/// relu(sum_k rows[i + offset + k] W[k] + b) with zero rows outside [0, n).
std::vector<double> conv_row(const Tensor<double>& seq, std::ptrdiff_t i, std::ptrdiff_t offset, std::size_t len,
                             const Tensor<double>& W, const Tensor<double>& b) {
  const std::size_t d = seq.cols();
  std::vector<double> out(W.cols());
  for (std::size_t f = 0; f < W.cols(); ++f) {
    double s = b[f];
    for (std::size_t k = 0; k < len; ++k) {
      const std::ptrdiff_t src = i + offset + static_cast<std::ptrdiff_t>(k);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(seq.rows())) continue;
      for (std::size_t j = 0; j < d; ++j) s += seq(static_cast<std::size_t>(src), j) * W(k * d + j, f);
    }
    out[f] = relu(s);
  }
  return out;
}

std::vector<double> softmax(std::vector<double> v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double s = 0;
  for (auto& x : v) s += (x = std::exp(x - m));
  for (auto& x : v) x /= s;
  return v;
}

}  // namespace

TEST(EncoderConfig, EnforcesEqualDims) {
  auto c = EncoderConfig{};
  EXPECT_NO_THROW(c.validate());
  c.d_p = 50;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EncoderConfig{};
  c.d_w = 64;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(EncoderParams, DeclaredShapesAndUniqueNames) {
  const auto cfg = EncoderConfig{};
  auto p = ModelParams<float>::init(cfg, 50, 9, 1);
  EXPECT_EQ(p.char_embed.value.shape(), (std::vector<std::size_t>{50, 100}));
  EXPECT_EQ(p.position_proj.value.shape(), (std::vector<std::size_t>{4, 100}));
  EXPECT_EQ(p.conv_w[3].value.shape(), (std::vector<std::size_t>{500, 100}));
  EXPECT_EQ(p.attn_proj.value.shape(), (std::vector<std::size_t>{400, 4}));
  EXPECT_EQ(p.attn_embed.value.shape(), (std::vector<std::size_t>{4, 100}));
  EXPECT_EQ(p.back_w[3].value.shape(), (std::vector<std::size_t>{400, 100}));
  EXPECT_EQ(p.fwd_w[0].value.shape(), (std::vector<std::size_t>{200, 100}));
  EXPECT_EQ(p.subword_score.value.shape(), (std::vector<std::size_t>{100, 1}));
  EXPECT_EQ(p.emit_w.value.shape(), (std::vector<std::size_t>{500, 9}));
  std::set<std::string> names;
  for (const auto* q : p.all()) {
    EXPECT_TRUE(names.insert(q->name).second) << q->name;
    EXPECT_EQ(q->grad.shape(), q->value.shape());
  }
  for (std::size_t j = 0; j < 100; ++j) EXPECT_EQ(p.char_embed.value(Vocabulary::kPad, j), 0.0f);
}

TEST(Step1, ZeroCandidacyGivesBareEmbedding) {
  auto p = random_params(1);
  Tape<double> tape;
  const std::vector<std::size_t> ids{3, 5};
  const auto x = encoder::step1_compose(tape, p, ids, Tensor<double>(2, 4)).value();
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(x(i, j), p.char_embed.value(ids[i], j));
}

TEST(Step1, BinaryCandidacySelectsColumnSum) {
  auto p = random_params(2);
  Tape<double> tape;
  const auto x = encoder::step1_compose(tape, p, {4}, Tensor<double>({1, 4}, {1, 1, 1, 0})).value();
  const auto& W = p.position_proj.value;
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(x(0, j), p.char_embed.value(4, j) + W(0, j) + W(1, j) + W(2, j), 1e-15);
}

TEST(Step1, MatchesLoopOracle) {
  std::mt19937_64 rng(3);
  auto p = random_params(3);
  const auto in = random_input(rng, 7);
  Tape<double> tape;
  const auto x = encoder::step1_compose(tape, p, in.char_ids, in.cand).value();
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = p.char_embed.value(in.char_ids[i], j);
      for (std::size_t c = 0; c < 4; ++c) s += in.cand(i, c) * p.position_proj.value(c, j);
      EXPECT_NEAR(x(i, j), s, 1e-12);
    }
  EXPECT_THROW(encoder::step1_compose(tape, p, in.char_ids, Tensor<double>(6, 4)), ShapeMismatch);
}

TEST(Step2, ZeroInputIsSymmetric) {
  auto p = random_params(4);
  for (auto& b : p.conv_b) b.value.fill(0.0);
  Tape<double> tape;
  const auto r = encoder::step2_attend(tape.constant(Tensor<double>(5, 4)), p, {{0, 5}});
  for (double h : r.h.value().values()) EXPECT_EQ(h, 0.0);
  for (double a : r.A.value().values()) EXPECT_EQ(a, 0.0);
  for (double v : r.v.value().values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Step2, SingleCharacterIsFinite) {
  std::mt19937_64 rng(5);
  auto p = random_params(5);
  const auto t = run(p, random_input(rng, 1));
  EXPECT_EQ(t.h.shape(), (std::vector<std::size_t>{1, 12}));
  EXPECT_EQ(t.v.shape(), (std::vector<std::size_t>{1, 4}));
  for (double v : t.h.values()) EXPECT_TRUE(std::isfinite(v));
  for (double v : t.emissions.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Step2, MatchesConvolutionAndSoftmaxOracles) {
  std::mt19937_64 rng(6);
  auto p = random_params(6);
  const auto t = run(p, random_input(rng, 5));
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> h;
    for (std::size_t l = 0; l < 4; ++l) {
      const auto part = conv_row(t.x, static_cast<std::ptrdiff_t>(i), 0, l + 2, p.conv_w[l].value, p.conv_b[l].value);
      h.insert(h.end(), part.begin(), part.end());
    }
    std::vector<double> A(4);
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0;
      for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * p.attn_proj.value(k, c);
      A[c] = std::tanh(s);
    }
    const auto v = softmax(A);
    for (std::size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(t.h(i, k), h[k], 1e-12);
    double total = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(t.A(i, c), A[c], 1e-12);
      EXPECT_NEAR(t.v(i, c), v[c], 1e-12);
      total += t.v(i, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Step3, MatchesLoopOracle) {
  std::mt19937_64 rng(7);
  auto p = random_params(7);
  const auto in = random_input(rng, 6);
  const auto t = run(p, in);
  const std::size_t n = 6, d = 4;
  Tensor<double> z(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = p.char_embed.value(in.char_ids[i], j);
      for (std::size_t c = 0; c < 4; ++c) s += t.v(i, c) * p.attn_embed.value(c, j);
      z(i, j) = s;
      EXPECT_NEAR(t.z(i, j), s, 1e-12);
    }
  for (std::size_t i = 0; i < n; ++i) {
    const auto I = static_cast<std::ptrdiff_t>(i);
    std::vector<std::vector<double>> F{
        conv_row(z, I, -3, 4, p.back_w[3].value, p.back_b[3].value),
        conv_row(z, I, -2, 3, p.back_w[2].value, p.back_b[2].value),
        conv_row(z, I, -1, 2, p.back_w[1].value, p.back_b[1].value),
        conv_row(z, I, 0, 1, p.back_w[0].value, p.back_b[0].value),
        conv_row(z, I, 0, 2, p.fwd_w[0].value, p.fwd_b[0].value),
        conv_row(z, I, 0, 3, p.fwd_w[1].value, p.fwd_b[1].value),
        conv_row(z, I, 0, 4, p.fwd_w[2].value, p.fwd_b[2].value),
    };
    std::vector<double> g(7);
    for (std::size_t f = 0; f < 7; ++f) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) {
        double ctx = 0;
        for (std::size_t c = 0; c < 4; ++c) ctx += t.v(i, c) * p.attn_embed.value(c, j);
        s += (F[f][j] + ctx) * p.subword_score.value(j, 0);
      }
      g[f] = std::tanh(s);
    }
    const auto alpha = softmax(g);
    for (std::size_t f = 0; f < 7; ++f) {
      EXPECT_NEAR(t.alpha(i, f), alpha[f], 1e-10);
      for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(t.F[(i * 7 + f) * d + j], F[f][j], 1e-12);
    }
    for (std::size_t j = 0; j < d; ++j) {
      double w = 0;
      for (std::size_t f = 0; f < 7; ++f) w += alpha[f] * F[f][j];
      EXPECT_NEAR(t.w(i, j), w, 1e-10);
    }
  }
}

TEST(Step3, IdenticalRowsGiveUniformAlpha) {
  auto p = random_params(8);
  std::mt19937_64 rng(8);
  const auto bias = random_tensor(rng, 1, 4);
  for (auto& w : p.back_w) w.value.fill(0.0);
  for (auto& w : p.fwd_w) w.value.fill(0.0);
  for (auto& b : p.back_b) b.value = bias;
  for (auto& b : p.fwd_b) b.value = bias;
  const auto t = run(p, random_input(rng, 4));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t f = 0; f < 7; ++f) EXPECT_NEAR(t.alpha(i, f), 1.0 / 7.0, 1e-12);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(t.w(i, j), relu(bias[j]), 1e-12);
  }
}

TEST(Step3, SingleCharacterSeesOnlyItself) {
  auto p = random_params(9);
  for (auto& b : p.back_b) b.value.fill(0.0);
  for (auto& b : p.fwd_b) b.value.fill(0.0);
  std::mt19937_64 rng(9);
  const auto t = run(p, random_input(rng, 1));
  // Only the character's own slot of each window is in bounds.
  Tensor<double> z(1, 4);
  for (std::size_t j = 0; j < 4; ++j) z(0, j) = t.z(0, j);
  const auto zeros = Tensor<double>(1, 4);
  EXPECT_EQ(t.F.shape(), (std::vector<std::size_t>{1, 7, 4}));
  const auto back3 = conv_row(z, 0, -3, 4, p.back_w[3].value, zeros);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(t.F[j], back3[j], 1e-12);
  for (double w : t.w.values()) EXPECT_TRUE(std::isfinite(w));
}

TEST(Emissions, ZeroInputsGiveZero) {
  auto p = random_params(10);
  p.emit_b.value.fill(0.0);
  Tape<double> tape;
  std::mt19937_64 rng(0);
  const auto e = encoder::emissions(tape.constant(Tensor<double>(3, 12)), tape.constant(Tensor<double>(3, 4)), p, 0.0, false, rng);
  for (double v : e.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Emissions, SingleTagShape) {
  auto cfg = tiny_config();
  auto p = ModelParams<double>::init(cfg, kVocab, 1, 11);
  std::mt19937_64 rng(11);
  const auto t = run(p, random_input(rng, 6), Ablation::AWC, cfg);
  EXPECT_EQ(t.emissions.shape(), (std::vector<std::size_t>{6, 1}));
}

TEST(Emissions, MatchesAffineOracle) {
  std::mt19937_64 rng(12);
  auto p = random_params(12);
  const auto t = run(p, random_input(rng, 5));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < kTags; ++k) {
      double s = p.emit_b.value[k];
      for (std::size_t j = 0; j < 12; ++j) s += t.h(i, j) * p.emit_w.value(j, k);
      for (std::size_t j = 0; j < 4; ++j) s += t.w(i, j) * p.emit_w.value(12 + j, k);
      EXPECT_NEAR(t.emissions(i, k), s, 1e-12);
    }
}

TEST(EncoderProperties, AttentionRowsAreStochastic) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_params(100 + static_cast<std::uint64_t>(trial));
    const auto t = run(p, random_input(rng, 1 + trial % 10));
    for (std::size_t i = 0; i < t.v.rows(); ++i) {
      double sv = 0, sa = 0;
      for (std::size_t c = 0; c < 4; ++c) {
        EXPECT_GE(t.v(i, c), 0.0);
        sv += t.v(i, c);
      }
      for (std::size_t f = 0; f < 7; ++f) {
        EXPECT_GE(t.alpha(i, f), 0.0);
        sa += t.alpha(i, f);
      }
      EXPECT_NEAR(sv, 1.0, 1e-6);
      EXPECT_NEAR(sa, 1.0, 1e-6);
    }
  }
}

TEST(EncoderProperties, ConvolutionBankIsTranslationEquivariant) {
  std::mt19937_64 rng(14);
  auto p = random_params(14);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 12;
    const auto x = random_tensor(rng, n, 4);
    Tensor<double> shifted(n + 1, 4);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 4; ++j) shifted(i + 1, j) = x(i, j);
    Tape<double> tape;
    const auto h = encoder::step2_attend(tape.constant(x), p, {{0, n}}).h.value();
    const auto hs = encoder::step2_attend(tape.constant(shifted), p, {{0, n + 1}}).h.value();
    // Windows reach 4 rows ahead; rows whose windows stay in bounds in both.
    for (std::size_t i = 0; i + 5 <= n; ++i)
      for (std::size_t k = 0; k < h.cols(); ++k) EXPECT_NEAR(hs(i + 1, k), h(i, k), 1e-12);
  }
}

TEST(EncoderProperties, BaselineEqualsCpeOnZeroCandidacy) {
  std::mt19937_64 rng(15);
  auto p = random_params(15);
  auto in = random_input(rng, 8);
  in.cand.fill(0.0);
  for (Ablation hi : {Ablation::CPE}) {
    const auto a = run(p, in, Ablation::Baseline);
    const auto b = run(p, in, hi);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.h, b.h);
    EXPECT_EQ(a.emissions, b.emissions);
  }
}

TEST(EncoderProperties, PackedSentencesMatchSeparatePasses) {
  std::mt19937_64 rng(16);
  auto p = random_params(16);
  const auto a = random_input(rng, 3), b = random_input(rng, 5);
  PackedInput<double> both;
  both.char_ids = a.char_ids;
  both.char_ids.insert(both.char_ids.end(), b.char_ids.begin(), b.char_ids.end());
  both.cand = Tensor<double>(8, 4);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t c = 0; c < 4; ++c) both.cand(i, c) = i < 3 ? a.cand(i, c) : b.cand(i - 3, c);
  both.segments = {{0, 3}, {3, 8}};
  const auto ta = run(p, a), tb = run(p, b), tboth = run(p, both);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t k = 0; k < kTags; ++k)
      EXPECT_NEAR(tboth.emissions(i, k), i < 3 ? ta.emissions(i, k) : tb.emissions(i - 3, k), 1e-12);
}

TEST(EncoderProperties, AblationLevelsUseNestedParameterSets) {
  std::mt19937_64 rng(17);
  const auto in = random_input(rng, 6);
  const auto touched = [&](Ablation level) {
    auto p = random_params(17);
    Tape<double> tape;
    std::mt19937_64 drop(0);
    const auto f = encoder::forward(tape, p, tiny_config(), level, in, false, drop);
    tape.backward(ad::sum(ad::mul(f.emissions, tape.constant(random_tensor(rng, 6, kTags)))));
    std::set<std::string> names;
    for (const auto* q : p.all()) {
      bool any = false;
      for (double g : q->grad.values()) any = any || g != 0.0;
      if (any) names.insert(q->name);
    }
    return names;
  };
  const auto base = touched(Ablation::Baseline), cpe = touched(Ablation::CPE), psa = touched(Ablation::PSA),
             awc = touched(Ablation::AWC);
  EXPECT_FALSE(base.count("cpe.W_p"));
  EXPECT_TRUE(cpe.count("cpe.W_p"));
  EXPECT_FALSE(cpe.count("psa.W_v"));
  EXPECT_TRUE(psa.count("psa.W_v"));
  EXPECT_FALSE(psa.count("awc.W_alpha"));
  EXPECT_TRUE(awc.count("awc.W_alpha"));
  EXPECT_TRUE(std::includes(cpe.begin(), cpe.end(), base.begin(), base.end()));
  EXPECT_TRUE(std::includes(psa.begin(), psa.end(), cpe.begin(), cpe.end()));
  EXPECT_TRUE(std::includes(awc.begin(), awc.end(), psa.begin(), psa.end()));
}

TEST(EncoderProperties, PsaAveragesSubwordRows) {
  std::mt19937_64 rng(18);
  auto p = random_params(18);
  const auto t = run(p, random_input(rng, 5), Ablation::PSA);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0;
      for (std::size_t f = 0; f < 7; ++f) mean += t.F[(i * 7 + f) * 4 + j] / 7.0;
      EXPECT_NEAR(t.w(i, j), mean, 1e-12);
    }
}

TEST(EncoderProperties, FullLossGradientsPassFiniteDifferences) {
  std::mt19937_64 rng(19);
  auto p = random_params(19);
  const auto in = random_input(rng, 5);
  const auto c = TransitionConstraints::bioes(oracle::scheme_with_types(1));
  const std::vector<std::size_t> gold{1, 3, 0, 4, 0};
  const auto loss = [&](Tape<double>& tape) {
    std::mt19937_64 drop(0);
    const auto f = encoder::forward(tape, p, tiny_config(), Ablation::AWC, in, false, drop);
    auto m = crf::mask_transitions(tape.param(p.crf_transitions), tape.param(p.crf_start), tape.param(p.crf_end), c);
    return crf::negative_log_likelihood(f.emissions, m, gold, c);
  };
  const auto r = finite_diff_check(loss, p.all());
  for (const auto& pc : r.params) EXPECT_LT(pc.max_rel_error, 1e-4) << pc.name;
}
