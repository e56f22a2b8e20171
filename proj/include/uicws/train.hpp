#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "uicws/corpus.hpp"
#include "uicws/metrics.hpp"
#include "uicws/model.hpp"

namespace uicws {

enum class Precision { Single, Double };

inline std::string to_string(Precision p) { return p == Precision::Single ? "single" : "double"; }
inline Precision precision_from_string(const std::string& s) {
  if (s == "single" || s == "f32" || s == "float") return Precision::Single;
  if (s == "double" || s == "f64") return Precision::Double;
  throw ConfigError("unknown precision '" + s + "' (expected single or double)");
}

struct TrainConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 120;
  std::size_t patience = 20;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double val_fraction = 0.2;
  std::uint64_t split_seed = 0;
  /// Draw a fresh validation split per seed instead of one fixed split.
  bool redraw_split = false;
  Ablation ablation = Ablation::AWC;
  Precision precision = Precision::Single;
  /// Seeds trained concurrently.
  std::size_t jobs = 1;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    if (patience == 0 || patience > max_epochs) throw ConfigError("patience must lie in [1, max_epochs]");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Stops after `patience` consecutive epochs without a strictly lower loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records an epoch's validation loss; returns true on a new minimum.
  bool update(std::size_t epoch, double loss) {
    if (loss < best_) {
      best_ = loss;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }
  bool should_stop() const noexcept { return stale_ >= patience_; }
  double best_loss() const noexcept { return best_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
};

template <class Real>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Param<Real>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
      }
    }
    ++t_;
    const double c1 = 1 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = p.grad[i];
        m[i] = b1_ * m[i] + (1 - b1_) * g;
        v[i] = b2_ * v[i] + (1 - b2_) * g * g;
        p.value[i] -= static_cast<Real>(lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Everything a run needs besides configuration.
struct Dataset {
  std::vector<Sentence> train;
  std::vector<Sentence> val;   // empty: split off `train` per TrainConfig
  std::vector<Sentence> test;  // empty: report on validation
  Lexicon lexicon;
  TagScheme scheme;
  Vocabulary vocab;
  std::optional<EmbeddingTable> embeddings;
};

/// Builds scheme and vocabulary from the corpora (or the embedding table).
inline Dataset make_dataset(std::vector<Sentence> train, std::vector<Sentence> val, std::vector<Sentence> test,
                            Lexicon lexicon, std::optional<EmbeddingTable> embeddings = std::nullopt) {
  Dataset d;
  std::vector<Sentence> all = train;
  all.insert(all.end(), val.begin(), val.end());
  all.insert(all.end(), test.begin(), test.end());
  d.scheme = scheme_from(all);
  d.vocab = embeddings ? Vocabulary::from_table(*embeddings) : Vocabulary::from_corpus(train.empty() ? all : train);
  d.train = std::move(train);
  d.val = std::move(val);
  d.test = std::move(test);
  d.lexicon = std::move(lexicon);
  d.embeddings = std::move(embeddings);
  return d;
}

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_f = 0;
  double elapsed_s = 0;
};

inline void write_log_line(std::ostream& out, const EpochLog& e) {
  out << e.epoch << ' ' << std::setprecision(9) << e.train_loss << ' ' << e.val_loss << ' ' << e.val_f << ' '
      << std::setprecision(3) << std::fixed << e.elapsed_s << std::defaultfloat << '\n';
}

template <class Real>
struct TrainResult {
  Model<Real> model;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::vector<std::size_t> val_indices;  // when the validation set was split off
};

namespace detail {
template <class Real>
double mean_loss(Model<Real>& model, const std::vector<Batch>& batches) {
  double total = 0;
  std::size_t count = 0;
  std::mt19937_64 rng(0);
  for (const auto& b : batches) {
    Tape<Real> tape;
    total += static_cast<double>(model.batch_loss(tape, b, false, rng).value()[0]) * static_cast<double>(b.batch_size);
    count += b.batch_size;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

inline std::vector<std::vector<Span>> gold_spans(const std::vector<Sentence>& sentences) {
  std::vector<std::vector<Span>> out;
  for (const auto& s : sentences) out.push_back(s.spans);
  return out;
}
}  // namespace detail

template <class Real>
EvalReport evaluate(const Model<Real>& model, const std::vector<Sentence>& sentences) {
  return evaluate_spans(detail::gold_spans(sentences), model.predict_spans(sentences));
}

/// Trains one model. Adam on the batch-mean CRF negative log-likelihood;
/// keeps the parameters of the epoch with the lowest validation loss.
template <class Real>
TrainResult<Real> train(const Dataset& data, const EncoderConfig& enc, const TrainConfig& cfg, std::uint64_t seed,
                        std::ostream* log = nullptr) {
  cfg.validate();
  enc.validate();
  std::vector<Sentence> train_set = data.train;
  std::vector<Sentence> val_set = data.val;
  std::vector<std::size_t> val_indices;
  if (val_set.empty()) {
    auto split = split_corpus(data.train, cfg.val_fraction, cfg.redraw_split ? seed : cfg.split_seed);
    train_set = std::move(split.train);
    val_set = std::move(split.val);
    val_indices = std::move(split.val_indices);
  }
  if (train_set.empty() || val_set.empty()) throw DataError("training and validation sets must be non-empty");

  Model<Real> model(enc, cfg.ablation, data.scheme, data.vocab, data.lexicon, seed,
                    data.embeddings ? &*data.embeddings : nullptr);
  ModelParams<Real> best = model.params();
  const auto params = model.params().all();
  Adam<Real> adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  EarlyStopping stopper(cfg.patience);
  std::mt19937_64 dropout_rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const auto val_batches = make_batches(val_set, data.lexicon, data.scheme, data.vocab, cfg.batch_size, std::nullopt);

  TrainResult<Real> result{model, {}, 0, val_indices};
  const auto t0 = std::chrono::steady_clock::now();
  if (log) *log << "# epoch train_loss val_loss val_F elapsed_s\n";
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches =
        make_batches(train_set, data.lexicon, data.scheme, data.vocab, cfg.batch_size, seed * 1000003ULL + epoch);
    double train_total = 0;
    std::size_t train_count = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      model.params().zero_grad();
      Tape<Real> tape;
      auto loss = model.batch_loss(tape, batches[bi], true, dropout_rng);
      const double value = static_cast<double>(loss.value()[0]);
      if (!std::isfinite(value)) throw NonFiniteLoss(bi);
      tape.backward(loss);
      adam.step(params);
      train_total += value * static_cast<double>(batches[bi].batch_size);
      train_count += batches[bi].batch_size;
    }
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = train_total / static_cast<double>(train_count);
    e.val_loss = detail::mean_loss(model, val_batches);
    e.val_f = evaluate(model, val_set).overall.f1();
    e.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(e);
    if (log) write_log_line(*log, e);
    if (stopper.update(epoch, e.val_loss)) best = model.params();
    if (stopper.should_stop()) break;
  }
  model.params() = std::move(best);
  result.model = std::move(model);
  result.best_epoch = stopper.best_epoch();
  return result;
}

/// Trains one model per seed and evaluates each on the test set (or the
/// validation set when no test set is given). `on_done` runs per seed,
/// serialized, with the seed's result and log text.
template <class Real>
AggregateReport run_seeds(const Dataset& data, const EncoderConfig& enc, const TrainConfig& cfg,
                          const std::function<void(std::uint64_t, const TrainResult<Real>&, const std::string&)>& on_done = {}) {
  cfg.validate();
  AggregateReport agg;
  agg.runs.resize(cfg.seeds.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  const auto worker = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        const auto seed = cfg.seeds[i];
        std::ostringstream log;
        auto result = train<Real>(data, enc, cfg, seed, &log);
        const auto& eval_set = data.test.empty() ? (data.val.empty() ? data.train : data.val) : data.test;
        std::vector<Sentence> eval_sentences;
        if (data.test.empty() && data.val.empty()) {
          for (auto idx : result.val_indices) eval_sentences.push_back(data.train[idx]);
        }
        SeedRun run{seed, evaluate(result.model, eval_sentences.empty() ? eval_set : eval_sentences),
                    result.log.size(), result.best_epoch};
        std::lock_guard lock(mu);
        agg.runs[i] = std::move(run);
        if (on_done) on_done(seed, result, log.str());
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t jobs = std::min(cfg.jobs, cfg.seeds.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return agg;
}

}  // namespace uicws
