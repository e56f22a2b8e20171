#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "uicws/tags.hpp"

namespace uicws {

/// Exact-match entity counts.
struct Counts {
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const { return predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0; }
  double recall() const { return gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  Counts& operator+=(const Counts& o) {
    correct += o.correct;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct ErrorBreakdown {
  std::size_t boundary_errors = 0;
  std::size_t type_errors = 0;
  std::size_t correct = 0;

  ErrorBreakdown& operator+=(const ErrorBreakdown& o) {
    boundary_errors += o.boundary_errors;
    type_errors += o.type_errors;
    correct += o.correct;
    return *this;
  }
  friend bool operator==(const ErrorBreakdown&, const ErrorBreakdown&) = default;
};

/// Entity-length buckets 1, 2, 3 and >= 4; absent when a bucket saw nothing.
struct LengthBuckets {
  static constexpr std::array<const char*, 4> kNames{"1", "2", "3", "4+"};
  std::array<std::optional<Counts>, 4> buckets;

  static std::size_t bucket_of(std::size_t length) { return std::min<std::size_t>(length, 4) - 1; }

  LengthBuckets& operator+=(const LengthBuckets& o) {
    for (std::size_t b = 0; b < 4; ++b) {
      if (!o.buckets[b]) continue;
      if (!buckets[b]) buckets[b] = Counts{};
      *buckets[b] += *o.buckets[b];
    }
    return *this;
  }
};

/// Errors of one sentence. A predicted span without an exact match counts a
/// boundary error when no gold span has its (start, end), and a type error
/// when its paired gold span has another type. The pairing is the gold span
/// with identical boundaries if any, otherwise the gold span with the largest
/// overlap (earliest start on ties). A span can count as both.
inline ErrorBreakdown categorize_errors(const std::vector<Span>& gold, const std::vector<Span>& pred) {
  ErrorBreakdown e;
  const std::set<Span> gold_set(gold.begin(), gold.end());
  for (const auto& p : pred) {
    if (gold_set.count(p)) {
      ++e.correct;
      continue;
    }
    const Span* same_bounds = nullptr;
    const Span* best = nullptr;
    std::size_t best_overlap = 0;
    for (const auto& g : gold) {
      if (g.start == p.start && g.end == p.end) same_bounds = &g;
      const std::size_t lo = std::max(g.start, p.start), hi = std::min(g.end, p.end);
      const std::size_t overlap = hi > lo ? hi - lo : 0;
      if (overlap > best_overlap || (overlap == best_overlap && overlap > 0 && best && g.start < best->start)) {
        best_overlap = overlap;
        best = &g;
      }
    }
    if (!same_bounds) ++e.boundary_errors;
    const Span* paired = same_bounds ? same_bounds : best;
    if (paired && paired->type != p.type) ++e.type_errors;
  }
  return e;
}

/// Gold spans bucketed by their length, predicted spans by their own length.
inline LengthBuckets bucket_by_length(const std::vector<Span>& gold, const std::vector<Span>& pred) {
  LengthBuckets lb;
  const std::set<Span> gold_set(gold.begin(), gold.end());
  const auto slot = [&](std::size_t len) -> Counts& {
    auto& b = lb.buckets[LengthBuckets::bucket_of(len)];
    if (!b) b = Counts{};
    return *b;
  };
  for (const auto& g : gold) ++slot(g.length()).gold;
  for (const auto& p : pred) {
    auto& c = slot(p.length());
    ++c.predicted;
    if (gold_set.count(p)) ++c.correct;
  }
  return lb;
}

struct EvalReport {
  Counts overall;
  std::map<std::string, Counts> per_class;
  ErrorBreakdown errors;
  LengthBuckets lengths;
};

/// Entity-level evaluation with exact (start, end, type) matching, pooled over sentences.
inline EvalReport evaluate_spans(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred) {
  EvalReport r;
  const std::size_t n = std::min(gold.size(), pred.size());
  for (std::size_t s = 0; s < n; ++s) {
    const std::set<Span> gset(gold[s].begin(), gold[s].end());
    for (const auto& g : gold[s]) {
      ++r.overall.gold;
      ++r.per_class[g.type].gold;
    }
    for (const auto& p : pred[s]) {
      ++r.overall.predicted;
      auto& c = r.per_class[p.type];
      ++c.predicted;
      if (gset.count(p)) {
        ++r.overall.correct;
        ++c.correct;
      }
    }
    r.errors += categorize_errors(gold[s], pred[s]);
    r.lengths += bucket_by_length(gold[s], pred[s]);
  }
  return r;
}

struct SeedRun {
  std::uint64_t seed = 0;
  EvalReport report;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
};

struct AggregateReport {
  std::vector<SeedRun> runs;

  double mean_f() const { return mean([](const EvalReport& r) { return r.overall.f1(); }); }
  double mean_precision() const { return mean([](const EvalReport& r) { return r.overall.precision(); }); }
  double mean_recall() const { return mean([](const EvalReport& r) { return r.overall.recall(); }); }
  /// Population standard deviation of F.
  double std_f() const {
    if (runs.empty()) return 0.0;
    const double m = mean_f();
    double ss = 0;
    for (const auto& r : runs) ss += (r.report.overall.f1() - m) * (r.report.overall.f1() - m);
    return std::sqrt(ss / static_cast<double>(runs.size()));
  }

 private:
  template <class Fn>
  double mean(Fn fn) const {
    if (runs.empty()) return 0.0;
    double s = 0;
    for (const auto& r : runs) s += fn(r.report);
    return s / static_cast<double>(runs.size());
  }
};

namespace detail {
inline void write_counts(std::ostream& out, const Counts& c) {
  out << "precision = " << c.precision() << "\n"
      << "recall = " << c.recall() << "\n"
      << "f1 = " << c.f1() << "\n"
      << "correct = " << c.correct << "\n"
      << "predicted = " << c.predicted << "\n"
      << "gold = " << c.gold << "\n";
}
}  // namespace detail

/// Writes `[prefix.section]` blocks of `key = value` lines.
inline void write_report(std::ostream& out, const EvalReport& r, const std::string& prefix = "") {
  const auto section = [&](const std::string& name) {
    out << "[" << (prefix.empty() ? name : prefix + "." + name) << "]\n";
  };
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::fixed << std::setprecision(6);
  section("overall");
  detail::write_counts(out, r.overall);
  for (const auto& [type, c] : r.per_class) {
    out << "\n";
    section("class." + type);
    detail::write_counts(out, c);
  }
  out << "\n";
  section("errors");
  out << "boundary_errors = " << r.errors.boundary_errors << "\n"
      << "type_errors = " << r.errors.type_errors << "\n"
      << "correct = " << r.errors.correct << "\n";
  for (std::size_t b = 0; b < 4; ++b) {
    if (!r.lengths.buckets[b]) continue;
    out << "\n";
    section(std::string("length.") + LengthBuckets::kNames[b]);
    detail::write_counts(out, *r.lengths.buckets[b]);
  }
  out.flags(flags);
  out.precision(precision);
}

inline void write_report(std::ostream& out, const AggregateReport& agg) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::fixed << std::setprecision(6);
  out << "[summary]\n"
      << "seeds = " << agg.runs.size() << "\n"
      << "precision_mean = " << agg.mean_precision() << "\n"
      << "recall_mean = " << agg.mean_recall() << "\n"
      << "f1_mean = " << agg.mean_f() << "\n"
      << "f1_std = " << agg.std_f() << "\n";
  for (const auto& run : agg.runs) {
    out << "\n[seed." << run.seed << "]\n"
        << "epochs = " << run.epochs << "\n"
        << "best_epoch = " << run.best_epoch << "\n"
        << "f1 = " << run.report.overall.f1() << "\n\n";
    write_report(out, run.report, "seed." + std::to_string(run.seed));
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace uicws
