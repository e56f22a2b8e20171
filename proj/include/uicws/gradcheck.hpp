#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "uicws/autodiff.hpp"

namespace uicws {

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Coordinates checked per parameter; 0 checks every coordinate.
  std::size_t max_coords_per_param = 0;
  /// Before checking, every parameter value is shifted by uniform(-nudge, nudge).
  /// This moves relu pre-activations off the kink at exactly 0 (zero biases
  /// meeting zero-padded windows would otherwise sit on it). 0 disables.
  double nudge = 1e-3;
  std::uint64_t seed = 17;
};

struct ParamCheck {
  std::string name;
  std::size_t coords = 0;
  double max_rel_error = 0;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::vector<ParamCheck> params;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares tape gradients of `loss_fn` against central differences.
/// `loss_fn` must be deterministic and build its loss on the given tape.
inline GradCheckResult finite_diff_check(const std::function<Var<double>(Tape<double>&)>& loss_fn,
                                         const std::vector<Param<double>*>& params,
                                         const GradCheckOptions& opts = {}) {
  std::mt19937_64 rng(opts.seed);
  if (opts.nudge > 0) {
    std::uniform_real_distribution<double> u(-opts.nudge, opts.nudge);
    for (auto* p : params)
      for (auto& v : p->value.values()) v += u(rng);
  }
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape;
    auto loss = loss_fn(tape);
    tape.backward(loss);
  }
  const auto eval = [&] {
    Tape<double> tape;
    return loss_fn(tape).value()[0];
  };

  GradCheckResult result;
  for (auto* p : params) {
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    ParamCheck check{p->name, coords.size(), 0.0};
    for (std::size_t c : coords) {
      const double saved = p->value[c];
      p->value[c] = saved + opts.epsilon;
      const double plus = eval();
      p->value[c] = saved - opts.epsilon;
      const double minus = eval();
      p->value[c] = saved;
      const double numeric = (plus - minus) / (2 * opts.epsilon);
      check.max_rel_error = std::max(check.max_rel_error, relative_error(p->grad[c], numeric));
    }
    result.max_rel_error = std::max(result.max_rel_error, check.max_rel_error);
    result.params.push_back(std::move(check));
  }
  return result;
}

}  // namespace uicws
