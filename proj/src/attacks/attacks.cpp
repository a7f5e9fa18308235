// Copyright 2026 The spectral-asrd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spectral_asrd/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "spectral_asrd/hashing.hpp"

namespace spectral_asrd {

namespace {

void check_inputs(const Classifier& model, const Tensor& batch, std::span<const int> labels) {
  if (batch.rank() != 4) throw ContractError("attack batch must be (B, C, H, W), got " + shape_string(batch.shape()));
  const Shape& in = model.input_shape();
  if (!std::equal(in.begin(), in.end(), batch.shape().begin() + 1)) {
    throw ContractError("attack batch " + shape_string(batch.shape()) + " does not match model input " +
                        shape_string(in));
  }
  if (labels.size() != batch.dim(0)) throw ContractError("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes()) {
      throw ContractError("label " + std::to_string(y) + " out of range");
    }
  }
}

std::vector<std::uint64_t> sample_seeds(std::uint64_t seed, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = derive_seed(seed, i);
  return s;
}

float sign_of(float g) { return static_cast<float>((g > 0.0f) - (g < 0.0f)); }

// Flags and bookkeeping filled from a fresh forward pass of the final images.
AdversarialBatch finish(const Classifier& model, const Tensor& clean, Tensor adversarial, std::span<const int> labels,
                        AttackMethod method, double epsilon, std::uint64_t seed, std::vector<std::size_t> queries) {
  AdversarialBatch out;
  const auto pred = predict(model, adversarial);
  out.clean = clean;
  out.adversarial = std::move(adversarial);
  out.labels.assign(labels.begin(), labels.end());
  out.success.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.success[i] = pred[i] != labels[i];
  out.method = std::string(method_name(method));
  out.epsilon = epsilon;
  out.norm = native_norm(method);
  out.seed = seed;
  out.queries = std::move(queries);
  out.errored.assign(labels.size(), false);
  return out;
}

Tensor uniform_start(const Tensor& clean, float epsilon, std::span<const std::uint64_t> seeds) {
  Tensor x = clean;
  if (epsilon == 0.0f) return x;
  for (std::size_t b = 0; b < clean.dim(0); ++b) {
    std::mt19937_64 rng(seeds[b]);
    std::uniform_real_distribution<float> u(-epsilon, epsilon);
    for (float& v : x.slice(b)) v += u(rng);
  }
  project_linf(x, clean, epsilon);
  return x;
}

GradientFn ce_gradient(const Classifier& model, std::span<const int> labels) {
  return [&model, labels](const Tensor& x) {
    return input_gradient(model, x, labels, LossKind::kCrossEntropy).gradient;
  };
}

// Per-sample objective values and input gradients for apgd. Rows with a
// degenerate DLR denominator are flagged in `degenerate`.
struct Objective {
  std::vector<double> loss;
  Tensor gradient;
};

Objective evaluate_objective(const Classifier& model, const Tensor& x, std::span<const int> labels, LossKind kind,
                             std::vector<bool>& degenerate) {
  Objective out;
  auto grads = model.input_vjp(
      x,
      [&](const Tensor& logits) {
        LossAndGrad lg;
        if (kind == LossKind::kCrossEntropy) {
          lg = cross_entropy(logits, labels);
          degenerate.assign(labels.size(), false);
        } else {
          lg = dlr_attack_loss(logits, labels, &degenerate);
        }
        out.loss = std::move(lg.loss);
        return std::vector<Tensor>{std::move(lg.grad)};
      },
      nullptr);
  out.gradient = std::move(grads.front());
  return out;
}

struct ApgdResult {
  Tensor best;
  std::vector<std::size_t> queries;
  std::vector<bool> errored;
};

ApgdResult apgd_run(const Classifier& model, const Tensor& clean, std::span<const int> labels, float epsilon,
                    int n_iters, LossKind kind, std::span<const std::uint64_t> seeds) {
  constexpr double kMomentum = 0.75;
  constexpr double kRho = 0.75;
  const std::size_t n = clean.dim(0), per = clean.stride0();
  const auto checkpoints = apgd_checkpoints(n_iters);

  ApgdResult r;
  r.errored.assign(n, false);
  r.queries.assign(n, 0);

  Tensor x = uniform_start(clean, epsilon, seeds);
  std::vector<bool> degenerate;
  Objective f = evaluate_objective(model, x, labels, kind, degenerate);
  for (std::size_t b = 0; b < n; ++b) {
    ++r.queries[b];
    if (degenerate[b]) r.errored[b] = true;
  }

  Tensor x_prev = x, best = x, grad_best = f.gradient;
  std::vector<double> f_best = f.loss, f_last = f.loss;
  std::vector<float> eta(n, 2.0f * epsilon);
  std::vector<int> increases(n, 0);
  std::vector<bool> halved_last(n, false);
  std::vector<double> f_best_last_check = f.loss;
  Tensor grad = f.gradient;

  std::size_t next_check = 0;
  int last_check = 0;
  for (int k = 0; k < n_iters; ++k) {
    Tensor z = x;
    for (std::size_t b = 0; b < n; ++b) {
      if (r.errored[b]) continue;
      auto zs = z.slice(b);
      auto gs = grad.slice(b);
      for (std::size_t i = 0; i < per; ++i) zs[i] += eta[b] * sign_of(gs[i]);
    }
    project_linf(z, clean, epsilon);
    Tensor next = x;
    const float a = k == 0 ? 1.0f : static_cast<float>(kMomentum);
    for (std::size_t b = 0; b < n; ++b) {
      if (r.errored[b]) continue;
      auto ns = next.slice(b);
      auto xs = x.slice(b), ps = x_prev.slice(b), zs = z.slice(b);
      for (std::size_t i = 0; i < per; ++i) ns[i] = xs[i] + a * (zs[i] - xs[i]) + (1.0f - a) * (xs[i] - ps[i]);
    }
    project_linf(next, clean, epsilon);
    x_prev = std::move(x);
    x = std::move(next);

    f = evaluate_objective(model, x, labels, kind, degenerate);
    grad = f.gradient;
    for (std::size_t b = 0; b < n; ++b) {
      if (r.errored[b]) continue;
      ++r.queries[b];
      if (degenerate[b]) {
        r.errored[b] = true;
        continue;
      }
      if (f.loss[b] > f_last[b]) ++increases[b];
      f_last[b] = f.loss[b];
      if (f.loss[b] > f_best[b]) {
        f_best[b] = f.loss[b];
        std::copy(x.slice(b).begin(), x.slice(b).end(), best.slice(b).begin());
        std::copy(grad.slice(b).begin(), grad.slice(b).end(), grad_best.slice(b).begin());
      }
    }

    const int done = k + 1;
    if (next_check < checkpoints.size() && done == checkpoints[next_check]) {
      const int span = done - last_check;
      for (std::size_t b = 0; b < n; ++b) {
        if (r.errored[b]) continue;
        const bool oscillating = increases[b] < kRho * span;
        const bool stalled = !halved_last[b] && f_best[b] <= f_best_last_check[b];
        halved_last[b] = oscillating || stalled;
        f_best_last_check[b] = f_best[b];
        increases[b] = 0;
        if (halved_last[b]) {
          eta[b] *= 0.5f;
          std::copy(best.slice(b).begin(), best.slice(b).end(), x.slice(b).begin());
          std::copy(best.slice(b).begin(), best.slice(b).end(), x_prev.slice(b).begin());
          std::copy(grad_best.slice(b).begin(), grad_best.slice(b).end(), grad.slice(b).begin());
          f_last[b] = f_best[b];
        }
      }
      last_check = done;
      ++next_check;
    }
  }
  r.best = std::move(best);
  return r;
}

struct SquareResult {
  Tensor adversarial;
  std::vector<std::size_t> queries;
};

SquareResult square_run(const Classifier& model, const Tensor& clean, std::span<const int> labels, float epsilon,
                        int n_queries, double p_init, std::span<const std::uint64_t> seeds) {
  const std::size_t n = clean.dim(0), c = clean.dim(1), h = clean.dim(2), w = clean.dim(3);
  std::vector<std::mt19937_64> rng;
  rng.reserve(n);
  for (std::size_t b = 0; b < n; ++b) rng.emplace_back(seeds[b]);
  std::bernoulli_distribution coin(0.5);

  // Vertical stripes: one random sign per (channel, column).
  Tensor best = clean;
  for (std::size_t b = 0; b < n; ++b) {
    auto xs = best.slice(b);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t col = 0; col < w; ++col) {
        const float d = coin(rng[b]) ? epsilon : -epsilon;
        for (std::size_t row = 0; row < h; ++row) xs[(ch * h + row) * w + col] += d;
      }
    }
  }
  clip_inplace(best, 0.0f, 1.0f);

  SquareResult r;
  r.queries.assign(n, 1);
  Tensor logits = model.logits(best);
  std::vector<double> margin = margins(logits, labels);
  std::vector<int> pred = argmax_rows(logits);

  const std::size_t side_limit = std::max<std::size_t>(std::min(h, w) - 1, 1);
  for (int it = 1; it < n_queries; ++it) {
    std::vector<std::size_t> active;
    for (std::size_t b = 0; b < n; ++b) {
      if (pred[b] == labels[b]) active.push_back(b);
    }
    if (active.empty()) break;
    const double p = square_fraction(p_init, it, n_queries);
    const auto side = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(std::sqrt(p * static_cast<double>(h * w)))), 1, side_limit);

    Tensor proposals = best.gather(active);
    for (std::size_t j = 0; j < active.size(); ++j) {
      const std::size_t b = active[j];
      auto& g = rng[b];
      std::uniform_int_distribution<std::size_t> top(0, h - side), left(0, w - side);
      const std::size_t y0 = top(g), x0 = left(g);
      auto ps = proposals.slice(j);
      auto cs = clean.slice(b);
      auto bs = best.slice(b);
      // Resample the signs until the window actually changes.
      for (int attempt = 0; attempt < 16; ++attempt) {
        bool changed = false;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const float d = coin(g) ? epsilon : -epsilon;
          for (std::size_t yy = y0; yy < y0 + side; ++yy) {
            for (std::size_t xx = x0; xx < x0 + side; ++xx) {
              const std::size_t idx = (ch * h + yy) * w + xx;
              ps[idx] = std::clamp(cs[idx] + d, 0.0f, 1.0f);
              changed = changed || std::abs(ps[idx] - bs[idx]) >= 1e-7f;
            }
          }
        }
        if (changed) break;
      }
    }
    const Tensor z = model.logits(proposals);
    const std::vector<int> sub_labels = [&] {
      std::vector<int> l;
      for (std::size_t b : active) l.push_back(labels[b]);
      return l;
    }();
    const auto m = margins(z, sub_labels);
    const auto zp = argmax_rows(z);
    for (std::size_t j = 0; j < active.size(); ++j) {
      const std::size_t b = active[j];
      ++r.queries[b];
      if (m[j] < margin[b]) {
        margin[b] = m[j];
        pred[b] = zp[j];
        std::copy(proposals.slice(j).begin(), proposals.slice(j).end(), best.slice(b).begin());
      }
    }
  }
  r.adversarial = std::move(best);
  return r;
}

}  // namespace

std::string_view method_name(AttackMethod method) {
  switch (method) {
    case AttackMethod::kFgsm: return "fgsm";
    case AttackMethod::kBim: return "bim";
    case AttackMethod::kPgd: return "pgd";
    case AttackMethod::kDeepfool: return "deepfool";
    case AttackMethod::kCw: return "cw";
    case AttackMethod::kApgdCe: return "apgd_ce";
    case AttackMethod::kApgdDlr: return "apgd_dlr";
    case AttackMethod::kSquare: return "square";
    case AttackMethod::kAutoAttack: return "autoattack";
  }
  return "?";
}

AttackMethod parse_attack_method(std::string_view name) {
  std::string valid;
  for (auto m : {AttackMethod::kFgsm, AttackMethod::kBim, AttackMethod::kPgd, AttackMethod::kDeepfool,
                 AttackMethod::kCw, AttackMethod::kApgdCe, AttackMethod::kApgdDlr, AttackMethod::kSquare,
                 AttackMethod::kAutoAttack}) {
    if (method_name(m) == name) return m;
    valid += (valid.empty() ? "" : ", ") + std::string(method_name(m));
  }
  throw ConfigError("unknown attack method '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string_view norm_name(Norm norm) { return norm == Norm::kLinf ? "linf" : "l2"; }

Norm parse_norm(std::string_view name) {
  if (name == "linf") return Norm::kLinf;
  if (name == "l2") return Norm::kL2;
  throw ConfigError("unknown norm '" + std::string(name) + "' (expected linf or l2)");
}

Norm native_norm(AttackMethod method) {
  return method == AttackMethod::kDeepfool || method == AttackMethod::kCw ? Norm::kL2 : Norm::kLinf;
}

AttackConfig AttackConfig::defaults(AttackMethod method) {
  AttackConfig c;
  c.method = method;
  c.norm = native_norm(method);
  return c;
}

void AttackConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("attack config: " + what); };
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon must lie in [0, 1]");
  if (n_iters < 1) fail("n_iters must be >= 1");
  if (norm != native_norm(method)) {
    fail(std::string(method_name(method)) + " is an " + std::string(norm_name(native_norm(method))) + " attack");
  }
  if (method == AttackMethod::kBim || method == AttackMethod::kPgd) {
    if (!(alpha > 0.0)) fail("alpha must be > 0");
    if (alpha > epsilon && n_iters > 1) fail("alpha must not exceed epsilon for multi-step attacks");
  }
  if (apgd_iters < 1) fail("apgd_iters must be >= 1");
  if (!(cw_c_init > 0.0)) fail("cw_c_init must be > 0");
  if (cw_binary_search_steps < 1 || cw_inner_iters < 1) fail("cw steps must be >= 1");
  if (!(cw_lr > 0.0)) fail("cw_lr must be > 0");
  if (!(deepfool_overshoot >= 0.0)) fail("deepfool_overshoot must be >= 0");
  if (deepfool_max_iter < 1) fail("deepfool_max_iter must be >= 1");
  if (square_n_queries < 1) fail("square_n_queries must be >= 1");
  if (!(square_p_init > 0.0 && square_p_init <= 1.0)) fail("square_p_init must lie in (0, 1]");
}

double AdversarialBatch::success_rate() const {
  if (success.empty()) return 0.0;
  return static_cast<double>(std::count(success.begin(), success.end(), true)) / static_cast<double>(success.size());
}

void project_linf(Tensor& x, const Tensor& clean, float epsilon) {
  auto xs = x.data();
  auto cs = clean.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const float lo = std::max(cs[i] - epsilon, 0.0f);
    const float hi = std::min(cs[i] + epsilon, 1.0f);
    xs[i] = std::min(std::max(xs[i], lo), hi);
  }
}

Tensor sign_ascent(const Tensor& clean, const Tensor& start, double epsilon, double alpha, int n_iters,
                   const GradientFn& gradient) {
  const float e = static_cast<float>(epsilon), a = static_cast<float>(alpha);
  Tensor x = start;
  project_linf(x, clean, e);
  for (int it = 0; it < n_iters; ++it) {
    const Tensor g = gradient(x);
    auto xs = x.data();
    auto gs = g.data();
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += a * sign_of(gs[i]);
    project_linf(x, clean, e);
  }
  return x;
}

AdversarialBatch fgsm(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon) {
  check_inputs(model, batch, labels);
  if (epsilon < 0) throw ContractError("fgsm epsilon must be >= 0");
  const float e = static_cast<float>(epsilon);
  const Tensor g = input_gradient(model, batch, labels, LossKind::kCrossEntropy).gradient;
  Tensor x = batch;
  auto xs = x.data();
  auto gs = g.data();
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::clamp(xs[i] + e * sign_of(gs[i]), 0.0f, 1.0f);
  return finish(model, batch, std::move(x), labels, AttackMethod::kFgsm, epsilon, 0,
                std::vector<std::size_t>(labels.size(), 1));
}

AdversarialBatch bim(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon,
                     double alpha, int n_iters) {
  check_inputs(model, batch, labels);
  if (!(alpha > 0)) throw ContractError("bim alpha must be > 0");
  if (n_iters < 1) throw ContractError("bim n_iters must be >= 1");
  if (epsilon < 0) throw ContractError("bim epsilon must be >= 0");
  Tensor x = sign_ascent(batch, batch, epsilon, alpha, n_iters, ce_gradient(model, labels));
  return finish(model, batch, std::move(x), labels, AttackMethod::kBim, epsilon, 0,
                std::vector<std::size_t>(labels.size(), static_cast<std::size_t>(n_iters)));
}

AdversarialBatch pgd(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon,
                     double alpha, int n_iters, std::uint64_t seed) {
  check_inputs(model, batch, labels);
  if (!(alpha > 0)) throw ContractError("pgd alpha must be > 0");
  if (n_iters < 1) throw ContractError("pgd n_iters must be >= 1");
  if (epsilon < 0) throw ContractError("pgd epsilon must be >= 0");
  const Tensor start = uniform_start(batch, static_cast<float>(epsilon), sample_seeds(seed, batch.dim(0)));
  Tensor x = sign_ascent(batch, start, epsilon, alpha, n_iters, ce_gradient(model, labels));
  return finish(model, batch, std::move(x), labels, AttackMethod::kPgd, epsilon, seed,
                std::vector<std::size_t>(labels.size(), static_cast<std::size_t>(n_iters)));
}

std::vector<int> apgd_checkpoints(int n_iters) {
  // Fractions in hundredths so that ceil(p * n) is exact.
  std::vector<int> out;
  long prev = 0, p = 22;
  while (p <= 100) {
    const auto w = static_cast<int>((p * n_iters + 99) / 100);
    if (w > 0 && w <= n_iters && (out.empty() || w > out.back())) out.push_back(w);
    const long next = p + std::max(p - prev - 3, 6L);
    prev = p;
    p = next;
  }
  return out;
}

AdversarialBatch apgd(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon,
                      int n_iters, LossKind loss_kind, std::uint64_t seed) {
  check_inputs(model, batch, labels);
  if (n_iters < 1) throw ContractError("apgd n_iters must be >= 1");
  if (epsilon < 0) throw ContractError("apgd epsilon must be >= 0");
  if (loss_kind == LossKind::kDlr && model.num_classes() < 4) {
    throw ContractError("apgd with DLR loss needs at least 4 classes");
  }
  auto r = apgd_run(model, batch, labels, static_cast<float>(epsilon), n_iters, loss_kind,
                    sample_seeds(seed, batch.dim(0)));
  for (std::size_t b = 0; b < r.errored.size(); ++b) {
    if (r.errored[b]) throw NumericError("degenerate logits for DLR loss at sample " + std::to_string(b));
  }
  const auto method = loss_kind == LossKind::kCrossEntropy ? AttackMethod::kApgdCe : AttackMethod::kApgdDlr;
  return finish(model, batch, std::move(r.best), labels, method, epsilon, seed, std::move(r.queries));
}

double square_fraction(double p_init, int iteration, int n_queries) {
  const long it = static_cast<long>(static_cast<double>(iteration) / n_queries * 10000.0);
  static constexpr long kThresholds[] = {10, 50, 200, 500, 1000, 2000, 4000, 6000, 8000};
  double p = p_init;
  for (long t : kThresholds) {
    if (it > t) p *= 0.5;
  }
  return p;
}

AdversarialBatch square_attack(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                               double epsilon, int n_queries, double p_init, std::uint64_t seed) {
  check_inputs(model, batch, labels);
  if (n_queries < 1) throw ContractError("square attack needs n_queries >= 1");
  if (!(p_init > 0.0 && p_init <= 1.0)) throw ContractError("square attack p_init must lie in (0, 1]");
  if (epsilon < 0) throw ContractError("square attack epsilon must be >= 0");
  auto r = square_run(model, batch, labels, static_cast<float>(epsilon), n_queries, p_init,
                      sample_seeds(seed, batch.dim(0)));
  return finish(model, batch, std::move(r.adversarial), labels, AttackMethod::kSquare, epsilon, seed,
                std::move(r.queries));
}

AdversarialBatch deepfool(const Classifier& model, const Tensor& batch, std::span<const int> labels, int max_iter,
                          double overshoot) {
  check_inputs(model, batch, labels);
  if (max_iter < 1) throw ContractError("deepfool max_iter must be >= 1");
  const std::size_t n = batch.dim(0), per = batch.stride0(), k = model.num_classes();
  const float scale = static_cast<float>(1.0 + overshoot);

  Tensor x = batch;
  std::vector<Eigen::VectorXd> r_tot(n, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(per)));
  std::vector<std::size_t> iters(n, 0);
  std::vector<bool> errored(n, false), active(n, true);

  const CotangentFn one_hots = [k](const Tensor& logits) {
    std::vector<Tensor> seeds;
    for (std::size_t j = 0; j < k; ++j) {
      Tensor t(logits.shape());
      for (std::size_t b = 0; b < logits.dim(0); ++b) t.slice(b)[j] = 1.0f;
      seeds.push_back(std::move(t));
    }
    return seeds;
  };

  for (int it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> idx;
    for (std::size_t b = 0; b < n; ++b) {
      if (active[b]) idx.push_back(b);
    }
    if (idx.empty()) break;
    Tensor logits;
    const auto grads = model.input_vjp(x.gather(idx), one_hots, &logits);
    const auto pred = argmax_rows(logits);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t b = idx[j];
      const int y = labels[b];
      if (pred[j] != y) {
        active[b] = false;
        continue;
      }
      ++iters[b];
      auto z = logits.slice(j);
      const auto gy = Eigen::Map<const Eigen::VectorXf>(grads[y].slice(j).data(), static_cast<Eigen::Index>(per));
      double best_dist = std::numeric_limits<double>::infinity();
      Eigen::VectorXd best_step;
      for (std::size_t c = 0; c < k; ++c) {
        if (static_cast<int>(c) == y) continue;
        const auto gc = Eigen::Map<const Eigen::VectorXf>(grads[c].slice(j).data(), static_cast<Eigen::Index>(per));
        const Eigen::VectorXd wk = (gc - gy).cast<double>();
        const double norm = wk.norm();
        // A zero gradient difference puts that boundary out of linear reach.
        if (norm < 1e-12) continue;
        const double fk = double(z[c]) - double(z[y]);
        const double dist = std::abs(fk) / norm;
        if (dist < best_dist) {
          best_dist = dist;
          best_step = (std::abs(fk) / (norm * norm)) * wk;
        }
      }
      if (!std::isfinite(best_dist)) {
        errored[b] = true;
        active[b] = false;
        continue;
      }
      r_tot[b] += best_step;
      auto xs = x.slice(b);
      auto cs = batch.slice(b);
      for (std::size_t i = 0; i < per; ++i) {
        xs[i] = std::clamp(cs[i] + scale * static_cast<float>(r_tot[b][static_cast<Eigen::Index>(i)]), 0.0f, 1.0f);
      }
    }
  }
  auto out = finish(model, batch, std::move(x), labels, AttackMethod::kDeepfool, 0.0, 0, std::move(iters));
  for (std::size_t b = 0; b < n; ++b) {
    if (errored[b]) {
      out.errored[b] = true;
      out.success[b] = false;
      std::copy(batch.slice(b).begin(), batch.slice(b).end(), out.adversarial.slice(b).begin());
    }
  }
  return out;
}

Tensor to_tanh_space(const Tensor& x) {
  Tensor w(x.shape());
  auto xs = x.data();
  auto ws = w.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = std::clamp(xs[i], kCwBoxClamp, 1.0f - kCwBoxClamp);
    ws[i] = static_cast<float>(std::atanh(2.0 * v - 1.0));
  }
  return w;
}

Tensor from_tanh_space(const Tensor& w) {
  Tensor x(w.shape());
  auto ws = w.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < ws.size(); ++i) xs[i] = 0.5f * (std::tanh(ws[i]) + 1.0f);
  return x;
}

AdversarialBatch cw_l2(const Classifier& model, const Tensor& batch, std::span<const int> labels, double c_init,
                       int binary_search_steps, int inner_iters, double lr) {
  check_inputs(model, batch, labels);
  if (!(c_init > 0)) throw ContractError("cw c_init must be > 0");
  if (binary_search_steps < 1 || inner_iters < 1) throw ContractError("cw steps must be >= 1");
  if (!(lr > 0)) throw ContractError("cw lr must be > 0");
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  const std::size_t n = batch.dim(0), per = batch.stride0();

  const Tensor w0 = to_tanh_space(batch);
  std::vector<double> c(n, c_init), lower(n, 0.0), upper(n, std::numeric_limits<double>::infinity());
  std::vector<double> best_dist(n, std::numeric_limits<double>::infinity());
  Tensor best_adv = batch;
  std::vector<std::size_t> queries(n, 0);

  for (int step = 0; step < binary_search_steps; ++step) {
    Tensor w = w0;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w.size()));
    Eigen::VectorXd v = m;
    std::vector<bool> round_success(n, false);
    for (int it = 0; it <= inner_iters; ++it) {
      const Tensor xa = from_tanh_space(w);
      Tensor logits;
      // Cotangent of c * max(z_y - z_other, 0).
      const auto g_margin = model.input_vjp(
          xa,
          [&](const Tensor& z) {
            Tensor seed(z.shape());
            for (std::size_t b = 0; b < n; ++b) {
              auto row = z.slice(b);
              const std::size_t other = runner_up(row, labels[b]);
              if (row[labels[b]] - row[other] > 0.0f) {
                seed.slice(b)[labels[b]] = static_cast<float>(c[b]);
                seed.slice(b)[other] = static_cast<float>(-c[b]);
              }
            }
            return std::vector<Tensor>{std::move(seed)};
          },
          &logits);
      const auto pred = argmax_rows(logits);
      for (std::size_t b = 0; b < n; ++b) {
        ++queries[b];
        if (pred[b] == labels[b]) continue;
        round_success[b] = true;
        double d = 0;
        auto xs = xa.slice(b), cs = batch.slice(b);
        for (std::size_t i = 0; i < per; ++i) d += (double(xs[i]) - cs[i]) * (double(xs[i]) - cs[i]);
        if (d < best_dist[b]) {
          best_dist[b] = d;
          std::copy(xs.begin(), xs.end(), best_adv.slice(b).begin());
        }
      }
      if (it == inner_iters) break;
      const double t = it + 1;
      const double lr_t = lr * std::sqrt(1.0 - std::pow(kBeta2, t)) / (1.0 - std::pow(kBeta1, t));
      auto ws = w.data();
      auto xs = xa.data();
      auto cs = batch.data();
      auto gs = g_margin.front().data();
      for (std::size_t i = 0; i < ws.size(); ++i) {
        const double gx = 2.0 * (double(xs[i]) - cs[i]) + gs[i];
        const double th = std::tanh(double(ws[i]));
        const double gw = gx * 0.5 * (1.0 - th * th);
        const auto e = static_cast<Eigen::Index>(i);
        m[e] = kBeta1 * m[e] + (1.0 - kBeta1) * gw;
        v[e] = kBeta2 * v[e] + (1.0 - kBeta2) * gw * gw;
        ws[i] = static_cast<float>(ws[i] - lr_t * m[e] / (std::sqrt(v[e]) + kAdamEps));
      }
    }
    for (std::size_t b = 0; b < n; ++b) {
      if (round_success[b]) {
        upper[b] = std::min(upper[b], c[b]);
        c[b] = 0.5 * (lower[b] + upper[b]);
      } else {
        lower[b] = std::max(lower[b], c[b]);
        c[b] = std::isfinite(upper[b]) ? 0.5 * (lower[b] + upper[b]) : std::min(2.0 * c[b], kCwMaxC);
      }
    }
  }
  auto out = finish(model, batch, std::move(best_adv), labels, AttackMethod::kCw, 0.0, 0, std::move(queries));
  return out;
}

AdversarialBatch autoattack_standard(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                                     double epsilon, std::uint64_t seed, int apgd_iters, int square_queries) {
  check_inputs(model, batch, labels);
  if (model.num_classes() < 4) throw ContractError("autoattack needs at least 4 classes for its DLR member");
  if (epsilon < 0) throw ContractError("autoattack epsilon must be >= 0");
  if (apgd_iters < 1 || square_queries < 1) throw ContractError("autoattack budgets must be >= 1");
  const std::size_t n = batch.dim(0);
  const float e = static_cast<float>(epsilon);

  Tensor adv = batch;
  std::vector<std::size_t> queries(n, 0);
  std::vector<std::string> stage(n);
  std::vector<bool> errored(n, false);
  std::vector<std::size_t> remaining;
  const auto clean_pred = predict(model, batch);
  for (std::size_t b = 0; b < n; ++b) {
    ++queries[b];
    if (clean_pred[b] != labels[b]) {
      stage[b] = "clean";
    } else {
      remaining.push_back(b);
    }
  }

  const AttackMethod members[] = {AttackMethod::kApgdCe, AttackMethod::kApgdDlr, AttackMethod::kSquare};
  for (std::size_t s = 0; s < 3 && !remaining.empty(); ++s) {
    const std::uint64_t member_seed = derive_seed(seed, s + 1);
    const Tensor sub = batch.gather(remaining);
    std::vector<int> sub_labels;
    std::vector<std::uint64_t> seeds;
    for (std::size_t b : remaining) {
      sub_labels.push_back(labels[b]);
      seeds.push_back(derive_seed(member_seed, b));
    }
    Tensor result;
    std::vector<std::size_t> q;
    std::vector<bool> err(remaining.size(), false);
    if (members[s] == AttackMethod::kSquare) {
      auto r = square_run(model, sub, sub_labels, e, square_queries, 0.8, seeds);
      result = std::move(r.adversarial);
      q = std::move(r.queries);
    } else {
      const auto kind = members[s] == AttackMethod::kApgdCe ? LossKind::kCrossEntropy : LossKind::kDlr;
      auto r = apgd_run(model, sub, sub_labels, e, apgd_iters, kind, seeds);
      result = std::move(r.best);
      q = std::move(r.queries);
      err = std::move(r.errored);
    }
    const auto pred = predict(model, result);
    std::vector<std::size_t> still;
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      const std::size_t b = remaining[j];
      queries[b] += q[j] + 1;
      if (err[j]) errored[b] = true;
      std::copy(result.slice(j).begin(), result.slice(j).end(), adv.slice(b).begin());
      if (pred[j] != labels[b]) {
        stage[b] = std::string(method_name(members[s]));
      } else {
        still.push_back(b);
      }
    }
    remaining = std::move(still);
  }
  auto out = finish(model, batch, std::move(adv), labels, AttackMethod::kAutoAttack, epsilon, seed, std::move(queries));
  out.stage = std::move(stage);
  out.errored = std::move(errored);
  return out;
}

AdversarialBatch run_attack(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                            const AttackConfig& config) {
  config.validate();
  const auto& c = config;
  AdversarialBatch out;
  switch (c.method) {
    case AttackMethod::kFgsm: out = fgsm(model, batch, labels, c.epsilon); break;
    case AttackMethod::kBim: out = bim(model, batch, labels, c.epsilon, c.alpha, c.n_iters); break;
    case AttackMethod::kPgd: out = pgd(model, batch, labels, c.epsilon, c.alpha, c.n_iters, c.seed); break;
    case AttackMethod::kDeepfool: out = deepfool(model, batch, labels, c.deepfool_max_iter, c.deepfool_overshoot); break;
    case AttackMethod::kCw:
      out = cw_l2(model, batch, labels, c.cw_c_init, c.cw_binary_search_steps, c.cw_inner_iters, c.cw_lr);
      break;
    case AttackMethod::kApgdCe:
      out = apgd(model, batch, labels, c.epsilon, c.apgd_iters, LossKind::kCrossEntropy, c.seed);
      break;
    case AttackMethod::kApgdDlr: out = apgd(model, batch, labels, c.epsilon, c.apgd_iters, LossKind::kDlr, c.seed); break;
    case AttackMethod::kSquare:
      out = square_attack(model, batch, labels, c.epsilon, c.square_n_queries, c.square_p_init, c.seed);
      break;
    case AttackMethod::kAutoAttack:
      out = autoattack_standard(model, batch, labels, c.epsilon, c.seed, c.apgd_iters, c.square_n_queries);
      break;
  }
  out.seed = c.seed;
  return out;
}

}  // namespace spectral_asrd
