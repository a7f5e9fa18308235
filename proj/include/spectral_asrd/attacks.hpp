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

#ifndef SPECTRAL_ASRD_ATTACKS_HPP
#define SPECTRAL_ASRD_ATTACKS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spectral_asrd/classifier.hpp"

namespace spectral_asrd {

enum class AttackMethod { kFgsm, kBim, kPgd, kDeepfool, kCw, kApgdCe, kApgdDlr, kSquare, kAutoAttack };
enum class Norm { kLinf, kL2 };

std::string_view method_name(AttackMethod method);
AttackMethod parse_attack_method(std::string_view name);
std::string_view norm_name(Norm norm);
Norm parse_norm(std::string_view name);
/// l2 for the minimal-norm attacks (deepfool, cw), linf for the rest.
Norm native_norm(AttackMethod method);

inline constexpr double kDefaultEpsilon = 8.0 / 255.0;

struct AttackConfig {
  AttackMethod method = AttackMethod::kPgd;
  double epsilon = kDefaultEpsilon;
  double alpha = 2.0 / 255.0;
  int n_iters = 10;
  Norm norm = Norm::kLinf;
  std::uint64_t seed = 0;

  // apgd_ce, apgd_dlr and the two apgd members of autoattack
  int apgd_iters = 100;

  double cw_c_init = 1e-3;
  int cw_binary_search_steps = 9;
  int cw_inner_iters = 100;
  double cw_lr = 0.01;

  double deepfool_overshoot = 0.02;
  int deepfool_max_iter = 50;

  int square_n_queries = 5000;
  double square_p_init = 0.8;

  /// Defaults for `method`, with norm set to its native norm.
  static AttackConfig defaults(AttackMethod method);
  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Clean/adversarial pairs with honest success flags.
struct AdversarialBatch {
  Tensor clean;
  Tensor adversarial;
  std::vector<int> labels;
  std::vector<bool> success;  // argmax forward(adversarial[i]) != labels[i]
  std::string method;
  double epsilon = 0.0;
  Norm norm = Norm::kLinf;
  std::uint64_t seed = 0;
  std::vector<std::size_t> queries;  // model evaluations spent per sample
  /// autoattack only: "clean" (misclassified before attack), the member name
  /// that succeeded, or empty when every member failed.
  std::vector<std::string> stage;
  /// Samples where the attack hit a numeric error and gave up.
  std::vector<bool> errored;

  std::size_t size() const { return labels.size(); }
  double success_rate() const;
};

// l-infinity attacks. Every output satisfies max|adv - clean| <= epsilon and
// lies in [0, 1].

/// x + epsilon * sign(grad_x CE(x, y)), clipped to [0, 1].
AdversarialBatch fgsm(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon);

AdversarialBatch bim(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon,
                     double alpha, int n_iters);

/// bim from a uniform random start in the epsilon-ball.
AdversarialBatch pgd(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon,
                     double alpha, int n_iters, std::uint64_t seed);

/// Gradient of a scalar objective at x, for sign_ascent.
using GradientFn = std::function<Tensor(const Tensor& x)>;

/// n_iters steps x <- P(x + alpha * sign(g(x))) where P projects onto the
/// epsilon-ball around `clean` and onto [0, 1]. Starts from `start`.
Tensor sign_ascent(const Tensor& clean, const Tensor& start, double epsilon, double alpha, int n_iters,
                   const GradientFn& gradient);

/// Projection onto the epsilon-ball around `clean` intersected with [0, 1].
void project_linf(Tensor& x, const Tensor& clean, float epsilon);

/// Momentum PGD with step-size halving at checkpoints, returning the
/// best-loss iterate. Step size starts at 2 * epsilon, momentum 0.75,
/// checkpoints at fractions p_0 = 0, p_1 = 0.22,
/// p_{j+1} = p_j + max(p_j - p_{j-1} - 0.03, 0.06); the step halves when
/// fewer than 75% of the steps since the last checkpoint raised the best
/// loss, or when neither the step nor the best loss changed since the
/// previous checkpoint. Halving restarts from the best iterate.
AdversarialBatch apgd(const Classifier& model, const Tensor& batch, std::span<const int> labels, double epsilon,
                      int n_iters, LossKind loss_kind, std::uint64_t seed);

/// Iteration indices where apgd checks progress, for a budget of n_iters.
std::vector<int> apgd_checkpoints(int n_iters);

/// Random search over vertical-stripe initialization and +-epsilon squares.
/// Queries the model through logits() only.
AdversarialBatch square_attack(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                               double epsilon, int n_queries, double p_init, std::uint64_t seed);

/// Square side as a fraction of the pixel count at query `iteration` of
/// `n_queries`: p_init halves at 0.1%, 0.5%, 2%, 5%, 10%, 20%, 40%, 60% and
/// 80% of the budget.
double square_fraction(double p_init, int iteration, int n_queries);

// Minimal-norm attacks, unbounded by epsilon.

AdversarialBatch deepfool(const Classifier& model, const Tensor& batch, std::span<const int> labels, int max_iter,
                          double overshoot);

/// Carlini-Wagner l2 in tanh space: Adam on ||x' - x||^2 + c * max(z_y - max_{i!=y} z_i, 0).
/// c doubles after a failed round and bisects after a successful one, capped at 1e4.
AdversarialBatch cw_l2(const Classifier& model, const Tensor& batch, std::span<const int> labels, double c_init,
                       int binary_search_steps, int inner_iters, double lr);

inline constexpr double kCwMaxC = 1e4;
inline constexpr float kCwBoxClamp = 1e-6f;

/// Map to the tanh parameterization and back: 0.5 * (tanh(w) + 1).
Tensor to_tanh_space(const Tensor& x);
Tensor from_tanh_space(const Tensor& w);

/// apgd_ce, then apgd_dlr, then square, each on the samples every earlier
/// stage failed on. Samples misclassified before the attack are never touched.
AdversarialBatch autoattack_standard(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                                     double epsilon, std::uint64_t seed, int apgd_iters = 100,
                                     int square_queries = 5000);

/// Dispatch on config.method.
AdversarialBatch run_attack(const Classifier& model, const Tensor& batch, std::span<const int> labels,
                            const AttackConfig& config);

/// Writes manifest.json and tensors.spdf ("clean", "adversarial") into `dir`.
void save_adversarial(const AdversarialBatch& batch, const std::filesystem::path& dir);
AdversarialBatch load_adversarial(const std::filesystem::path& dir);

}  // namespace spectral_asrd

#endif  // SPECTRAL_ASRD_ATTACKS_HPP
