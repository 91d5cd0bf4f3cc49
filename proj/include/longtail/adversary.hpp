// Copyright 2026 The Longtail Authors.
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

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "longtail/advantage.hpp"
#include "longtail/dataset.hpp"
#include "longtail/ease.hpp"
#include "longtail/types.hpp"

namespace longtail {

// Shift-and-scale normalization: tau * (x - mean) / stddev with the
// population standard deviation. A near-constant input (stddev < 1e-12)
// maps to all zeros.
Vector normalize(const Vector& x, Real tau);

enum class AdvOp { kFc1, kFc2, kNorm, kTanh, kSigmoid };

// Parses an architecture string such as "fc1,norm,tanh,fc2,norm,sigmoid".
// fc1 must come first and fc2 must appear exactly once after it.
std::vector<AdvOp> parse_arch(const std::string& arch);

// Two-layer network mapping each item's interaction column (one 0/1 entry
// per training user) to a bounded positive weight. Normalization statistics
// are computed across the full item set on every forward pass. The first
// layer starts at zero so that the initial output is exactly 0.5 per item.
class AdversaryNet {
 public:
  struct Params {
    Matrix w1;   // n_users x hidden
    Vector b1;   // hidden
    Vector w2;   // hidden
    Real b2 = 0.0;
  };

  AdversaryNet(int n_inputs, int hidden, Real tau, const std::string& arch,
               std::uint64_t seed);

  // Raw per-item weights for all items; features is the user-major training
  // matrix (n_users x n_items).
  Vector forward(const SparseMatrix& features) const;

  // Value and parameter gradient of sum_j alpha_j * (-ema_j) where alpha is
  // the normalized weight vector; the gradient flows through both
  // normalization layers and the weight normalization.
  std::pair<Real, Params> objective_and_gradient(const SparseMatrix& features,
                                                 const Vector& ema) const;

  const Params& params() const { return params_; }
  void set_params(Params p);
  int hidden() const { return hidden_; }
  int n_inputs() const { return n_inputs_; }
  Real tau() const { return tau_; }
  const std::string& arch() const { return arch_string_; }

  // Re-initializes every parameter uniformly in [-scale, scale]; used by
  // gradient checks and ablations that need a non-degenerate starting point.
  void randomize(std::uint64_t seed, Real scale);

 private:
  friend class AdversaryOptimizer;
  int n_inputs_ = 0;
  int hidden_ = 0;
  Real tau_ = 1.0;
  std::string arch_string_;
  std::vector<AdvOp> ops_;
  Params params_;
};

// alpha_j = n * raw_j / sum(raw); preserves order and sums to n exactly.
Vector normalized_weights(const Vector& raw);

// Momentum gradient-ascent state for the adversary. Gradients are clipped
// to a global norm before the velocity update: the normalization layers
// make the objective nearly scale-free in the first layer, so one oversized
// step would park the weights at a saturated profile that later (smaller)
// gradients cannot undo.
class AdversaryOptimizer {
 public:
  AdversaryOptimizer(const AdversaryNet& net, Real momentum,
                     Real grad_clip = 1.0);

  // One ascent step on the normalized-weight objective; returns the
  // objective value before the step. Throws DivergenceError on non-finite
  // gradients.
  Real step(AdversaryNet& net, const SparseMatrix& features,
            const Vector& ema, Real adv_lr);

 private:
  Real momentum_;
  Real grad_clip_;
  AdversaryNet::Params velocity_;
};

// Convenience wrapper: single ascent step with zero initial velocity.
Real adversary_step(AdversaryNet& net, const SparseMatrix& features,
                    const Vector& ema, Real adv_lr);

struct PositConfig {
  TrainConfig ease;
  Real lambda = 8e-6;
  Real adv_lr = 1.0;
  Real tau = 1.5;
  int hidden = 10;
  int k = 100;
  Real ema_momentum = 0.9;
  Real adv_grad_clip = 1.0;
  AdvantageVariant variant = AdvantageVariant::kWithPopularity;
  std::string arch = "fc1,norm,tanh,fc2,norm,sigmoid";
};

struct PositBatchInfo {
  int epoch = 0;
  int batch = 0;
  Real learner_loss = 0.0;
  Real adversary_objective = 0.0;
  const Vector& alpha;
  const Vector& ema;
  const EaseModel& model;
};

using PositObserver = std::function<void(const PositBatchInfo&)>;

struct PositEpochLog {
  Real loss = 0.0;
  Real adversary_objective = 0.0;
  Real val_recall = 0.0;
};

struct PositResult {
  EaseModel model;        // best-validation snapshot
  AdversaryNet net;       // snapshot at the best epoch
  Vector ema;             // snapshot at the best epoch
  std::vector<PositEpochLog> history;
  int best_epoch = -1;
};

// Adversarially reweighted training: per batch, estimate per-item advantage
// on the batch, EMA-update it, weight every item by the normalized adversary
// output, take one learner SGD step (diagonal reset to zero), then one
// adversary ascent step. Per epoch, evaluate Recall@100 on validation,
// snapshot the best model, and apply the learning-rate schedule. Aborts
// after three consecutive non-finite learner batches.
using PositEpochCallback =
    std::function<void(int epoch, const PositEpochLog&)>;

PositResult train_posit(const InteractionMatrix& train, const EvalSplit& val,
                        const PositConfig& cfg,
                        const PositObserver& observer = {},
                        const PositEpochCallback& on_epoch = {});

}  // namespace longtail
