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
#include <random>
#include <vector>

#include "longtail/dataset.hpp"
#include "longtail/types.hpp"

namespace longtail {

// Item-to-item similarity model: scores(history) = history^T * W.
// The diagonal of W is exactly zero after every training operation, which
// removes the trivial self-similarity solution.
struct EaseModel {
  Matrix W;
  Real lambda = 0.0;

  int n_items() const { return static_cast<int>(W.rows()); }
};

enum class LrSchedule { kConstant, kExponential };

struct TrainConfig {
  Real lr = 2.0;
  Real momentum = 0.9;
  int epochs = 50;
  int batch_size = 1024;
  LrSchedule schedule = LrSchedule::kExponential;
  Real lr_decay = 0.95;
  std::uint64_t seed = 0;
};

// Ridge solution of the zero-diagonal-constrained squared reconstruction
// problem, via the inverse of the regularized Gram matrix. Throws
// SingularityError when lambda == 0 and the Gram matrix is not invertible.
EaseModel solve_closed_form(const InteractionMatrix& train, Real lambda);

// history^T * W for a dense 0/1 history vector of length n_items.
Vector score(const EaseModel& model, const Vector& history);
// Scores for a batch of users given as sparse rows (batch x n_items).
Matrix score_rows(const EaseModel& model, const SparseMatrix& rows);

// Objective on a user batch X (sparse, b x n_items):
//   scale * sum_i sum_j item_weights_j * (XW - X)_ij^2 + lambda * |W|_F^2
// With scale = n_train_users / b this is an unbiased estimate of the
// full-dataset objective, so the same lambda means the same problem for the
// closed form and for SGD.
Real ease_loss(const Matrix& W, const SparseMatrix& X,
               const Vector& item_weights, Real lambda, Real scale);
// Loss plus its exact gradient with respect to every entry of W (the
// zero-diagonal constraint is applied by the optimizer, not here).
std::pair<Real, Matrix> ease_loss_and_gradient(const Matrix& W,
                                               const SparseMatrix& X,
                                               const Vector& item_weights,
                                               Real lambda, Real scale);

// Largest eigenvalue of the training Gram matrix D^T D, by power iteration.
// Useful for picking a stable learning rate: lr ~ 0.9 / (max_eig + lambda).
Real gram_max_eigenvalue(const InteractionMatrix& train, int iterations = 80);

// Momentum SGD over shuffled user batches. One trainer instance owns the
// velocity, the learning-rate schedule position and the shuffling RNG, so a
// caller that steps batch-by-batch reproduces run_epoch exactly.
class SgdTrainer {
 public:
  SgdTrainer(const TrainConfig& cfg, int n_items);

  // Shuffled full pass over users, split into batches of cfg.batch_size
  // (final partial batch kept). Advances the shuffle RNG.
  std::vector<std::vector<int>> make_batches(int n_users);

  // One momentum-SGD update on the given user batch; resets diag(W) to zero
  // afterwards. Returns the pre-update batch loss. Throws DivergenceError on
  // a non-finite loss (the update is not applied).
  Real batch_step(EaseModel& model, const InteractionMatrix& train,
                  const std::vector<int>& users, const Vector& item_weights);

  // make_batches + batch_step over all batches + end_epoch. Returns the mean
  // batch loss.
  Real run_epoch(EaseModel& model, const InteractionMatrix& train,
                 const Vector& item_weights);

  // Applies the learning-rate schedule.
  void end_epoch();

  Real lr() const { return lr_; }
  int epoch() const { return epoch_; }

 private:
  TrainConfig cfg_;
  Matrix velocity_;
  Real lr_;
  int epoch_ = 0;
  int batch_index_ = 0;
  std::mt19937_64 rng_;
};

// One self-contained pass over shuffled user batches with the given
// per-item weights (fresh velocity and schedule state). Callers that train
// for multiple epochs should hold an SgdTrainer instead.
Real sgd_epoch(EaseModel& model, const InteractionMatrix& train,
               const Vector& item_weights, const TrainConfig& cfg);

struct EpochLog {
  Real loss = 0.0;
  Real val_recall = 0.0;
};

struct SgdTrainResult {
  EaseModel model;  // best-validation snapshot when val != nullptr
  std::vector<EpochLog> history;
  int best_epoch = -1;  // 0-based; -1 when no validation was used
};

using EpochCallback = std::function<void(int epoch, const EpochLog&)>;

// Trains from W = 0 for cfg.epochs epochs. When val is given, evaluates
// Recall@val_k after each epoch and returns the best snapshot. on_epoch
// fires after every epoch (useful for logs that must survive a later
// divergence abort).
SgdTrainResult train_sgd(const InteractionMatrix& train,
                         const Vector& item_weights, Real lambda,
                         const TrainConfig& cfg,
                         const EvalSplit* val = nullptr, int val_k = 100,
                         const EpochCallback& on_epoch = {});

}  // namespace longtail
