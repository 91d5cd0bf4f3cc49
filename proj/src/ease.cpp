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

#include "longtail/ease.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "longtail/metrics.hpp"
#include "longtail/ranking.hpp"

namespace longtail {

namespace {

Matrix gram_matrix(const InteractionMatrix& train) {
  const SparseMatrix d = train.to_sparse();
  const SparseMatrix g = SparseMatrix(d.transpose()) * d;
  return Matrix(g);
}

}  // namespace

EaseModel solve_closed_form(const InteractionMatrix& train, Real lambda) {
  if (lambda < 0) throw DomainError("lambda must be >= 0");
  const int n = train.n_items();
  Matrix gram = gram_matrix(train);
  gram.diagonal().array() += lambda;

  Matrix inv;
  if (lambda > 0) {
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw SingularityError("regularized Gram matrix is not positive "
                             "definite");
    }
    inv = llt.solve(Matrix::Identity(n, n));
  } else {
    Eigen::FullPivLU<Matrix> lu(gram);
    if (!lu.isInvertible()) {
      throw SingularityError("Gram matrix is singular at lambda = 0");
    }
    inv = lu.inverse();
  }

  // W = I - inv * diag(1 / diag(inv)); the constrained-ridge solution.
  const Vector inv_diag = inv.diagonal();
  if ((inv_diag.array().abs() < 1e-300).any()) {
    throw SingularityError("Gram inverse has a vanishing diagonal entry");
  }
  EaseModel model;
  model.lambda = lambda;
  model.W = -inv * inv_diag.cwiseInverse().asDiagonal();
  model.W.diagonal().setZero();
  return model;
}

Vector score(const EaseModel& model, const Vector& history) {
  if (history.size() != model.W.rows()) {
    throw ShapeError("history length " + std::to_string(history.size()) +
                     " != n_items " + std::to_string(model.W.rows()));
  }
  return model.W.transpose() * history;
}

Matrix score_rows(const EaseModel& model, const SparseMatrix& rows) {
  if (rows.cols() != model.W.rows()) {
    throw ShapeError("row width does not match model size");
  }
  return rows * model.W;
}

namespace {

// Residual E = XW - X as a dense matrix.
Matrix residual(const Matrix& W, const SparseMatrix& X) {
  Matrix e = X * W;
  for (int k = 0; k < X.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(X, k); it; ++it) {
      e(it.row(), it.col()) -= it.value();
    }
  }
  return e;
}

}  // namespace

Real ease_loss(const Matrix& W, const SparseMatrix& X,
               const Vector& item_weights, Real lambda, Real scale) {
  const Matrix e = residual(W, X);
  const Vector per_item = e.array().square().colwise().sum().transpose();
  return scale * per_item.dot(item_weights) + lambda * W.squaredNorm();
}

std::pair<Real, Matrix> ease_loss_and_gradient(const Matrix& W,
                                               const SparseMatrix& X,
                                               const Vector& item_weights,
                                               Real lambda, Real scale) {
  if (item_weights.size() != W.cols()) {
    throw ShapeError("item_weights length does not match model size");
  }
  const Matrix e = residual(W, X);
  const Vector per_item = e.array().square().colwise().sum().transpose();
  const Real loss = scale * per_item.dot(item_weights) +
                    lambda * W.squaredNorm();
  const Matrix weighted = e * item_weights.asDiagonal();
  Matrix grad = 2.0 * scale * (SparseMatrix(X.transpose()) * weighted);
  grad += 2.0 * lambda * W;
  return {loss, std::move(grad)};
}

Real gram_max_eigenvalue(const InteractionMatrix& train, int iterations) {
  const SparseMatrix d = train.to_sparse();
  const int n = train.n_items();
  Vector v = Vector::Ones(n);
  for (int i = 0; i < n; ++i) v[i] += 1e-3 * (i + 1) / n;
  v.normalize();
  Real eig = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = SparseMatrix(d.transpose()) * (d * v);
    const Real norm = w.norm();
    if (norm < 1e-300) return 0.0;
    eig = v.dot(w);
    v = w / norm;
  }
  return eig;
}

SgdTrainer::SgdTrainer(const TrainConfig& cfg, int n_items)
    : cfg_(cfg),
      velocity_(Matrix::Zero(n_items, n_items)),
      lr_(cfg.lr),
      rng_(cfg.seed) {
  if (cfg.lr <= 0) throw ConfigError("lr must be > 0");
  if (cfg.momentum < 0 || cfg.momentum >= 1) {
    throw ConfigError("momentum must be in [0,1)");
  }
  if (cfg.batch_size <= 0) throw ConfigError("batch_size must be > 0");
}

std::vector<std::vector<int>> SgdTrainer::make_batches(int n_users) {
  std::vector<int> perm(n_users);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng_);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n_users; start += cfg_.batch_size) {
    const int end = std::min(n_users, start + cfg_.batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

Real SgdTrainer::batch_step(EaseModel& model, const InteractionMatrix& train,
                            const std::vector<int>& users,
                            const Vector& item_weights) {
  if ((item_weights.array() < 0).any()) {
    throw DomainError("item weights must be non-negative");
  }
  const SparseMatrix x = train.sparse_rows(users);
  const Real scale =
      static_cast<Real>(train.n_users()) / static_cast<Real>(users.size());
  auto [loss, grad] =
      ease_loss_and_gradient(model.W, x, item_weights, model.lambda, scale);
  ++batch_index_;
  if (!std::isfinite(loss)) {
    throw DivergenceError("non-finite loss at batch " +
                          std::to_string(batch_index_));
  }
  velocity_ = cfg_.momentum * velocity_ + grad;
  model.W.noalias() -= lr_ * velocity_;
  model.W.diagonal().setZero();
  return loss;
}

Real SgdTrainer::run_epoch(EaseModel& model, const InteractionMatrix& train,
                           const Vector& item_weights) {
  const auto batches = make_batches(train.n_users());
  Real total = 0.0;
  for (const auto& batch : batches) {
    total += batch_step(model, train, batch, item_weights);
  }
  end_epoch();
  return total / static_cast<Real>(batches.size());
}

void SgdTrainer::end_epoch() {
  ++epoch_;
  if (cfg_.schedule == LrSchedule::kExponential) lr_ *= cfg_.lr_decay;
}

Real sgd_epoch(EaseModel& model, const InteractionMatrix& train,
               const Vector& item_weights, const TrainConfig& cfg) {
  SgdTrainer trainer(cfg, train.n_items());
  return trainer.run_epoch(model, train, item_weights);
}

SgdTrainResult train_sgd(const InteractionMatrix& train,
                         const Vector& item_weights, Real lambda,
                         const TrainConfig& cfg, const EvalSplit* val,
                         int val_k, const EpochCallback& on_epoch) {
  SgdTrainResult result;
  EaseModel model{Matrix::Zero(train.n_items(), train.n_items()), lambda};
  SgdTrainer trainer(cfg, train.n_items());
  Real best = -1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.loss = trainer.run_epoch(model, train, item_weights);
    if (val != nullptr) {
      const int k = std::min(val_k, train.n_items());
      const RankedLists ranked = rank_eval_users(model.W, *val, k);
      log.val_recall = recall_at_k(ranked, val->heldout, k);
      if (log.val_recall > best) {
        best = log.val_recall;
        result.model = model;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(epoch, log);
  }
  if (val == nullptr) result.model = std::move(model);
  return result;
}

}  // namespace longtail
