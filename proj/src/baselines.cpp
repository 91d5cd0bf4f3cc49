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

#include "longtail/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "longtail/metrics.hpp"
#include "longtail/ranking.hpp"

namespace longtail {

Vector ipw_weights(const CountVector& item_freq, int n_users, Real beta) {
  const int n = static_cast<int>(item_freq.size());
  if (n == 0) throw ShapeError("empty frequency vector");
  if (n_users <= 0) throw DomainError("n_users must be positive");
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    if (item_freq[j] <= 0 && beta < 0) {
      throw DomainError("item " + std::to_string(j) +
                        " has zero frequency; negative exponent undefined");
    }
    const Real p = static_cast<Real>(item_freq[j]) / n_users;
    w[j] = std::pow(p, beta);
  }
  const Real total = w.sum();
  if (total <= 0) throw DomainError("IPW weights sum to zero");
  return (static_cast<Real>(n) / total) * w;
}

Real cvar_objective(const Vector& per_item_losses, Real alpha, Real beta1) {
  if (alpha <= 0 || alpha > 1) throw DomainError("alpha must be in (0,1]");
  Real total = 0.0;
  for (Eigen::Index j = 0; j < per_item_losses.size(); ++j) {
    total += beta1 +
             std::max<Real>(0.0, per_item_losses[j] - beta1) / alpha;
  }
  return total;
}

CvarTrainResult train_cvar(const InteractionMatrix& train, Real lambda,
                           const TrainConfig& cfg, const CvarConfig& cvar,
                           const EvalSplit* val, int val_k,
                           const EpochCallback& on_epoch) {
  if (cvar.alpha <= 0 || cvar.alpha > 1) {
    throw DomainError("alpha must be in (0,1]");
  }
  const int n = train.n_items();
  CvarTrainResult result;
  EaseModel model{Matrix::Zero(n, n), lambda};
  Real beta1 = cvar.beta1_init;

  SgdTrainer trainer(cfg, n);
  // beta1 gets its own scalar momentum buffer; same lr and schedule as W.
  Real beta1_velocity = 0.0;
  Real best = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = trainer.make_batches(train.n_users());
    Real loss_total = 0.0;
    for (const auto& users : batches) {
      const SparseMatrix x = train.sparse_rows(users);
      const Real scale = static_cast<Real>(train.n_users()) /
                         static_cast<Real>(users.size());
      // Per-item losses at the current W (weights 1, no ridge term).
      Matrix e = x * model.W;
      for (int k = 0; k < x.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(x, k); it; ++it) {
          e(it.row(), it.col()) -= it.value();
        }
      }
      const Vector per_item =
          scale * e.array().square().colwise().sum().transpose();
      loss_total += cvar_objective(per_item, cvar.alpha, beta1) +
                    lambda * model.W.squaredNorm();

      // Active items (loss strictly above the threshold) carry weight
      // 1/alpha in the W gradient; beta1's subgradient is
      // n - #active / alpha.
      Vector weights = Vector::Zero(n);
      int n_active = 0;
      for (int j = 0; j < n; ++j) {
        if (per_item[j] > beta1) {
          weights[j] = 1.0 / cvar.alpha;
          ++n_active;
        }
      }
      trainer.batch_step(model, train, users, weights);
      const Real beta1_grad =
          static_cast<Real>(n) - static_cast<Real>(n_active) / cvar.alpha;
      beta1_velocity = cfg.momentum * beta1_velocity + beta1_grad;
      beta1 -= trainer.lr() * beta1_velocity;
    }
    trainer.end_epoch();

    EpochLog log;
    log.loss = loss_total / static_cast<Real>(batches.size());
    if (val != nullptr) {
      const int k = std::min(val_k, n);
      const RankedLists ranked = rank_eval_users(model.W, *val, k);
      log.val_recall = recall_at_k(ranked, val->heldout, k);
      if (log.val_recall > best) {
        best = log.val_recall;
        result.model = model;
        result.beta1 = beta1;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(epoch, log);
  }
  if (val == nullptr) {
    result.model = std::move(model);
    result.beta1 = beta1;
  }
  return result;
}

std::vector<int> rerank(const Vector& scores, const CountVector& item_freq,
                        const RerankConfig& cfg, int k) {
  if (cfg.t_high < cfg.t_low) throw DomainError("t_high must be >= t_low");
  if (scores.size() != item_freq.size()) {
    throw ShapeError("scores and frequencies differ in length");
  }
  const int n = static_cast<int>(scores.size());
  std::vector<int> top, mid;
  for (int j = 0; j < n; ++j) {
    if (scores[j] >= cfg.t_high) {
      top.push_back(j);
    } else if (scores[j] >= cfg.t_low) {
      mid.push_back(j);
    }
  }
  std::sort(top.begin(), top.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::sort(mid.begin(), mid.end(), [&](int a, int b) {
    if (item_freq[a] != item_freq[b]) return item_freq[a] < item_freq[b];
    return a < b;
  });
  std::vector<int> out;
  out.reserve(std::min<std::size_t>(k, top.size() + mid.size()));
  for (int j : top) {
    if (static_cast<int>(out.size()) == k) return out;
    out.push_back(j);
  }
  for (int j : mid) {
    if (static_cast<int>(out.size()) == k) return out;
    out.push_back(j);
  }
  return out;
}

std::vector<int> most_popular(const CountVector& item_freq) {
  std::vector<int> order(item_freq.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (item_freq[a] != item_freq[b]) return item_freq[a] > item_freq[b];
    return a < b;
  });
  return order;
}

}  // namespace longtail
