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

#include <vector>

#include "longtail/dataset.hpp"
#include "longtail/ease.hpp"
#include "longtail/types.hpp"

namespace longtail {

struct IpwConfig {
  Real beta = 0.0;  // power applied to interaction probabilities
};

struct CvarConfig {
  Real alpha = 1.0;       // fraction of worst-performing items optimized
  Real beta1_init = 0.0;  // initial loss threshold
};

struct RerankConfig {
  Real t_high = 0.0;
  Real t_low = 0.0;
};

// w_j = (freq_j / n_users)^beta, normalized so the weights sum to n_items.
// Throws DomainError when an item frequency is zero and beta < 0.
Vector ipw_weights(const CountVector& item_freq, int n_users, Real beta);

// Objective sum_j { beta1 + (1/alpha) * max(0, loss_j - beta1) } for a
// frozen per-item loss vector; the quantity train_cvar descends on.
Real cvar_objective(const Vector& per_item_losses, Real alpha, Real beta1);

struct CvarTrainResult {
  EaseModel model;  // best-validation snapshot when val != nullptr
  Real beta1 = 0.0;
  std::vector<EpochLog> history;
  int best_epoch = -1;
};

// Joint subgradient SGD on (W, beta1): per batch, per-item losses are the
// squared reconstruction errors summed over batch users and rescaled by
// n_users/batch so beta1's scale does not depend on the batch size. Items
// with loss above beta1 get gradient weight 1/alpha, the rest zero (the
// subgradient of max(0,x) at 0 is taken as 0); diag(W) resets each step.
CvarTrainResult train_cvar(const InteractionMatrix& train, Real lambda,
                           const TrainConfig& cfg, const CvarConfig& cvar,
                           const EvalSplit* val = nullptr, int val_k = 100,
                           const EpochCallback& on_epoch = {});

// Score-threshold re-sorting: items with score >= t_high keep score order;
// items in [t_low, t_high) are re-sorted by ascending frequency (ties by
// ascending index) and appended; items below t_low are dropped. Returns at
// most k items (possibly fewer).
std::vector<int> rerank(const Vector& scores, const CountVector& item_freq,
                        const RerankConfig& cfg, int k);

// All items by descending frequency, ties by ascending index; the same list
// serves every user.
std::vector<int> most_popular(const CountVector& item_freq);

}  // namespace longtail
