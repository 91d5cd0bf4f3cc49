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

#include <span>
#include <vector>

#include "longtail/dataset.hpp"
#include "longtail/ease.hpp"
#include "longtail/ranking.hpp"
#include "longtail/types.hpp"

namespace longtail {

enum class AdvantageVariant {
  // S_j = (1/|batch|) sum_i R_ij: high for items that land in many top-k
  // lists, so popularity contributes to the score.
  kWithPopularity,
  // S_j = sum_i R_ij / sum_i D_ij over the batch (0 when the item has no
  // positives in the batch): per-item hit rate, popularity removed.
  kWithoutPopularity,
};

// Exponential moving average of per-item advantage scores.
struct AdvantageState {
  Vector ema;  // initialized to zero
  Real momentum = 0.9;
  int k = 100;
  AdvantageVariant variant = AdvantageVariant::kWithPopularity;
};

AdvantageState make_advantage_state(int n_items, Real momentum, int k,
                                    AdvantageVariant variant);

// R_ij = 1 iff D_ij = 1 and item j ranks within the user's top k by model
// score. Training-time ranks run over ALL items (the user's own positives
// included); ties break by ascending item index.
BinaryMatrix hit_matrix(const EaseModel& model, const InteractionMatrix& data,
                        std::span<const int> users, int k);
BinaryMatrix hit_matrix(const EaseModel& model, const InteractionMatrix& data,
                        int k);

// Per-item advantage scores from a hit matrix; always in [0,1].
Vector advantage_scores(const BinaryMatrix& hits,
                        const InteractionMatrix& data,
                        std::span<const int> users, AdvantageVariant variant);
Vector advantage_scores(const BinaryMatrix& hits,
                        const InteractionMatrix& data,
                        AdvantageVariant variant);

// ema <- (1 - momentum) * ema + momentum * scores, elementwise.
void ema_update(AdvantageState& state, const Vector& scores);

// Hits and positives per item from evaluation ranked lists:
// hits_j = #users with j held out and ranked within top k,
// positives_j = #users with j held out.
std::pair<Vector, Vector> per_item_hit_stats(const RankedLists& ranked,
                                             const InteractionMatrix& heldout,
                                             int k);

// Mean over ALL items of the per-item held-out hit rate; items without
// held-out positives contribute zero. Evaluation ranks mask fold-in items.
Real item_recall_at_k(const RankedLists& ranked,
                      const InteractionMatrix& heldout, int k);
Real item_recall_at_k(const EaseModel& model, const EvalSplit& split, int k);

}  // namespace longtail
