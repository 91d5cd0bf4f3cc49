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

#include "longtail/advantage.hpp"

#include <algorithm>
#include <numeric>

namespace longtail {

AdvantageState make_advantage_state(int n_items, Real momentum, int k,
                                    AdvantageVariant variant) {
  if (momentum <= 0 || momentum > 1) {
    throw DomainError("EMA momentum must be in (0,1]");
  }
  if (k < 1) throw DomainError("k must be >= 1");
  return AdvantageState{Vector::Zero(n_items), momentum, k, variant};
}

BinaryMatrix hit_matrix(const EaseModel& model, const InteractionMatrix& data,
                        std::span<const int> users, int k) {
  if (k < 1) throw DomainError("k must be >= 1");
  if (data.n_items() != model.n_items()) {
    throw ShapeError("data does not match model size");
  }
  const int b = static_cast<int>(users.size());
  BinaryMatrix hits = BinaryMatrix::Zero(b, data.n_items());
  const Matrix scores = score_rows(model, data.sparse_rows(users));
  for (int i = 0; i < b; ++i) {
    const Vector s = scores.row(i);
    for (int j : top_k_indices(s, k)) {
      if (data.has(users[i], j)) hits(i, j) = 1;
    }
  }
  return hits;
}

BinaryMatrix hit_matrix(const EaseModel& model, const InteractionMatrix& data,
                        int k) {
  std::vector<int> all(data.n_users());
  std::iota(all.begin(), all.end(), 0);
  return hit_matrix(model, data, all, k);
}

Vector advantage_scores(const BinaryMatrix& hits,
                        const InteractionMatrix& data,
                        std::span<const int> users,
                        AdvantageVariant variant) {
  if (hits.rows() != static_cast<int>(users.size()) ||
      hits.cols() != data.n_items()) {
    throw ShapeError("hit matrix shape does not match batch");
  }
  const int n = data.n_items();
  Vector hit_count = hits.cast<Real>().colwise().sum().transpose();
  if (variant == AdvantageVariant::kWithPopularity) {
    return hit_count / static_cast<Real>(users.size());
  }
  Vector pos_count = Vector::Zero(n);
  for (int u : users) {
    for (int j : data.row(u)) pos_count[j] += 1.0;
  }
  Vector s = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (pos_count[j] > 0) s[j] = hit_count[j] / pos_count[j];
  }
  return s;
}

Vector advantage_scores(const BinaryMatrix& hits,
                        const InteractionMatrix& data,
                        AdvantageVariant variant) {
  std::vector<int> all(data.n_users());
  std::iota(all.begin(), all.end(), 0);
  return advantage_scores(hits, data, all, variant);
}

void ema_update(AdvantageState& state, const Vector& scores) {
  if (scores.size() != state.ema.size()) {
    throw ShapeError("score vector does not match EMA size");
  }
  if (scores.minCoeff() < 0.0 || scores.maxCoeff() > 1.0) {
    throw DomainError("advantage scores must lie in [0,1]");
  }
  state.ema = (1.0 - state.momentum) * state.ema + state.momentum * scores;
}

std::pair<Vector, Vector> per_item_hit_stats(const RankedLists& ranked,
                                             const InteractionMatrix& heldout,
                                             int k) {
  if (ranked.n_users() != heldout.n_users()) {
    throw ShapeError("ranked lists do not match held-out matrix");
  }
  if (k > ranked.k_max) throw DomainError("k exceeds ranked list depth");
  const int n = heldout.n_items();
  Vector hits = Vector::Zero(n);
  Vector positives = Vector::Zero(n);
  for (int u = 0; u < heldout.n_users(); ++u) {
    for (int j : heldout.row(u)) positives[j] += 1.0;
    const auto& list = ranked.lists[u];
    const int depth = std::min<int>(k, static_cast<int>(list.size()));
    for (int r = 0; r < depth; ++r) {
      if (heldout.has(u, list[r])) hits[list[r]] += 1.0;
    }
  }
  return {std::move(hits), std::move(positives)};
}

Real item_recall_at_k(const RankedLists& ranked,
                      const InteractionMatrix& heldout, int k) {
  if (heldout.n_interactions() == 0) {
    throw MetricError("held-out matrix is empty");
  }
  auto [hits, positives] = per_item_hit_stats(ranked, heldout, k);
  Real total = 0.0;
  for (int j = 0; j < heldout.n_items(); ++j) {
    if (positives[j] > 0) total += hits[j] / positives[j];
  }
  return total / static_cast<Real>(heldout.n_items());
}

Real item_recall_at_k(const EaseModel& model, const EvalSplit& split, int k) {
  const RankedLists ranked = rank_eval_users(model.W, split, k);
  return item_recall_at_k(ranked, split.heldout, k);
}

}  // namespace longtail
