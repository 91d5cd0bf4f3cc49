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
#include "longtail/types.hpp"

namespace longtail {

// Indices of the k largest scores, ordered by descending score with ties
// broken by ascending index. Deterministic for reproducible rankings.
std::vector<int> top_k_indices(const Vector& scores, int k);

// Per evaluation user: ordered top-K item indices. Rows may be shorter than
// k_max (post-processing methods can drop items). No fold-in item appears
// when the lists were built with masking.
struct RankedLists {
  int k_max = 0;
  std::vector<std::vector<int>> lists;

  int n_users() const { return static_cast<int>(lists.size()); }
};

// Ranks all items for each evaluation user from fold-in scores, with the
// fold-in items themselves masked to -inf before ranking.
RankedLists rank_eval_users(const Matrix& W, const EvalSplit& split,
                            int k_max);

}  // namespace longtail
