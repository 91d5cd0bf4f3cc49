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

#include "longtail/ranking.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace longtail {

std::vector<int> top_k_indices(const Vector& scores, int k) {
  const int n = static_cast<int>(scores.size());
  k = std::min(k, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + k, idx.end(), better);
  idx.resize(k);
  std::sort(idx.begin(), idx.end(), better);
  return idx;
}

RankedLists rank_eval_users(const Matrix& W, const EvalSplit& split,
                            int k_max) {
  const InteractionMatrix& foldin = split.foldin;
  if (foldin.n_items() != W.rows()) {
    throw ShapeError("eval split does not match model size");
  }
  RankedLists out;
  out.k_max = k_max;
  out.lists.reserve(foldin.n_users());

  constexpr int kChunk = 512;
  const Real neg_inf = -std::numeric_limits<Real>::infinity();
  std::vector<int> chunk_users;
  for (int start = 0; start < foldin.n_users(); start += kChunk) {
    const int end = std::min(foldin.n_users(), start + kChunk);
    chunk_users.resize(end - start);
    std::iota(chunk_users.begin(), chunk_users.end(), start);
    const Matrix scores = foldin.sparse_rows(chunk_users) * W;
    for (int i = 0; i < static_cast<int>(chunk_users.size()); ++i) {
      Vector s = scores.row(i);
      for (int j : foldin.row(chunk_users[i])) s[j] = neg_inf;
      out.lists.push_back(top_k_indices(s, k_max));
    }
  }
  return out;
}

}  // namespace longtail
