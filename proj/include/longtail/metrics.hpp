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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "longtail/dataset.hpp"
#include "longtail/ranking.hpp"
#include "longtail/types.hpp"

namespace longtail {

// Mean over users of |top-k hits| / min(k, #held-out); users with an empty
// held-out set are excluded from the average.
Real recall_at_k(const RankedLists& ranked, const InteractionMatrix& heldout,
                 int k);

// Binary-relevance NDCG with 1/log2(rank+1) discounts, ideal DCG over
// min(k, #held-out) ones; users with an empty held-out set are excluded.
Real ndcg_at_k(const RankedLists& ranked, const InteractionMatrix& heldout,
               int k);

struct CoverageResult {
  Real mean = 0.0;
  Real stddev = 0.0;  // population standard deviation across chunks
};

// Unique items in the union of top-k lists, per consecutive chunk of
// batch_size users (fixed seeded user order; trailing partial chunk
// dropped). Throws MetricError when there are fewer users than one chunk.
CoverageResult coverage_at_k(const RankedLists& ranked, int k,
                             int batch_size);

// coverage / min(k * batch_size, n_items).
Real coverage_ratio(Real coverage_mean, int k, int batch_size, int n_items);

// Gini coefficient of a non-negative count vector, zero-count entries
// included. Throws MetricError when all counts are zero.
Real gini_coefficient(const Vector& counts);

// Gini of per-item top-k recommendation counts over all evaluation users,
// divided by the Gini of training interaction counts. Values above 1 mean
// the rankings concentrate more than the training data.
Real gini_ratio(const RankedLists& ranked, const CountVector& train_freq,
                int k);

// Item metadata (release year and genres) aligned to item indices.
struct ItemMeta {
  std::vector<int> year;                          // -1 when unknown
  std::vector<std::vector<std::string>> genres;   // empty when unknown
  Real coverage = 0.0;                            // matched fraction of items
};

// CSV columns: item_id, year, pipe-separated genres (header optional).
// Returns nullopt with a warning on stderr when the file is missing.
std::optional<ItemMeta> load_item_metadata(const std::string& path,
                                           const std::vector<std::string>&
                                               item_ids);

struct CategoryRow {
  std::string category;
  int item_count = 0;
  Real item_recall = 0.0;
};

// Item Recall@k restricted to each category (decade buckets from the year
// column plus one category per genre; unmatched items land in "unknown").
// Multi-genre items count in every genre. Rows sorted by ascending recall.
// Requires metadata coverage of at least 90% of items.
std::vector<CategoryRow> per_category_report(const RankedLists& ranked,
                                             const InteractionMatrix& heldout,
                                             const ItemMeta& meta, int k);

// Top-2 principal-component coordinates of the item interaction columns,
// from power iteration with deflation on the centered item-item Gram
// matrix. Signs are fixed by making each component's largest-magnitude
// coordinate positive. Returns an n_items x 2 matrix.
Matrix pca_project(const InteractionMatrix& train);

struct EvalReport {
  std::map<int, Real> recall;
  std::map<int, Real> ndcg;
  std::map<int, Real> item_recall;
  std::map<int, CoverageResult> coverage;
  std::map<int, Real> coverage_ratio;
  std::map<int, CoverageResult> coverage_batch_sweep;  // batch -> cov@gini_k
  Real gini_ratio = 0.0;
  std::vector<CategoryRow> per_category;

  std::string to_json() const;  // deterministic, sorted keys
};

struct EvalOptions {
  std::vector<int> ks = {20, 50, 100};
  int coverage_batch = 100;
  std::vector<int> coverage_batch_sweep;  // extra batch sizes, optional
  int gini_k = 100;
  const ItemMeta* meta = nullptr;
};

// Computes the full metric suite from ranked lists. The lists must be at
// least max(ks, gini_k) deep.
EvalReport evaluate_ranked(const RankedLists& ranked,
                           const InteractionMatrix& heldout,
                           const CountVector& train_freq,
                           const EvalOptions& options);

}  // namespace longtail
