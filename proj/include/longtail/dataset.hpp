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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longtail/types.hpp"

namespace longtail {

// One interaction record as parsed from a raw log. Ratings and timestamps
// are optional; records without a rating are treated as implicit positives.
struct RawEvent {
  std::string user_id;
  std::string item_id;
  std::optional<Real> rating;
  std::optional<std::int64_t> timestamp;
};

// Sparse binary user-by-item interaction matrix. Rows hold sorted item
// indices per user; immutable after construction and safe to share across
// threads. Item index 0 is the most frequent item (indices are assigned by
// descending interaction count at build time).
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(std::vector<std::vector<int>> rows, int n_items,
                    std::vector<std::string> user_ids,
                    std::vector<std::string> item_ids);

  int n_users() const { return static_cast<int>(rows_.size()); }
  int n_items() const { return n_items_; }
  std::int64_t n_interactions() const { return n_interactions_; }

  const std::vector<int>& row(int user) const { return rows_[user]; }
  const std::vector<std::vector<int>>& rows() const { return rows_; }
  bool has(int user, int item) const;

  const CountVector& item_freq() const { return item_freq_; }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  // User-major sparse view (n_users x n_items, entries 1.0).
  SparseMatrix to_sparse() const;
  // Sparse submatrix of the given user rows, in the given order.
  SparseMatrix sparse_rows(std::span<const int> users) const;
  // Dense 0/1 submatrix of the given user rows.
  Matrix dense_rows(std::span<const int> users) const;

 private:
  std::vector<std::vector<int>> rows_;
  int n_items_ = 0;
  std::int64_t n_interactions_ = 0;
  CountVector item_freq_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
};

// How to carve evaluation users out of a full interaction matrix.
struct SplitSpec {
  int n_val_users = 0;
  int n_test_users = 0;
  Real heldout_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Per-user partition of an evaluation user's row: fold-in items are fed to
// the model, held-out items are the ground truth. Disjoint by construction;
// their union is the user's full row.
struct EvalSplit {
  InteractionMatrix foldin;
  InteractionMatrix heldout;
};

struct DatasetSplits {
  InteractionMatrix train;
  EvalSplit val;
  EvalSplit test;
};

// Parses a comma-separated interaction log with columns
// user,item[,rating[,timestamp]]. A single header line is skipped when its
// fields look like column names. Events with a rating below the threshold
// are dropped; events without a rating are always retained.
std::vector<RawEvent> ingest_csv(const std::string& path,
                                 Real rating_threshold);

// Deduplicates (user,item) pairs, iteratively removes users/items below the
// minimum interaction counts until stable, and reindexes: users by ascending
// id, items by descending frequency (ties by ascending id).
InteractionMatrix build_matrix(const std::vector<RawEvent>& events,
                               int min_user_interactions,
                               int min_item_interactions);

// Deterministically (given spec.seed) selects validation and test users,
// removes them from the training matrix, and splits each evaluation user's
// row into fold-in and held-out parts. Held-out size is
// max(1, floor(heldout_fraction * row length)); users with fewer than two
// interactions are never selected for evaluation.
DatasetSplits split_users(const InteractionMatrix& m, const SplitSpec& spec);

// Versioned binary matrix file plus .users.json / .items.json id-map
// sidecars next to it.
void save_matrix(const InteractionMatrix& m, const std::string& path);
InteractionMatrix load_matrix(const std::string& path);

// Canonical in-memory serialization (same bytes as the matrix file payload);
// used for content hashing and byte-identity checks.
std::string serialize_matrix(const InteractionMatrix& m);

}  // namespace longtail
