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

#include "longtail/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "longtail/advantage.hpp"

namespace longtail {

namespace {

int clamped_depth(const std::vector<int>& list, int k) {
  return std::min<int>(k, static_cast<int>(list.size()));
}

}  // namespace

Real recall_at_k(const RankedLists& ranked, const InteractionMatrix& heldout,
                 int k) {
  if (ranked.n_users() != heldout.n_users()) {
    throw ShapeError("ranked lists do not match held-out matrix");
  }
  if (k > ranked.k_max) throw DomainError("k exceeds ranked list depth");
  Real total = 0.0;
  int counted = 0;
  for (int u = 0; u < heldout.n_users(); ++u) {
    const int n_held = static_cast<int>(heldout.row(u).size());
    if (n_held == 0) continue;
    const auto& list = ranked.lists[u];
    int hits = 0;
    for (int r = 0; r < clamped_depth(list, k); ++r) {
      if (heldout.has(u, list[r])) ++hits;
    }
    total += static_cast<Real>(hits) / std::min(k, n_held);
    ++counted;
  }
  if (counted == 0) throw MetricError("no users with held-out items");
  return total / counted;
}

Real ndcg_at_k(const RankedLists& ranked, const InteractionMatrix& heldout,
               int k) {
  if (ranked.n_users() != heldout.n_users()) {
    throw ShapeError("ranked lists do not match held-out matrix");
  }
  if (k > ranked.k_max) throw DomainError("k exceeds ranked list depth");
  Real total = 0.0;
  int counted = 0;
  for (int u = 0; u < heldout.n_users(); ++u) {
    const int n_held = static_cast<int>(heldout.row(u).size());
    if (n_held == 0) continue;
    const auto& list = ranked.lists[u];
    Real dcg = 0.0;
    for (int r = 0; r < clamped_depth(list, k); ++r) {
      if (heldout.has(u, list[r])) dcg += 1.0 / std::log2(r + 2.0);
    }
    Real idcg = 0.0;
    for (int r = 0; r < std::min(k, n_held); ++r) {
      idcg += 1.0 / std::log2(r + 2.0);
    }
    total += dcg / idcg;
    ++counted;
  }
  if (counted == 0) throw MetricError("no users with held-out items");
  return total / counted;
}

CoverageResult coverage_at_k(const RankedLists& ranked, int k,
                             int batch_size) {
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (k > ranked.k_max) throw DomainError("k exceeds ranked list depth");
  const int n_chunks = ranked.n_users() / batch_size;
  if (n_chunks == 0) {
    throw MetricError("need at least " + std::to_string(batch_size) +
                      " users for one coverage chunk, have " +
                      std::to_string(ranked.n_users()));
  }
  std::vector<Real> counts;
  counts.reserve(n_chunks);
  for (int c = 0; c < n_chunks; ++c) {
    std::set<int> unique;
    for (int u = c * batch_size; u < (c + 1) * batch_size; ++u) {
      const auto& list = ranked.lists[u];
      for (int r = 0; r < clamped_depth(list, k); ++r) unique.insert(list[r]);
    }
    counts.push_back(static_cast<Real>(unique.size()));
  }
  CoverageResult result;
  result.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n_chunks;
  Real var = 0.0;
  for (Real c : counts) var += (c - result.mean) * (c - result.mean);
  result.stddev = std::sqrt(var / n_chunks);
  return result;
}

Real coverage_ratio(Real coverage_mean, int k, int batch_size, int n_items) {
  if (k < 1 || batch_size < 1 || n_items < 1) {
    throw DomainError("coverage_ratio inputs must be positive");
  }
  const Real bound = std::min<Real>(static_cast<Real>(k) * batch_size,
                                    static_cast<Real>(n_items));
  return coverage_mean / bound;
}

Real gini_coefficient(const Vector& counts) {
  const int n = static_cast<int>(counts.size());
  if (n == 0) throw MetricError("empty count vector");
  const Real total = counts.sum();
  if (total <= 0.0) throw MetricError("all counts are zero");
  std::vector<Real> sorted(counts.data(), counts.data() + n);
  std::sort(sorted.begin(), sorted.end());
  // Gini = 2*sum_i i*x_(i) / (n*sum x) - (n+1)/n with 1-based ranks over the
  // ascending sort; equivalent to the mean-absolute-difference form.
  Real weighted = 0.0;
  for (int i = 0; i < n; ++i) weighted += (i + 1) * sorted[i];
  return 2.0 * weighted / (n * total) - (n + 1.0) / n;
}

Real gini_ratio(const RankedLists& ranked, const CountVector& train_freq,
                int k) {
  const int n = static_cast<int>(train_freq.size());
  Vector rec_counts = Vector::Zero(n);
  for (const auto& list : ranked.lists) {
    for (int r = 0; r < clamped_depth(list, k); ++r) {
      rec_counts[list[r]] += 1.0;
    }
  }
  return gini_coefficient(rec_counts) /
         gini_coefficient(train_freq.cast<Real>());
}

std::optional<ItemMeta> load_item_metadata(
    const std::string& path, const std::vector<std::string>& item_ids) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "warning: item metadata file '" << path
              << "' not found; per-category report skipped\n";
    return std::nullopt;
  }
  std::unordered_map<std::string, int> index;
  for (int j = 0; j < static_cast<int>(item_ids.size()); ++j) {
    index.emplace(item_ids[j], j);
  }
  ItemMeta meta;
  meta.year.assign(item_ids.size(), -1);
  meta.genres.assign(item_ids.size(), {});
  int matched = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // item_id,year,genre|genre|...
    const auto c1 = line.find(',');
    if (c1 == std::string::npos) {
      throw ParseError("metadata line " + std::to_string(line_no) +
                       ": expected item_id,year,genres");
    }
    const auto c2 = line.find(',', c1 + 1);
    const std::string id = line.substr(0, c1);
    const std::string year_s =
        line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos
                                                    : c2 - c1 - 1);
    if (line_no == 1 && id == "item_id") continue;  // header
    auto it = index.find(id);
    if (it == index.end()) continue;
    const int j = it->second;
    try {
      if (!year_s.empty()) meta.year[j] = std::stoi(year_s);
    } catch (const std::exception&) {
      throw ParseError("metadata line " + std::to_string(line_no) +
                       ": bad year '" + year_s + "'");
    }
    if (c2 != std::string::npos) {
      std::string g;
      for (char c : line.substr(c2 + 1)) {
        if (c == '|') {
          if (!g.empty()) meta.genres[j].push_back(g);
          g.clear();
        } else {
          g += c;
        }
      }
      if (!g.empty()) meta.genres[j].push_back(g);
    }
    ++matched;
  }
  meta.coverage = item_ids.empty()
                      ? 0.0
                      : static_cast<Real>(matched) / item_ids.size();
  return meta;
}

std::vector<CategoryRow> per_category_report(const RankedLists& ranked,
                                             const InteractionMatrix& heldout,
                                             const ItemMeta& meta, int k) {
  if (meta.coverage < 0.9) {
    throw MetricError("item metadata covers less than 90% of items");
  }
  auto [hits, positives] = per_item_hit_stats(ranked, heldout, k);
  const int n = heldout.n_items();
  Vector value = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (positives[j] > 0) value[j] = hits[j] / positives[j];
  }

  std::map<std::string, std::vector<int>> groups;
  for (int j = 0; j < n; ++j) {
    const bool known = meta.year[j] >= 0 || !meta.genres[j].empty();
    if (!known) {
      groups["unknown"].push_back(j);
      continue;
    }
    if (meta.year[j] >= 0) {
      const int decade = meta.year[j] / 10 * 10;
      groups["year:" + std::to_string(decade) + "s"].push_back(j);
    }
    for (const auto& g : meta.genres[j]) groups["genre:" + g].push_back(j);
  }

  std::vector<CategoryRow> rows;
  for (const auto& [name, items] : groups) {
    CategoryRow row;
    row.category = name;
    row.item_count = static_cast<int>(items.size());
    Real total = 0.0;
    for (int j : items) total += value[j];
    row.item_recall = items.empty() ? 0.0 : total / items.size();
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.item_recall != b.item_recall) return a.item_recall < b.item_recall;
    return a.category < b.category;
  });
  return rows;
}

namespace {

// Largest eigenpair of a dense symmetric matrix by power iteration with a
// fixed deterministic start vector.
std::pair<Real, Vector> power_iteration(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  Vector v = Vector::Ones(n);
  for (int i = 0; i < n; ++i) v[i] += 1e-3 * (i + 1) / n;
  v.normalize();
  Real eig = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector w = m * v;
    const Real norm = w.norm();
    if (norm < 1e-300) return {0.0, Vector::Zero(n)};
    w /= norm;
    const Real delta = std::min((w - v).norm(), (w + v).norm());
    v = w;
    eig = v.dot(m * v);
    if (delta < 1e-13) break;
  }
  return {eig, v};
}

void fix_sign(Vector& coords) {
  int arg = 0;
  for (int i = 1; i < coords.size(); ++i) {
    if (std::abs(coords[i]) > std::abs(coords[arg])) arg = i;
  }
  if (coords[arg] < 0) coords = -coords;
}

}  // namespace

Matrix pca_project(const InteractionMatrix& train) {
  const int n = train.n_items();
  if (n < 2) throw DomainError("need at least 2 items for a 2-D projection");

  // Centered item-item Gram: K = C - c 1^T - 1 c^T + s 1 1^T where C is the
  // co-occurrence matrix, c_j = sum_u D_uj * colmean_u and s = |colmean|^2.
  const SparseMatrix d = train.to_sparse();
  Matrix gram = Matrix(SparseMatrix(d.transpose()) * d);
  Vector user_mean = Vector::Zero(train.n_users());
  for (int u = 0; u < train.n_users(); ++u) {
    user_mean[u] = static_cast<Real>(train.row(u).size()) / n;
  }
  const Vector c = SparseMatrix(d.transpose()) * user_mean;
  const Real s = user_mean.squaredNorm();
  gram.noalias() -= c * Matrix::Ones(1, n);
  gram.noalias() -= Matrix::Ones(n, 1) * c.transpose();
  gram.array() += s;

  auto [eig1, v1] = power_iteration(gram);
  Matrix coords = Matrix::Zero(n, 2);
  if (eig1 <= 1e-12) {
    std::cerr << "warning: degenerate item features; PCA projection is "
                 "all-zero\n";
    return coords;
  }
  Vector pc1 = v1 * std::sqrt(eig1);
  fix_sign(pc1);
  coords.col(0) = pc1;

  gram.noalias() -= eig1 * v1 * v1.transpose();
  auto [eig2, v2] = power_iteration(gram);
  if (eig2 <= std::max(1e-12, 1e-12 * eig1)) {
    std::cerr << "warning: rank-deficient item features; second PCA "
                 "component zeroed\n";
    return coords;
  }
  Vector pc2 = v2 * std::sqrt(eig2);
  fix_sign(pc2);
  coords.col(1) = pc2;
  return coords;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  auto put_map = [&j](const char* name, const std::map<int, Real>& m) {
    for (const auto& [k, v] : m) j[name][std::to_string(k)] = v;
  };
  put_map("recall", recall);
  put_map("ndcg", ndcg);
  put_map("item_recall", item_recall);
  put_map("coverage_ratio", coverage_ratio);
  for (const auto& [k, v] : coverage) {
    j["coverage"][std::to_string(k)] = {{"mean", v.mean},
                                        {"stddev", v.stddev}};
  }
  for (const auto& [b, v] : coverage_batch_sweep) {
    j["coverage_batch_sweep"][std::to_string(b)] = {{"mean", v.mean},
                                                    {"stddev", v.stddev}};
  }
  j["gini_ratio"] = gini_ratio;
  if (!per_category.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : per_category) {
      rows.push_back({{"category", row.category},
                      {"item_count", row.item_count},
                      {"item_recall", row.item_recall}});
    }
    j["per_category"] = rows;
  }
  return j.dump(2);
}

EvalReport evaluate_ranked(const RankedLists& ranked,
                           const InteractionMatrix& heldout,
                           const CountVector& train_freq,
                           const EvalOptions& options) {
  EvalReport report;
  for (int k : options.ks) {
    report.recall[k] = recall_at_k(ranked, heldout, k);
    report.ndcg[k] = ndcg_at_k(ranked, heldout, k);
    report.item_recall[k] = item_recall_at_k(ranked, heldout, k);
    const CoverageResult cov =
        coverage_at_k(ranked, k, options.coverage_batch);
    report.coverage[k] = cov;
    report.coverage_ratio[k] = coverage_ratio(
        cov.mean, k, options.coverage_batch, heldout.n_items());
  }
  const int gini_k = std::min(options.gini_k, ranked.k_max);
  report.gini_ratio = longtail::gini_ratio(ranked, train_freq, gini_k);
  for (int b : options.coverage_batch_sweep) {
    report.coverage_batch_sweep[b] = coverage_at_k(ranked, gini_k, b);
  }
  if (options.meta != nullptr) {
    report.per_category =
        per_category_report(ranked, heldout, *options.meta, gini_k);
  }
  return report;
}

}  // namespace longtail
