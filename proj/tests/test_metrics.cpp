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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>

#include "longtail/advantage.hpp"
#include "longtail/ease.hpp"
#include "longtail/metrics.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace longtail;

namespace {

InteractionMatrix heldout_from(std::vector<std::vector<int>> rows,
                               int n_items) {
  std::vector<std::string> users, items;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    users.push_back("u" + std::to_string(u));
  }
  for (int j = 0; j < n_items; ++j) items.push_back("i" + std::to_string(j));
  return InteractionMatrix(std::move(rows), n_items, std::move(users),
                           std::move(items));
}

RankedLists lists_of(std::vector<std::vector<int>> lists, int k_max) {
  RankedLists out;
  out.k_max = k_max;
  out.lists = std::move(lists);
  return out;
}

}  // namespace

TEST_CASE("recall hand case: one of two held-out items in the top 2") {
  const auto held = heldout_from({{0, 1}}, 4);
  const auto ranked = lists_of({{0, 3}}, 2);
  CHECK(recall_at_k(ranked, held, 2) == doctest::Approx(0.5));
}

TEST_CASE("perfect rankings reach recall 1 under the min rule") {
  const auto held = heldout_from({{0, 1, 2}, {3}}, 5);
  const auto ranked = lists_of({{0, 1, 2, 4, 3}, {3, 0, 1, 2, 4}}, 5);
  CHECK(recall_at_k(ranked, held, 2) == doctest::Approx(1.0));
  CHECK(recall_at_k(ranked, held, 5) == doctest::Approx(1.0));
}

TEST_CASE("ndcg hand cases") {
  const auto held = heldout_from({{2}}, 5);
  CHECK(ndcg_at_k(lists_of({{2, 0, 1, 3, 4}}, 5), held, 5) ==
        doctest::Approx(1.0));
  // Single relevant item at rank 3: 1/log2(4) = 0.5.
  CHECK(ndcg_at_k(lists_of({{0, 1, 2, 3, 4}}, 5), held, 5) ==
        doctest::Approx(0.5));
}

TEST_CASE("coverage of identical lists is k; disjoint lists reach the "
          "upper bound") {
  const auto same = lists_of({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}, {0, 1, 2}}, 3);
  const auto cov_same = coverage_at_k(same, 3, 2);
  CHECK(cov_same.mean == doctest::Approx(3.0));
  CHECK(cov_same.stddev == doctest::Approx(0.0));

  const auto disjoint =
      lists_of({{0, 1}, {2, 3}, {4, 5}, {6, 7}}, 2);
  CHECK(coverage_at_k(disjoint, 2, 2).mean == doctest::Approx(4.0));
}

TEST_CASE("coverage drops the trailing partial chunk and validates size") {
  const auto ranked = lists_of({{0}, {1}, {2}, {3}, {4}}, 1);
  const auto cov = coverage_at_k(ranked, 1, 2);  // chunks {0,1} and {2,3}
  CHECK(cov.mean == doctest::Approx(2.0));
  CHECK_THROWS_AS(coverage_at_k(ranked, 1, 6), MetricError);
}

TEST_CASE("coverage ratio uses the min(k * batch, n_items) bound") {
  CHECK(coverage_ratio(1461.0, 100, 100, 20108) ==
        doctest::Approx(0.1461).epsilon(1e-12));
  CHECK(coverage_ratio(500.0, 100, 100, 500) == doctest::Approx(1.0));
  CHECK(coverage_ratio(250.0, 100, 100, 500) == doctest::Approx(0.5));
}

TEST_CASE("gini of uniform counts is zero; full concentration is "
          "(n-1)/n") {
  CHECK(gini_coefficient(Vector::Constant(8, 3.0)) ==
        doctest::Approx(0.0).epsilon(1e-12));
  Vector concentrated = Vector::Zero(10);
  concentrated[7] = 42.0;
  CHECK(gini_coefficient(concentrated) == doctest::Approx(0.9));
  CHECK_THROWS_AS(gini_coefficient(Vector::Zero(4)), MetricError);
}

TEST_CASE("gini coefficient matches the pairwise-difference oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dist(0, 30);
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(12);
    for (int j = 0; j < 12; ++j) x[j] = dist(rng);
    if (x.sum() == 0) x[0] = 1;
    CHECK(gini_coefficient(x) ==
          doctest::Approx(testing::oracle_gini(x)).epsilon(1e-12));
  }
}

TEST_CASE("metric suite matches brute-force oracles on random instances") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> users_dist(6, 20);
  std::uniform_int_distribution<int> items_dist(5, 15);
  std::uniform_int_distribution<int> score_dist(0, 6);  // forces ties
  for (int trial = 0; trial < 40; ++trial) {
    const int n_users = users_dist(rng);
    const int n_items = items_dist(rng);
    const auto m =
        testing::random_matrix(n_users, n_items, 0.45, 5000 + trial);
    SplitSpec spec{0, std::max(2, n_users / 3), 0.4,
                   static_cast<std::uint64_t>(trial)};
    DatasetSplits splits;
    try {
      splits = split_users(m, spec);
    } catch (const SplitError&) {
      continue;
    }
    Matrix w(n_items, n_items);
    for (int i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<Real>(score_dist(rng));
    }
    w.diagonal().setZero();

    const int k = std::min(4, n_items);
    const RankedLists ranked = rank_eval_users(w, splits.test, n_items);
    const auto ranks = testing::oracle_eval_ranks(w, splits.test);
    const auto& held = splits.test.heldout;

    CHECK(recall_at_k(ranked, held, k) ==
          doctest::Approx(testing::oracle_recall(ranks, held, k))
              .epsilon(1e-12));
    CHECK(ndcg_at_k(ranked, held, k) ==
          doctest::Approx(testing::oracle_ndcg(ranks, held, k))
              .epsilon(1e-12));
    CHECK(item_recall_at_k(ranked, held, k) ==
          doctest::Approx(testing::oracle_item_recall(ranks, held, k))
              .epsilon(1e-12));
    const int batch = std::max(1, held.n_users() / 2);
    const auto cov = coverage_at_k(ranked, k, batch);
    const auto cov_oracle =
        testing::oracle_coverage(ranks, n_items, k, batch);
    CHECK(cov.mean == doctest::Approx(cov_oracle.mean).epsilon(1e-12));
    CHECK(cov.stddev == doctest::Approx(cov_oracle.stddev).epsilon(1e-12));
    CHECK(gini_ratio(ranked, splits.train.item_freq(), k) ==
          doctest::Approx(testing::oracle_gini_ratio(
                              ranks, held, splits.train.item_freq(), k))
              .epsilon(1e-12));
  }
}

TEST_CASE("ranked-list metrics are invariant under monotone transforms") {
  const auto m = testing::random_matrix(14, 9, 0.4, 201);
  const auto splits = split_users(m, SplitSpec{0, 5, 0.35, 3});
  Matrix w = Matrix::Random(9, 9);
  w.diagonal().setZero();
  const Matrix scaled = 3.0 * w;  // positive scaling preserves order
  const auto a = rank_eval_users(w, splits.test, 9);
  const auto b = rank_eval_users(scaled, splits.test, 9);
  CHECK(a.lists == b.lists);
}

TEST_CASE("per-category report reduces to the global value") {
  const auto m = testing::random_matrix(16, 10, 0.45, 77);
  const auto splits = split_users(m, SplitSpec{0, 6, 0.4, 9});
  Matrix w = Matrix::Random(10, 10);
  w.diagonal().setZero();
  const auto ranked = rank_eval_users(w, splits.test, 10);
  const Real global = item_recall_at_k(ranked, splits.test.heldout, 3);

  ItemMeta single;
  single.year.assign(10, 1995);
  single.genres.assign(10, {});
  single.coverage = 1.0;
  const auto rows =
      per_category_report(ranked, splits.test.heldout, single, 3);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].category == "year:1990s");
  CHECK(rows[0].item_count == 10);
  CHECK(rows[0].item_recall == doctest::Approx(global).epsilon(1e-12));

  // Two disjoint categories recombine to the global value.
  ItemMeta two;
  two.year.assign(10, 1981);
  for (int j = 6; j < 10; ++j) two.year[j] = 2002;
  two.genres.assign(10, {});
  two.coverage = 1.0;
  const auto both = per_category_report(ranked, splits.test.heldout, two, 3);
  REQUIRE(both.size() == 2);
  Real weighted = 0.0;
  for (const auto& row : both) {
    weighted += row.item_recall * row.item_count;
  }
  CHECK(weighted / 10 == doctest::Approx(global).epsilon(1e-12));
}

TEST_CASE("a category with no held-out positives reports zero") {
  const auto held = heldout_from({{0}}, 4);
  const auto ranked = lists_of({{0, 1, 2, 3}}, 4);
  ItemMeta meta;
  meta.year = {1990, 1990, 2010, 2010};
  meta.genres.assign(4, {});
  meta.coverage = 1.0;
  const auto rows = per_category_report(ranked, held, meta, 4);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].category == "year:2010s");
  CHECK(rows[0].item_recall == 0.0);
  CHECK(rows[0].item_count == 2);
}

TEST_CASE("insufficient metadata coverage is rejected") {
  const auto held = heldout_from({{0}}, 4);
  const auto ranked = lists_of({{0, 1, 2, 3}}, 4);
  ItemMeta meta;
  meta.year.assign(4, -1);
  meta.genres.assign(4, {});
  meta.coverage = 0.5;
  CHECK_THROWS_AS(per_category_report(ranked, held, meta, 4), MetricError);
}

TEST_CASE("missing metadata file returns nullopt with a warning") {
  CHECK(!load_item_metadata("/nonexistent/items.csv", {"a", "b"})
             .has_value());
}

TEST_CASE("metadata parsing maps ids, years and genres") {
  const auto path =
      (std::filesystem::temp_directory_path() / "items_meta.csv").string();
  std::ofstream out(path);
  out << "item_id,year,genres\n"
      << "a,1994,Comedy|Drama\n"
      << "b,2001,Action\n";
  out.close();
  const auto meta = load_item_metadata(path, {"a", "b", "c"});
  REQUIRE(meta.has_value());
  CHECK(meta->year[0] == 1994);
  CHECK(meta->genres[0] == std::vector<std::string>{"Comedy", "Drama"});
  CHECK(meta->year[2] == -1);
  CHECK(meta->coverage == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("pca projection matches a dense eigensolver on a toy matrix") {
  const auto m = testing::random_matrix(12, 6, 0.5, 42);
  const Matrix coords = pca_project(m);

  // Dense oracle: eigen-decompose the centered Gram directly.
  Matrix d = Matrix::Zero(12, 6);
  for (int u = 0; u < 12; ++u) {
    for (int j : m.row(u)) d(u, j) = 1.0;
  }
  Matrix x = d.transpose();  // items as observations
  const Vector mean = x.colwise().mean();
  x.rowwise() -= mean.transpose();
  const Matrix gram = x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  const int last = 5;
  for (int comp = 0; comp < 2; ++comp) {
    const Real eig = solver.eigenvalues()[last - comp];
    Vector expected =
        solver.eigenvectors().col(last - comp) * std::sqrt(eig);
    int arg = 0;
    for (int i = 1; i < 6; ++i) {
      if (std::abs(expected[i]) > std::abs(expected[arg])) arg = i;
    }
    if (expected[arg] < 0) expected = -expected;
    CHECK((coords.col(comp) - expected).cwiseAbs().maxCoeff() < 1e-6);
  }

  // Explained variance ordering.
  CHECK(coords.col(0).squaredNorm() >= coords.col(1).squaredNorm());
}

TEST_CASE("duplicated items land on identical pca coordinates") {
  std::vector<std::vector<int>> rows = {{0, 1}, {0, 1, 2}, {2, 3}, {0, 1, 3}};
  InteractionMatrix m(std::move(rows), 4, {"a", "b", "c", "d"},
                      {"w", "x", "y", "z"});
  const Matrix coords = pca_project(m);
  CHECK((coords.row(0) - coords.row(1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rank-one data zeroes the second component with a warning") {
  // Every user interacts with exactly the same two items: after centering
  // the item Gram has rank 1.
  std::vector<std::vector<int>> rows = {{0, 1}, {0, 1}, {0, 1}};
  InteractionMatrix m(std::move(rows), 3, {"a", "b", "c"}, {"x", "y", "z"});
  const Matrix coords = pca_project(m);
  CHECK(coords.col(1).isZero(0.0));
}

TEST_CASE("popularity ranking amplifies the gini ratio more than a model") {
  const auto m = testing::synthetic_matrix({.n_users = 150,
                                            .n_items = 90,
                                            .n_clusters = 6,
                                            .zipf = 1.0,
                                            .seed = 61});
  const auto splits = split_users(m, SplitSpec{0, 30, 0.3, 4});
  const int k = 20;

  const auto model = solve_closed_form(splits.train, 1.0);
  const auto model_lists = rank_eval_users(model.W, splits.test, k);

  std::vector<int> order(splits.train.n_items());
  std::iota(order.begin(), order.end(), 0);  // index order = popularity
  order.resize(k);
  RankedLists mp_lists;
  mp_lists.k_max = k;
  mp_lists.lists.assign(splits.test.foldin.n_users(), order);

  const auto& freq = splits.train.item_freq();
  CHECK(gini_ratio(mp_lists, freq, k) > gini_ratio(model_lists, freq, k));
}

TEST_CASE("coverage batch sweep lands in the report") {
  const auto m = testing::random_matrix(40, 15, 0.4, 19);
  const auto splits = split_users(m, SplitSpec{0, 16, 0.3, 2});
  Matrix w = Matrix::Random(15, 15);
  w.diagonal().setZero();
  const auto ranked = rank_eval_users(w, splits.test, 15);
  EvalOptions options;
  options.ks = {5};
  options.coverage_batch = 4;
  options.coverage_batch_sweep = {2, 8};
  options.gini_k = 5;
  const auto report = evaluate_ranked(ranked, splits.test.heldout,
                                      splits.train.item_freq(), options);
  REQUIRE(report.coverage_batch_sweep.size() == 2);
  CHECK(report.coverage_batch_sweep.at(2).mean <=
        report.coverage_batch_sweep.at(8).mean);
}

TEST_CASE("eval report serializes deterministically") {
  const auto m = testing::random_matrix(30, 12, 0.4, 11);
  const auto splits = split_users(m, SplitSpec{0, 12, 0.3, 2});
  Matrix w = Matrix::Random(12, 12);
  w.diagonal().setZero();
  const auto ranked = rank_eval_users(w, splits.test, 12);
  EvalOptions options;
  options.ks = {2, 5};
  options.coverage_batch = 4;
  options.gini_k = 5;
  const auto report =
      evaluate_ranked(ranked, splits.test.heldout, splits.train.item_freq(),
                      options);
  const auto again =
      evaluate_ranked(ranked, splits.test.heldout, splits.train.item_freq(),
                      options);
  CHECK(report.to_json() == again.to_json());
  CHECK(report.recall.at(2) >= 0.0);
  CHECK(report.recall.at(2) <= 1.0);
  CHECK(report.coverage.at(5).mean >= 5.0 * 0 + 1.0);
}
