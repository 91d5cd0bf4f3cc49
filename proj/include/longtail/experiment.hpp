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

#include "longtail/adversary.hpp"
#include "longtail/baselines.hpp"
#include "longtail/dataset.hpp"
#include "longtail/ease.hpp"
#include "longtail/io.hpp"
#include "longtail/metrics.hpp"
#include "longtail/types.hpp"

namespace longtail {

// Fully resolved experiment configuration. Values come from built-in
// defaults, then a key=value config file, then command-line overrides, in
// that precedence order.
struct ExperimentConfig {
  // Data and split.
  std::string data_path;       // .csv (ingested on the fly) or matrix file
  std::string item_meta_path;  // optional item metadata CSV
  Real rating_threshold = 3.5;
  int min_user_interactions = 5;
  int min_item_interactions = 1;
  int n_val_users = 0;
  int n_test_users = 0;
  Real heldout_fraction = 0.2;

  // Method and hyper-parameters.
  std::string method;  // ease | posit | ipw | cvar | rerank | mp
  bool closed_form = false;
  Real lambda = 8e-6;
  TrainConfig train;   // lr 2.0, momentum 0.9, 50 epochs, batch 1024
  bool lr_auto = false;  // lr = 0.9 / (max Gram eigenvalue + lambda)
  Real adv_lr = 1.0;
  Real tau = 1.5;
  int hidden = 10;
  int advantage_k = 100;
  Real ema_momentum = 0.9;
  std::string advantage_variant = "with_popularity";
  std::string arch = "fc1,norm,tanh,fc2,norm,sigmoid";
  Real ipw_beta = 0.0;
  Real cvar_alpha = 1.0;
  Real cvar_beta1 = 0.0;
  Real rerank_t_high = 0.0;
  Real rerank_t_low = 0.0;

  // Evaluation.
  std::vector<int> eval_ks = {20, 50, 100};
  int coverage_batch = 100;
  std::vector<int> coverage_batch_sweep;

  std::uint64_t seed = 0;
  std::string out_dir;

  // The full resolved key=value view (written to manifests/checkpoints).
  std::map<std::string, std::string> to_kv() const;
};

using KvMap = std::map<std::string, std::string>;

// Parses "key = value" lines; '#' starts a comment.
KvMap parse_config_file(const std::string& path);

// Builds a config from defaults overridden by the merged map. Unknown keys
// and malformed values raise ConfigError naming the key.
ExperimentConfig make_config(const KvMap& kv);

// Validates cross-field constraints before any work starts.
void validate_config(const ExperimentConfig& cfg);

// A trained method ready for evaluation.
struct TrainedMethod {
  std::string method;
  std::optional<EaseModel> model;
  std::optional<AdversaryNet> net;
  std::optional<Vector> ema;
  CountVector train_freq;
  int best_epoch = -1;
};

// Receives csv log rows (header first, then one row per epoch) as training
// progresses, so partial logs survive a divergence abort.
using HistorySink = std::function<void(const std::string&)>;

// Loads (or ingests) the dataset named by the config and splits it.
DatasetSplits load_and_split(const ExperimentConfig& cfg,
                             std::string* data_hash = nullptr);

TrainedMethod train_method(const ExperimentConfig& cfg,
                           const DatasetSplits& splits,
                           const HistorySink& history = {});

// Ranked lists for an evaluation split under the trained method's ranking
// policy (model scores, popularity order, or threshold re-sorting).
RankedLists build_ranked(const TrainedMethod& tm, const ExperimentConfig& cfg,
                         const EvalSplit& split, int k_max);

EvalReport evaluate_method(const TrainedMethod& tm,
                           const ExperimentConfig& cfg,
                           const EvalSplit& split,
                           const ItemMeta* meta = nullptr);

struct RunResult {
  EvalReport report;
  std::string report_json;
  std::string checkpoint_path;
  std::string manifest_json;
};

// Full experiment: train on the train split, pick the best epoch on
// validation, evaluate once on test, and write report.json, manifest.json,
// checkpoint.ckpt and history.csv under cfg.out_dir.
RunResult run_experiment(const ExperimentConfig& cfg);

struct SweepSpec {
  std::map<std::string, std::vector<std::string>> grid;
  std::string selection_metric = "recall@100";
};

struct SweepRow {
  KvMap overrides;
  Real selection_value = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> leaderboard;  // sorted by metric, best first
  KvMap best_overrides;
  RunResult best_run;
};

// Runs every grid combination, scores each on the validation split with the
// selection metric, then re-trains and test-evaluates the winner under
// cfg.out_dir/best. Failed runs are recorded and skipped. For cvar and
// rerank a (coverage@100, recall@100) test frontier CSV is also written,
// since those methods trade performance against coverage directly.
SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base);

// Writes the per-item advantage CSV and (when the checkpoint has adversary
// parameters) the weight/PCA CSV, plus the per-category CSV when metadata
// is available.
void export_figures_data(const std::string& checkpoint_path,
                         const std::string& out_dir);

// Metric lookup by name, e.g. "recall@100", "ndcg@20", "item_recall@100",
// "coverage@100".
Real metric_by_name(const EvalReport& report, const std::string& name);

}  // namespace longtail
