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

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "longtail/experiment.hpp"

namespace {

using longtail::ExperimentConfig;
using longtail::KvMap;

// CLI overrides beat config-file values, which beat built-in defaults.
ExperimentConfig resolve_config(const std::string& config_file,
                                const std::vector<std::string>& sets,
                                const KvMap& flag_overrides) {
  KvMap kv;
  if (!config_file.empty()) kv = longtail::parse_config_file(config_file);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw longtail::ConfigError("--set expects key=value, got '" + s + "'");
    }
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [k, v] : flag_overrides) kv[k] = v;
  return longtail::make_config(kv);
}

int run_guarded(bool json_out, const std::function<nlohmann::json()>& body) {
  try {
    const nlohmann::json out = body();
    if (json_out) {
      std::cout << out.dump(2) << "\n";
    } else if (out.contains("summary")) {
      std::cout << out["summary"].get<std::string>() << "\n";
    }
    return 0;
  } catch (const longtail::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const longtail::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit-feedback recommender toolkit with adversarial "
               "item reweighting and long-tail metrics"};
  app.require_subcommand(1);

  // ingest -----------------------------------------------------------------
  auto* ingest = app.add_subcommand(
      "ingest", "Convert a raw interaction CSV into a matrix file");
  std::string ingest_in, ingest_out;
  double threshold = 3.5;
  int min_user = 5, min_item = 1;
  bool ingest_json = false;
  ingest->add_option("--input", ingest_in, "raw CSV path")->required();
  ingest->add_option("--output", ingest_out, "matrix file path")->required();
  ingest->add_option("--rating-threshold", threshold,
                     "keep events with rating >= threshold (default 3.5)");
  ingest->add_option("--min-user-interactions", min_user,
                     "minimum interactions per user (default 5)");
  ingest->add_option("--min-item-interactions", min_item,
                     "minimum interactions per item (default 1)");
  ingest->add_flag("--json", ingest_json, "machine-readable stdout");

  // shared run/sweep/evaluate options --------------------------------------
  std::string config_file, method, data, out_dir;
  std::vector<std::string> sets;
  bool run_json = false;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value config file");
    cmd->add_option("--set", sets, "override any config key (key=value)")
        ->take_all();
    cmd->add_option("--method", method,
                    "ease|posit|ipw|cvar|rerank|mp");
    cmd->add_option("--data", data, "dataset path (.csv or matrix file)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "random seed")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_flag("--json", run_json, "machine-readable stdout");
  };

  auto* run = app.add_subcommand(
      "run", "Train one method, evaluate on test, write report + checkpoint");
  add_common(run);

  auto* sweep = app.add_subcommand(
      "sweep", "Grid search with best-model selection on validation");
  add_common(sweep);
  std::vector<std::string> grids;
  std::string selection = "recall@100";
  sweep->add_option("--grid", grids, "sweep axis, e.g. lambda=0.1,1,10")
      ->take_all();
  sweep->add_option("--metric", selection,
                    "selection metric (default recall@100)");

  auto* evaluate = app.add_subcommand(
      "evaluate", "Compute metrics for an existing checkpoint");
  std::string eval_ckpt;
  bool eval_json = false;
  std::vector<std::string> eval_sets;
  evaluate->add_option("--checkpoint", eval_ckpt, "checkpoint path")
      ->required();
  evaluate->add_option("--set", eval_sets,
                       "override evaluation keys (e.g. coverage_batch=50)")
      ->take_all();
  evaluate->add_flag("--json", eval_json, "machine-readable stdout");

  auto* exp = app.add_subcommand(
      "export", "Write per-item advantage / weight-PCA / category CSVs");
  std::string export_ckpt, export_out;
  bool export_json = false;
  exp->add_option("--checkpoint", export_ckpt, "checkpoint path")->required();
  exp->add_option("--out", export_out, "output directory")->required();
  exp->add_flag("--json", export_json, "machine-readable stdout");

  CLI11_PARSE(app, argc, argv);

  if (ingest->parsed()) {
    return run_guarded(ingest_json, [&] {
      const auto events = longtail::ingest_csv(ingest_in, threshold);
      const auto matrix =
          longtail::build_matrix(events, min_user, min_item);
      longtail::save_matrix(matrix, ingest_out);
      nlohmann::json j;
      j["n_users"] = matrix.n_users();
      j["n_items"] = matrix.n_items();
      j["n_interactions"] = matrix.n_interactions();
      j["output"] = ingest_out;
      j["summary"] = "wrote " + ingest_out + ": " +
                     std::to_string(matrix.n_users()) + " users, " +
                     std::to_string(matrix.n_items()) + " items, " +
                     std::to_string(matrix.n_interactions()) +
                     " interactions";
      return j;
    });
  }

  auto flag_overrides = [&] {
    KvMap kv;
    if (!method.empty()) kv["method"] = method;
    if (!data.empty()) kv["data"] = data;
    if (!out_dir.empty()) kv["out"] = out_dir;
    if (seed_given) kv["seed"] = std::to_string(seed);
    return kv;
  };

  if (run->parsed()) {
    return run_guarded(run_json, [&] {
      const ExperimentConfig cfg =
          resolve_config(config_file, sets, flag_overrides());
      const longtail::RunResult result = longtail::run_experiment(cfg);
      nlohmann::json j;
      j["report"] = nlohmann::json::parse(result.report_json);
      j["checkpoint"] = result.checkpoint_path;
      j["out"] = cfg.out_dir;
      j["summary"] = "run complete; report at " +
                     (std::filesystem::path(cfg.out_dir) / "report.json")
                         .string();
      return j;
    });
  }

  if (sweep->parsed()) {
    return run_guarded(run_json, [&] {
      const ExperimentConfig cfg =
          resolve_config(config_file, sets, flag_overrides());
      longtail::SweepSpec spec;
      spec.selection_metric = selection;
      for (const auto& g : grids) {
        const auto eq = g.find('=');
        if (eq == std::string::npos) {
          throw longtail::ConfigError("--grid expects key=v1,v2,..., got '" +
                                      g + "'");
        }
        std::vector<std::string> values;
        std::string token;
        std::stringstream ss(g.substr(eq + 1));
        while (std::getline(ss, token, ',')) values.push_back(token);
        if (values.empty()) {
          throw longtail::ConfigError("--grid axis '" + g + "' is empty");
        }
        spec.grid[g.substr(0, eq)] = values;
      }
      const longtail::SweepResult result = longtail::run_sweep(spec, cfg);
      nlohmann::json j;
      j["best_overrides"] = result.best_overrides;
      j["best_report"] =
          nlohmann::json::parse(result.best_run.report_json);
      j["leaderboard_rows"] = result.leaderboard.size();
      j["summary"] = "sweep complete; leaderboard at " +
                     (std::filesystem::path(cfg.out_dir) / "leaderboard.csv")
                         .string();
      return j;
    });
  }

  if (evaluate->parsed()) {
    return run_guarded(eval_json, [&] {
      const longtail::Checkpoint ckpt = longtail::load_checkpoint(eval_ckpt);
      KvMap kv;
      for (const auto& [k, v] : ckpt.meta) {
        if (k.rfind("run.", 0) != 0) kv[k] = v;
      }
      for (const auto& s : eval_sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
          throw longtail::ConfigError("--set expects key=value, got '" + s +
                                      "'");
        }
        kv[s.substr(0, eq)] = s.substr(eq + 1);
      }
      const ExperimentConfig cfg = longtail::make_config(kv);
      const longtail::DatasetSplits splits = longtail::load_and_split(cfg);
      longtail::TrainedMethod tm;
      tm.method = ckpt.require_meta("run.method");
      tm.train_freq = ckpt.item_freq;
      if (ckpt.W) tm.model = longtail::EaseModel{*ckpt.W, cfg.lambda};
      std::optional<longtail::ItemMeta> meta;
      if (!cfg.item_meta_path.empty()) {
        meta = longtail::load_item_metadata(cfg.item_meta_path,
                                            splits.train.item_ids());
      }
      const longtail::EvalReport report = longtail::evaluate_method(
          tm, cfg, splits.test, meta ? &*meta : nullptr);
      nlohmann::json j = nlohmann::json::parse(report.to_json());
      j["summary"] = "evaluation complete";
      return j;
    });
  }

  if (exp->parsed()) {
    return run_guarded(export_json, [&] {
      longtail::export_figures_data(export_ckpt, export_out);
      nlohmann::json j;
      j["out"] = export_out;
      j["summary"] = "exports written to " + export_out;
      return j;
    });
  }

  return 0;
}
