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

#include "longtail/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace longtail {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_real(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Real to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const Real r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (!token.empty()) out.push_back(to_int(key, token));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << content;
}

AdvantageVariant parse_variant(const std::string& v) {
  if (v == "with_popularity") return AdvantageVariant::kWithPopularity;
  if (v == "without_popularity") return AdvantageVariant::kWithoutPopularity;
  throw ConfigError("config key 'advantage_variant': expected "
                    "with_popularity or without_popularity, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> ExperimentConfig::to_kv() const {
  KvMap kv;
  kv["data"] = data_path;
  kv["item_meta"] = item_meta_path;
  kv["rating_threshold"] = fmt_real(rating_threshold);
  kv["min_user_interactions"] = std::to_string(min_user_interactions);
  kv["min_item_interactions"] = std::to_string(min_item_interactions);
  kv["n_val_users"] = std::to_string(n_val_users);
  kv["n_test_users"] = std::to_string(n_test_users);
  kv["heldout_fraction"] = fmt_real(heldout_fraction);
  kv["method"] = method;
  kv["closed_form"] = closed_form ? "true" : "false";
  kv["lambda"] = fmt_real(lambda);
  kv["lr"] = lr_auto ? "auto" : fmt_real(train.lr);
  kv["momentum"] = fmt_real(train.momentum);
  kv["epochs"] = std::to_string(train.epochs);
  kv["batch_size"] = std::to_string(train.batch_size);
  kv["lr_schedule"] = train.schedule == LrSchedule::kConstant ? "constant"
                                                              : "exponential";
  kv["lr_decay"] = fmt_real(train.lr_decay);
  kv["adv_lr"] = fmt_real(adv_lr);
  kv["tau"] = fmt_real(tau);
  kv["hidden"] = std::to_string(hidden);
  kv["advantage_k"] = std::to_string(advantage_k);
  kv["ema_momentum"] = fmt_real(ema_momentum);
  kv["advantage_variant"] = advantage_variant;
  kv["arch"] = arch;
  kv["ipw_beta"] = fmt_real(ipw_beta);
  kv["cvar_alpha"] = fmt_real(cvar_alpha);
  kv["cvar_beta1"] = fmt_real(cvar_beta1);
  kv["rerank_t_high"] = fmt_real(rerank_t_high);
  kv["rerank_t_low"] = fmt_real(rerank_t_low);
  kv["eval_ks"] = join_ints(eval_ks);
  kv["coverage_batch"] = std::to_string(coverage_batch);
  kv["coverage_batch_sweep"] =
      coverage_batch_sweep.empty() ? "" : join_ints(coverage_batch_sweep);
  kv["seed"] = std::to_string(seed);
  kv["out"] = out_dir;
  return kv;
}

KvMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  KvMap kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) eq = line.find(':');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig make_config(const KvMap& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "data") {
      cfg.data_path = value;
    } else if (key == "item_meta") {
      cfg.item_meta_path = value;
    } else if (key == "rating_threshold") {
      cfg.rating_threshold = to_real(key, value);
    } else if (key == "min_user_interactions") {
      cfg.min_user_interactions = to_int(key, value);
    } else if (key == "min_item_interactions") {
      cfg.min_item_interactions = to_int(key, value);
    } else if (key == "n_val_users") {
      cfg.n_val_users = to_int(key, value);
    } else if (key == "n_test_users") {
      cfg.n_test_users = to_int(key, value);
    } else if (key == "heldout_fraction") {
      cfg.heldout_fraction = to_real(key, value);
    } else if (key == "method") {
      cfg.method = value;
    } else if (key == "closed_form") {
      cfg.closed_form = to_bool(key, value);
    } else if (key == "lambda") {
      cfg.lambda = to_real(key, value);
    } else if (key == "lr") {
      if (value == "auto") {
        cfg.lr_auto = true;
      } else {
        cfg.lr_auto = false;
        cfg.train.lr = to_real(key, value);
      }
    } else if (key == "momentum") {
      cfg.train.momentum = to_real(key, value);
    } else if (key == "epochs") {
      cfg.train.epochs = to_int(key, value);
    } else if (key == "batch_size") {
      cfg.train.batch_size = to_int(key, value);
    } else if (key == "lr_schedule") {
      if (value == "constant") {
        cfg.train.schedule = LrSchedule::kConstant;
      } else if (value == "exponential") {
        cfg.train.schedule = LrSchedule::kExponential;
      } else {
        throw ConfigError("config key 'lr_schedule': expected constant or "
                          "exponential, got '" + value + "'");
      }
    } else if (key == "lr_decay") {
      cfg.train.lr_decay = to_real(key, value);
    } else if (key == "adv_lr") {
      cfg.adv_lr = to_real(key, value);
    } else if (key == "tau") {
      cfg.tau = to_real(key, value);
    } else if (key == "hidden") {
      cfg.hidden = to_int(key, value);
    } else if (key == "advantage_k") {
      cfg.advantage_k = to_int(key, value);
    } else if (key == "ema_momentum") {
      cfg.ema_momentum = to_real(key, value);
    } else if (key == "advantage_variant") {
      parse_variant(value);  // validation only
      cfg.advantage_variant = value;
    } else if (key == "arch") {
      cfg.arch = value;
    } else if (key == "ipw_beta") {
      cfg.ipw_beta = to_real(key, value);
    } else if (key == "cvar_alpha") {
      cfg.cvar_alpha = to_real(key, value);
    } else if (key == "cvar_beta1") {
      cfg.cvar_beta1 = to_real(key, value);
    } else if (key == "rerank_t_high") {
      cfg.rerank_t_high = to_real(key, value);
    } else if (key == "rerank_t_low") {
      cfg.rerank_t_low = to_real(key, value);
    } else if (key == "eval_ks") {
      cfg.eval_ks = to_int_list(key, value);
    } else if (key == "coverage_batch") {
      cfg.coverage_batch = to_int(key, value);
    } else if (key == "coverage_batch_sweep") {
      cfg.coverage_batch_sweep =
          value.empty() ? std::vector<int>{} : to_int_list(key, value);
    } else if (key == "seed") {
      cfg.seed = to_u64(key, value);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  static const std::vector<std::string> kMethods = {"ease", "posit", "ipw",
                                                    "cvar", "rerank", "mp"};
  if (cfg.data_path.empty()) throw ConfigError("config key 'data' is required");
  if (std::find(kMethods.begin(), kMethods.end(), cfg.method) ==
      kMethods.end()) {
    throw ConfigError("config key 'method': expected one of "
                      "ease|posit|ipw|cvar|rerank|mp, got '" +
                      cfg.method + "'");
  }
  if (cfg.n_test_users < 1) {
    throw ConfigError("config key 'n_test_users' must be >= 1");
  }
  if (!(cfg.heldout_fraction > 0 && cfg.heldout_fraction < 1)) {
    throw ConfigError("config key 'heldout_fraction' must be in (0,1)");
  }
  if (cfg.lambda < 0) throw ConfigError("config key 'lambda' must be >= 0");
  if (!cfg.lr_auto && cfg.train.lr <= 0) {
    throw ConfigError("config key 'lr' must be > 0 or 'auto'");
  }
  if (cfg.train.momentum < 0 || cfg.train.momentum >= 1) {
    throw ConfigError("config key 'momentum' must be in [0,1)");
  }
  if (cfg.train.epochs < 1) {
    throw ConfigError("config key 'epochs' must be >= 1");
  }
  if (cfg.train.batch_size < 1) {
    throw ConfigError("config key 'batch_size' must be >= 1");
  }
  if (cfg.coverage_batch < 1) {
    throw ConfigError("config key 'coverage_batch' must be >= 1");
  }
  if (cfg.n_test_users < cfg.coverage_batch) {
    throw ConfigError("config key 'n_test_users' must cover at least one "
                      "coverage chunk of " +
                      std::to_string(cfg.coverage_batch) + " users");
  }
  const bool uses_sgd =
      (cfg.method == "ease" && !cfg.closed_form) || cfg.method == "posit" ||
      cfg.method == "ipw" || cfg.method == "cvar" ||
      (cfg.method == "rerank" && !cfg.closed_form);
  if (uses_sgd && cfg.n_val_users < 1) {
    throw ConfigError("config key 'n_val_users' must be >= 1 for "
                      "SGD-trained methods");
  }
  if (cfg.method == "posit") {
    if (cfg.adv_lr < 0) throw ConfigError("config key 'adv_lr' must be >= 0");
    if (cfg.tau <= 0) throw ConfigError("config key 'tau' must be > 0");
    if (cfg.hidden < 1) throw ConfigError("config key 'hidden' must be >= 1");
    if (cfg.advantage_k < 1) {
      throw ConfigError("config key 'advantage_k' must be >= 1");
    }
    if (cfg.ema_momentum <= 0 || cfg.ema_momentum > 1) {
      throw ConfigError("config key 'ema_momentum' must be in (0,1]");
    }
    parse_arch(cfg.arch);
  }
  if (cfg.method == "cvar" &&
      (cfg.cvar_alpha <= 0 || cfg.cvar_alpha > 1)) {
    throw ConfigError("config key 'cvar_alpha' must be in (0,1]");
  }
  if (cfg.method == "rerank" && cfg.rerank_t_high < cfg.rerank_t_low) {
    throw ConfigError("config key 'rerank_t_high' must be >= rerank_t_low");
  }
  if (cfg.eval_ks.empty()) {
    throw ConfigError("config key 'eval_ks' must be non-empty");
  }
  for (int k : cfg.eval_ks) {
    if (k < 1) throw ConfigError("config key 'eval_ks': k must be >= 1");
  }
}

DatasetSplits load_and_split(const ExperimentConfig& cfg,
                             std::string* data_hash) {
  InteractionMatrix full;
  if (cfg.data_path.size() > 4 &&
      cfg.data_path.substr(cfg.data_path.size() - 4) == ".csv") {
    const auto events = ingest_csv(cfg.data_path, cfg.rating_threshold);
    full = build_matrix(events, cfg.min_user_interactions,
                        cfg.min_item_interactions);
  } else {
    full = load_matrix(cfg.data_path);
  }
  if (data_hash != nullptr) *data_hash = fnv1a_hex(serialize_matrix(full));
  SplitSpec spec;
  spec.n_val_users = cfg.n_val_users;
  spec.n_test_users = cfg.n_test_users;
  spec.heldout_fraction = cfg.heldout_fraction;
  spec.seed = cfg.seed;
  return split_users(full, spec);
}

namespace {

TrainConfig resolved_train_config(const ExperimentConfig& cfg,
                                  const InteractionMatrix& train) {
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  if (cfg.lr_auto) {
    tc.lr = 0.9 / (gram_max_eigenvalue(train) + cfg.lambda + 1e-12);
  }
  return tc;
}

std::string history_header(const std::string& method) {
  return method == "posit" ? "epoch,loss,adversary_objective,val_recall"
                           : "epoch,loss,val_recall";
}

}  // namespace

TrainedMethod train_method(const ExperimentConfig& cfg,
                           const DatasetSplits& splits,
                           const HistorySink& history) {
  const InteractionMatrix& train = splits.train;
  TrainedMethod tm;
  tm.method = cfg.method;
  tm.train_freq = train.item_freq();
  const auto log = [&history](const std::string& line) {
    if (history) history(line);
  };
  log(history_header(cfg.method));
  const TrainConfig tc = resolved_train_config(cfg, train);
  const EpochCallback log_epoch = [&log](int epoch, const EpochLog& e) {
    log(std::to_string(epoch) + "," + fmt_real(e.loss) + "," +
        fmt_real(e.val_recall));
  };

  if (cfg.method == "mp") {
    return tm;
  }
  if (cfg.method == "ease" || cfg.method == "rerank") {
    if (cfg.closed_form) {
      tm.model = solve_closed_form(train, cfg.lambda);
    } else {
      auto r = train_sgd(train, Vector::Ones(train.n_items()), cfg.lambda,
                         tc, &splits.val, 100, log_epoch);
      tm.model = std::move(r.model);
      tm.best_epoch = r.best_epoch;
    }
    return tm;
  }
  if (cfg.method == "ipw") {
    const Vector weights =
        ipw_weights(train.item_freq(), train.n_users(), cfg.ipw_beta);
    auto r = train_sgd(train, weights, cfg.lambda, tc, &splits.val, 100,
                       log_epoch);
    tm.model = std::move(r.model);
    tm.best_epoch = r.best_epoch;
    return tm;
  }
  if (cfg.method == "cvar") {
    CvarConfig cc{cfg.cvar_alpha, cfg.cvar_beta1};
    auto r = train_cvar(train, cfg.lambda, tc, cc, &splits.val, 100,
                        log_epoch);
    tm.model = std::move(r.model);
    tm.best_epoch = r.best_epoch;
    return tm;
  }
  if (cfg.method == "posit") {
    PositConfig pc;
    pc.ease = tc;
    pc.lambda = cfg.lambda;
    pc.adv_lr = cfg.adv_lr;
    pc.tau = cfg.tau;
    pc.hidden = cfg.hidden;
    pc.k = std::min(cfg.advantage_k, train.n_items());
    pc.ema_momentum = cfg.ema_momentum;
    pc.variant = parse_variant(cfg.advantage_variant);
    pc.arch = cfg.arch;
    auto r = train_posit(train, splits.val, pc, {},
                         [&log](int epoch, const PositEpochLog& e) {
                           log(std::to_string(epoch) + "," +
                               fmt_real(e.loss) + "," +
                               fmt_real(e.adversary_objective) + "," +
                               fmt_real(e.val_recall));
                         });
    tm.model = std::move(r.model);
    tm.net = std::move(r.net);
    tm.ema = std::move(r.ema);
    tm.best_epoch = r.best_epoch;
    return tm;
  }
  throw ConfigError("unsupported method '" + cfg.method + "'");
}

RankedLists build_ranked(const TrainedMethod& tm, const ExperimentConfig& cfg,
                         const EvalSplit& split, int k_max) {
  if (tm.method == "mp") {
    auto order = most_popular(tm.train_freq);
    order.resize(std::min<std::size_t>(order.size(), k_max));
    RankedLists out;
    out.k_max = k_max;
    out.lists.assign(split.foldin.n_users(), order);
    return out;
  }
  if (!tm.model.has_value()) {
    throw ConfigError("method '" + tm.method + "' has no trained model");
  }
  if (tm.method == "rerank") {
    const RerankConfig rc{cfg.rerank_t_high, cfg.rerank_t_low};
    RankedLists out;
    out.k_max = k_max;
    const auto& foldin = split.foldin;
    constexpr int kChunk = 512;
    const Real neg_inf = -std::numeric_limits<Real>::infinity();
    std::vector<int> chunk;
    for (int start = 0; start < foldin.n_users(); start += kChunk) {
      const int end = std::min(foldin.n_users(), start + kChunk);
      chunk.resize(end - start);
      std::iota(chunk.begin(), chunk.end(), start);
      const Matrix scores =
          score_rows(*tm.model, foldin.sparse_rows(chunk));
      for (int i = 0; i < static_cast<int>(chunk.size()); ++i) {
        Vector s = scores.row(i);
        for (int j : foldin.row(chunk[i])) s[j] = neg_inf;
        out.lists.push_back(rerank(s, tm.train_freq, rc, k_max));
      }
    }
    return out;
  }
  return rank_eval_users(tm.model->W, split, k_max);
}

EvalReport evaluate_method(const TrainedMethod& tm,
                           const ExperimentConfig& cfg,
                           const EvalSplit& split, const ItemMeta* meta) {
  EvalOptions options;
  options.ks = cfg.eval_ks;
  options.coverage_batch = cfg.coverage_batch;
  options.coverage_batch_sweep = cfg.coverage_batch_sweep;
  options.gini_k = 100;
  options.meta = meta;
  int k_max = options.gini_k;
  for (int k : cfg.eval_ks) {
    if (k > split.foldin.n_items()) {
      throw ConfigError("config key 'eval_ks': k = " + std::to_string(k) +
                        " exceeds the item count " +
                        std::to_string(split.foldin.n_items()));
    }
    k_max = std::max(k_max, k);
  }
  k_max = std::min(k_max, split.foldin.n_items());
  options.gini_k = std::min(options.gini_k, k_max);
  const RankedLists ranked = build_ranked(tm, cfg, split, k_max);
  return evaluate_ranked(ranked, split.heldout, tm.train_freq, options);
}

namespace {

Checkpoint make_checkpoint(const TrainedMethod& tm,
                           const ExperimentConfig& cfg,
                           const std::string& data_hash,
                           const EvalReport& report) {
  Checkpoint ckpt;
  ckpt.meta = cfg.to_kv();
  ckpt.meta["run.method"] = tm.method;
  ckpt.meta["run.best_epoch"] = std::to_string(tm.best_epoch);
  ckpt.meta["run.data_hash"] = data_hash;
  ckpt.meta["run.code_version"] = kVersionString;
  for (const auto& [k, v] : report.recall) {
    ckpt.meta["run.test_recall@" + std::to_string(k)] = fmt_real(v);
  }
  if (tm.model) ckpt.W = tm.model->W;
  if (tm.net) {
    AdversaryParamsDump adv;
    adv.arch = tm.net->arch();
    adv.tau = tm.net->tau();
    adv.w1 = tm.net->params().w1;
    adv.b1 = tm.net->params().b1;
    adv.w2 = tm.net->params().w2;
    adv.b2 = tm.net->params().b2;
    ckpt.adversary = std::move(adv);
  }
  if (tm.ema) ckpt.ema = *tm.ema;
  ckpt.item_freq = tm.train_freq;
  return ckpt;
}

std::string manifest_json(const ExperimentConfig& cfg,
                          const std::string& data_hash) {
  nlohmann::json j;
  j["config"] = cfg.to_kv();
  j["seed"] = cfg.seed;
  j["data_hash"] = data_hash;
  j["code_version"] = kVersionString;
  return j.dump(2);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  if (cfg.out_dir.empty()) {
    throw ConfigError("config key 'out' is required for a run");
  }
  fs::create_directories(cfg.out_dir);

  std::string data_hash;
  const DatasetSplits splits = load_and_split(cfg, &data_hash);

  std::ofstream history_file(
      (fs::path(cfg.out_dir) / "history.csv").string());
  if (!history_file) throw IoError("cannot write history.csv");
  const TrainedMethod tm =
      train_method(cfg, splits, [&history_file](const std::string& line) {
        history_file << line << "\n";
        history_file.flush();
      });
  history_file.close();

  std::optional<ItemMeta> meta;
  if (!cfg.item_meta_path.empty()) {
    meta = load_item_metadata(cfg.item_meta_path,
                              splits.train.item_ids());
  }

  RunResult result;
  result.report =
      evaluate_method(tm, cfg, splits.test, meta ? &*meta : nullptr);
  result.report_json = result.report.to_json();
  write_text_file((fs::path(cfg.out_dir) / "report.json").string(),
                  result.report_json + "\n");

  const Checkpoint ckpt = make_checkpoint(tm, cfg, data_hash, result.report);
  result.checkpoint_path =
      (fs::path(cfg.out_dir) / "checkpoint.ckpt").string();
  save_checkpoint(ckpt, result.checkpoint_path);

  result.manifest_json = manifest_json(cfg, data_hash);
  write_text_file((fs::path(cfg.out_dir) / "manifest.json").string(),
                  result.manifest_json + "\n");
  return result;
}

Real metric_by_name(const EvalReport& report, const std::string& name) {
  const auto at = name.find('@');
  if (at == std::string::npos) {
    throw ConfigError("metric name must look like recall@100, got '" + name +
                      "'");
  }
  const std::string kind = name.substr(0, at);
  const int k = to_int("metric", name.substr(at + 1));
  auto lookup = [&](const std::map<int, Real>& m) {
    auto it = m.find(k);
    if (it == m.end()) {
      throw ConfigError("metric '" + name + "' not present in report");
    }
    return it->second;
  };
  if (kind == "recall") return lookup(report.recall);
  if (kind == "ndcg") return lookup(report.ndcg);
  if (kind == "item_recall") return lookup(report.item_recall);
  if (kind == "coverage") {
    auto it = report.coverage.find(k);
    if (it == report.coverage.end()) {
      throw ConfigError("metric '" + name + "' not present in report");
    }
    return it->second.mean;
  }
  throw ConfigError("unknown metric kind '" + kind + "'");
}

namespace {

// Validation-side metric for sweep selection; avoids the full report so the
// validation split does not need a full coverage chunk unless asked for.
Real selection_metric(const TrainedMethod& tm, const ExperimentConfig& cfg,
                      const EvalSplit& val, const std::string& name) {
  const auto at = name.find('@');
  if (at == std::string::npos) {
    throw ConfigError("metric name must look like recall@100, got '" + name +
                      "'");
  }
  const std::string kind = name.substr(0, at);
  int k = to_int("metric", name.substr(at + 1));
  k = std::min(k, val.foldin.n_items());
  const RankedLists ranked = build_ranked(tm, cfg, val, k);
  if (kind == "recall") return recall_at_k(ranked, val.heldout, k);
  if (kind == "ndcg") return ndcg_at_k(ranked, val.heldout, k);
  if (kind == "item_recall") return item_recall_at_k(ranked, val.heldout, k);
  if (kind == "coverage") {
    return coverage_at_k(ranked, k, cfg.coverage_batch).mean;
  }
  throw ConfigError("unknown metric kind '" + kind + "'");
}

void cartesian(const std::vector<std::pair<std::string,
                                           std::vector<std::string>>>& axes,
               std::size_t i, KvMap& current, std::vector<KvMap>& out) {
  if (i == axes.size()) {
    out.push_back(current);
    return;
  }
  for (const auto& v : axes[i].second) {
    current[axes[i].first] = v;
    cartesian(axes, i + 1, current, out);
  }
  current.erase(axes[i].first);
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const ExperimentConfig& base) {
  if (spec.grid.empty()) throw ConfigError("sweep grid is empty");
  if (base.out_dir.empty()) {
    throw ConfigError("config key 'out' is required for a sweep");
  }
  fs::create_directories(base.out_dir);

  std::vector<std::pair<std::string, std::vector<std::string>>> axes(
      spec.grid.begin(), spec.grid.end());
  std::vector<KvMap> combos;
  KvMap scratch;
  cartesian(axes, 0, scratch, combos);

  const KvMap base_kv = base.to_kv();
  const bool frontier =
      base.method == "cvar" || base.method == "rerank";

  std::string data_hash;
  const DatasetSplits splits = load_and_split(base, &data_hash);

  SweepResult result;
  std::string frontier_csv =
      "# test-set frontier (every configuration is test-evaluated)\n";
  {
    std::string header;
    for (const auto& [k, vs] : spec.grid) header += k + ",";
    frontier_csv += header + "coverage@100,recall@100\n";
  }

  for (const auto& overrides : combos) {
    SweepRow row;
    row.overrides = overrides;
    try {
      KvMap kv = base_kv;
      for (const auto& [k, v] : overrides) kv[k] = v;
      ExperimentConfig cfg = make_config(kv);
      validate_config(cfg);
      const TrainedMethod tm = train_method(cfg, splits);
      row.selection_value =
          selection_metric(tm, cfg, splits.val, spec.selection_metric);
      if (frontier) {
        const int k = std::min(100, splits.test.foldin.n_items());
        const RankedLists ranked = build_ranked(tm, cfg, splits.test, k);
        const Real cov = coverage_at_k(ranked, k, cfg.coverage_batch).mean;
        const Real rec = recall_at_k(ranked, splits.test.heldout, k);
        std::string line;
        for (const auto& [key, vs] : spec.grid) line += overrides.at(key) + ",";
        frontier_csv += line + fmt_real(cov) + "," + fmt_real(rec) + "\n";
      }
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
      std::cerr << "warning: sweep point failed: " << e.what() << "\n";
    }
    result.leaderboard.push_back(std::move(row));
  }

  std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     if (a.failed != b.failed) return !a.failed;
                     return a.selection_value > b.selection_value;
                   });

  std::string leaderboard_csv;
  for (const auto& [k, vs] : spec.grid) leaderboard_csv += k + ",";
  leaderboard_csv += spec.selection_metric + ",error\n";
  for (const auto& row : result.leaderboard) {
    for (const auto& [k, vs] : spec.grid) leaderboard_csv += row.overrides.at(k) + ",";
    leaderboard_csv += (row.failed ? "" : fmt_real(row.selection_value));
    leaderboard_csv += "," + row.error + "\n";
  }
  write_text_file((fs::path(base.out_dir) / "leaderboard.csv").string(),
                  leaderboard_csv);
  if (frontier) {
    write_text_file((fs::path(base.out_dir) / "frontier.csv").string(),
                    frontier_csv);
  }

  if (result.leaderboard.empty() || result.leaderboard.front().failed) {
    throw ConfigError("every sweep configuration failed");
  }
  result.best_overrides = result.leaderboard.front().overrides;
  KvMap best_kv = base_kv;
  for (const auto& [k, v] : result.best_overrides) best_kv[k] = v;
  best_kv["out"] = (fs::path(base.out_dir) / "best").string();
  result.best_run = run_experiment(make_config(best_kv));
  return result;
}

void export_figures_data(const std::string& checkpoint_path,
                         const std::string& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  KvMap kv;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.rfind("run.", 0) != 0) kv[k] = v;
  }
  const ExperimentConfig cfg = make_config(kv);
  fs::create_directories(out_dir);

  const DatasetSplits splits = load_and_split(cfg);
  const InteractionMatrix& train = splits.train;
  const auto& item_ids = train.item_ids();
  const int n = train.n_items();

  if (static_cast<int>(ckpt.item_freq.size()) != n) {
    throw IoError("checkpoint frequencies do not match the dataset");
  }

  // Per-item advantage scores over the full training set, at the
  // checkpointed model.
  if (ckpt.W.has_value()) {
    EaseModel model{*ckpt.W, cfg.lambda};
    const int k = std::min(cfg.advantage_k, n);
    Vector hit_count = Vector::Zero(n);
    Vector pos_count = Vector::Zero(n);
    constexpr int kChunk = 1024;
    for (int start = 0; start < train.n_users(); start += kChunk) {
      const int end = std::min(train.n_users(), start + kChunk);
      std::vector<int> users(end - start);
      std::iota(users.begin(), users.end(), start);
      const BinaryMatrix hits = hit_matrix(model, train, users, k);
      hit_count += hits.cast<Real>().colwise().sum().transpose();
      for (int u : users) {
        for (int j : train.row(u)) pos_count[j] += 1.0;
      }
    }
    std::string csv = "item_id,s_with,s_without,ema,frequency\n";
    for (int j = 0; j < n; ++j) {
      const Real s_with = hit_count[j] / train.n_users();
      const Real s_without =
          pos_count[j] > 0 ? hit_count[j] / pos_count[j] : 0.0;
      csv += item_ids[j] + "," + fmt_real(s_with) + "," +
             fmt_real(s_without) + ",";
      if (ckpt.ema.has_value()) csv += fmt_real((*ckpt.ema)[j]);
      csv += "," + std::to_string(ckpt.item_freq[j]) + "\n";
    }
    write_text_file((fs::path(out_dir) / "advantage.csv").string(), csv);
  } else {
    std::cerr << "warning: checkpoint has no model matrix; advantage export "
                 "skipped\n";
  }

  if (ckpt.adversary.has_value()) {
    AdversaryNet net(train.n_users(), static_cast<int>(ckpt.adversary->b1.size()),
                     ckpt.adversary->tau, ckpt.adversary->arch, 0);
    net.set_params({ckpt.adversary->w1, ckpt.adversary->b1,
                    ckpt.adversary->w2, ckpt.adversary->b2});
    const Vector alpha = normalized_weights(net.forward(train.to_sparse()));
    const Matrix coords = pca_project(train);
    std::string csv = "item_id,alpha,ema,pca_x,pca_y\n";
    for (int j = 0; j < n; ++j) {
      csv += item_ids[j] + "," + fmt_real(alpha[j]) + ",";
      if (ckpt.ema.has_value()) csv += fmt_real((*ckpt.ema)[j]);
      csv += "," + fmt_real(coords(j, 0)) + "," + fmt_real(coords(j, 1)) +
             "\n";
    }
    write_text_file((fs::path(out_dir) / "pca_weights.csv").string(), csv);
  } else {
    std::cerr << "warning: checkpoint has no adversary parameters; weight "
                 "export skipped\n";
  }

  if (!cfg.item_meta_path.empty()) {
    const auto meta = load_item_metadata(cfg.item_meta_path, item_ids);
    if (meta.has_value()) {
      TrainedMethod tm;
      tm.method = ckpt.require_meta("run.method");
      tm.train_freq = ckpt.item_freq;
      if (ckpt.W) tm.model = EaseModel{*ckpt.W, cfg.lambda};
      const int k = std::min(100, n);
      const RankedLists ranked = build_ranked(tm, cfg, splits.test, k);
      const auto rows =
          per_category_report(ranked, splits.test.heldout, *meta, k);
      std::string csv = "category,item_count,item_recall\n";
      for (const auto& row : rows) {
        csv += row.category + "," + std::to_string(row.item_count) + "," +
               fmt_real(row.item_recall) + "\n";
      }
      write_text_file((fs::path(out_dir) / "categories.csv").string(), csv);
    }
  } else {
    std::cerr << "warning: no item metadata configured; per-category export "
                 "skipped\n";
  }
}

}  // namespace longtail
