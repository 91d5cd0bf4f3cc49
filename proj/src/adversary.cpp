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

#include "longtail/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

#include "longtail/metrics.hpp"

namespace longtail {

namespace {

constexpr Real kWeightFloor = 1e-12;
// Variance smoothing keeps the normalization differentiable at constant
// inputs, so a zero-initialized first layer can leave its starting point.
// Small enough that the output standard deviation still equals tau to
// within 1e-12 on unit-variance inputs.
constexpr Real kNormEpsilon = 1e-12;

struct NormCache {
  Matrix y_hat;   // (x - mean) / scale per column
  Vector scale;   // sqrt(population variance + epsilon) per column
};

struct ForwardCache {
  std::vector<Matrix> outputs;             // one per op
  std::vector<NormCache> norm;             // aligned with ops, empty otherwise
};

Matrix apply_norm(const Matrix& x, Real tau, NormCache* cache) {
  const Eigen::Index n = x.rows();
  Matrix out(n, x.cols());
  cache->y_hat.resize(n, x.cols());
  cache->scale.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Real mean = x.col(c).mean();
    const Real var = (x.col(c).array() - mean).square().sum() / n;
    const Real scale = std::sqrt(var + kNormEpsilon);
    cache->scale[c] = scale;
    cache->y_hat.col(c) = (x.col(c).array() - mean) / scale;
    out.col(c) = tau * cache->y_hat.col(c);
  }
  return out;
}

}  // namespace

Vector normalize(const Vector& x, Real tau) {
  if (x.size() < 2) throw ShapeError("normalize needs at least 2 entries");
  NormCache cache;
  return apply_norm(x, tau, &cache).col(0);
}

std::vector<AdvOp> parse_arch(const std::string& arch) {
  std::vector<AdvOp> ops;
  std::string token;
  std::stringstream ss(arch);
  while (std::getline(ss, token, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace),
                token.end());
    if (token.empty()) continue;
    if (token == "fc1") {
      ops.push_back(AdvOp::kFc1);
    } else if (token == "fc2") {
      ops.push_back(AdvOp::kFc2);
    } else if (token == "norm") {
      ops.push_back(AdvOp::kNorm);
    } else if (token == "tanh") {
      ops.push_back(AdvOp::kTanh);
    } else if (token == "sigmoid") {
      ops.push_back(AdvOp::kSigmoid);
    } else {
      throw ConfigError("unknown adversary op '" + token + "'");
    }
  }
  if (ops.empty() || ops.front() != AdvOp::kFc1) {
    throw ConfigError("adversary architecture must start with fc1");
  }
  const auto n_fc1 = std::count(ops.begin(), ops.end(), AdvOp::kFc1);
  const auto n_fc2 = std::count(ops.begin(), ops.end(), AdvOp::kFc2);
  if (n_fc1 != 1 || n_fc2 != 1) {
    throw ConfigError("adversary architecture needs exactly one fc1 and one "
                      "fc2");
  }
  return ops;
}

AdversaryNet::AdversaryNet(int n_inputs, int hidden, Real tau,
                           const std::string& arch, std::uint64_t seed)
    : n_inputs_(n_inputs),
      hidden_(hidden),
      tau_(tau),
      arch_string_(arch),
      ops_(parse_arch(arch)) {
  if (n_inputs < 1 || hidden < 1) {
    throw ConfigError("adversary needs positive input and hidden sizes");
  }
  if (tau <= 0) throw ConfigError("tau must be > 0");
  // The first layer consumes sparse 0/1 columns and starts at zero so that
  // every item begins with the same weight; the second layer gets a small
  // seeded uniform init.
  params_.w1 = Matrix::Zero(n_inputs, hidden);
  params_.b1 = Vector::Zero(hidden);
  params_.w2 = Vector::Zero(hidden);
  params_.b2 = 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> dist(-0.1, 0.1);
  for (int i = 0; i < hidden; ++i) params_.w2[i] = dist(rng);
}

void AdversaryNet::set_params(Params p) {
  if (p.w1.rows() != n_inputs_ || p.w1.cols() != hidden_ ||
      p.b1.size() != hidden_ || p.w2.size() != hidden_) {
    throw ShapeError("adversary parameter shapes do not match");
  }
  params_ = std::move(p);
}

void AdversaryNet::randomize(std::uint64_t seed, Real scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> dist(-scale, scale);
  for (Eigen::Index i = 0; i < params_.w1.size(); ++i) {
    params_.w1.data()[i] = dist(rng);
  }
  for (Eigen::Index i = 0; i < params_.b1.size(); ++i) {
    params_.b1[i] = dist(rng);
  }
  for (Eigen::Index i = 0; i < params_.w2.size(); ++i) {
    params_.w2[i] = dist(rng);
  }
  params_.b2 = dist(rng);
}

namespace {

ForwardCache run_forward(const AdversaryNet::Params& p,
                         const std::vector<AdvOp>& ops, Real tau,
                         const SparseMatrix& features) {
  ForwardCache cache;
  cache.norm.resize(ops.size());
  Matrix a;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    switch (ops[i]) {
      case AdvOp::kFc1:
        a = SparseMatrix(features.transpose()) * p.w1;
        a.rowwise() += p.b1.transpose();
        break;
      case AdvOp::kFc2:
        a = ((a * p.w2).array() + p.b2).matrix();
        break;
      case AdvOp::kNorm:
        a = apply_norm(a, tau, &cache.norm[i]);
        break;
      case AdvOp::kTanh:
        a = a.array().tanh().matrix();
        break;
      case AdvOp::kSigmoid:
        a = (1.0 / (1.0 + (-a.array()).exp())).matrix();
        break;
    }
    cache.outputs.push_back(a);
  }
  return cache;
}

}  // namespace

Vector AdversaryNet::forward(const SparseMatrix& features) const {
  if (features.rows() != n_inputs_) {
    throw ShapeError("feature matrix must have one row per training user");
  }
  const ForwardCache cache = run_forward(params_, ops_, tau_, features);
  return cache.outputs.back().col(0);
}

std::pair<Real, AdversaryNet::Params> AdversaryNet::objective_and_gradient(
    const SparseMatrix& features, const Vector& ema) const {
  if (features.rows() != n_inputs_) {
    throw ShapeError("feature matrix must have one row per training user");
  }
  const int n_items = static_cast<int>(features.cols());
  if (ema.size() != n_items) {
    throw ShapeError("EMA vector does not match item count");
  }
  const ForwardCache cache = run_forward(params_, ops_, tau_, features);
  const Vector raw = cache.outputs.back().col(0);
  const Real total = raw.sum();
  if (total < kWeightFloor) {
    throw DegenerateAdversaryError("raw adversary weights sum to ~0");
  }

  // J = sum_j alpha_j * (-ema_j) with alpha_j = n * raw_j / sum(raw).
  const Vector payoff = -ema;
  const Real objective =
      (static_cast<Real>(n_items) / total) * raw.dot(payoff);
  Vector grad_raw = (static_cast<Real>(n_items) / total) * payoff;
  grad_raw.array() -= objective / total;

  Params grads;
  grads.w1 = Matrix::Zero(n_inputs_, hidden_);
  grads.b1 = Vector::Zero(hidden_);
  grads.w2 = Vector::Zero(hidden_);
  grads.b2 = 0.0;

  Matrix g = grad_raw;
  for (int i = static_cast<int>(ops_.size()) - 1; i >= 0; --i) {
    const Matrix& out = cache.outputs[i];
    switch (ops_[i]) {
      case AdvOp::kSigmoid:
        g = (g.array() * out.array() * (1.0 - out.array())).matrix();
        break;
      case AdvOp::kTanh:
        g = (g.array() * (1.0 - out.array().square())).matrix();
        break;
      case AdvOp::kNorm: {
        const NormCache& nc = cache.norm[i];
        Matrix gx(g.rows(), g.cols());
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          const Real g_mean = g.col(c).mean();
          const Real gy_mean =
              (g.col(c).array() * nc.y_hat.col(c).array()).mean();
          gx.col(c) = ((tau_ / nc.scale[c]) *
                       (g.col(c).array() - g_mean -
                        nc.y_hat.col(c).array() * gy_mean))
                          .matrix();
        }
        g = std::move(gx);
        break;
      }
      case AdvOp::kFc2: {
        const Matrix& input = cache.outputs[i - 1];
        grads.w2 = input.transpose() * g.col(0);
        grads.b2 = g.col(0).sum();
        g = g.col(0) * params_.w2.transpose();
        break;
      }
      case AdvOp::kFc1: {
        grads.w1 = features * g;
        grads.b1 = g.colwise().sum().transpose();
        break;
      }
    }
  }
  return {objective, std::move(grads)};
}

Vector normalized_weights(const Vector& raw) {
  if (raw.size() == 0) throw ShapeError("empty weight vector");
  if (raw.minCoeff() <= 0.0) {
    throw DomainError("raw adversary weights must be strictly positive");
  }
  const Real total = raw.sum();
  if (total < 1e-12) {
    throw DegenerateAdversaryError("raw adversary weights sum to ~0");
  }
  return (static_cast<Real>(raw.size()) / total) * raw;
}

AdversaryOptimizer::AdversaryOptimizer(const AdversaryNet& net, Real momentum,
                                       Real grad_clip)
    : momentum_(momentum), grad_clip_(grad_clip) {
  velocity_.w1 = Matrix::Zero(net.n_inputs(), net.hidden());
  velocity_.b1 = Vector::Zero(net.hidden());
  velocity_.w2 = Vector::Zero(net.hidden());
  velocity_.b2 = 0.0;
}

Real AdversaryOptimizer::step(AdversaryNet& net, const SparseMatrix& features,
                              const Vector& ema, Real adv_lr) {
  auto [objective, grads] = net.objective_and_gradient(features, ema);
  if (!std::isfinite(objective) || !grads.w1.allFinite() ||
      !grads.b1.allFinite() || !grads.w2.allFinite() ||
      !std::isfinite(grads.b2)) {
    throw DivergenceError("non-finite adversary gradient");
  }
  if (grad_clip_ > 0) {
    const Real norm = std::sqrt(grads.w1.squaredNorm() +
                                grads.b1.squaredNorm() +
                                grads.w2.squaredNorm() +
                                grads.b2 * grads.b2);
    if (norm > grad_clip_) {
      const Real shrink = grad_clip_ / norm;
      grads.w1 *= shrink;
      grads.b1 *= shrink;
      grads.w2 *= shrink;
      grads.b2 *= shrink;
    }
  }
  velocity_.w1 = momentum_ * velocity_.w1 + grads.w1;
  velocity_.b1 = momentum_ * velocity_.b1 + grads.b1;
  velocity_.w2 = momentum_ * velocity_.w2 + grads.w2;
  velocity_.b2 = momentum_ * velocity_.b2 + grads.b2;
  AdversaryNet::Params p = net.params();
  p.w1 += adv_lr * velocity_.w1;
  p.b1 += adv_lr * velocity_.b1;
  p.w2 += adv_lr * velocity_.w2;
  p.b2 += adv_lr * velocity_.b2;
  net.set_params(std::move(p));
  return objective;
}

Real adversary_step(AdversaryNet& net, const SparseMatrix& features,
                    const Vector& ema, Real adv_lr) {
  AdversaryOptimizer opt(net, 0.0);
  return opt.step(net, features, ema, adv_lr);
}

PositResult train_posit(const InteractionMatrix& train, const EvalSplit& val,
                        const PositConfig& cfg, const PositObserver& observer,
                        const PositEpochCallback& on_epoch) {
  const int n = train.n_items();
  EaseModel model{Matrix::Zero(n, n), cfg.lambda};
  AdversaryNet net(train.n_users(), cfg.hidden, cfg.tau, cfg.arch,
                   cfg.ease.seed ^ 0x9e3779b97f4a7c15ULL);
  AdvantageState advantage =
      make_advantage_state(n, cfg.ema_momentum, cfg.k, cfg.variant);
  SgdTrainer trainer(cfg.ease, n);
  AdversaryOptimizer adv_opt(net, cfg.ease.momentum, cfg.adv_grad_clip);
  const SparseMatrix features = train.to_sparse();

  PositResult result{model, net, advantage.ema, {}, -1};
  Real best = -1.0;
  const int val_k = std::min(100, n);

  for (int epoch = 0; epoch < cfg.ease.epochs; ++epoch) {
    const auto batches = trainer.make_batches(train.n_users());
    Real loss_total = 0.0;
    int loss_count = 0;
    Real objective = 0.0;
    int nan_streak = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& users = batches[b];
      const BinaryMatrix hits = hit_matrix(model, train, users, cfg.k);
      const Vector scores =
          advantage_scores(hits, train, users, cfg.variant);
      ema_update(advantage, scores);
      const Vector alpha = normalized_weights(net.forward(features));

      Real batch_loss;
      try {
        batch_loss = trainer.batch_step(model, train, users, alpha);
        nan_streak = 0;
        loss_total += batch_loss;
        ++loss_count;
      } catch (const DivergenceError& e) {
        ++nan_streak;
        std::cerr << "warning: " << e.what() << " (epoch " << epoch << ")\n";
        if (nan_streak >= 3) {
          throw DivergenceError(std::string(e.what()) +
                                "; 3 consecutive non-finite batches");
        }
        continue;
      }
      objective = adv_opt.step(net, features, advantage.ema, cfg.adv_lr);
      if (observer) {
        observer(PositBatchInfo{epoch, static_cast<int>(b), batch_loss,
                                objective, alpha, advantage.ema, model});
      }
    }
    trainer.end_epoch();

    const RankedLists ranked = rank_eval_users(model.W, val, val_k);
    const Real val_recall = recall_at_k(ranked, val.heldout, val_k);
    result.history.push_back(
        {loss_count > 0 ? loss_total / loss_count : 0.0, objective,
         val_recall});
    if (on_epoch) on_epoch(epoch, result.history.back());
    if (val_recall > best) {
      best = val_recall;
      result.model = model;
      result.net = net;
      result.ema = advantage.ema;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace longtail
