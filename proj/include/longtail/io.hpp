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
#include <map>
#include <optional>
#include <string>

#include "longtail/types.hpp"

namespace longtail {

// Flat adversary parameter dump; kept free of the network class so the
// checkpoint format does not depend on training code.
struct AdversaryParamsDump {
  std::string arch;
  Real tau = 0.0;
  Matrix w1;
  Vector b1;
  Vector w2;
  Real b2 = 0.0;
};

// One versioned archive holding everything a method needs at evaluation
// time: metadata (JSON), the similarity matrix when the method has one,
// adversary parameters and the advantage EMA for adversarial runs, and the
// training item frequencies (used by popularity ranking and re-sorting).
struct Checkpoint {
  std::map<std::string, std::string> meta;  // method, config echo, metrics
  std::optional<Matrix> W;
  std::optional<AdversaryParamsDump> adversary;
  std::optional<Vector> ema;
  CountVector item_freq;

  const std::string& require_meta(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a 64-bit content hash, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace longtail
