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

#include "longtail/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace longtail {

namespace {

constexpr char kCkptMagic[4] = {'T', 'R', 'C', '1'};
constexpr std::uint32_t kCkptVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  put_bytes(out, s.data(), s.size());
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  put_bytes(out, m.data(), sizeof(Real) * m.size());
}

void put_vector(std::ostream& out, const Vector& v) {
  put<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  put_bytes(out, v.data(), sizeof(Real) * v.size());
}

template <typename T>
T take(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

std::string take_string(std::istream& in) {
  const auto n = take<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("truncated checkpoint");
  return s;
}

Matrix take_matrix(std::istream& in) {
  const auto rows = take<std::uint64_t>(in);
  const auto cols = take<std::uint64_t>(in);
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(Real) * m.size()));
  if (!in) throw IoError("truncated checkpoint");
  return m;
}

Vector take_vector(std::istream& in) {
  const auto n = take<std::uint64_t>(in);
  Vector v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(Real) * v.size()));
  if (!in) throw IoError("truncated checkpoint");
  return v;
}

}  // namespace

const std::string& Checkpoint::require_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) {
    throw IoError("checkpoint is missing metadata key '" + key + "'");
  }
  return it->second;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCkptMagic, 4);
  put<std::uint32_t>(out, kCkptVersion);

  const nlohmann::json meta = ckpt.meta;
  put_string(out, meta.dump());

  put<std::uint8_t>(out, ckpt.W.has_value() ? 1 : 0);
  if (ckpt.W) put_matrix(out, *ckpt.W);

  put<std::uint8_t>(out, ckpt.adversary.has_value() ? 1 : 0);
  if (ckpt.adversary) {
    put_string(out, ckpt.adversary->arch);
    put<Real>(out, ckpt.adversary->tau);
    put_matrix(out, ckpt.adversary->w1);
    put_vector(out, ckpt.adversary->b1);
    put_vector(out, ckpt.adversary->w2);
    put<Real>(out, ckpt.adversary->b2);
  }

  put<std::uint8_t>(out, ckpt.ema.has_value() ? 1 : 0);
  if (ckpt.ema) put_vector(out, *ckpt.ema);

  put<std::uint64_t>(out, static_cast<std::uint64_t>(ckpt.item_freq.size()));
  put_bytes(out, ckpt.item_freq.data(),
            sizeof(std::int64_t) * ckpt.item_freq.size());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0) {
    throw IoError(path + " is not a checkpoint file");
  }
  const auto version = take<std::uint32_t>(in);
  if (version != kCkptVersion) {
    throw IoError("unsupported checkpoint version " +
                  std::to_string(version));
  }
  Checkpoint ckpt;
  const nlohmann::json meta = nlohmann::json::parse(take_string(in));
  ckpt.meta = meta.get<std::map<std::string, std::string>>();

  if (take<std::uint8_t>(in)) ckpt.W = take_matrix(in);
  if (take<std::uint8_t>(in)) {
    AdversaryParamsDump adv;
    adv.arch = take_string(in);
    adv.tau = take<Real>(in);
    adv.w1 = take_matrix(in);
    adv.b1 = take_vector(in);
    adv.w2 = take_vector(in);
    adv.b2 = take<Real>(in);
    ckpt.adversary = std::move(adv);
  }
  if (take<std::uint8_t>(in)) ckpt.ema = take_vector(in);

  const auto n_freq = take<std::uint64_t>(in);
  ckpt.item_freq.resize(n_freq);
  in.read(reinterpret_cast<char*>(ckpt.item_freq.data()),
          static_cast<std::streamsize>(sizeof(std::int64_t) * n_freq));
  if (!in) throw IoError("truncated checkpoint");
  return ckpt;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace longtail
