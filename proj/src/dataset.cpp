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

#include "longtail/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace longtail {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_real(const std::string& s, Real* out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

bool parse_int64(const std::string& s, std::int64_t* out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

bool looks_like_header(const std::vector<std::string>& fields) {
  static const std::set<std::string> kNames = {
      "user",   "userid",  "user_id", "item",      "itemid", "item_id",
      "movie",  "movieid", "movie_id", "rating",   "score",  "preference",
      "ts",     "time",    "timestamp"};
  int known = 0;
  for (const auto& f : fields) {
    std::string lower;
    for (char c : f) lower += static_cast<char>(std::tolower(c));
    if (kNames.count(lower)) ++known;
  }
  if (known >= 2) return true;
  // user,item,rating[,timestamp]: a non-numeric rating field also marks a
  // header line.
  if (fields.size() >= 3) {
    Real r;
    return !parse_real(fields[2], &r);
  }
  return false;
}

}  // namespace

InteractionMatrix::InteractionMatrix(std::vector<std::vector<int>> rows,
                                     int n_items,
                                     std::vector<std::string> user_ids,
                                     std::vector<std::string> item_ids)
    : rows_(std::move(rows)),
      n_items_(n_items),
      user_ids_(std::move(user_ids)),
      item_ids_(std::move(item_ids)) {
  item_freq_ = CountVector::Zero(n_items_);
  n_interactions_ = 0;
  for (const auto& row : rows_) {
    int prev = -1;
    for (int j : row) {
      if (j <= prev) throw ShapeError("row items must be sorted and unique");
      if (j < 0 || j >= n_items_) throw ShapeError("item index out of range");
      prev = j;
      ++item_freq_[j];
      ++n_interactions_;
    }
  }
}

bool InteractionMatrix::has(int user, int item) const {
  const auto& r = rows_[user];
  return std::binary_search(r.begin(), r.end(), item);
}

SparseMatrix InteractionMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<Real>> triplets;
  triplets.reserve(static_cast<std::size_t>(n_interactions_));
  for (int u = 0; u < n_users(); ++u) {
    for (int j : rows_[u]) triplets.emplace_back(u, j, 1.0);
  }
  SparseMatrix m(n_users(), n_items_);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

SparseMatrix InteractionMatrix::sparse_rows(std::span<const int> users) const {
  std::vector<Eigen::Triplet<Real>> triplets;
  for (std::size_t i = 0; i < users.size(); ++i) {
    for (int j : rows_[users[i]]) {
      triplets.emplace_back(static_cast<int>(i), j, 1.0);
    }
  }
  SparseMatrix m(static_cast<int>(users.size()), n_items_);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

Matrix InteractionMatrix::dense_rows(std::span<const int> users) const {
  Matrix m = Matrix::Zero(static_cast<int>(users.size()), n_items_);
  for (std::size_t i = 0; i < users.size(); ++i) {
    for (int j : rows_[users[i]]) m(static_cast<int>(i), j) = 1.0;
  }
  return m;
}

std::vector<RawEvent> ingest_csv(const std::string& path,
                                 Real rating_threshold) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  std::vector<RawEvent> events;
  std::string line;
  int line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (first_content_line) {
      first_content_line = false;
      if (looks_like_header(fields)) continue;
    }
    if (fields.size() < 2 || fields.size() > 4) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 2-4 fields, got " +
                       std::to_string(fields.size()));
    }
    RawEvent ev;
    ev.user_id = fields[0];
    ev.item_id = fields[1];
    if (ev.user_id.empty() || ev.item_id.empty()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": empty user or item id");
    }
    if (fields.size() >= 3 && !fields[2].empty()) {
      Real r;
      if (!parse_real(fields[2], &r)) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": bad rating '" + fields[2] + "'");
      }
      ev.rating = r;
    }
    if (fields.size() == 4 && !fields[3].empty()) {
      std::int64_t t;
      if (!parse_int64(fields[3], &t)) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": bad timestamp '" + fields[3] + "'");
      }
      ev.timestamp = t;
    }
    if (ev.rating.has_value() && *ev.rating < rating_threshold) continue;
    events.push_back(std::move(ev));
  }
  if (events.empty()) {
    throw EmptyDatasetError("no events retained from " + path);
  }
  return events;
}

InteractionMatrix build_matrix(const std::vector<RawEvent>& events,
                               int min_user_interactions,
                               int min_item_interactions) {
  if (events.empty()) throw EmptyDatasetError("no events");

  // Unique (user,item) pairs; binary interactions.
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& ev : events) pairs.emplace(ev.user_id, ev.item_id);

  std::map<std::string, std::vector<std::string>> by_user;
  for (const auto& [u, i] : pairs) by_user[u].push_back(i);

  std::unordered_set<std::string> dead_items;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = by_user.begin(); it != by_user.end();) {
      auto& items = it->second;
      items.erase(std::remove_if(items.begin(), items.end(),
                                 [&](const std::string& i) {
                                   return dead_items.count(i) > 0;
                                 }),
                  items.end());
      if (static_cast<int>(items.size()) < min_user_interactions) {
        it = by_user.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
    std::map<std::string, int> item_deg;
    for (const auto& [u, items] : by_user) {
      for (const auto& i : items) ++item_deg[i];
    }
    for (const auto& [i, deg] : item_deg) {
      if (deg < min_item_interactions && !dead_items.count(i)) {
        dead_items.insert(i);
        changed = true;
      }
    }
  }
  if (by_user.empty()) throw EmptyDatasetError("all rows filtered out");

  std::map<std::string, std::int64_t> item_deg;
  for (const auto& [u, items] : by_user) {
    for (const auto& i : items) ++item_deg[i];
  }

  // Item index 0 = most frequent; ties broken by ascending id.
  std::vector<std::pair<std::string, std::int64_t>> by_freq(item_deg.begin(),
                                                            item_deg.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::unordered_map<std::string, int> item_index;
  std::vector<std::string> item_ids;
  item_ids.reserve(by_freq.size());
  for (const auto& [id, deg] : by_freq) {
    item_index.emplace(id, static_cast<int>(item_ids.size()));
    item_ids.push_back(id);
  }

  std::vector<std::string> user_ids;
  std::vector<std::vector<int>> rows;
  user_ids.reserve(by_user.size());
  for (const auto& [u, items] : by_user) {
    user_ids.push_back(u);
    std::vector<int> row;
    row.reserve(items.size());
    for (const auto& i : items) row.push_back(item_index.at(i));
    std::sort(row.begin(), row.end());
    rows.push_back(std::move(row));
  }
  const int n_items = static_cast<int>(item_ids.size());
  return InteractionMatrix(std::move(rows), n_items, std::move(user_ids),
                           std::move(item_ids));
}

DatasetSplits split_users(const InteractionMatrix& m, const SplitSpec& spec) {
  const int n_eval = spec.n_val_users + spec.n_test_users;
  if (spec.n_val_users < 0 || spec.n_test_users < 0) {
    throw SplitError("negative eval user counts");
  }
  if (n_eval >= m.n_users()) {
    throw SplitError("n_val_users + n_test_users must be < n_users");
  }
  if (!(spec.heldout_fraction > 0.0 && spec.heldout_fraction < 1.0)) {
    throw SplitError("heldout_fraction must be in (0,1)");
  }

  // Users with a single interaction cannot donate both a fold-in and a
  // held-out item, so they stay in the training pool.
  std::vector<int> eligible;
  for (int u = 0; u < m.n_users(); ++u) {
    if (m.row(u).size() >= 2) eligible.push_back(u);
  }
  if (static_cast<int>(eligible.size()) < n_eval) {
    throw SplitError("not enough users with >=2 interactions to fill the "
                     "evaluation split");
  }

  std::mt19937_64 rng(spec.seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);

  std::vector<int> val_users(eligible.begin(),
                             eligible.begin() + spec.n_val_users);
  std::vector<int> test_users(eligible.begin() + spec.n_val_users,
                              eligible.begin() + n_eval);
  std::unordered_set<int> eval_set(val_users.begin(), val_users.end());
  eval_set.insert(test_users.begin(), test_users.end());

  std::vector<std::vector<int>> train_rows;
  std::vector<std::string> train_user_ids;
  for (int u = 0; u < m.n_users(); ++u) {
    if (eval_set.count(u)) continue;
    train_rows.push_back(m.row(u));
    train_user_ids.push_back(m.user_ids()[u]);
  }

  auto make_eval = [&](const std::vector<int>& users) {
    std::vector<std::vector<int>> fold_rows, held_rows;
    std::vector<std::string> ids;
    for (int u : users) {
      std::vector<int> items = m.row(u);
      std::shuffle(items.begin(), items.end(), rng);
      const int n = static_cast<int>(items.size());
      const int n_held = std::max(
          1, static_cast<int>(std::floor(spec.heldout_fraction * n)));
      if (n - n_held < 1) {
        throw SplitError("user " + m.user_ids()[u] +
                         " has no fold-in items left");
      }
      std::vector<int> held(items.begin(), items.begin() + n_held);
      std::vector<int> fold(items.begin() + n_held, items.end());
      std::sort(held.begin(), held.end());
      std::sort(fold.begin(), fold.end());
      held_rows.push_back(std::move(held));
      fold_rows.push_back(std::move(fold));
      ids.push_back(m.user_ids()[u]);
    }
    EvalSplit split;
    split.foldin = InteractionMatrix(std::move(fold_rows), m.n_items(), ids,
                                     m.item_ids());
    split.heldout = InteractionMatrix(std::move(held_rows), m.n_items(), ids,
                                      m.item_ids());
    return split;
  };

  DatasetSplits out;
  out.train = InteractionMatrix(std::move(train_rows), m.n_items(),
                                std::move(train_user_ids), m.item_ids());
  out.val = make_eval(val_users);
  out.test = make_eval(test_users);
  return out;
}

namespace {

constexpr char kMatrixMagic[4] = {'I', 'M', 'X', '1'};
constexpr std::uint32_t kMatrixVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw IoError("truncated matrix file");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string serialize_matrix(const InteractionMatrix& m) {
  std::string buf;
  buf.append(kMatrixMagic, 4);
  put<std::uint32_t>(buf, kMatrixVersion);
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.n_users()));
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.n_items()));
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.n_interactions()));
  for (int u = 0; u < m.n_users(); ++u) {
    const auto& row = m.row(u);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(row.size()));
    for (int j : row) put<std::uint32_t>(buf, static_cast<std::uint32_t>(j));
  }
  return buf;
}

void save_matrix(const InteractionMatrix& m, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    const std::string buf = serialize_matrix(m);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  nlohmann::json users = m.user_ids();
  nlohmann::json items = m.item_ids();
  std::ofstream ju(path + ".users.json");
  ju << users.dump() << "\n";
  std::ofstream ji(path + ".items.json");
  ji << items.dump() << "\n";
}

InteractionMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < 8 || std::memcmp(buf.data(), kMatrixMagic, 4) != 0) {
    throw IoError(path + " is not a matrix file");
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(buf, pos);
  if (version != kMatrixVersion) {
    throw IoError("unsupported matrix file version " +
                  std::to_string(version));
  }
  const auto n_users = take<std::uint64_t>(buf, pos);
  const auto n_items = take<std::uint64_t>(buf, pos);
  const auto nnz = take<std::uint64_t>(buf, pos);
  std::vector<std::vector<int>> rows(n_users);
  std::uint64_t seen = 0;
  for (auto& row : rows) {
    const auto count = take<std::uint32_t>(buf, pos);
    row.resize(count);
    for (auto& j : row) j = static_cast<int>(take<std::uint32_t>(buf, pos));
    seen += count;
  }
  if (seen != nnz) throw IoError("matrix file interaction count mismatch");

  auto load_ids = [](const std::string& p, std::size_t expected) {
    std::ifstream f(p);
    if (!f) throw IoError("missing id-map sidecar " + p);
    nlohmann::json j;
    f >> j;
    std::vector<std::string> ids = j.get<std::vector<std::string>>();
    if (ids.size() != expected) throw IoError("id map size mismatch in " + p);
    return ids;
  };
  auto user_ids = load_ids(path + ".users.json", n_users);
  auto item_ids = load_ids(path + ".items.json", n_items);
  return InteractionMatrix(std::move(rows), static_cast<int>(n_items),
                           std::move(user_ids), std::move(item_ids));
}

}  // namespace longtail
