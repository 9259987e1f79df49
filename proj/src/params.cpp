/**
 * Copyright 2026 The HetMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hetmatch/params.hpp"

#include <cstring>

#include "text.hpp"

namespace hetmatch {

int ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (by_name_.count(name)) fail(ErrorCode::kInternal, "duplicate tensor name " + name);
  const int id = static_cast<int>(tensors_.size());
  by_name_.emplace(name, id);
  tensors_.push_back({std::move(name), Mat::Zero(rows, cols)});
  return id;
}

int ParamStore::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? -1 : it->second;
}

int ParamStore::id(std::string_view name) const {
  const int i = find(name);
  if (i < 0) fail(ErrorCode::kData, "missing tensor " + std::string(name));
  return i;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ParamStore::bit_equal(const ParamStore& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
    if (std::memcmp(a.value.data(), b.value.data(),
                    sizeof(double) * static_cast<std::size_t>(a.value.size())) != 0)
      return false;
  }
  return true;
}

Gradients zeros_like(const ParamStore& p) {
  Gradients g;
  g.reserve(p.size());
  for (const auto& t : p.tensors()) g.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
  return g;
}

namespace {

constexpr char kMagic[8] = {'H', 'M', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, std::string_view s) {
  put_u64(out, s.size());
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto v = b_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) fail(ErrorCode::kData, "checkpoint is truncated");
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, c.meta.size());
  for (const auto& [k, v] : c.meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u64(out, c.params.size());
  for (const auto& t : c.params.tensors()) {
    put_str(out, t.name);
    put_u64(out, static_cast<std::uint64_t>(t.value.rows()));
    put_u64(out, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      std::uint64_t bits;
      const double d = t.value.data()[i];
      std::memcpy(&bits, &d, sizeof(bits));
      put_u64(out, bits);
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
    fail(ErrorCode::kData, "not a hetmatch checkpoint (bad magic)");
  Checkpoint c;
  const auto nmeta = r.u64();
  for (std::uint64_t i = 0; i < nmeta; ++i) {
    auto k = r.str();
    c.meta[k] = r.str();
  }
  const auto ntensors = r.u64();
  for (std::uint64_t i = 0; i < ntensors; ++i) {
    auto name = r.str();
    const auto rows = r.u64();
    const auto cols = r.u64();
    const int id = c.params.add(name, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    Mat& m = c.params[id].value;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      const std::uint64_t bits = r.u64();
      std::memcpy(m.data() + j, &bits, sizeof(double));
    }
  }
  if (!r.done()) fail(ErrorCode::kData, "checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  text::write_file_atomic(path, serialize_checkpoint(c));
}

Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(text::read_file(path));
}

}  // namespace hetmatch
