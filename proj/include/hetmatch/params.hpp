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

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hetmatch/types.hpp"

namespace hetmatch {

struct Tensor {
  std::string name;
  Mat value;
};

/// Named trainable tensors in creation order.
class ParamStore {
 public:
  int add(std::string name, Eigen::Index rows, Eigen::Index cols);
  int find(std::string_view name) const;
  int id(std::string_view name) const;

  std::size_t size() const { return tensors_.size(); }
  Tensor& operator[](int i) { return tensors_[static_cast<std::size_t>(i)]; }
  const Tensor& operator[](int i) const { return tensors_[static_cast<std::size_t>(i)]; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t scalar_count() const;

  bool bit_equal(const ParamStore& other) const;

 private:
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, int> by_name_;
};

using Gradients = std::vector<Mat>;
Gradients zeros_like(const ParamStore& p);

/// Checkpoint container: string metadata plus every tensor by name, stored
/// as raw little-endian doubles so a save/load round trip is bit exact.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  ParamStore params;
};

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hetmatch
