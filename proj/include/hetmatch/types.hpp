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

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace hetmatch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

enum class NodeType : std::uint8_t { kAd = 0, kKeyword = 1, kItem = 2 };
inline constexpr int kNumNodeTypes = 3;
inline constexpr std::array<NodeType, kNumNodeTypes> kAllNodeTypes = {
    NodeType::kAd, NodeType::kKeyword, NodeType::kItem};

struct NodeRef {
  NodeType type = NodeType::kAd;
  std::uint64_t id = 0;

  friend bool operator==(const NodeRef&, const NodeRef&) = default;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

enum class Relation : std::uint8_t {
  kAdClickKw = 0,
  kAdBidKw = 1,
  kItemClickKw = 2,
  kAdCoclickItem = 3,
};
inline constexpr int kNumRelations = 4;
inline constexpr std::array<Relation, kNumRelations> kAllRelations = {
    Relation::kAdClickKw, Relation::kAdBidKw, Relation::kItemClickKw,
    Relation::kAdCoclickItem};

NodeType relation_src(Relation r);
NodeType relation_dst(Relation r);

/// Training objective / embedding space.
enum class View : std::uint8_t { kAdClick = 0, kAdBid = 1, kItemClick = 2 };
inline constexpr int kNumViews = 3;
inline constexpr std::array<View, kNumViews> kAllViews = {
    View::kAdClick, View::kAdBid, View::kItemClick};

std::string_view to_string(NodeType t);
std::string_view to_string(Relation r);
std::string_view to_string(View v);
std::string to_string(const NodeRef& n);

std::optional<NodeType> parse_node_type(std::string_view s);
std::optional<Relation> parse_relation(std::string_view s);
std::optional<View> parse_view(std::string_view s);

/// splitmix64 finalizer; used for stable hashing and seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix64(mix64(base ^ mix64(a)) + b);
}

/// FNV-1a over bytes.
std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace hetmatch

template <>
struct std::hash<hetmatch::NodeRef> {
  std::size_t operator()(const hetmatch::NodeRef& n) const noexcept {
    return hetmatch::mix64(n.id * 4 + static_cast<std::uint64_t>(n.type));
  }
};
