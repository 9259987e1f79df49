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

#include "hetmatch/types.hpp"

namespace hetmatch {

NodeType relation_src(Relation r) {
  switch (r) {
    case Relation::kAdClickKw:
    case Relation::kAdBidKw:
    case Relation::kAdCoclickItem:
      return NodeType::kAd;
    case Relation::kItemClickKw:
      return NodeType::kItem;
  }
  return NodeType::kAd;
}

NodeType relation_dst(Relation r) {
  switch (r) {
    case Relation::kAdClickKw:
    case Relation::kAdBidKw:
    case Relation::kItemClickKw:
      return NodeType::kKeyword;
    case Relation::kAdCoclickItem:
      return NodeType::kItem;
  }
  return NodeType::kKeyword;
}

std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::kAd: return "ad";
    case NodeType::kKeyword: return "keyword";
    case NodeType::kItem: return "item";
  }
  return "?";
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::kAdClickKw: return "ad_click_kw";
    case Relation::kAdBidKw: return "ad_bid_kw";
    case Relation::kItemClickKw: return "item_click_kw";
    case Relation::kAdCoclickItem: return "ad_coclick_item";
  }
  return "?";
}

std::string_view to_string(View v) {
  switch (v) {
    case View::kAdClick: return "ad_click";
    case View::kAdBid: return "ad_bid";
    case View::kItemClick: return "item_click";
  }
  return "?";
}

std::string to_string(const NodeRef& n) {
  return std::string(to_string(n.type)) + ":" + std::to_string(n.id);
}

std::optional<NodeType> parse_node_type(std::string_view s) {
  for (NodeType t : kAllNodeTypes)
    if (s == to_string(t)) return t;
  return std::nullopt;
}

std::optional<Relation> parse_relation(std::string_view s) {
  for (Relation r : kAllRelations)
    if (s == to_string(r)) return r;
  return std::nullopt;
}

std::optional<View> parse_view(std::string_view s) {
  for (View v : kAllViews)
    if (s == to_string(v)) return v;
  return std::nullopt;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hetmatch
