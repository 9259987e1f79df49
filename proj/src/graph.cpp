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

#include "hetmatch/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <tuple>

#include "text.hpp"

namespace hetmatch {

namespace text {

void write_file_atomic(const std::string& path, std::string_view contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kData, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      out.close();
      fs::remove(tmp);
      fail(ErrorCode::kData, "write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

}  // namespace text

const std::string* NodeRecord::feature(std::string_view name) const {
  for (const auto& [k, v] : features)
    if (k == name) return &v;
  return nullptr;
}

void Metapath::validate() const {
  if (steps.empty()) fail(ErrorCode::kUsage, "metapath '" + name + "' has no steps");
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i - 1].to() != steps[i].from())
      fail(ErrorCode::kUsage, "metapath '" + name + "' step " + std::to_string(i) +
                                  " does not chain with the previous step");
  }
}

namespace {

constexpr MetapathStep fwd(Relation r) { return {r, false}; }
constexpr MetapathStep rev(Relation r) { return {r, true}; }

std::vector<Metapath> all_standard_paths() {
  using R = Relation;
  return {
      {"a-click-q-click-a", {fwd(R::kAdClickKw), rev(R::kAdClickKw)}},
      {"a-bid-q-click-a", {fwd(R::kAdBidKw), rev(R::kAdClickKw)}},
      {"a-coclick-i-click-q", {fwd(R::kAdCoclickItem), fwd(R::kItemClickKw)}},
      {"q-click-a-click-q", {rev(R::kAdClickKw), fwd(R::kAdClickKw)}},
      {"q-click-a-bid-q", {rev(R::kAdClickKw), fwd(R::kAdBidKw)}},
      {"q-click-i-coclick-a", {rev(R::kItemClickKw), rev(R::kAdCoclickItem)}},
  };
}

bool in_group(const Metapath& p, MetapathGroup group) {
  if (group == MetapathGroup::kAll) return true;
  const bool item_based = std::any_of(p.steps.begin(), p.steps.end(), [](const MetapathStep& s) {
    return s.relation == Relation::kItemClickKw || s.relation == Relation::kAdCoclickItem;
  });
  return group == MetapathGroup::kItem ? item_based : !item_based;
}

std::vector<Metapath> tower_paths(NodeType source, MetapathGroup group) {
  std::vector<Metapath> out;
  for (auto& p : all_standard_paths())
    if (p.source_type() == source && in_group(p, group)) out.push_back(std::move(p));
  return out;
}

}  // namespace

std::vector<Metapath> ad_tower_metapaths(MetapathGroup group) {
  return tower_paths(NodeType::kAd, group);
}

std::vector<Metapath> keyword_tower_metapaths(MetapathGroup group) {
  return tower_paths(NodeType::kKeyword, group);
}

Metapath metapath_by_name(std::string_view name) {
  for (auto& p : all_standard_paths())
    if (p.name == name) return p;
  fail(ErrorCode::kUsage, "unknown metapath '" + std::string(name) + "'");
}

std::optional<std::uint32_t> HeteroGraph::index_of(const NodeRef& n) const {
  const auto& v = ids_[idx(n.type)];
  auto it = std::lower_bound(v.begin(), v.end(), n.id);
  if (it == v.end() || *it != n.id) return std::nullopt;
  return static_cast<std::uint32_t>(it - v.begin());
}

std::uint32_t HeteroGraph::require_index(const NodeRef& n) const {
  auto i = index_of(n);
  if (!i) fail(ErrorCode::kData, "unknown node " + to_string(n));
  return *i;
}

std::span<const Neighbor> HeteroGraph::neighbors(std::uint32_t index,
                                                 const MetapathStep& step) const {
  const Csr& c = csr(step.relation, step.reverse);
  if (c.offsets.empty()) return {};
  const auto begin = c.offsets[index];
  const auto end = c.offsets[index + 1];
  return std::span<const Neighbor>(c.entries.data() + begin, end - begin);
}

std::span<const Neighbor> HeteroGraph::top_neighbors(std::uint32_t index,
                                                     const MetapathStep& step,
                                                     std::size_t m) const {
  auto all = neighbors(index, step);
  return all.first(std::min(m, all.size()));
}

std::size_t HeteroGraph::degree(const NodeRef& n, Relation r) const {
  const std::uint32_t i = require_index(n);
  if (n.type == relation_src(r)) return neighbors(i, {r, false}).size();
  if (n.type == relation_dst(r)) return neighbors(i, {r, true}).size();
  return 0;
}

std::uint64_t HeteroGraph::fingerprint() const {
  std::uint64_t h = 0x51ed270b27a1c3f5ULL;
  auto feed = [&h](std::uint64_t x) { h = mix64(h ^ x); };
  for (const auto& v : ids_) {
    feed(v.size());
    for (auto id : v) feed(id);
  }
  for (const auto& c : adj_) {
    feed(c.offsets.size());
    for (auto o : c.offsets) feed(o);
    for (const auto& e : c.entries) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(e.weight));
      std::memcpy(&bits, &e.weight, sizeof(bits));
      feed(e.index);
      feed(bits);
    }
  }
  return h;
}

bool HeteroGraph::same_structure(const HeteroGraph& other) const {
  if (ids_ != other.ids_) return false;
  for (std::size_t k = 0; k < adj_.size(); ++k) {
    const Csr& a = adj_[k];
    const Csr& b = other.adj_[k];
    if (a.offsets != b.offsets || a.entries.size() != b.entries.size()) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      if (a.entries[i].index != b.entries[i].index) return false;
      if (std::memcmp(&a.entries[i].weight, &b.entries[i].weight, sizeof(double)) != 0)
        return false;
    }
  }
  return true;
}

HeteroGraph ingest(std::span<const EdgeRecord> edges, std::span<const NodeRecord> nodes) {
  HeteroGraph g;

  std::array<std::vector<const NodeRecord*>, kNumNodeTypes> by_type;
  for (const auto& n : nodes) by_type[HeteroGraph::idx(n.node.type)].push_back(&n);
  for (int t = 0; t < kNumNodeTypes; ++t) {
    auto& list = by_type[t];
    std::stable_sort(list.begin(), list.end(), [](const NodeRecord* a, const NodeRecord* b) {
      return a->node.id < b->node.id;
    });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i]->node.id == list[i - 1]->node.id)
        fail(ErrorCode::kData, list[i]->location + ": duplicate node record " +
                                   to_string(list[i]->node));
    }
    g.ids_[t].reserve(list.size());
    g.records_[t].reserve(list.size());
    for (const NodeRecord* r : list) {
      g.ids_[t].push_back(r->node.id);
      g.records_[t].push_back(*r);
    }
  }

  // (relation, src index, dst index) -> merged weight; std::map gives a
  // deterministic iteration order independent of input order.
  std::map<std::tuple<int, std::uint32_t, std::uint32_t>, double> merged;
  for (const auto& e : edges) {
    const std::string where = e.location.empty() ? std::string("edge") : e.location;
    if (e.src.type != relation_src(e.relation) || e.dst.type != relation_dst(e.relation))
      fail(ErrorCode::kData, where + ": relation " + std::string(to_string(e.relation)) +
                                 " cannot connect " + std::string(to_string(e.src.type)) +
                                 " to " + std::string(to_string(e.dst.type)));
    if (!std::isfinite(e.weight) || e.weight < 0.0)
      fail(ErrorCode::kData, where + ": edge weight must be finite and non-negative");
    auto si = g.index_of(e.src);
    auto di = g.index_of(e.dst);
    if (!si) fail(ErrorCode::kData, where + ": dangling endpoint " + to_string(e.src));
    if (!di) fail(ErrorCode::kData, where + ": dangling endpoint " + to_string(e.dst));
    merged[{static_cast<int>(e.relation), *si, *di}] += e.weight;
  }

  for (Relation r : kAllRelations) {
    const int ri = static_cast<int>(r);
    for (int dir = 0; dir < 2; ++dir) {
      const NodeType from = dir == 0 ? relation_src(r) : relation_dst(r);
      const NodeType to = dir == 0 ? relation_dst(r) : relation_src(r);
      auto& c = g.adj_[ri * 2 + dir];
      const std::size_t n = g.ids_[HeteroGraph::idx(from)].size();
      std::vector<std::vector<Neighbor>> lists(n);
      for (auto it = merged.lower_bound({ri, 0, 0});
           it != merged.end() && std::get<0>(it->first) == ri; ++it) {
        const auto [rr, s, d] = it->first;
        if (dir == 0)
          lists[s].push_back({d, it->second});
        else
          lists[d].push_back({s, it->second});
      }
      c.offsets.assign(n + 1, 0);
      for (std::size_t i = 0; i < n; ++i) {
        auto& l = lists[i];
        // ascending index is ascending node id
        std::sort(l.begin(), l.end(), [](const Neighbor& a, const Neighbor& b) {
          if (a.weight != b.weight) return a.weight > b.weight;
          return a.index < b.index;
        });
        c.offsets[i + 1] = c.offsets[i] + static_cast<std::uint32_t>(l.size());
        c.entries.insert(c.entries.end(), l.begin(), l.end());
      }
      (void)to;
    }
    g.edge_counts_[ri] = g.adj_[ri * 2].entries.size();
  }
  return g;
}

std::vector<std::vector<HopEntry>> metapath_neighbors(const HeteroGraph& g, const NodeRef& v,
                                                      const Metapath& path, std::size_t m) {
  path.validate();
  if (v.type != path.source_type())
    fail(ErrorCode::kUsage, "node " + to_string(v) + " cannot start metapath " + path.name);
  std::vector<std::vector<HopEntry>> hops;
  std::vector<std::uint32_t> frontier{g.require_index(v)};
  for (std::size_t h = 0; h < path.steps.size(); ++h) {
    const auto& step = path.steps[h];
    std::vector<HopEntry> layer;
    std::vector<std::uint32_t> next;
    for (std::size_t p = 0; p < frontier.size(); ++p) {
      for (const Neighbor& nb : g.top_neighbors(frontier[p], step, m)) {
        layer.push_back({g.node_at(step.to(), nb.index), h == 0 ? -1 : static_cast<int>(p),
                         nb.weight});
        next.push_back(nb.index);
      }
    }
    hops.push_back(std::move(layer));
    frontier = std::move(next);
  }
  return hops;
}

std::span<const Neighbor> influential_neighbor_span(const HeteroGraph& g, NodeType v_type,
                                                    std::uint32_t index, std::size_t kappa) {
  switch (v_type) {
    case NodeType::kAd:
      return g.top_neighbors(index, {Relation::kAdBidKw, false}, kappa);
    case NodeType::kKeyword:
      return g.top_neighbors(index, {Relation::kAdBidKw, true}, kappa);
    case NodeType::kItem:
      break;
  }
  fail(ErrorCode::kUsage, "influential neighbors are defined for ads and keywords only");
}

std::vector<NodeRef> influential_neighbors(const HeteroGraph& g, const NodeRef& v,
                                           std::size_t kappa) {
  if (v.type == NodeType::kItem)
    fail(ErrorCode::kUsage, "influential neighbors are defined for ads and keywords only");
  const NodeType other = v.type == NodeType::kAd ? NodeType::kKeyword : NodeType::kAd;
  std::vector<NodeRef> out;
  for (const Neighbor& nb : influential_neighbor_span(g, v.type, g.require_index(v), kappa))
    out.push_back(g.node_at(other, nb.index));
  return out;
}

// --- file formats -----------------------------------------------------------

namespace {

NodeRef parse_node_ref(std::string_view type, std::string_view id, const std::string& where) {
  auto t = parse_node_type(type);
  if (!t) fail(ErrorCode::kData, where + ": unknown node type '" + std::string(type) + "'");
  auto v = text::parse_u64(id);
  if (!v) fail(ErrorCode::kData, where + ": bad node id '" + std::string(id) + "'");
  return {*t, *v};
}

}  // namespace

std::vector<EdgeRecord> parse_edge_lines(std::string_view body, const std::string& source) {
  std::vector<EdgeRecord> out;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    auto f = text::split_ws(t);
    if (f.size() != 6) fail(ErrorCode::kData, where + ": expected 6 fields, got " +
                                                  std::to_string(f.size()));
    EdgeRecord e;
    e.src = parse_node_ref(f[0], f[1], where);
    auto r = parse_relation(f[2]);
    if (!r) fail(ErrorCode::kData, where + ": unknown relation '" + std::string(f[2]) + "'");
    e.relation = *r;
    e.dst = parse_node_ref(f[3], f[4], where);
    auto w = text::parse_double(f[5]);
    if (!w) fail(ErrorCode::kData, where + ": bad weight '" + std::string(f[5]) + "'");
    e.weight = *w;
    e.location = where;
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<NodeRecord> parse_node_lines(std::string_view body, const std::string& source) {
  std::vector<NodeRecord> out;
  text::for_each_line(body, [&](std::size_t line_no, std::string_view line) {
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    auto f = text::split_ws(t);
    if (f.size() < 4) fail(ErrorCode::kData, where + ": expected at least 4 fields");
    NodeRecord n;
    n.node = parse_node_ref(f[0], f[1], where);
    if (f[2] != "-") {
      auto c = text::parse_u64(f[2]);
      if (!c) fail(ErrorCode::kData, where + ": bad category '" + std::string(f[2]) + "'");
      n.category = *c;
    }
    auto sc = text::parse_double(f[3]);
    if (!sc || !std::isfinite(*sc) || *sc < 0)
      fail(ErrorCode::kData, where + ": bad searched_count '" + std::string(f[3]) + "'");
    n.searched_count = *sc;
    for (std::size_t i = 4; i < f.size(); ++i) {
      auto eq = f[i].find('=');
      if (eq == std::string_view::npos || eq == 0)
        fail(ErrorCode::kData, where + ": feature '" + std::string(f[i]) + "' is not name=value");
      n.features.emplace_back(std::string(f[i].substr(0, eq)), std::string(f[i].substr(eq + 1)));
    }
    n.location = where;
    out.push_back(std::move(n));
  });
  return out;
}

std::vector<EdgeRecord> read_edge_file(const std::string& path) {
  return parse_edge_lines(text::read_file(path), path);
}

std::vector<NodeRecord> read_node_file(const std::string& path) {
  return parse_node_lines(text::read_file(path), path);
}

std::string format_edge(const EdgeRecord& e) {
  std::string s;
  s += to_string(e.src.type);
  s += '\t';
  s += std::to_string(e.src.id);
  s += '\t';
  s += to_string(e.relation);
  s += '\t';
  s += to_string(e.dst.type);
  s += '\t';
  s += std::to_string(e.dst.id);
  s += '\t';
  s += text::exact(e.weight);
  return s;
}

std::string format_node(const NodeRecord& n) {
  std::string s;
  s += to_string(n.node.type);
  s += '\t';
  s += std::to_string(n.node.id);
  s += '\t';
  s += n.category ? std::to_string(*n.category) : std::string("-");
  s += '\t';
  s += text::exact(n.searched_count);
  for (const auto& [k, v] : n.features) {
    s += '\t';
    s += k;
    s += '=';
    s += v;
  }
  return s;
}

}  // namespace hetmatch
