#include "distcache/hashing.hpp"

#include <algorithm>
#include <stdexcept>

namespace distcache {

LayerMap::LayerMap(std::uint32_t node_count)
    : node_count_(node_count), bucket_count_(node_count) {
  if (node_count == 0) throw std::invalid_argument("LayerMap: node_count must be >= 1");
}

LayerMap LayerMap::with_weights(const std::vector<std::uint32_t>& weights) {
  if (weights.empty()) throw std::invalid_argument("LayerMap: empty weight vector");
  LayerMap map;
  map.node_count_ = static_cast<std::uint32_t>(weights.size());
  for (std::uint32_t node = 0; node < weights.size(); ++node) {
    if (weights[node] == 0)
      throw std::invalid_argument("LayerMap: node weight must be >= 1");
    for (std::uint32_t i = 0; i < weights[node]; ++i) map.bucket_to_node_.push_back(node);
  }
  map.bucket_count_ = static_cast<std::uint32_t>(map.bucket_to_node_.size());
  bool all_one = map.bucket_count_ == map.node_count_;
  if (all_one) map.bucket_to_node_.clear();
  return map;
}

std::uint32_t LayerMap::node_of_bucket(std::uint32_t bucket) const {
  return bucket_to_node_.empty() ? bucket : bucket_to_node_[bucket];
}

Partitioner::Partitioner(std::uint64_t seed0, std::uint64_t seed1,
                         std::uint32_t m_upper, std::uint32_t m_lower)
    : Partitioner(seed0, seed1, LayerMap(m_upper), LayerMap(m_lower)) {}

Partitioner::Partitioner(std::uint64_t seed0, std::uint64_t seed1, LayerMap upper,
                         LayerMap lower)
    : seed0_(seed0), seed1_(seed1), upper_(std::move(upper)), lower_(std::move(lower)) {
  if (seed0_ == seed1_)
    throw std::invalid_argument("Partitioner: seeds must differ (hash independence)");
}

std::uint32_t Partitioner::upper_of(const ObjectId& key) const {
  return upper_.node_of_bucket(bucket_of(hash_key(seed0_, key), upper_.bucket_count()));
}

std::uint32_t Partitioner::lower_of(const ObjectId& key) const {
  return lower_.node_of_bucket(bucket_of(hash_key(seed1_, key), lower_.bucket_count()));
}

std::pair<std::uint32_t, std::uint32_t> Partitioner::locate(const ObjectId& key) const {
  return {upper_of(key), lower_of(key)};
}

std::optional<std::uint32_t> BipartiteGraph::index_of(const ObjectId& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint32_t> BipartiteGraph::neighborhood(
    std::span<const ObjectId> s) const {
  std::vector<std::uint32_t> indices;
  indices.reserve(s.size());
  for (const auto& key : s) {
    auto idx = index_of(key);
    if (!idx) throw std::out_of_range("neighborhood: object not in graph: " + key.hex());
    indices.push_back(*idx);
  }
  return neighborhood_by_index(indices);
}

std::vector<std::uint32_t> BipartiteGraph::neighborhood_by_index(
    std::span<const std::uint32_t> s) const {
  std::vector<std::uint32_t> nodes;
  nodes.reserve(2 * s.size());
  for (auto idx : s) {
    if (idx >= objects_.size()) throw std::out_of_range("neighborhood: bad object index");
    const auto [a, b] = object_nodes_[idx];
    nodes.push_back(static_cast<std::uint32_t>(a));
    if (b != kNoNode) nodes.push_back(static_cast<std::uint32_t>(b));
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

BipartiteGraph build_graph(const Partitioner& p, const std::vector<ObjectId>& objects) {
  if (objects.empty()) throw std::invalid_argument("build_graph: no objects");
  BipartiteGraph g;
  g.upper_count_ = p.upper_count();
  g.lower_count_ = p.lower_count();
  g.objects_ = objects;
  g.object_nodes_.resize(objects.size());
  g.node_objects_.resize(g.node_count());
  g.index_.reserve(objects.size());
  for (std::uint32_t i = 0; i < objects.size(); ++i) {
    if (!g.index_.emplace(objects[i], i).second)
      throw std::invalid_argument("build_graph: duplicate key: " + objects[i].hex());
    const auto [upper, lower] = p.locate(objects[i]);
    const std::int32_t a = static_cast<std::int32_t>(upper);
    const std::int32_t b = static_cast<std::int32_t>(g.upper_count_ + lower);
    g.object_nodes_[i] = {a, b};
    g.node_objects_[a].push_back(i);
    g.node_objects_[b].push_back(i);
  }
  g.edge_count_ = 2 * objects.size();
  return g;
}

BipartiteGraph build_graph_from_pairs(
    std::uint32_t upper_count, std::uint32_t lower_count,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
    const std::vector<ObjectId>& objects) {
  if (objects.empty()) throw std::invalid_argument("build_graph: no objects");
  if (pairs.size() != objects.size())
    throw std::invalid_argument("build_graph: pairs/objects mismatch");
  if (upper_count == 0 || lower_count == 0)
    throw std::invalid_argument("build_graph: node counts must be >= 1");
  BipartiteGraph g;
  g.upper_count_ = upper_count;
  g.lower_count_ = lower_count;
  g.objects_ = objects;
  g.object_nodes_.resize(objects.size());
  g.node_objects_.resize(g.node_count());
  g.index_.reserve(objects.size());
  for (std::uint32_t i = 0; i < objects.size(); ++i) {
    if (!g.index_.emplace(objects[i], i).second)
      throw std::invalid_argument("build_graph: duplicate key: " + objects[i].hex());
    if (pairs[i].first >= upper_count || pairs[i].second >= lower_count)
      throw std::invalid_argument("build_graph: bucket out of range");
    const std::int32_t a = static_cast<std::int32_t>(pairs[i].first);
    const std::int32_t b = static_cast<std::int32_t>(upper_count + pairs[i].second);
    g.object_nodes_[i] = {a, b};
    g.node_objects_[a].push_back(i);
    g.node_objects_[b].push_back(i);
  }
  g.edge_count_ = 2 * objects.size();
  return g;
}

BipartiteGraph build_graph_single_hash(std::uint64_t seed, std::uint32_t node_count,
                                       const std::vector<ObjectId>& objects) {
  if (objects.empty()) throw std::invalid_argument("build_graph: no objects");
  if (node_count == 0) throw std::invalid_argument("build_graph: node_count must be >= 1");
  BipartiteGraph g;
  g.single_hash_ = true;
  g.upper_count_ = node_count;
  g.lower_count_ = 0;
  g.objects_ = objects;
  g.object_nodes_.resize(objects.size());
  g.node_objects_.resize(node_count);
  g.index_.reserve(objects.size());
  for (std::uint32_t i = 0; i < objects.size(); ++i) {
    if (!g.index_.emplace(objects[i], i).second)
      throw std::invalid_argument("build_graph: duplicate key: " + objects[i].hex());
    const auto node = static_cast<std::int32_t>(bucket_of(hash_key(seed, objects[i]), node_count));
    g.object_nodes_[i] = {node, BipartiteGraph::kNoNode};
    g.node_objects_[node].push_back(i);
  }
  g.edge_count_ = objects.size();
  return g;
}

}  // namespace distcache
