#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "distcache/object_id.hpp"

namespace distcache {

// One cache layer as seen by the hash partitioner. A physical node with c
// times the base throughput is split into c virtual buckets that all map back
// to the same physical index, so the uniform-throughput analysis applies.
class LayerMap {
 public:
  explicit LayerMap(std::uint32_t node_count);
  static LayerMap with_weights(const std::vector<std::uint32_t>& weights);

  std::uint32_t bucket_count() const { return bucket_count_; }
  std::uint32_t node_count() const { return node_count_; }
  std::uint32_t node_of_bucket(std::uint32_t bucket) const;
  bool uniform() const { return bucket_to_node_.empty(); }

 private:
  LayerMap() = default;
  std::uint32_t node_count_ = 0;
  std::uint32_t bucket_count_ = 0;
  std::vector<std::uint32_t> bucket_to_node_;  // empty when weights are all 1
};

// Seed-indexed partitioning of the object space into the two cache layers.
// Deterministic: locate(key) is a pure function of (seeds, layer shapes).
class Partitioner {
 public:
  Partitioner(std::uint64_t seed0, std::uint64_t seed1, std::uint32_t m_upper,
              std::uint32_t m_lower);
  Partitioner(std::uint64_t seed0, std::uint64_t seed1, LayerMap upper, LayerMap lower);

  std::uint32_t upper_of(const ObjectId& key) const;
  std::uint32_t lower_of(const ObjectId& key) const;
  std::pair<std::uint32_t, std::uint32_t> locate(const ObjectId& key) const;

  std::uint64_t seed0() const { return seed0_; }
  std::uint64_t seed1() const { return seed1_; }
  std::uint32_t upper_count() const { return upper_.node_count(); }
  std::uint32_t lower_count() const { return lower_.node_count(); }

 private:
  std::uint64_t seed0_;
  std::uint64_t seed1_;
  LayerMap upper_;
  LayerMap lower_;
};

// Bipartite graph G = (U, V, E): objects on the left, cache nodes of both
// layers on the right. Upper nodes occupy [0, upper_count), lower nodes
// [upper_count, upper_count + lower_count). In single-hash mode every object
// has degree 1 and all nodes live in one pool.
class BipartiteGraph {
 public:
  static constexpr std::int32_t kNoNode = -1;

  std::uint32_t object_count() const { return static_cast<std::uint32_t>(objects_.size()); }
  std::uint32_t node_count() const { return upper_count_ + lower_count_; }
  std::uint32_t upper_count() const { return upper_count_; }
  std::uint32_t lower_count() const { return lower_count_; }
  bool single_hash() const { return single_hash_; }

  const std::vector<ObjectId>& objects() const { return objects_; }
  const ObjectId& object(std::uint32_t index) const { return objects_[index]; }

  // Node ids adjacent to object `index`; second is kNoNode in single-hash mode.
  std::pair<std::int32_t, std::int32_t> nodes_of(std::uint32_t index) const {
    return object_nodes_[index];
  }
  const std::vector<std::uint32_t>& objects_of(std::uint32_t node) const {
    return node_objects_[node];
  }

  std::size_t edge_count() const { return edge_count_; }

  std::optional<std::uint32_t> index_of(const ObjectId& key) const;

  // Γ(S): union of the cache nodes adjacent to the given objects, as a sorted
  // set of node ids. Throws std::out_of_range for an object not in the graph.
  std::vector<std::uint32_t> neighborhood(std::span<const ObjectId> s) const;
  std::vector<std::uint32_t> neighborhood_by_index(std::span<const std::uint32_t> s) const;

  friend BipartiteGraph build_graph(const Partitioner& p,
                                    const std::vector<ObjectId>& objects);
  friend BipartiteGraph build_graph_single_hash(std::uint64_t seed,
                                                std::uint32_t node_count,
                                                const std::vector<ObjectId>& objects);
  friend BipartiteGraph build_graph_from_pairs(
      std::uint32_t upper_count, std::uint32_t lower_count,
      const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
      const std::vector<ObjectId>& objects);

 private:
  std::vector<ObjectId> objects_;
  std::vector<std::pair<std::int32_t, std::int32_t>> object_nodes_;
  std::vector<std::vector<std::uint32_t>> node_objects_;
  std::unordered_map<ObjectId, std::uint32_t, ObjectIdHash> index_;
  std::uint32_t upper_count_ = 0;
  std::uint32_t lower_count_ = 0;
  std::size_t edge_count_ = 0;
  bool single_hash_ = false;
};

// Two-hash construction: one upper edge and one lower edge per object.
// Throws std::invalid_argument on an empty object list or a duplicate key.
BipartiteGraph build_graph(const Partitioner& p, const std::vector<ObjectId>& objects);

// Degree-1 baseline: a single hash over one node pool.
BipartiteGraph build_graph_single_hash(std::uint64_t seed, std::uint32_t node_count,
                                       const std::vector<ObjectId>& objects);

// Explicit adjacency, bypassing the hash functions. pairs[i] = (upper bucket,
// lower bucket) of objects[i]. Used by instance files and adversarial tests.
BipartiteGraph build_graph_from_pairs(
    std::uint32_t upper_count, std::uint32_t lower_count,
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
    const std::vector<ObjectId>& objects);

}  // namespace distcache
