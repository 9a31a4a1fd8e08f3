#pragma once

// Hierarchical navigable small world graph over inner-product similarity.
//
// The graph stores only adjacency; vectors live with the owner and are passed
// to every call as one contiguous row-major float array. Node levels depend
// only on (seed, external id), so the structure is reproducible for a fixed
// insertion order.

#include <cstdint>
#include <span>
#include <vector>

namespace semret::index {

struct HnswParams {
  std::size_t M = 16;
  std::size_t ef_construction = 200;
  std::size_t ef_search = 64;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const HnswParams&) const = default;
};

float dot(const float* a, const float* b, std::size_t dim) noexcept;

/// (similarity, node) pair as returned by searches.
struct Neighbor {
  float score = 0.0f;
  std::uint32_t node = 0;
};

class HnswGraph {
 public:
  HnswGraph() = default;
  HnswGraph(std::size_t dim, HnswParams params);

  /// Adds node `size()` whose vector is row `size()` of `vectors`.
  void insert(std::span<const float> vectors, std::span<const std::uint64_t> ids);

  /// Top-k nodes by similarity, ties by ascending external id.
  std::vector<Neighbor> search(std::span<const float> vectors, std::span<const std::uint64_t> ids,
                               const float* query, std::size_t k, std::size_t ef) const;

  std::size_t size() const { return levels_.size(); }
  std::size_t dim() const { return dim_; }
  const HnswParams& params() const { return params_; }
  int max_level() const { return max_level_; }
  const std::vector<std::uint32_t>& links(std::uint32_t node, int level) const {
    return links_[node][static_cast<std::size_t>(level)];
  }

 private:
  int draw_level(std::uint64_t id) const;
  std::vector<Neighbor> search_layer(std::span<const float> vectors,
                                     std::span<const std::uint64_t> ids, const float* query,
                                     std::uint32_t entry, std::size_t ef, int level) const;
  std::vector<Neighbor> select_neighbors(std::span<const float> vectors,
                                         std::span<const std::uint64_t> ids,
                                         std::vector<Neighbor> candidates, std::size_t m) const;
  std::size_t capacity(int level) const { return level == 0 ? 2 * params_.M : params_.M; }

  std::size_t dim_ = 0;
  HnswParams params_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // node -> level -> neighbors
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

}  // namespace semret::index
