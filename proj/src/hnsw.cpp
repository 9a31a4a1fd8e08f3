#include "semret/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace semret::index {

void HnswParams::validate() const {
  if (M < 2) throw std::invalid_argument("HNSW M must be >= 2");
  if (ef_construction < 1) throw std::invalid_argument("HNSW ef_construction must be >= 1");
  if (ef_search < 1) throw std::invalid_argument("HNSW ef_search must be >= 1");
}

float dot(const float* a, const float* b, std::size_t dim) noexcept {
  float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < dim; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Order {
  std::span<const std::uint64_t> ids;
  // True when a ranks ahead of b.
  bool operator()(const Neighbor& a, const Neighbor& b) const {
    if (a.score != b.score) return a.score > b.score;
    return ids[a.node] < ids[b.node];
  }
};

}  // namespace

HnswGraph::HnswGraph(std::size_t dim, HnswParams params) : dim_(dim), params_(params) {
  if (dim == 0) throw std::invalid_argument("HNSW dimension must be positive");
  params_.validate();
}

int HnswGraph::draw_level(std::uint64_t id) const {
  const std::uint64_t x = splitmix64(params_.seed ^ splitmix64(id));
  const double u = static_cast<double>((x >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double mult = 1.0 / std::log(static_cast<double>(params_.M));
  return static_cast<int>(std::floor(-std::log(u) * mult));
}

std::vector<Neighbor> HnswGraph::search_layer(std::span<const float> vectors,
                                              std::span<const std::uint64_t> ids,
                                              const float* query, std::uint32_t entry,
                                              std::size_t ef, int level) const {
  const Order better{ids};
  auto best_first = [&](const Neighbor& a, const Neighbor& b) { return better(b, a); };
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(best_first)> candidates(best_first);
  std::priority_queue<Neighbor, std::vector<Neighbor>, Order> results(better);  // top = worst
  std::vector<char> visited(size(), 0);

  const Neighbor start{dot(query, &vectors[entry * dim_], dim_), entry};
  visited[entry] = 1;
  candidates.push(start);
  results.push(start);
  while (!candidates.empty()) {
    const Neighbor c = candidates.top();
    if (results.size() >= ef && better(results.top(), c)) break;
    candidates.pop();
    for (auto nb : links_[c.node][static_cast<std::size_t>(level)]) {
      if (visited[nb]) continue;
      visited[nb] = 1;
      const Neighbor n{dot(query, &vectors[nb * dim_], dim_), nb};
      if (results.size() < ef || better(n, results.top())) {
        candidates.push(n);
        results.push(n);
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Neighbor> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<Neighbor> HnswGraph::select_neighbors(std::span<const float> vectors,
                                                  std::span<const std::uint64_t> ids,
                                                  std::vector<Neighbor> candidates,
                                                  std::size_t m) const {
  std::sort(candidates.begin(), candidates.end(), Order{ids});
  if (candidates.size() <= m) return candidates;
  std::vector<Neighbor> kept;
  for (const auto& c : candidates) {
    if (kept.size() >= m) break;
    const float* cv = &vectors[c.node * dim_];
    bool diverse = true;
    for (const auto& r : kept) {
      if (dot(cv, &vectors[r.node * dim_], dim_) > c.score) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(c);
  }
  return kept;
}

void HnswGraph::insert(std::span<const float> vectors, std::span<const std::uint64_t> ids) {
  const auto node = static_cast<std::uint32_t>(size());
  if (ids.size() <= node || vectors.size() < (node + 1) * dim_)
    throw std::invalid_argument("HNSW insert: vector for the new node is missing");
  const int level = draw_level(ids[node]);
  levels_.push_back(level);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);
  const float* q = &vectors[node * dim_];
  if (node == 0) {
    entry_ = 0;
    max_level_ = level;
    return;
  }

  const Order better{ids};
  Neighbor ep{dot(q, &vectors[entry_ * dim_], dim_), entry_};
  for (int l = max_level_; l > level; --l) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto nb : links_[ep.node][static_cast<std::size_t>(l)]) {
        const Neighbor n{dot(q, &vectors[nb * dim_], dim_), nb};
        if (better(n, ep)) {
          ep = n;
          changed = true;
        }
      }
    }
  }

  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = search_layer(vectors, ids, q, ep.node, params_.ef_construction, l);
    ep = found.front();
    const auto chosen = select_neighbors(vectors, ids, std::move(found), params_.M);
    auto& mine = links_[node][static_cast<std::size_t>(l)];
    for (const auto& c : chosen) mine.push_back(c.node);

    for (const auto& c : chosen) {
      auto& theirs = links_[c.node][static_cast<std::size_t>(l)];
      theirs.push_back(node);
      if (theirs.size() <= capacity(l)) continue;
      const float* cv = &vectors[c.node * dim_];
      std::vector<Neighbor> pool;
      pool.reserve(theirs.size());
      for (auto x : theirs) pool.push_back({dot(cv, &vectors[x * dim_], dim_), x});
      const auto pruned = select_neighbors(vectors, ids, std::move(pool), capacity(l));
      theirs.clear();
      for (const auto& p : pruned) theirs.push_back(p.node);
    }
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = node;
  }
}

std::vector<Neighbor> HnswGraph::search(std::span<const float> vectors,
                                        std::span<const std::uint64_t> ids, const float* query,
                                        std::size_t k, std::size_t ef) const {
  if (ef < k) throw std::invalid_argument("ef_search must be >= k");
  if (size() == 0 || k == 0) return {};
  const Order better{ids};
  Neighbor ep{dot(query, &vectors[entry_ * dim_], dim_), entry_};
  for (int l = max_level_; l > 0; --l) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto nb : links_[ep.node][static_cast<std::size_t>(l)]) {
        const Neighbor n{dot(query, &vectors[nb * dim_], dim_), nb};
        if (better(n, ep)) {
          ep = n;
          changed = true;
        }
      }
    }
  }
  auto found = search_layer(vectors, ids, query, ep.node, std::max(ef, k), 0);
  if (found.size() > k) found.resize(k);
  return found;
}

}  // namespace semret::index
