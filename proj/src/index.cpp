#include "semret/index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace semret::index {

std::shared_ptr<const IndexSnapshot> IndexSnapshot::empty(HnswParams params) {
  params.validate();
  auto s = std::make_shared<IndexSnapshot>();
  s->params_ = params;
  return s;
}

void IndexSnapshot::append(const EmbeddingRecord& r) {
  if (ids_.empty() && dim_ == 0) {
    dim_ = r.vector.size();
    graph_ = HnswGraph(dim_, params_);
  }
  pos_.emplace(r.id, ids_.size());
  ids_.push_back(r.id);
  vectors_.insert(vectors_.end(), r.vector.begin(), r.vector.end());
  graph_.insert(vectors_, ids_);
}

std::shared_ptr<const IndexSnapshot> IndexSnapshot::build(std::vector<EmbeddingRecord> records,
                                                          HnswParams params, std::uint64_t version) {
  params.validate();
  std::sort(records.begin(), records.end(),
            [](const EmbeddingRecord& a, const EmbeddingRecord& b) { return a.id < b.id; });
  auto s = std::make_shared<IndexSnapshot>();
  s->params_ = params;
  s->version_ = version;
  if (!records.empty()) s->model_version_ = records.front().model_version;
  s->ids_.reserve(records.size());
  s->vectors_.reserve(records.size() * (records.empty() ? 0 : records.front().vector.size()));
  for (const auto& r : records) s->append(r);
  return s;
}

std::optional<std::size_t> IndexSnapshot::find(std::uint64_t id) const {
  auto it = pos_.find(id);
  if (it == pos_.end()) return std::nullopt;
  return it->second;
}

void IndexSnapshot::check_query(std::span<const float> query) const {
  if (!ids_.empty() && query.size() != dim_)
    throw std::invalid_argument("query dimension " + std::to_string(query.size()) +
                                " does not match index dimension " + std::to_string(dim_));
}

std::vector<SearchHit> IndexSnapshot::search_exact(std::span<const float> query,
                                                   std::size_t k) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  check_query(query);
  std::vector<SearchHit> all;
  all.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i)
    all.push_back({ids_[i], dot(query.data(), vectors_.data() + i * dim_, dim_)});
  const auto n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                    [](const SearchHit& a, const SearchHit& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.id < b.id;
                    });
  all.resize(n);
  return all;
}

std::vector<SearchHit> IndexSnapshot::search_ann(std::span<const float> query, std::size_t k,
                                                 std::size_t ef_search) const {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (ef_search < k) throw std::invalid_argument("ef_search must be >= k");
  check_query(query);
  std::vector<SearchHit> out;
  for (const auto& n : graph_.search(vectors_, ids_, query.data(), k, ef_search))
    out.push_back({ids_[n.node], n.score});
  return out;
}

std::optional<std::string> validate_record(const EmbeddingRecord& r, std::size_t dim) {
  if (r.vector.size() != dim)
    return "dimension " + std::to_string(r.vector.size()) + " != " + std::to_string(dim);
  double sq = 0.0;
  for (float v : r.vector) {
    if (!std::isfinite(v)) return std::string("non-finite component");
    sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (std::abs(norm - 1.0) > kNormTolerance) return "norm " + std::to_string(norm) + " is not 1";
  return std::nullopt;
}

IngestResult ingest(std::span<const EmbeddingRecord> records,
                    const std::shared_ptr<const IndexSnapshot>& current) {
  if (!current) throw std::invalid_argument("ingest needs a current snapshot (use IndexSnapshot::empty)");
  IngestResult res;
  if (records.empty()) {
    res.snapshot = current;
    return res;
  }
  const auto& version = records.front().model_version;
  for (const auto& r : records)
    if (r.model_version != version) throw IngestError("batch mixes model versions");
  if (current->size() > 0 && current->model_version() != version)
    throw IngestError("batch model version " + version + " differs from index model version " +
                      current->model_version());

  const std::size_t dim = current->size() > 0 ? current->dim() : records.front().vector.size();
  if (dim == 0) throw IngestError("embedding dimension must be positive");

  std::vector<const EmbeddingRecord*> accepted;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& r : records) {
    std::optional<std::string> why;
    if (!seen.insert(r.id).second)
      why = "duplicate id in batch";
    else
      why = validate_record(r, dim);
    if (why) {
      res.report.rejected_ids.push_back(r.id);
      res.report.reasons.push_back(*why);
    } else {
      accepted.push_back(&r);
    }
  }
  res.report.accepted = accepted.size();
  if (accepted.empty()) {
    res.snapshot = current;
    return res;
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const EmbeddingRecord* a, const EmbeddingRecord* b) { return a->id < b->id; });
  for (const auto* r : accepted)
    if (current->find(r->id)) ++res.report.overwritten;

  const auto next_version = current->version() + 1;
  if (res.report.overwritten == 0) {
    auto next = std::make_shared<IndexSnapshot>(*current);
    next->version_ = next_version;
    next->model_version_ = version;
    for (const auto* r : accepted) next->append(*r);
    res.snapshot = std::move(next);
    return res;
  }

  std::unordered_set<std::uint64_t> replaced;
  for (const auto* r : accepted) replaced.insert(r->id);
  std::vector<EmbeddingRecord> merged;
  merged.reserve(current->size() + accepted.size());
  for (std::size_t i = 0; i < current->size(); ++i) {
    const auto id = current->ids()[i];
    if (replaced.contains(id)) continue;
    const auto v = current->vector_at(i);
    merged.push_back({id, std::vector<float>(v.begin(), v.end()), version});
  }
  for (const auto* r : accepted) merged.push_back(*r);
  res.snapshot = IndexSnapshot::build(std::move(merged), current->params(), next_version);
  return res;
}

SnapshotStore::SnapshotStore(std::shared_ptr<const IndexSnapshot> initial)
    : current_(initial ? std::move(initial) : IndexSnapshot::empty()) {}

std::shared_ptr<const IndexSnapshot> SnapshotStore::current() const {
  std::lock_guard lock(mu_);
  return current_;
}

void SnapshotStore::publish(std::shared_ptr<const IndexSnapshot> next) {
  if (!next) throw std::invalid_argument("cannot publish a null snapshot");
  std::lock_guard lock(mu_);
  current_ = std::move(next);
}

IngestReport SnapshotStore::ingest_and_publish(std::span<const EmbeddingRecord> records) {
  std::lock_guard writer(writer_);
  auto res = ingest(records, current());
  publish(res.snapshot);
  return std::move(res.report);
}

}  // namespace semret::index
