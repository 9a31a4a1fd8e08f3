#pragma once

// The serving side: query -> embedding -> ANN -> re-rank stub -> sanity check,
// plus the labeling queue and weights board that back human feedback rounds.
// Everything here is transport-free; http_api.hpp puts it behind HTTP.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "semret/corpus.hpp"
#include "semret/encoder.hpp"
#include "semret/fusion.hpp"
#include "semret/index.hpp"
#include "semret/simulation.hpp"

namespace semret::service {

using corpus::Domain;

/// A request-level failure with an HTTP status, a stable code and optionally
/// the offending field.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, std::string message, std::string field = {});
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const std::string& field() const { return field_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  std::string field_;
};

inline constexpr std::size_t kDefaultK = 20;
inline constexpr std::size_t kMaxK = 200;

struct RetrievalRequest {
  std::string query_text;
  std::size_t k = kDefaultK;
  bool debug = false;
};

/// Throws ApiError(400) naming the first bad field.
RetrievalRequest parse_retrieval_request(const nlohmann::json& body);

struct RetrievedItem {
  std::uint64_t id = 0;
  std::string title;
  float score = 0.0f;
};

struct StageTimings {
  double cache_ms = 0.0;
  double encode_ms = 0.0;
  double ann_ms = 0.0;
  double rerank_ms = 0.0;
  double sanity_ms = 0.0;
  double total_ms = 0.0;

  double stage_sum() const { return cache_ms + encode_ms + ann_ms + rerank_ms + sanity_ms; }
};

struct RetrievalResponse {
  std::vector<RetrievedItem> items;
  std::string model_version;
  std::uint64_t snapshot_version = 0;
  StageTimings timings;
  bool cache_hit = false;
  bool empty_query = false;  // encoded through the reserved bucket
  std::size_t dropped_below_floor = 0;
  std::size_t dropped_duplicates = 0;
};

nlohmann::json to_json(const RetrievalResponse& r, bool debug);

struct ServiceConfig {
  double score_floor = 0.15;
  std::size_t ef_search = 64;
};

using TitleMap = std::unordered_map<std::uint64_t, std::string>;

class RetrievalService {
 public:
  RetrievalService(std::shared_ptr<const encoder::TextEmbedder> model,
                   std::shared_ptr<index::SnapshotStore> store, ServiceConfig cfg = {});

  /// Pre-computes query embeddings; replaces the previous cache.
  void warm_cache(std::span<const std::string> queries);
  std::size_t cache_size() const;
  void set_titles(TitleMap titles);

  /// Throws ApiError(503) without a usable snapshot, ApiError(400) on a bad k.
  RetrievalResponse retrieve(const RetrievalRequest& request) const;

  nlohmann::json health() const;
  const encoder::TextEmbedder& model() const { return *model_; }
  index::SnapshotStore& store() const { return *store_; }

 private:
  using Cache = std::unordered_map<std::string, std::vector<float>>;

  std::shared_ptr<const encoder::TextEmbedder> model_;
  std::shared_ptr<index::SnapshotStore> store_;
  ServiceConfig cfg_;
  mutable std::mutex mu_;
  std::shared_ptr<const Cache> cache_;
  std::shared_ptr<const TitleMap> titles_;
};

// ---------------------------------------------------------------------------
// Labeling

enum class TaskStatus { open, done };
std::string_view to_string(TaskStatus s);

struct TaskItem {
  std::uint64_t id = 0;
  std::string title;
};

struct LabelingTask {
  std::uint64_t task_id = 0;
  Domain domain = Domain::organic;
  std::uint64_t query_id = 0;
  std::string query_text;
  std::vector<TaskItem> items;
  TaskStatus status = TaskStatus::open;
  std::uint64_t snapshot_version = 0;
  std::size_t round = 0;
  std::vector<int> grades;  // filled on close
  std::string annotator_id;
};

nlohmann::json to_json(const LabelingTask& t);

struct LabelSubmission {
  std::uint64_t task_id = 0;
  std::vector<int> grades;
  std::string annotator_id;
};

/// Throws ApiError(400) naming the first bad field.
LabelSubmission parse_label_submission(const nlohmann::json& body);

/// Open and closed labeling tasks. Grades are appended to the judgments JSONL
/// and flushed before a submission is acknowledged. All writes are serialized.
class LabelingQueue {
 public:
  explicit LabelingQueue(std::filesystem::path judgments_path);

  /// Assigns ids to the drafts and opens them. A draft whose (domain,
  /// query_id) already has an open task is dropped, as is one without items.
  /// Returns the opened tasks.
  std::vector<LabelingTask> enqueue(std::vector<LabelingTask> drafts);

  /// Open tasks, oldest first.
  std::vector<LabelingTask> open_tasks(std::size_t limit) const;
  std::optional<LabelingTask> task(std::uint64_t id) const;

  /// Throws ApiError: 404 unknown task, 409 already closed, 400 bad grades.
  void submit(const LabelSubmission& s);

  std::map<Domain, std::size_t> pending() const;
  std::size_t open_count() const;

  /// Blocks until every listed task is closed or the timeout passes. Returns
  /// true when all closed.
  bool wait_closed(std::span<const std::uint64_t> ids, std::chrono::milliseconds timeout) const;

  /// Feedback assembled from the closed tasks among `ids`.
  fusion::FeedbackMap feedback(std::span<const std::uint64_t> ids) const;
  /// Feedback from every closed task of the latest round that has any.
  fusion::FeedbackMap latest_feedback() const;

  const std::filesystem::path& judgments_path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  mutable std::mutex mu_;
  mutable std::condition_variable closed_cv_;
  std::uint64_t next_id_ = 1;
  std::map<std::uint64_t, LabelingTask> tasks_;
};

/// Ranks a feedback query's candidate pool, keeping the top k.
using PoolRanker = std::function<fusion::FeedbackEntry(const corpus::FeedbackQuery&, std::size_t)>;

PoolRanker rank_with_params(const encoder::EncoderParams& params);
PoolRanker rank_with_embedder(const encoder::TextEmbedder& model);

/// Builds one task per sampled feedback query and domain. Queries are taken in
/// pool order, rotating by round.
std::vector<LabelingTask> draft_labeling_round(const corpus::FeedbackPools& pools,
                                               std::span<const Domain> active,
                                               const PoolRanker& rank,
                                               std::size_t per_domain_queries,
                                               std::size_t k_per_query,
                                               std::uint64_t snapshot_version, std::size_t round);

struct DomainStatus {
  Domain domain = Domain::general_language;
  double x = 0.5;
  double w = 0.5;
  double p = 0.0;
  bool stale = false;
  std::size_t labels_pending = 0;
};

struct RecalibrationStatus {
  std::size_t round = 0;
  std::uint64_t revision = 0;
  std::vector<DomainStatus> domains;
};

nlohmann::json to_json(const RecalibrationStatus& s);

/// Human-in-the-loop backend shared by the HTTP API and the training loop.
class HitlBackend {
 public:
  HitlBackend(std::shared_ptr<const corpus::FeedbackPools> pools,
              std::shared_ptr<LabelingQueue> queue, std::shared_ptr<fusion::WeightsBoard> board);

  std::vector<LabelingTask> enqueue_labeling_round(std::span<const Domain> active,
                                                   const PoolRanker& rank,
                                                   std::size_t per_domain_queries,
                                                   std::size_t k_per_query,
                                                   std::uint64_t snapshot_version,
                                                   std::size_t round);

  /// Recalibrates from the latest round's closed tasks and commits to the
  /// board. Active domains are those on the board, or all four when empty.
  fusion::Recalibration recalibrate_now();

  RecalibrationStatus recalibration_status() const;

  LabelingQueue& queue() const { return *queue_; }
  fusion::WeightsBoard& board() const { return *board_; }
  const std::shared_ptr<const corpus::FeedbackPools>& pools() const { return pools_; }

 private:
  std::shared_ptr<const corpus::FeedbackPools> pools_;
  std::shared_ptr<LabelingQueue> queue_;
  std::shared_ptr<fusion::WeightsBoard> board_;
  std::mutex recalibrate_mu_;
};

/// Routes each round's feedback through the labeling queue. Domains whose
/// tasks are not all closed within the timeout take oracle grades instead and
/// the round is flagged as fallen back.
class HumanFeedbackProvider final : public fusion::FeedbackProvider {
 public:
  struct Options {
    std::size_t per_domain_queries = 5;
    std::size_t k_per_query = fusion::kDefaultNdcgCutoff;
    std::chrono::milliseconds timeout{60000};
  };

  HumanFeedbackProvider(HitlBackend& backend, Options opts,
                        std::shared_ptr<index::SnapshotStore> store = nullptr);

  fusion::FeedbackResult collect(std::span<const Domain> active, const encoder::EncoderParams& params,
                                 std::size_t round, fusion::FeedbackSource requested) override;

 private:
  HitlBackend& backend_;
  Options opts_;
  std::shared_ptr<index::SnapshotStore> store_;
};

// ---------------------------------------------------------------------------
// Transport-free API

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Dispatches the HTTP+JSON API. `hitl` may be null, in which case the
/// /v1/hitl endpoints answer 503.
class ApiHandler {
 public:
  ApiHandler(std::shared_ptr<RetrievalService> retrieval, std::shared_ptr<HitlBackend> hitl);

  ApiResponse handle(std::string_view method, std::string_view path,
                     const std::map<std::string, std::string>& query, std::string_view body) const;

 private:
  ApiResponse retrieve(std::string_view body) const;
  ApiResponse tasks(const std::map<std::string, std::string>& query) const;
  ApiResponse labels(std::string_view body) const;
  ApiResponse weights() const;
  ApiResponse recalibrate() const;
  ApiResponse health() const;
  HitlBackend& require_hitl() const;

  std::shared_ptr<RetrievalService> retrieval_;
  std::shared_ptr<HitlBackend> hitl_;
};

}  // namespace semret::service
