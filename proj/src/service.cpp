#include "semret/service.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "semret/text.hpp"

namespace semret::service {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

template <class T>
T required(const nlohmann::json& body, const char* field) {
  if (!body.contains(field)) throw ApiError(400, "missing_field", std::string(field) + " is required", field);
  try {
    return body.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ApiError(400, "invalid_field", std::string(field) + " has the wrong type", field);
  }
}

}  // namespace

ApiError::ApiError(int status, std::string code, std::string message, std::string field)
    : std::runtime_error(std::move(message)), status_(status), code_(std::move(code)), field_(std::move(field)) {}

nlohmann::json ApiError::body() const {
  nlohmann::json j{{"code", code_}, {"message", what()}};
  if (!field_.empty()) j["field"] = field_;
  return j;
}

RetrievalRequest parse_retrieval_request(const nlohmann::json& body) {
  if (!body.is_object()) throw ApiError(400, "invalid_body", "request body must be a JSON object");
  RetrievalRequest r;
  if (!body.contains("query_text") || !body.at("query_text").is_string())
    throw ApiError(400, "invalid_field", "query_text must be a string", "query_text");
  r.query_text = body.at("query_text").get<std::string>();
  if (body.contains("k")) {
    const auto& k = body.at("k");
    if (!k.is_number_integer()) throw ApiError(400, "invalid_field", "k must be an integer", "k");
    const auto v = k.get<std::int64_t>();
    if (v < 1 || v > static_cast<std::int64_t>(kMaxK))
      throw ApiError(400, "invalid_field", "k must lie in [1, 200]", "k");
    r.k = static_cast<std::size_t>(v);
  }
  if (body.contains("debug")) {
    if (!body.at("debug").is_boolean()) throw ApiError(400, "invalid_field", "debug must be a boolean", "debug");
    r.debug = body.at("debug").get<bool>();
  }
  return r;
}

nlohmann::json to_json(const RetrievalResponse& r, bool debug) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) items.push_back({{"id", it.id}, {"title", it.title}, {"score", it.score}});
  const auto& t = r.timings;
  nlohmann::json j{{"items", items},
                   {"model_version", r.model_version},
                   {"snapshot_version", r.snapshot_version},
                   {"timings", {{"cache_ms", t.cache_ms},
                                {"encode_ms", t.encode_ms},
                                {"ann_ms", t.ann_ms},
                                {"rerank_ms", t.rerank_ms},
                                {"sanity_ms", t.sanity_ms},
                                {"total_ms", t.total_ms}}}};
  if (debug)
    j["debug"] = {{"cache_hit", r.cache_hit},
                  {"empty_query", r.empty_query},
                  {"dropped_below_floor", r.dropped_below_floor},
                  {"dropped_duplicates", r.dropped_duplicates}};
  return j;
}

RetrievalService::RetrievalService(std::shared_ptr<const encoder::TextEmbedder> model,
                                   std::shared_ptr<index::SnapshotStore> store, ServiceConfig cfg)
    : model_(std::move(model)),
      store_(std::move(store)),
      cfg_(cfg),
      cache_(std::make_shared<Cache>()),
      titles_(std::make_shared<TitleMap>()) {
  if (!model_ || !store_) throw std::invalid_argument("retrieval service needs a model and a store");
}

void RetrievalService::warm_cache(std::span<const std::string> queries) {
  auto next = std::make_shared<Cache>();
  for (const auto& q : queries) next->emplace(q, model_->embed_query(q));
  std::lock_guard lock(mu_);
  cache_ = std::move(next);
}

std::size_t RetrievalService::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_->size();
}

void RetrievalService::set_titles(TitleMap titles) {
  auto next = std::make_shared<const TitleMap>(std::move(titles));
  std::lock_guard lock(mu_);
  titles_ = std::move(next);
}

RetrievalResponse RetrievalService::retrieve(const RetrievalRequest& request) const {
  const auto t0 = Clock::now();
  if (request.k < 1 || request.k > kMaxK) throw ApiError(400, "invalid_field", "k must lie in [1, 200]", "k");
  const auto snapshot = store_->current();
  if (!snapshot || snapshot->model_version().empty())
    throw ApiError(503, "not_ready", "no index snapshot has been published");
  if (snapshot->model_version() != model_->model_version())
    throw ApiError(503, "model_mismatch",
                   "index holds " + snapshot->model_version() + ", service runs " + model_->model_version());

  std::shared_ptr<const Cache> cache;
  std::shared_ptr<const TitleMap> titles;
  {
    std::lock_guard lock(mu_);
    cache = cache_;
    titles = titles_;
  }

  RetrievalResponse res;
  res.model_version = snapshot->model_version();
  res.snapshot_version = snapshot->version();
  res.empty_query = split_words(request.query_text).empty();

  const std::vector<float>* vec = nullptr;
  if (auto it = cache->find(request.query_text); it != cache->end()) {
    vec = &it->second;
    res.cache_hit = true;
  }
  const auto t1 = Clock::now();
  std::vector<float> encoded;
  if (!vec) {
    encoded = model_->embed_query(request.query_text);
    vec = &encoded;
  }
  const auto t2 = Clock::now();
  std::vector<index::SearchHit> hits;
  if (snapshot->size() > 0) hits = snapshot->search_ann(*vec, request.k, std::max(cfg_.ef_search, request.k));
  const auto t3 = Clock::now();
  // Re-rank: pass-through.
  const auto t4 = Clock::now();
  std::unordered_set<std::uint64_t> seen;
  for (const auto& h : hits) {
    if (h.score < cfg_.score_floor) {
      ++res.dropped_below_floor;
      continue;
    }
    if (!seen.insert(h.id).second) {
      ++res.dropped_duplicates;
      continue;
    }
    auto title = titles->find(h.id);
    res.items.push_back({h.id, title == titles->end() ? std::string() : title->second, h.score});
  }
  const auto t5 = Clock::now();

  res.timings = {ms_between(t0, t1), ms_between(t1, t2), ms_between(t2, t3),
                 ms_between(t3, t4), ms_between(t4, t5), ms_between(t0, t5)};
  return res;
}

nlohmann::json RetrievalService::health() const {
  const auto snapshot = store_->current();
  const bool ready = snapshot && !snapshot->model_version().empty() &&
                     snapshot->model_version() == model_->model_version();
  return {{"status", ready ? "ok" : "not_ready"},
          {"snapshot_version", snapshot ? snapshot->version() : 0},
          {"model_version", model_->model_version()},
          {"index_model_version", snapshot ? snapshot->model_version() : std::string()},
          {"record_count", snapshot ? snapshot->size() : 0},
          {"query_cache", cache_size()}};
}

// ---------------------------------------------------------------------------
// Labeling

std::string_view to_string(TaskStatus s) { return s == TaskStatus::open ? "open" : "done"; }

nlohmann::json to_json(const LabelingTask& t) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : t.items) items.push_back({{"id", it.id}, {"title", it.title}});
  nlohmann::json j{{"task_id", t.task_id},
                   {"domain", corpus::to_string(t.domain)},
                   {"query_id", t.query_id},
                   {"query_text", t.query_text},
                   {"items", items},
                   {"status", to_string(t.status)},
                   {"snapshot_version", t.snapshot_version},
                   {"round", t.round}};
  if (t.status == TaskStatus::done) {
    j["grades"] = t.grades;
    j["annotator_id"] = t.annotator_id;
  }
  return j;
}

LabelSubmission parse_label_submission(const nlohmann::json& body) {
  if (!body.is_object()) throw ApiError(400, "invalid_body", "request body must be a JSON object");
  LabelSubmission s;
  if (!body.contains("task_id") || !body.at("task_id").is_number_integer() ||
      (!body.at("task_id").is_number_unsigned() && body.at("task_id").get<std::int64_t>() < 0))
    throw ApiError(400, "invalid_field", "task_id must be a non-negative integer", "task_id");
  s.task_id = body.at("task_id").get<std::uint64_t>();
  if (!body.contains("grades") || !body.at("grades").is_array())
    throw ApiError(400, "invalid_field", "grades must be an array", "grades");
  const auto& g = body.at("grades");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto field = "grades[" + std::to_string(i) + "]";
    if (!g[i].is_number_integer()) throw ApiError(400, "invalid_field", field + " must be an integer", field);
    const auto v = g[i].get<std::int64_t>();
    if (v < 0 || v > 2) throw ApiError(400, "invalid_field", field + " must be 0, 1 or 2", field);
    s.grades.push_back(static_cast<int>(v));
  }
  s.annotator_id = body.contains("annotator_id") ? required<std::string>(body, "annotator_id") : "anonymous";
  return s;
}

LabelingQueue::LabelingQueue(std::filesystem::path judgments_path)
    : path_(std::move(judgments_path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open judgments store " + path_.string());
}

std::vector<LabelingTask> LabelingQueue::enqueue(std::vector<LabelingTask> drafts) {
  std::lock_guard lock(mu_);
  std::set<std::pair<Domain, std::uint64_t>> open;
  for (const auto& [id, t] : tasks_)
    if (t.status == TaskStatus::open) open.emplace(t.domain, t.query_id);
  std::vector<LabelingTask> out;
  for (auto& d : drafts) {
    if (d.items.empty() || !open.emplace(d.domain, d.query_id).second) continue;
    d.task_id = next_id_++;
    d.status = TaskStatus::open;
    d.grades.clear();
    d.annotator_id.clear();
    tasks_.emplace(d.task_id, d);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<LabelingTask> LabelingQueue::open_tasks(std::size_t limit) const {
  std::lock_guard lock(mu_);
  std::vector<LabelingTask> out;
  for (const auto& [id, t] : tasks_) {
    if (out.size() >= limit) break;
    if (t.status == TaskStatus::open) out.push_back(t);
  }
  return out;
}

std::optional<LabelingTask> LabelingQueue::task(std::uint64_t id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

void LabelingQueue::submit(const LabelSubmission& s) {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(s.task_id);
  if (it == tasks_.end())
    throw ApiError(404, "unknown_task", "no task " + std::to_string(s.task_id), "task_id");
  auto& t = it->second;
  if (t.status == TaskStatus::done)
    throw ApiError(409, "task_closed", "task " + std::to_string(s.task_id) + " is already labeled", "task_id");
  if (s.grades.size() != t.items.size())
    throw ApiError(400, "grade_count", "expected " + std::to_string(t.items.size()) + " grades, got " +
                                           std::to_string(s.grades.size()), "grades");
  for (std::size_t i = 0; i < s.grades.size(); ++i)
    if (s.grades[i] < 0 || s.grades[i] > 2) {
      const auto field = "grades[" + std::to_string(i) + "]";
      throw ApiError(400, "invalid_field", field + " must be 0, 1 or 2", field);
    }

  for (std::size_t i = 0; i < t.items.size(); ++i)
    out_ << nlohmann::json(metrics::Judgment{t.query_id, t.items[i].id, s.grades[i], "human"}).dump() << '\n';
  out_.flush();
  if (!out_) throw ApiError(500, "store_failed", "could not write the judgments store");

  t.status = TaskStatus::done;
  t.grades = s.grades;
  t.annotator_id = s.annotator_id;
  closed_cv_.notify_all();
}

std::map<Domain, std::size_t> LabelingQueue::pending() const {
  std::lock_guard lock(mu_);
  std::map<Domain, std::size_t> out;
  for (const auto& [id, t] : tasks_)
    if (t.status == TaskStatus::open) ++out[t.domain];
  return out;
}

std::size_t LabelingQueue::open_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(tasks_.begin(), tasks_.end(), [](const auto& kv) {
    return kv.second.status == TaskStatus::open;
  }));
}

bool LabelingQueue::wait_closed(std::span<const std::uint64_t> ids, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return closed_cv_.wait_for(lock, timeout, [&] {
    return std::all_of(ids.begin(), ids.end(), [&](std::uint64_t id) {
      auto it = tasks_.find(id);
      return it != tasks_.end() && it->second.status == TaskStatus::done;
    });
  });
}

namespace {

void add_entry(fusion::FeedbackMap& out, const LabelingTask& t) {
  auto& batch = out[t.domain];
  batch.domain = t.domain;
  fusion::FeedbackEntry e;
  e.query_id = t.query_id;
  e.query_text = t.query_text;
  for (const auto& it : t.items) e.item_ids.push_back(it.id);
  e.grades = t.grades;
  batch.entries.push_back(std::move(e));
}

}  // namespace

fusion::FeedbackMap LabelingQueue::feedback(std::span<const std::uint64_t> ids) const {
  std::lock_guard lock(mu_);
  fusion::FeedbackMap out;
  for (auto id : ids) {
    auto it = tasks_.find(id);
    if (it != tasks_.end() && it->second.status == TaskStatus::done) add_entry(out, it->second);
  }
  return out;
}

fusion::FeedbackMap LabelingQueue::latest_feedback() const {
  std::lock_guard lock(mu_);
  std::optional<std::size_t> round;
  for (const auto& [id, t] : tasks_)
    if (t.status == TaskStatus::done && (!round || t.round > *round)) round = t.round;
  fusion::FeedbackMap out;
  if (!round) return out;
  for (const auto& [id, t] : tasks_)
    if (t.status == TaskStatus::done && t.round == *round) add_entry(out, t);
  return out;
}

PoolRanker rank_with_params(const encoder::EncoderParams& params) {
  return [&params](const corpus::FeedbackQuery& q, std::size_t k) { return fusion::rank_pool(params, q, k); };
}

PoolRanker rank_with_embedder(const encoder::TextEmbedder& model) {
  return [&model](const corpus::FeedbackQuery& q, std::size_t k) {
    const auto qv = model.embed_query(q.query_text);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < q.candidates.size(); ++i) {
      const auto iv = model.embed_item(q.candidates[i].text);
      double s = 0.0;
      for (std::size_t d = 0; d < qv.size(); ++d) s += static_cast<double>(qv[d]) * iv[d];
      scored.emplace_back(s, i);
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return q.candidates[a.second].item_id < q.candidates[b.second].item_id;
    });
    fusion::FeedbackEntry e;
    e.query_id = q.query_id;
    e.query_text = q.query_text;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
      e.item_ids.push_back(q.candidates[scored[i].second].item_id);
      e.grades.push_back(q.candidates[scored[i].second].grade);
    }
    return e;
  };
}

std::vector<LabelingTask> draft_labeling_round(const corpus::FeedbackPools& pools,
                                               std::span<const Domain> active,
                                               const PoolRanker& rank,
                                               std::size_t per_domain_queries,
                                               std::size_t k_per_query,
                                               std::uint64_t snapshot_version, std::size_t round) {
  std::vector<LabelingTask> out;
  for (Domain d : active) {
    auto it = pools.find(d);
    if (it == pools.end() || it->second.empty()) continue;
    const auto& qs = it->second;
    const auto n = std::min(per_domain_queries, qs.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& q = qs[(round * per_domain_queries + i) % qs.size()];
      std::unordered_map<std::uint64_t, const std::string*> text;
      for (const auto& c : q.candidates) text.emplace(c.item_id, &c.text);
      const auto ranked = rank(q, k_per_query);
      LabelingTask t;
      t.domain = d;
      t.query_id = q.query_id;
      t.query_text = q.query_text;
      t.snapshot_version = snapshot_version;
      t.round = round;
      for (auto id : ranked.item_ids) t.items.push_back({id, *text.at(id)});
      out.push_back(std::move(t));
    }
  }
  return out;
}

nlohmann::json to_json(const RecalibrationStatus& s) {
  nlohmann::json domains = nlohmann::json::array();
  for (const auto& d : s.domains)
    domains.push_back({{"domain", corpus::to_string(d.domain)},
                       {"x", d.x},
                       {"w", d.w},
                       {"p", d.p},
                       {"stale", d.stale},
                       {"labels_pending", d.labels_pending}});
  return {{"round", s.round}, {"revision", s.revision}, {"domains", domains}};
}

HitlBackend::HitlBackend(std::shared_ptr<const corpus::FeedbackPools> pools,
                         std::shared_ptr<LabelingQueue> queue, std::shared_ptr<fusion::WeightsBoard> board)
    : pools_(std::move(pools)), queue_(std::move(queue)), board_(std::move(board)) {
  if (!pools_ || !queue_ || !board_) throw std::invalid_argument("HITL backend needs pools, a queue and a board");
}

std::vector<LabelingTask> HitlBackend::enqueue_labeling_round(std::span<const Domain> active,
                                                              const PoolRanker& rank,
                                                              std::size_t per_domain_queries,
                                                              std::size_t k_per_query,
                                                              std::uint64_t snapshot_version,
                                                              std::size_t round) {
  return queue_->enqueue(
      draft_labeling_round(*pools_, active, rank, per_domain_queries, k_per_query, snapshot_version, round));
}

fusion::Recalibration HitlBackend::recalibrate_now() {
  std::lock_guard lock(recalibrate_mu_);
  const auto current = board_->snapshot();
  std::vector<Domain> active;
  for (const auto& w : current->weights) active.push_back(w.domain);
  if (active.empty()) active.assign(std::begin(corpus::kAllDomains), std::end(corpus::kAllDomains));
  auto rec = fusion::recalibrate(queue_->latest_feedback(), active, current->weights);
  board_->commit(rec.weights, current->round);
  return rec;
}

RecalibrationStatus HitlBackend::recalibration_status() const {
  const auto snap = board_->snapshot();
  const auto pending = queue_->pending();
  RecalibrationStatus s;
  s.round = snap->round;
  s.revision = snap->revision;
  std::set<Domain> listed;
  for (const auto& w : snap->weights) {
    auto it = pending.find(w.domain);
    s.domains.push_back({w.domain, w.x, w.w, w.p, w.stale, it == pending.end() ? 0 : it->second});
    listed.insert(w.domain);
  }
  // Domains with open tasks that are not yet weighted.
  for (const auto& [d, n] : pending)
    if (!listed.contains(d)) s.domains.push_back({d, 0.5, fusion::weight(0.5), 0.0, true, n});
  return s;
}

HumanFeedbackProvider::HumanFeedbackProvider(HitlBackend& backend, Options opts,
                                             std::shared_ptr<index::SnapshotStore> store)
    : backend_(backend), opts_(opts), store_(std::move(store)) {}

fusion::FeedbackResult HumanFeedbackProvider::collect(std::span<const Domain> active,
                                                      const encoder::EncoderParams& params,
                                                      std::size_t round,
                                                      fusion::FeedbackSource requested) {
  fusion::OracleFeedback oracle(backend_.pools(), opts_.k_per_query);
  if (requested == fusion::FeedbackSource::oracle) return oracle.collect(active, params, round, requested);

  std::uint64_t snapshot_version = 0;
  if (store_)
    if (auto s = store_->current()) snapshot_version = s->version();
  const auto tasks = backend_.enqueue_labeling_round(active, rank_with_params(params), opts_.per_domain_queries,
                                                     opts_.k_per_query, snapshot_version, round);
  std::vector<std::uint64_t> ids;
  for (const auto& t : tasks) ids.push_back(t.task_id);
  backend_.queue().wait_closed(ids, opts_.timeout);

  // A domain counts as human-labeled only when all of its tasks closed.
  std::map<Domain, std::vector<std::uint64_t>> by_domain;
  for (const auto& t : tasks) by_domain[t.domain].push_back(t.task_id);
  fusion::FeedbackResult res;
  res.used = fusion::FeedbackSource::human;
  std::vector<Domain> missing;
  for (Domain d : active) {
    auto it = by_domain.find(d);
    if (it == by_domain.end()) {
      missing.push_back(d);
      continue;
    }
    auto fb = backend_.queue().feedback(it->second);
    if (fb.contains(d) && fb.at(d).entries.size() == it->second.size()) res.feedback[d] = std::move(fb.at(d));
    else missing.push_back(d);
  }
  if (!missing.empty()) {
    res.fell_back = true;
    auto filled = oracle.collect(missing, params, round, fusion::FeedbackSource::oracle);
    for (auto& [d, b] : filled.feedback) res.feedback[d] = std::move(b);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Transport-free API

ApiHandler::ApiHandler(std::shared_ptr<RetrievalService> retrieval, std::shared_ptr<HitlBackend> hitl)
    : retrieval_(std::move(retrieval)), hitl_(std::move(hitl)) {
  if (!retrieval_) throw std::invalid_argument("API handler needs a retrieval service");
}

namespace {

nlohmann::json parse_body(std::string_view body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ApiError(400, "invalid_json", std::string("body is not valid JSON: ") + e.what());
  }
}

}  // namespace

ApiResponse ApiHandler::handle(std::string_view method, std::string_view path,
                               const std::map<std::string, std::string>& query, std::string_view body) const {
  try {
    if (path == "/v1/retrieve") {
      if (method == "POST") return retrieve(body);
    } else if (path == "/v1/hitl/tasks") {
      if (method == "GET") return tasks(query);
    } else if (path == "/v1/hitl/labels") {
      if (method == "POST") return labels(body);
    } else if (path == "/v1/hitl/weights") {
      if (method == "GET") return weights();
    } else if (path == "/v1/hitl/recalibrate") {
      if (method == "POST") return recalibrate();
    } else if (path == "/healthz") {
      if (method == "GET") return health();
    } else {
      throw ApiError(404, "not_found", "no route " + std::string(path));
    }
    throw ApiError(405, "method_not_allowed", std::string(method) + " is not allowed on " + std::string(path));
  } catch (const ApiError& e) {
    return {e.status(), e.body()};
  } catch (const std::exception& e) {
    return {500, ApiError(500, "internal", e.what()).body()};
  }
}

ApiResponse ApiHandler::retrieve(std::string_view body) const {
  const auto req = parse_retrieval_request(parse_body(body));
  return {200, to_json(retrieval_->retrieve(req), req.debug)};
}

HitlBackend& ApiHandler::require_hitl() const {
  if (!hitl_) throw ApiError(503, "hitl_disabled", "the labeling backend is not configured");
  return *hitl_;
}

ApiResponse ApiHandler::tasks(const std::map<std::string, std::string>& query) const {
  auto& hitl = require_hitl();
  std::size_t limit = 50;
  if (auto it = query.find("limit"); it != query.end()) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(it->second, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != it->second.size() || v < 1 || v > 1000)
      throw ApiError(400, "invalid_field", "limit must be an integer in [1, 1000]", "limit");
    limit = static_cast<std::size_t>(v);
  }
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : hitl.queue().open_tasks(limit)) list.push_back(to_json(t));
  return {200, {{"tasks", list}, {"open", hitl.queue().open_count()}}};
}

ApiResponse ApiHandler::labels(std::string_view body) const {
  auto& hitl = require_hitl();
  const auto s = parse_label_submission(parse_body(body));
  hitl.queue().submit(s);
  return {200, {{"task_id", s.task_id}, {"status", "done"}}};
}

ApiResponse ApiHandler::weights() const { return {200, to_json(require_hitl().recalibration_status())}; }

ApiResponse ApiHandler::recalibrate() const {
  auto& hitl = require_hitl();
  const auto rec = hitl.recalibrate_now();
  auto j = to_json(hitl.recalibration_status());
  nlohmann::json stale = nlohmann::json::array();
  for (Domain d : rec.stale) stale.push_back(corpus::to_string(d));
  j["stale"] = stale;
  return {200, j};
}

ApiResponse ApiHandler::health() const { return {200, retrieval_->health()}; }

}  // namespace semret::service
