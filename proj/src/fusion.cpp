#include "semret/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "semret/metrics.hpp"

namespace semret::fusion {

double weight(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("nDCG feedback must lie in [0, 1]");
  return 1.0 / (1.0 + std::exp(10.0 * x - 5.0));
}

namespace {

void normalize(std::vector<DomainWeight>& weights) {
  double total = 0.0;
  for (const auto& dw : weights) total += dw.w;
  for (auto& dw : weights) dw.p = dw.w / total;
}

std::optional<double> mean_ndcg(const FeedbackBatch& batch, std::size_t cutoff) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : batch.entries) {
    if (e.grades.empty()) continue;
    sum += metrics::ndcg(e.grades, cutoff);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

Recalibration recalibrate(const FeedbackMap& feedback, std::span<const Domain> active,
                          std::span<const DomainWeight> previous, std::size_t ndcg_cutoff) {
  if (active.empty()) throw std::invalid_argument("recalibration needs at least one active domain");
  Recalibration out;
  for (Domain d : active) {
    DomainWeight dw;
    dw.domain = d;
    std::optional<double> x;
    if (auto it = feedback.find(d); it != feedback.end()) x = mean_ndcg(it->second, ndcg_cutoff);
    if (x) {
      dw.x = std::clamp(*x, 0.0, 1.0);
    } else {
      dw.stale = true;
      out.stale.push_back(d);
      auto prev = std::find_if(previous.begin(), previous.end(),
                               [d](const DomainWeight& p) { return p.domain == d; });
      dw.x = prev != previous.end() ? prev->x : 0.5;
    }
    dw.w = weight(dw.x);
    out.weights.push_back(dw);
  }
  normalize(out.weights);
  return out;
}

std::vector<DomainWeight> recalibrate(const FeedbackMap& feedback, std::size_t ndcg_cutoff) {
  std::vector<Domain> active;
  for (const auto& [d, _] : feedback) active.push_back(d);
  return recalibrate(feedback, active, {}, ndcg_cutoff).weights;
}

std::vector<DomainDraw> sample_batch(std::span<const DomainWeight> weights,
                                     const DatasetSizes& sizes, std::size_t batch_size,
                                     std::uint64_t seed, std::uint64_t draw_index) {
  if (weights.empty()) throw std::invalid_argument("no domain weights to sample from");
  std::vector<double> probs;
  for (const auto& dw : weights) {
    if (dw.p > 0.0) {
      auto it = sizes.find(dw.domain);
      if (it == sizes.end() || it->second == 0)
        throw std::invalid_argument("empty dataset for active domain " +
                                    std::string(corpus::to_string(dw.domain)));
    }
    probs.push_back(dw.p);
  }
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!(std::abs(total - 1.0) < 1e-6)) throw std::invalid_argument("domain probabilities must sum to 1");

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(draw_index),
                    static_cast<std::uint32_t>(draw_index >> 32)};
  std::mt19937_64 rng(seq);
  std::discrete_distribution<std::size_t> pick_domain(probs.begin(), probs.end());
  std::vector<DomainDraw> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto& dw = weights[pick_domain(rng)];
    const auto n = sizes.at(dw.domain);
    out.push_back({dw.domain, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)});
  }
  return out;
}

std::string_view to_string(FeedbackSource s) { return s == FeedbackSource::human ? "human" : "oracle"; }

FusionSchedule FusionSchedule::progressive(std::vector<std::size_t> batches_per_round,
                                           std::size_t batch_size, FeedbackSource source) {
  static const std::vector<std::vector<Domain>> kStages = {
      {Domain::general_language},
      {Domain::general_language, Domain::sem, Domain::organic},
      {Domain::general_language, Domain::sem, Domain::organic, Domain::ads}};
  if (batches_per_round.size() != kStages.size())
    throw std::invalid_argument("progressive schedule has exactly 3 rounds");
  FusionSchedule s;
  s.batch_size = batch_size;
  for (std::size_t r = 0; r < kStages.size(); ++r)
    s.rounds.push_back({kStages[r], batches_per_round[r], source});
  return s;
}

void FusionSchedule::validate() const {
  if (rounds.empty()) throw std::invalid_argument("fusion schedule has no rounds");
  if (batch_size == 0) throw std::invalid_argument("fusion batch size must be positive");
  std::set<Domain> seen;
  for (const auto& r : rounds) {
    if (r.active.empty()) throw std::invalid_argument("fusion round with no active domains");
    std::set<Domain> now(r.active.begin(), r.active.end());
    if (now.size() != r.active.size()) throw std::invalid_argument("duplicate domain in fusion round");
    for (Domain d : seen)
      if (!now.contains(d))
        throw std::invalid_argument("domain " + std::string(corpus::to_string(d)) +
                                    " deactivated in a later round");
    seen = std::move(now);
  }
}

FeedbackEntry rank_pool(const encoder::EncoderParams& params, const corpus::FeedbackQuery& query,
                        std::size_t k) {
  const auto q = encoder::encode_text(params, query.query_text);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(query.candidates.size());
  for (std::size_t i = 0; i < query.candidates.size(); ++i)
    scored.emplace_back(q.dot(encoder::encode_text(params, query.candidates[i].text)), i);
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return query.candidates[a.second].item_id < query.candidates[b.second].item_id;
  });
  FeedbackEntry e;
  e.query_id = query.query_id;
  e.query_text = query.query_text;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
    const auto& c = query.candidates[scored[i].second];
    e.item_ids.push_back(c.item_id);
    e.grades.push_back(c.grade);
  }
  return e;
}

OracleFeedback::OracleFeedback(std::shared_ptr<const corpus::FeedbackPools> pools, std::size_t k)
    : pools_(std::move(pools)), k_(k) {}

FeedbackResult OracleFeedback::collect(std::span<const Domain> active,
                                       const encoder::EncoderParams& params, std::size_t,
                                       FeedbackSource) {
  FeedbackResult out;
  for (Domain d : active) {
    auto it = pools_->find(d);
    if (it == pools_->end()) continue;
    auto& batch = out.feedback[d];
    batch.domain = d;
    for (const auto& q : it->second) batch.entries.push_back(rank_pool(params, q, k_));
  }
  return out;
}

WeightsBoard::WeightsBoard() : current_(std::make_shared<WeightsSnapshot>()) {}

void WeightsBoard::commit(std::vector<DomainWeight> weights, std::size_t round) {
  std::lock_guard lock(mu_);
  auto next = std::make_shared<WeightsSnapshot>();
  next->round = round;
  next->revision = current_->revision + 1;
  next->weights = std::move(weights);
  current_ = std::move(next);
}

std::shared_ptr<const WeightsSnapshot> WeightsBoard::snapshot() const {
  std::lock_guard lock(mu_);
  return current_;
}

ScheduleResult run_schedule(const FusionSchedule& schedule, RoundTrainer& trainer,
                            FeedbackProvider& feedback, std::uint64_t seed, WeightsBoard* board) {
  schedule.validate();
  ScheduleResult result;
  std::vector<DomainWeight> previous;
  std::uint64_t draw_index = 0;
  const auto sizes = trainer.dataset_sizes();
  for (std::size_t r = 0; r < schedule.rounds.size(); ++r) {
    const auto& round = schedule.rounds[r];
    auto fb = feedback.collect(round.active, trainer.params(), r, round.source);
    auto rec = recalibrate(fb.feedback, round.active, previous);
    if (board) board->commit(rec.weights, r);

    std::map<Domain, std::size_t> batches_with, examples;
    for (std::size_t b = 0; b < round.batches; ++b) {
      const auto draws = sample_batch(rec.weights, sizes, schedule.batch_size, seed, draw_index++);
      std::set<Domain> in_batch;
      for (const auto& d : draws) {
        ++examples[d.domain];
        in_batch.insert(d.domain);
      }
      for (Domain d : in_batch) ++batches_with[d];
      trainer.train_batch(draws, r);
    }

    for (const auto& dw : rec.weights) {
      RoundReport rep;
      rep.round = r;
      rep.domain = dw.domain;
      rep.x = dw.x;
      rep.w = dw.w;
      rep.p = dw.p;
      rep.batches_drawn = batches_with[dw.domain];
      rep.examples_drawn = examples[dw.domain];
      rep.stale = dw.stale;
      rep.feedback = fb.used;
      rep.fell_back = fb.fell_back;
      result.reports.push_back(rep);
    }
    result.weights_per_round.push_back(rec.weights);
    previous = std::move(rec.weights);
  }
  return result;
}

void write_round_reports(const std::filesystem::path& path, std::span<const RoundReport> reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : reports) {
    nlohmann::json j{{"round", r.round},
                     {"domain", corpus::to_string(r.domain)},
                     {"x", r.x},
                     {"w", r.w},
                     {"p", r.p},
                     {"batches_drawn", r.batches_drawn},
                     {"examples_drawn", r.examples_drawn},
                     {"stale", r.stale},
                     {"feedback", to_string(r.feedback)},
                     {"fell_back", r.fell_back}};
    out << j.dump() << '\n';
  }
}

}  // namespace semret::fusion
