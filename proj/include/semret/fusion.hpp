#pragma once

// Multi-domain progressive fusion sampling with human-in-the-loop
// recalibration. Per-domain nDCG feedback x_i becomes a logistic weight
// w_i = 1 / (1 + exp(10 x_i - 5)); weights over the active domains are
// normalized into the next round's sampling distribution.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semret/corpus.hpp"
#include "semret/encoder.hpp"

namespace semret::fusion {

using corpus::Domain;

/// Logistic domain weight. Rejects x outside [0, 1].
double weight(double x);

struct DomainWeight {
  Domain domain = Domain::general_language;
  double x = 0.5;  // measured nDCG
  double w = 0.5;  // weight(x)
  double p = 0.0;  // normalized sampling probability
  bool stale = false;  // no fresh feedback this round; x carried over
};

/// Ranked list returned for one feedback query, with one grade per item.
struct FeedbackEntry {
  std::uint64_t query_id = 0;
  std::string query_text;
  std::vector<std::uint64_t> item_ids;
  std::vector<int> grades;
};

struct FeedbackBatch {
  Domain domain = Domain::general_language;
  std::vector<FeedbackEntry> entries;
};

using FeedbackMap = std::map<Domain, FeedbackBatch>;

struct Recalibration {
  std::vector<DomainWeight> weights;  // one per active domain, in active order
  std::vector<Domain> stale;          // domains that reused their previous x
};

inline constexpr std::size_t kDefaultNdcgCutoff = 10;

/// x_i = mean NDCG@cutoff over the domain's feedback entries; p_i = w_i / sum w.
/// Domains without usable feedback keep their previous x (0.5 if none) and are
/// reported as stale.
Recalibration recalibrate(const FeedbackMap& feedback, std::span<const Domain> active,
                          std::span<const DomainWeight> previous = {},
                          std::size_t ndcg_cutoff = kDefaultNdcgCutoff);

/// Convenience overload: every domain present in `feedback` is active.
std::vector<DomainWeight> recalibrate(const FeedbackMap& feedback,
                                      std::size_t ndcg_cutoff = kDefaultNdcgCutoff);

struct DomainDraw {
  Domain domain = Domain::general_language;
  std::size_t index = 0;

  bool operator==(const DomainDraw&) const = default;
};

using DatasetSizes = std::map<Domain, std::size_t>;

/// Draws a domain from p, then an example uniformly within it. The result is a
/// pure function of (weights, sizes, batch_size, seed, draw_index).
std::vector<DomainDraw> sample_batch(std::span<const DomainWeight> weights,
                                     const DatasetSizes& sizes, std::size_t batch_size,
                                     std::uint64_t seed, std::uint64_t draw_index);

enum class FeedbackSource { oracle, human };
std::string_view to_string(FeedbackSource s);

struct FusionRound {
  std::vector<Domain> active;
  std::size_t batches = 0;
  FeedbackSource source = FeedbackSource::oracle;
};

struct FusionSchedule {
  std::vector<FusionRound> rounds;
  std::size_t batch_size = 64;

  /// {general} -> {general, sem, organic} -> all four.
  static FusionSchedule progressive(std::vector<std::size_t> batches_per_round,
                                    std::size_t batch_size = 64,
                                    FeedbackSource source = FeedbackSource::oracle);
  /// Throws if a round drops a previously active domain or has no domains.
  void validate() const;
};

class RoundTrainer {
 public:
  virtual ~RoundTrainer() = default;
  virtual void train_batch(std::span<const DomainDraw> draws, std::size_t round) = 0;
  virtual const encoder::EncoderParams& params() const = 0;
  virtual DatasetSizes dataset_sizes() const = 0;
};

struct FeedbackResult {
  FeedbackMap feedback;
  FeedbackSource used = FeedbackSource::oracle;
  bool fell_back = false;  // human feedback timed out; oracle used instead
};

class FeedbackProvider {
 public:
  virtual ~FeedbackProvider() = default;
  virtual FeedbackResult collect(std::span<const Domain> active,
                                 const encoder::EncoderParams& params, std::size_t round,
                                 FeedbackSource requested) = 0;
};

/// Ranks a candidate pool with the encoder and keeps the top k.
FeedbackEntry rank_pool(const encoder::EncoderParams& params, const corpus::FeedbackQuery& query,
                        std::size_t k);

/// Grades come from synthetic ground truth; no human involvement.
class OracleFeedback final : public FeedbackProvider {
 public:
  explicit OracleFeedback(std::shared_ptr<const corpus::FeedbackPools> pools,
                          std::size_t k = kDefaultNdcgCutoff);
  FeedbackResult collect(std::span<const Domain> active, const encoder::EncoderParams& params,
                         std::size_t round, FeedbackSource requested) override;

 private:
  std::shared_ptr<const corpus::FeedbackPools> pools_;
  std::size_t k_;
};

/// Latest committed weights; readers get an immutable snapshot.
struct WeightsSnapshot {
  std::size_t round = 0;
  std::uint64_t revision = 0;
  std::vector<DomainWeight> weights;
};

class WeightsBoard {
 public:
  WeightsBoard();
  void commit(std::vector<DomainWeight> weights, std::size_t round);
  std::shared_ptr<const WeightsSnapshot> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const WeightsSnapshot> current_;
};

struct RoundReport {
  std::size_t round = 0;
  Domain domain = Domain::general_language;
  double x = 0.0;
  double w = 0.0;
  double p = 0.0;
  std::size_t batches_drawn = 0;  // batches containing at least one draw from this domain
  std::size_t examples_drawn = 0;
  bool stale = false;
  FeedbackSource feedback = FeedbackSource::oracle;
  bool fell_back = false;
};

struct ScheduleResult {
  std::vector<RoundReport> reports;
  std::vector<std::vector<DomainWeight>> weights_per_round;
};

ScheduleResult run_schedule(const FusionSchedule& schedule, RoundTrainer& trainer,
                            FeedbackProvider& feedback, std::uint64_t seed,
                            WeightsBoard* board = nullptr);

void write_round_reports(const std::filesystem::path& path, std::span<const RoundReport> reports);

}  // namespace semret::fusion
