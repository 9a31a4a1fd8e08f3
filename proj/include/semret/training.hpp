#pragma once

// Two-stage encoder training: stage-1 multi-task classification pretraining
// and stage-2 pair / triplet training driven by the fusion sampler. All
// gradients are analytic; parameters are updated with Adam.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "semret/corpus.hpp"
#include "semret/encoder.hpp"
#include "semret/fusion.hpp"
#include "semret/text.hpp"

namespace semret::training {

using encoder::ClassificationHead;
using encoder::EncoderParams;
using encoder::EncoderShape;
using encoder::Matrix;
using encoder::Vector;

struct PairExample {
  TokenSequence query;
  TokenSequence item;
  double target = 0.0;
};

struct TripletExample {
  TokenSequence anchor;
  TokenSequence positive;
  TokenSequence negative;
};

struct TripletConfig {
  double margin = 0.4;
  /// Throws unless margin lies in (0, 2].
  void validate() const;
};

struct ClassificationExample {
  TokenSequence tokens;
  std::size_t label = 0;
};

/// Thrown when a loss turns non-finite during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 0 -> 0.0, 1 -> 0.5, 2 -> 1.0.
double grade_to_target(int grade);

/// (vx . vy - l)^2
double pair_loss(const Vector& vx, const Vector& vy, double l);
/// max(|A - P| - |A - N| + margin, 0)
double triplet_loss(const Vector& a, const Vector& p, const Vector& n, const TripletConfig& cfg);
/// -ln p[true_class]
double cross_entropy(const Vector& probabilities, std::size_t true_class);

/// One triplet per positive pair, with another in-batch item as the negative.
/// Items whose tokens equal the anchor's positive are never chosen.
std::vector<TripletExample> in_batch_negatives(std::span<const PairExample> batch,
                                               std::uint64_t seed);

/// Gradient tensors mirroring EncoderParams. Embedding rows that received a
/// gradient are tracked so sparse consumers can skip the rest of the table.
struct GradientSet {
  EncoderParams d;
  std::vector<std::uint32_t> rows;  // touched embedding rows, insertion order

  explicit GradientSet(EncoderShape shape);
  void touch_row(std::uint32_t row);
  bool touched(std::uint32_t row) const { return mask_[row] != 0; }
  /// Zeros every tensor and forgets the touched rows.
  void clear();
  /// Throws NonFiniteError naming the first non-finite gradient tensor.
  void require_finite() const;

 private:
  std::vector<std::uint8_t> mask_;
};

struct HeadGradient {
  Matrix weights;
  Vector bias;

  explicit HeadGradient(const ClassificationHead& head);
  void clear();
};

/// Backpropagates dL/d(output) (and optionally an extra dL/d(projected)) through
/// one forward pass, adding into `grad`.
void backprop(const EncoderParams& params, const TokenSequence& tokens,
              const encoder::EncodeTrace& trace, const Vector& d_output,
              const Vector* d_projected, GradientSet& grad);

// Accumulating loss evaluators: each returns the unscaled loss and adds
// scale * dL/dparams into the gradient sets.

double accumulate_pair(const EncoderParams& params, const PairExample& ex, GradientSet& grad,
                       double scale = 1.0);
/// Two independent towers (DSSM): query side uses `qp`, item side `ip`.
double accumulate_pair(const EncoderParams& qp, const EncoderParams& ip, const PairExample& ex,
                       GradientSet& qgrad, GradientSet& igrad, double scale = 1.0);
double accumulate_triplet(const EncoderParams& params, const TripletExample& ex,
                          const TripletConfig& cfg, GradientSet& grad, double scale = 1.0);
double accumulate_classification(const EncoderParams& params, const ClassificationHead& head,
                                 const ClassificationExample& ex, GradientSet& grad,
                                 HeadGradient& head_grad, double scale = 1.0);

/// Fresh single-example gradients.
GradientSet backward(const EncoderParams& params, const PairExample& ex);
GradientSet backward(const EncoderParams& params, const TripletExample& ex, const TripletConfig& cfg);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with per-tensor moments keyed by name. Embedding tables are updated
/// lazily: only rows with a gradient in the current step move, and their
/// moments are left untouched otherwise.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {});

  /// Applies one step to every tensor of `params`. Tensor names are prefixed
  /// with `prefix` so several parameter sets can share one optimizer.
  void step(EncoderParams& params, const GradientSet& grad, const std::string& prefix = "");
  void step(ClassificationHead& head, const HeadGradient& grad, const std::string& prefix);
  /// Advances the shared step counter; call once per batch before step().
  void next_step() { ++t_; }
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  Moments& moments(const std::string& name, std::size_t size);
  void update(std::span<double> param, std::span<const double> grad, Moments& mo,
              std::size_t begin, std::size_t end);

  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// ---------------------------------------------------------------------------
// Stage 1

struct PretrainData {
  std::vector<ClassificationExample> department;
  std::vector<ClassificationExample> product_type;
  std::size_t department_classes = 0;
  std::size_t product_type_classes = 0;
};

PretrainData tokenize_pretrain(const corpus::PretrainSet& set, std::uint32_t vocab);

struct PretrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 11;
};

struct EpochLoss {
  double department = 0.0;    // mean cross-entropy over the epoch
  double product_type = 0.0;
  double total() const { return department + product_type; }
};

struct PretrainResult {
  EncoderParams params;
  std::vector<EpochLoss> epochs;
  // Returned for diagnostics only; the stage-1 artifact is `params`.
  ClassificationHead department_head;
  ClassificationHead product_type_head;
};

/// Alternates department and product_type batches each epoch. Throws
/// DivergenceError on a non-finite loss.
PretrainResult pretrain(EncoderParams params, const PretrainData& data,
                        const PretrainConfig& cfg);

double classification_accuracy(const EncoderParams& params, const ClassificationHead& head,
                               std::span<const ClassificationExample> examples);

// ---------------------------------------------------------------------------
// Stage 2

struct Stage2Data {
  std::map<corpus::Domain, std::vector<PairExample>> pairs;  // pair-loss domains
  std::vector<TripletExample> ads;                           // mined triplets

  fusion::DatasetSizes sizes() const;
};

Stage2Data tokenize_stage2(const corpus::DomainDatasets& datasets,
                           const std::vector<corpus::TrainingTriplet>& triplets,
                           std::uint32_t vocab);

struct Stage2Config {
  TripletConfig triplet;
  AdamConfig adam;
  bool in_batch_negatives = true;
  // Divide dense2 by the mean projection norm before training. The unit-norm
  // output is unchanged; stage-1 cross-entropy leaves projections long, which
  // shrinks every gradient flowing through the normalization.
  bool rescale_projection = true;
  std::uint64_t seed = 13;
};

/// Scales dense2 so the mean pre-normalization projection norm over `sample`
/// is 1. Returns the factor divided out (1 for an empty sample).
double rescale_projection(EncoderParams& params, std::span<const TokenSequence> sample);

/// Per (round, domain) training telemetry.
struct LossTelemetry {
  std::size_t round = 0;
  corpus::Domain domain = corpus::Domain::general_language;
  std::string loss_kind;  // "pair" or "triplet"
  std::size_t examples = 0;
  double mean_loss = 0.0;
};

/// Ads draws use the triplet loss (mined negative plus an in-batch negative);
/// every other domain uses the pair loss. The batch loss is the mean over all
/// loss terms.
class Stage2Trainer final : public fusion::RoundTrainer {
 public:
  Stage2Trainer(EncoderParams init, Stage2Data data, Stage2Config cfg);

  void train_batch(std::span<const fusion::DomainDraw> draws, std::size_t round) override;
  const EncoderParams& params() const override { return params_; }
  fusion::DatasetSizes dataset_sizes() const override { return data_.sizes(); }

  EncoderParams take_params() { return std::move(params_); }
  std::vector<LossTelemetry> telemetry() const;
  std::uint64_t steps() const { return adam_.steps(); }

 private:
  struct Tally {
    std::string kind;
    std::size_t n = 0;
    double sum = 0.0;
  };

  EncoderParams params_;
  Stage2Data data_;
  Stage2Config cfg_;
  Adam adam_;
  GradientSet grad_;
  std::map<std::pair<std::size_t, corpus::Domain>, Tally> tallies_;
};

struct Stage2Result {
  EncoderParams params;
  fusion::ScheduleResult schedule;
  std::vector<LossTelemetry> telemetry;
};

Stage2Result train_stage2(EncoderParams init, Stage2Data data, const fusion::FusionSchedule& schedule,
                          fusion::FeedbackProvider& feedback, const Stage2Config& cfg,
                          fusion::WeightsBoard* board = nullptr);

void write_telemetry(const std::filesystem::path& path, std::span<const LossTelemetry> rows);

// ---------------------------------------------------------------------------
// DSSM baseline

/// Letter-trigram pair examples from labeled pairs plus `negatives_per_positive`
/// random items with target 0.
std::vector<PairExample> dssm_examples(const std::vector<corpus::LabeledPair>& pairs,
                                       const std::vector<corpus::Product>& catalog,
                                       std::size_t negatives_per_positive, std::uint32_t vocab,
                                       std::uint64_t seed);

struct DssmTrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 17;
};

struct DssmResult {
  encoder::DssmParams params;
  std::vector<double> step_loss;
};

DssmResult train_dssm(encoder::DssmParams init, std::span<const PairExample> data,
                      const DssmTrainConfig& cfg);

}  // namespace semret::training
