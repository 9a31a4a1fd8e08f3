#pragma once

// The end-to-end benchmark shared by the CLI and the acceptance suite:
// synthetic world -> stage-1 pretraining -> fusion-scheduled stage-2 training
// -> catalog ingestion -> offline simulation, plus the DSSM baseline and the
// ablation variants.

#include <cstdint>
#include <memory>
#include <vector>

#include "semret/corpus.hpp"
#include "semret/encoder.hpp"
#include "semret/fusion.hpp"
#include "semret/index.hpp"
#include "semret/simulation.hpp"
#include "semret/training.hpp"

namespace semret::experiment {

struct ExperimentConfig {
  corpus::CorpusConfig corpus;
  encoder::EncoderShape shape;
  std::uint64_t init_seed = 3;
  training::PretrainConfig pretrain;
  std::vector<std::size_t> batches_per_round{300, 300, 600};
  std::size_t batch_size = 64;
  training::Stage2Config stage2;
  std::size_t dssm_negatives_per_positive = 1;
  index::HnswParams hnsw;
  std::size_t eval_queries = 200;
  std::size_t k = 20;
  std::uint64_t eval_seed = 19;

  std::size_t stage2_steps() const;
};

/// Generated data shared by every variant of one benchmark run.
struct Benchmark {
  ExperimentConfig config;
  corpus::World world;
  corpus::DomainDatasets datasets;
  std::vector<corpus::TrainingTriplet> triplets;       // configured hard fraction
  std::vector<corpus::TrainingTriplet> easy_triplets;  // same count, easy negatives only
  corpus::PretrainSet pretrain_set;
  std::shared_ptr<const corpus::FeedbackPools> pools;
  std::vector<metrics::EvalQuery> eval_queries;
  metrics::Judgments judgments;
};

/// Triplets mined like build_triplets but with easy negatives only.
std::vector<corpus::TrainingTriplet> easy_triplets(const corpus::World& world);

/// Held-out queries, minus those used for feedback, sampled by segment.
std::vector<metrics::EvalQuery> heldout_eval_queries(const corpus::World& world,
                                                     const corpus::FeedbackPools& pools, std::size_t n,
                                                     std::uint64_t seed);

Benchmark make_benchmark(const ExperimentConfig& cfg);

training::PretrainResult run_pretrain(const Benchmark& b);

/// Stage-2 from `init` with oracle feedback on the configured schedule.
training::Stage2Result run_stage2(const Benchmark& b, encoder::EncoderParams init,
                                  bool easy_negatives_only = false,
                                  fusion::WeightsBoard* board = nullptr);

training::DssmResult run_dssm(const Benchmark& b);

/// Embeds the catalog with `model`, builds a snapshot and runs the offline simulation.
metrics::MetricReport evaluate(const Benchmark& b, const encoder::TextEmbedder& model,
                               std::shared_ptr<const index::IndexSnapshot>* snapshot_out = nullptr);

}  // namespace semret::experiment
