#include "semret/experiment.hpp"

#include <numeric>
#include <set>

#include "semret/checkpoint.hpp"
#include "semret/pipeline.hpp"

namespace semret::experiment {

std::size_t ExperimentConfig::stage2_steps() const {
  return std::accumulate(batches_per_round.begin(), batches_per_round.end(), std::size_t{0});
}

std::vector<corpus::TrainingTriplet> easy_triplets(const corpus::World& world) {
  const auto& c = world.config;
  corpus::MiningConfig easy;
  easy.impression_floor = c.impression_floor;
  easy.ctr_ceiling = c.ctr_ceiling;
  easy.click_threshold = c.click_threshold;
  easy.hard_fraction = 0.0;
  easy.n_triplets = c.n_triplets;
  easy.seed = c.seed;
  return corpus::mine_negatives(world.events, world.catalog, world.train_queries, easy);
}

std::vector<metrics::EvalQuery> heldout_eval_queries(const corpus::World& world,
                                                     const corpus::FeedbackPools& pools, std::size_t n,
                                                     std::uint64_t seed) {
  std::set<std::uint64_t> feedback_ids;
  for (const auto& [d, qs] : pools)
    for (const auto& q : qs) feedback_ids.insert(q.query_id);
  std::vector<corpus::Query> pool;
  for (const auto& q : world.heldout_queries)
    if (!feedback_ids.contains(q.id)) pool.push_back(q);
  return metrics::sample_eval_queries(pool, n, seed);
}

Benchmark make_benchmark(const ExperimentConfig& cfg) {
  Benchmark b;
  b.config = cfg;
  b.world = corpus::generate_world(cfg.corpus);
  b.datasets = corpus::build_domain_datasets(b.world);
  b.triplets = corpus::build_triplets(b.world);

  b.easy_triplets = easy_triplets(b.world);
  b.pretrain_set = corpus::build_pretrain_pairs(b.world);
  b.pools = std::make_shared<const corpus::FeedbackPools>(corpus::build_feedback_pools(b.world));

  b.eval_queries = heldout_eval_queries(b.world, *b.pools, cfg.eval_queries, cfg.eval_seed);
  b.judgments = metrics::index_judgments(
      metrics::oracle_judgments(b.world.taxonomy, b.world.catalog, b.eval_queries));
  return b;
}

training::PretrainResult run_pretrain(const Benchmark& b) {
  const auto& cfg = b.config;
  auto init = encoder::EncoderParams::init_random(cfg.shape, cfg.init_seed);
  return training::pretrain(std::move(init), training::tokenize_pretrain(b.pretrain_set, cfg.shape.vocab),
                            cfg.pretrain);
}

training::Stage2Result run_stage2(const Benchmark& b, encoder::EncoderParams init,
                                  bool easy_negatives_only, fusion::WeightsBoard* board) {
  const auto& cfg = b.config;
  auto data = training::tokenize_stage2(b.datasets, easy_negatives_only ? b.easy_triplets : b.triplets,
                                        cfg.shape.vocab);
  const auto schedule = fusion::FusionSchedule::progressive(cfg.batches_per_round, cfg.batch_size);
  fusion::OracleFeedback feedback(b.pools);
  return training::train_stage2(std::move(init), std::move(data), schedule, feedback, cfg.stage2, board);
}

training::DssmResult run_dssm(const Benchmark& b) {
  const auto& cfg = b.config;
  const auto& ads = b.datasets.at(corpus::Domain::ads);
  const auto data = training::dssm_examples(ads, b.world.catalog, cfg.dssm_negatives_per_positive,
                                            cfg.shape.vocab, cfg.stage2.seed);
  training::DssmTrainConfig tc;
  tc.steps = cfg.stage2_steps();
  tc.batch_size = cfg.batch_size;
  tc.adam = cfg.stage2.adam;
  tc.seed = cfg.stage2.seed;
  return training::train_dssm(encoder::DssmParams::init_random(cfg.shape, cfg.init_seed), data, tc);
}

metrics::MetricReport evaluate(const Benchmark& b, const encoder::TextEmbedder& model,
                               std::shared_ptr<const index::IndexSnapshot>* snapshot_out) {
  const auto entities = pipeline::catalog_entities(b.world.catalog);
  auto records = pipeline::embed_all(entities, model);
  auto snapshot = index::IndexSnapshot::build(std::move(records), b.config.hnsw, 1);
  metrics::SimulationConfig sc;
  sc.k = b.config.k;
  sc.ef_search = std::max(b.config.hnsw.ef_search, b.config.k);
  auto report = metrics::simulate_offline(model, *snapshot, b.eval_queries, b.judgments, sc);
  if (snapshot_out) *snapshot_out = std::move(snapshot);
  return report;
}

}  // namespace semret::experiment
