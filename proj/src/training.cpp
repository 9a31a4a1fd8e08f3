#include "semret/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>

namespace semret::training {

using corpus::Domain;

void TripletConfig::validate() const {
  if (!(margin > 0.0 && margin <= 2.0)) throw std::invalid_argument("triplet margin must lie in (0, 2]");
}

double grade_to_target(int grade) {
  switch (grade) {
    case 0: return 0.0;
    case 1: return 0.5;
    case 2: return 1.0;
    default: throw std::invalid_argument("grade must be 0, 1 or 2");
  }
}

double pair_loss(const Vector& vx, const Vector& vy, double l) {
  const double r = vx.dot(vy) - l;
  return r * r;
}

double triplet_loss(const Vector& a, const Vector& p, const Vector& n, const TripletConfig& cfg) {
  return std::max((a - p).norm() - (a - n).norm() + cfg.margin, 0.0);
}

double cross_entropy(const Vector& probabilities, std::size_t true_class) {
  if (true_class >= static_cast<std::size_t>(probabilities.size()))
    throw std::out_of_range("class index out of range");
  return -std::log(probabilities[static_cast<Eigen::Index>(true_class)]);
}

std::vector<TripletExample> in_batch_negatives(std::span<const PairExample> batch,
                                               std::uint64_t seed) {
  std::vector<TripletExample> out;
  if (batch.size() < 2) return out;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> choices;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    choices.clear();
    for (std::size_t j = 0; j < batch.size(); ++j)
      if (j != i && batch[j].item != batch[i].item) choices.push_back(j);
    if (choices.empty()) continue;
    const auto j = choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
    out.push_back({batch[i].query, batch[i].item, batch[j].item});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients

GradientSet::GradientSet(EncoderShape shape)
    : d(EncoderParams::zeros(shape)), mask_(shape.vocab, 0) {}

void GradientSet::touch_row(std::uint32_t row) {
  if (!mask_[row]) {
    mask_[row] = 1;
    rows.push_back(row);
  }
}

void GradientSet::clear() {
  for (auto r : rows) {
    d.embedding.row(r).setZero();
    mask_[r] = 0;
  }
  rows.clear();
  d.dense1_w.setZero();
  d.dense1_b.setZero();
  d.dense2_w.setZero();
  d.dense2_b.setZero();
}

void GradientSet::require_finite() const {
  for (auto r : rows)
    if (!d.embedding.row(r).allFinite()) throw encoder::NonFiniteError("embedding", "non-finite gradient in embedding");
  if (!d.dense1_w.allFinite()) throw encoder::NonFiniteError("dense1_w", "non-finite gradient in dense1_w");
  if (!d.dense1_b.allFinite()) throw encoder::NonFiniteError("dense1_b", "non-finite gradient in dense1_b");
  if (!d.dense2_w.allFinite()) throw encoder::NonFiniteError("dense2_w", "non-finite gradient in dense2_w");
  if (!d.dense2_b.allFinite()) throw encoder::NonFiniteError("dense2_b", "non-finite gradient in dense2_b");
}

HeadGradient::HeadGradient(const ClassificationHead& head)
    : weights(Matrix::Zero(head.weights.rows(), head.weights.cols())),
      bias(Vector::Zero(head.bias.size())) {}

void HeadGradient::clear() {
  weights.setZero();
  bias.setZero();
}

void backprop(const EncoderParams& params, const TokenSequence& tokens,
              const encoder::EncodeTrace& trace, const Vector& d_output,
              const Vector* d_projected, GradientSet& grad) {
  Vector dz = Vector::Zero(params.shape.output);
  if (!trace.degenerate) dz = (d_output - trace.output * trace.output.dot(d_output)) / trace.norm;
  if (d_projected) dz += *d_projected;

  grad.d.dense2_w.noalias() += trace.hidden * dz.transpose();
  grad.d.dense2_b += dz;
  const Vector dh = params.dense2_w * dz;
  const Vector da = (dh.array() * (1.0 - trace.hidden.array().square())).matrix();
  grad.d.dense1_w.noalias() += trace.pooled * da.transpose();
  grad.d.dense1_b += da;
  const Vector dp = (params.dense1_w * da) / static_cast<double>(tokens.buckets.size());
  for (auto b : tokens.buckets) {
    grad.touch_row(b);
    grad.d.embedding.row(b) += dp.transpose();
  }
}

namespace {

void require_finite_loss(double loss, const char* what) {
  if (!std::isfinite(loss)) throw DivergenceError(std::string("non-finite ") + what + " loss");
}

}  // namespace

double accumulate_pair(const EncoderParams& params, const PairExample& ex, GradientSet& grad,
                       double scale) {
  return accumulate_pair(params, params, ex, grad, grad, scale);
}

double accumulate_pair(const EncoderParams& qp, const EncoderParams& ip, const PairExample& ex,
                       GradientSet& qgrad, GradientSet& igrad, double scale) {
  const auto tq = encoder::forward(qp, ex.query);
  const auto ti = encoder::forward(ip, ex.item);
  const double r = tq.output.dot(ti.output) - ex.target;
  const double loss = r * r;
  require_finite_loss(loss, "pair");
  const double c = 2.0 * r * scale;
  backprop(qp, ex.query, tq, c * ti.output, nullptr, qgrad);
  backprop(ip, ex.item, ti, c * tq.output, nullptr, igrad);
  return loss;
}

double accumulate_triplet(const EncoderParams& params, const TripletExample& ex,
                          const TripletConfig& cfg, GradientSet& grad, double scale) {
  const auto ta = encoder::forward(params, ex.anchor);
  const auto tp = encoder::forward(params, ex.positive);
  const auto tn = encoder::forward(params, ex.negative);
  const Vector ap = ta.output - tp.output;
  const Vector an = ta.output - tn.output;
  const double dap = ap.norm();
  const double dan = an.norm();
  const double loss = std::max(dap - dan + cfg.margin, 0.0);
  require_finite_loss(loss, "triplet");
  if (loss <= 0.0) return 0.0;

  const Vector up = dap > 0.0 ? Vector(ap / dap) : Vector::Zero(ap.size());
  const Vector un = dan > 0.0 ? Vector(an / dan) : Vector::Zero(an.size());
  backprop(params, ex.anchor, ta, scale * (up - un), nullptr, grad);
  backprop(params, ex.positive, tp, -scale * up, nullptr, grad);
  backprop(params, ex.negative, tn, scale * un, nullptr, grad);
  return loss;
}

double accumulate_classification(const EncoderParams& params, const ClassificationHead& head,
                                 const ClassificationExample& ex, GradientSet& grad,
                                 HeadGradient& head_grad, double scale) {
  const auto tr = encoder::forward(params, ex.tokens);
  const Vector probs = encoder::softmax(encoder::head_logits(head, tr.projected));
  const double loss = cross_entropy(probs, ex.label);
  require_finite_loss(loss, "cross-entropy");
  Vector dlogits = probs;
  dlogits[static_cast<Eigen::Index>(ex.label)] -= 1.0;
  dlogits *= scale;
  head_grad.weights.noalias() += tr.projected * dlogits.transpose();
  head_grad.bias += dlogits;
  const Vector dz = head.weights * dlogits;
  backprop(params, ex.tokens, tr, Vector::Zero(params.shape.output), &dz, grad);
  return loss;
}

GradientSet backward(const EncoderParams& params, const PairExample& ex) {
  GradientSet g(params.shape);
  accumulate_pair(params, ex, g);
  g.require_finite();
  return g;
}

GradientSet backward(const EncoderParams& params, const TripletExample& ex, const TripletConfig& cfg) {
  GradientSet g(params.shape);
  accumulate_triplet(params, ex, cfg, g);
  g.require_finite();
  return g;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) || !(cfg.eps > 0.0))
    throw std::invalid_argument("invalid Adam hyperparameters");
}

Adam::Moments& Adam::moments(const std::string& name, std::size_t size) {
  auto& mo = moments_[name];
  if (mo.m.empty()) {
    mo.m.assign(size, 0.0);
    mo.v.assign(size, 0.0);
  }
  return mo;
}

void Adam::update(std::span<double> param, std::span<const double> grad, Moments& mo,
                  std::size_t begin, std::size_t end) {
  if (t_ == 0) throw std::logic_error("Adam::next_step() must precede step()");
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = begin; i < end; ++i) {
    const double g = grad[i];
    mo.m[i] = cfg_.beta1 * mo.m[i] + (1.0 - cfg_.beta1) * g;
    mo.v[i] = cfg_.beta2 * mo.v[i] + (1.0 - cfg_.beta2) * g * g;
    param[i] -= cfg_.lr * (mo.m[i] / c1) / (std::sqrt(mo.v[i] / c2) + cfg_.eps);
  }
}

void Adam::step(EncoderParams& params, const GradientSet& grad, const std::string& prefix) {
  grad.require_finite();
  const std::size_t width = params.shape.hidden;
  {
    std::span<double> p(params.embedding.data(), params.embedding.size());
    std::span<const double> g(grad.d.embedding.data(), grad.d.embedding.size());
    auto& mo = moments(prefix + "embedding", p.size());
    for (auto r : grad.rows) update(p, g, mo, r * width, (r + 1) * width);
  }
  auto dense = [&](const char* name, auto& param, const auto& g) {
    std::span<double> ps(param.data(), static_cast<std::size_t>(param.size()));
    std::span<const double> gs(g.data(), static_cast<std::size_t>(g.size()));
    update(ps, gs, moments(prefix + name, ps.size()), 0, ps.size());
  };
  dense("dense1_w", params.dense1_w, grad.d.dense1_w);
  dense("dense1_b", params.dense1_b, grad.d.dense1_b);
  dense("dense2_w", params.dense2_w, grad.d.dense2_w);
  dense("dense2_b", params.dense2_b, grad.d.dense2_b);
}

void Adam::step(ClassificationHead& head, const HeadGradient& grad, const std::string& prefix) {
  if (!grad.weights.allFinite() || !grad.bias.allFinite())
    throw encoder::NonFiniteError(prefix + "head", "non-finite gradient in classification head");
  std::span<double> w(head.weights.data(), static_cast<std::size_t>(head.weights.size()));
  std::span<double> b(head.bias.data(), static_cast<std::size_t>(head.bias.size()));
  update(w, {grad.weights.data(), w.size()}, moments(prefix + "weights", w.size()), 0, w.size());
  update(b, {grad.bias.data(), b.size()}, moments(prefix + "bias", b.size()), 0, b.size());
}

// ---------------------------------------------------------------------------
// Stage 1

PretrainData tokenize_pretrain(const corpus::PretrainSet& set, std::uint32_t vocab) {
  PretrainData out;
  out.department_classes = set.department_labels.size();
  out.product_type_classes = set.product_type_labels.size();
  for (const auto& p : set.department) out.department.push_back({tokenize(p.text, vocab), p.label_index});
  for (const auto& p : set.product_type) out.product_type.push_back({tokenize(p.text, vocab), p.label_index});
  return out;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

PretrainResult pretrain(EncoderParams params, const PretrainData& data, const PretrainConfig& cfg) {
  if (data.department.empty() || data.product_type.empty())
    throw std::invalid_argument("pretraining needs examples for both tasks");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  params.validate();

  const auto out_dim = params.shape.output;
  PretrainResult res{std::move(params), {},
                     ClassificationHead::init_random(encoder::Task::department, out_dim,
                                                     data.department_classes, cfg.seed + 1),
                     ClassificationHead::init_random(encoder::Task::product_type, out_dim,
                                                     data.product_type_classes, cfg.seed + 2)};
  Adam adam(cfg.adam);
  GradientSet grad(res.params.shape);
  HeadGradient dept_grad(res.department_head), type_grad(res.product_type_head);
  std::mt19937_64 rng(cfg.seed);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto dept_order = shuffled(data.department.size(), rng);
    const auto type_order = shuffled(data.product_type.size(), rng);
    std::size_t di = 0, ti = 0;
    double dept_sum = 0.0, type_sum = 0.0;

    auto run_batch = [&](const std::vector<ClassificationExample>& examples,
                         const std::vector<std::size_t>& order, std::size_t& pos,
                         ClassificationHead& head, HeadGradient& hg, const std::string& name) {
      const std::size_t end = std::min(pos + cfg.batch_size, order.size());
      const double scale = 1.0 / static_cast<double>(end - pos);
      grad.clear();
      hg.clear();
      double sum = 0.0;
      for (; pos < end; ++pos)
        sum += accumulate_classification(res.params, head, examples[order[pos]], grad, hg, scale);
      adam.next_step();
      adam.step(res.params, grad);
      adam.step(head, hg, "head." + name + ".");
      return sum;
    };

    while (di < dept_order.size() || ti < type_order.size()) {
      if (di < dept_order.size())
        dept_sum += run_batch(data.department, dept_order, di, res.department_head, dept_grad, "department");
      if (ti < type_order.size())
        type_sum += run_batch(data.product_type, type_order, ti, res.product_type_head, type_grad, "product_type");
    }
    EpochLoss el{dept_sum / static_cast<double>(data.department.size()),
                 type_sum / static_cast<double>(data.product_type.size())};
    if (!std::isfinite(el.total()))
      throw DivergenceError("pretraining diverged in epoch " + std::to_string(epoch));
    res.epochs.push_back(el);
  }
  return res;
}

double classification_accuracy(const EncoderParams& params, const ClassificationHead& head,
                               std::span<const ClassificationExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    Eigen::Index best = 0;
    encoder::classify(params, head, ex.tokens).maxCoeff(&best);
    if (static_cast<std::size_t>(best) == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Stage 2

fusion::DatasetSizes Stage2Data::sizes() const {
  fusion::DatasetSizes s;
  for (const auto& [d, v] : pairs) s[d] = v.size();
  s[Domain::ads] = ads.size();
  return s;
}

Stage2Data tokenize_stage2(const corpus::DomainDatasets& datasets,
                           const std::vector<corpus::TrainingTriplet>& triplets,
                           std::uint32_t vocab) {
  Stage2Data out;
  for (const auto& [domain, rows] : datasets) {
    if (domain == Domain::ads) continue;
    auto& dst = out.pairs[domain];
    dst.reserve(rows.size());
    for (const auto& r : rows)
      dst.push_back({tokenize(r.query_text, vocab), tokenize(r.item_text, vocab), grade_to_target(r.grade)});
  }
  out.ads.reserve(triplets.size());
  for (const auto& t : triplets)
    out.ads.push_back({tokenize(t.anchor_text, vocab), tokenize(t.positive_text, vocab),
                       tokenize(t.negative_text, vocab)});
  return out;
}

Stage2Trainer::Stage2Trainer(EncoderParams init, Stage2Data data, Stage2Config cfg)
    : params_(std::move(init)), data_(std::move(data)), cfg_(cfg), adam_(cfg.adam), grad_(params_.shape) {
  params_.validate();
  cfg_.triplet.validate();
}

void Stage2Trainer::train_batch(std::span<const fusion::DomainDraw> draws, std::size_t round) {
  std::vector<const PairExample*> pairs;
  std::vector<Domain> pair_domains;
  std::vector<TripletExample> triplets;
  std::vector<PairExample> ads_positives;
  for (const auto& d : draws) {
    if (d.domain == Domain::ads) {
      const auto& t = data_.ads.at(d.index);
      triplets.push_back(t);
      ads_positives.push_back({t.anchor, t.positive, 1.0});
    } else {
      pairs.push_back(&data_.pairs.at(d.domain).at(d.index));
      pair_domains.push_back(d.domain);
    }
  }
  if (cfg_.in_batch_negatives) {
    auto extra = in_batch_negatives(ads_positives, cfg_.seed ^ (adam_.steps() * 0x9e3779b97f4a7c15ULL));
    triplets.insert(triplets.end(), std::make_move_iterator(extra.begin()),
                    std::make_move_iterator(extra.end()));
  }
  const std::size_t terms = pairs.size() + triplets.size();
  if (terms == 0) return;
  const double scale = 1.0 / static_cast<double>(terms);

  grad_.clear();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double loss = accumulate_pair(params_, *pairs[i], grad_, scale);
    auto& t = tallies_[{round, pair_domains[i]}];
    t.kind = "pair";
    ++t.n;
    t.sum += loss;
  }
  for (const auto& trip : triplets) {
    const double loss = accumulate_triplet(params_, trip, cfg_.triplet, grad_, scale);
    auto& t = tallies_[{round, Domain::ads}];
    t.kind = "triplet";
    ++t.n;
    t.sum += loss;
  }
  adam_.next_step();
  adam_.step(params_, grad_);
}

std::vector<LossTelemetry> Stage2Trainer::telemetry() const {
  std::vector<LossTelemetry> out;
  for (const auto& [key, t] : tallies_)
    out.push_back({key.first, key.second, t.kind, t.n, t.n ? t.sum / static_cast<double>(t.n) : 0.0});
  return out;
}

double rescale_projection(EncoderParams& params, std::span<const TokenSequence> sample) {
  if (sample.empty()) return 1.0;
  double total = 0.0;
  for (const auto& t : sample) total += forward(params, t).projected.norm();
  const double scale = total / static_cast<double>(sample.size());
  if (!std::isfinite(scale) || scale <= 0.0) return 1.0;
  params.dense2_w /= scale;
  params.dense2_b /= scale;
  return scale;
}

Stage2Result train_stage2(EncoderParams init, Stage2Data data, const fusion::FusionSchedule& schedule,
                          fusion::FeedbackProvider& feedback, const Stage2Config& cfg,
                          fusion::WeightsBoard* board) {
  if (cfg.rescale_projection) {
    std::vector<TokenSequence> sample;
    for (const auto& [domain, pairs] : data.pairs)
      for (std::size_t i = 0; i < pairs.size() && i < 256; ++i) {
        sample.push_back(pairs[i].query);
        sample.push_back(pairs[i].item);
      }
    rescale_projection(init, sample);
  }
  Stage2Trainer trainer(std::move(init), std::move(data), cfg);
  auto sched = fusion::run_schedule(schedule, trainer, feedback, cfg.seed, board);
  Stage2Result res;
  res.telemetry = trainer.telemetry();
  res.schedule = std::move(sched);
  res.params = trainer.take_params();
  return res;
}

void write_telemetry(const std::filesystem::path& path, std::span<const LossTelemetry> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : rows) {
    nlohmann::json j{{"round", r.round},
                     {"domain", corpus::to_string(r.domain)},
                     {"loss_kind", r.loss_kind},
                     {"examples", r.examples},
                     {"mean_loss", r.mean_loss}};
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// DSSM baseline

std::vector<PairExample> dssm_examples(const std::vector<corpus::LabeledPair>& pairs,
                                       const std::vector<corpus::Product>& catalog,
                                       std::size_t negatives_per_positive, std::uint32_t vocab,
                                       std::uint64_t seed) {
  if (catalog.empty()) throw std::invalid_argument("catalog is empty");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, catalog.size() - 1);
  std::vector<PairExample> out;
  for (const auto& p : pairs) {
    auto q = tokenize_trigrams(p.query_text, vocab);
    out.push_back({q, tokenize_trigrams(p.item_text, vocab), grade_to_target(p.grade)});
    for (std::size_t k = 0; k < negatives_per_positive; ++k) {
      const auto& neg = catalog[pick(rng)];
      if (neg.title == p.item_text) continue;
      out.push_back({q, tokenize_trigrams(neg.title, vocab), 0.0});
    }
  }
  return out;
}

DssmResult train_dssm(encoder::DssmParams init, std::span<const PairExample> data,
                      const DssmTrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("DSSM training data is empty");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  DssmResult res{std::move(init), {}};
  Adam adam(cfg.adam);
  GradientSet qg(res.params.query_tower.shape), ig(res.params.item_tower.shape);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  const double scale = 1.0 / static_cast<double>(cfg.batch_size);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    qg.clear();
    ig.clear();
    double sum = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b)
      sum += accumulate_pair(res.params.query_tower, res.params.item_tower, data[pick(rng)], qg, ig, scale);
    adam.next_step();
    adam.step(res.params.query_tower, qg, "query.");
    adam.step(res.params.item_tower, ig, "item.");
    res.step_loss.push_back(sum * scale);
  }
  return res;
}

}  // namespace semret::training
