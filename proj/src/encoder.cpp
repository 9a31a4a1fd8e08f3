#include "semret/encoder.hpp"

#include <cmath>
#include <random>

#include "semret/checkpoint.hpp"

namespace semret::encoder {

namespace {

void fill_uniform(std::span<double> values, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : values) v = dist(rng);
}

template <class Derived>
void require_finite(const Eigen::DenseBase<Derived>& t, const char* name) {
  if (!t.allFinite()) throw NonFiniteError(name, std::string("non-finite values in ") + name);
}

}  // namespace

EncoderParams EncoderParams::zeros(EncoderShape shape) {
  if (shape.vocab < 2 || shape.hidden == 0 || shape.output == 0)
    throw ShapeError("encoder shape must have vocab >= 2 and non-zero dims");
  EncoderParams p;
  p.shape = shape;
  p.embedding = Matrix::Zero(shape.vocab, shape.hidden);
  p.dense1_w = Matrix::Zero(shape.hidden, shape.hidden);
  p.dense1_b = Vector::Zero(shape.hidden);
  p.dense2_w = Matrix::Zero(shape.hidden, shape.output);
  p.dense2_b = Vector::Zero(shape.output);
  return p;
}

EncoderParams EncoderParams::init_random(EncoderShape shape, std::uint64_t seed) {
  auto p = zeros(shape);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  p.visit_tensors([&](std::string_view, std::span<double> t) { fill_uniform(t, bound, rng); });
  return p;
}

void EncoderParams::validate() const {
  const auto V = static_cast<Eigen::Index>(shape.vocab);
  const auto d = static_cast<Eigen::Index>(shape.hidden);
  const auto o = static_cast<Eigen::Index>(shape.output);
  if (embedding.rows() != V || embedding.cols() != d) throw ShapeError("embedding shape mismatch");
  if (dense1_w.rows() != d || dense1_w.cols() != d) throw ShapeError("dense1_w shape mismatch");
  if (dense1_b.size() != d) throw ShapeError("dense1_b shape mismatch");
  if (dense2_w.rows() != d || dense2_w.cols() != o) throw ShapeError("dense2_w shape mismatch");
  if (dense2_b.size() != o) throw ShapeError("dense2_b shape mismatch");
  require_finite(embedding, "embedding");
  require_finite(dense1_w, "dense1_w");
  require_finite(dense1_b, "dense1_b");
  require_finite(dense2_w, "dense2_w");
  require_finite(dense2_b, "dense2_b");
}

std::string_view task_name(Task task) {
  return task == Task::department ? "department" : "product_type";
}

ClassificationHead ClassificationHead::zeros(Task task, std::uint32_t input_dim,
                                             std::size_t classes) {
  if (classes == 0) throw ShapeError("classification head needs at least one class");
  ClassificationHead h;
  h.task = task;
  h.weights = Matrix::Zero(input_dim, static_cast<Eigen::Index>(classes));
  h.bias = Vector::Zero(static_cast<Eigen::Index>(classes));
  return h;
}

ClassificationHead ClassificationHead::init_random(Task task, std::uint32_t input_dim,
                                                   std::size_t classes, std::uint64_t seed) {
  auto h = zeros(task, input_dim, classes);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  fill_uniform(std::span<double>(h.weights.data(), h.weights.size()), bound, rng);
  return h;
}

EncodeTrace forward(const EncoderParams& params, const TokenSequence& tokens) {
  const auto& shape = params.shape;
  if (tokens.buckets.empty()) throw std::invalid_argument("token sequence is empty");
  EncodeTrace tr;
  tr.pooled = Vector::Zero(shape.hidden);
  for (auto b : tokens.buckets) {
    if (b >= shape.vocab) throw ShapeError("token bucket out of range");
    tr.pooled += params.embedding.row(b).transpose();
  }
  tr.pooled /= static_cast<double>(tokens.buckets.size());
  require_finite(tr.pooled, "embedding");
  require_finite(params.dense1_w, "dense1_w");
  require_finite(params.dense1_b, "dense1_b");
  require_finite(params.dense2_w, "dense2_w");
  require_finite(params.dense2_b, "dense2_b");

  tr.hidden = (params.dense1_w.transpose() * tr.pooled + params.dense1_b).array().tanh().matrix();
  tr.projected = params.dense2_w.transpose() * tr.hidden + params.dense2_b;
  tr.norm = tr.projected.norm();
  if (!std::isfinite(tr.norm)) throw NonFiniteError("projected", "non-finite projection norm");
  if (tr.norm == 0.0) {
    tr.degenerate = true;
    tr.output = Vector::Unit(shape.output, 0);
  } else {
    tr.output = tr.projected / tr.norm;
  }
  return tr;
}

Vector encode(const EncoderParams& params, const TokenSequence& tokens) {
  return forward(params, tokens).output;
}

Vector encode_text(const EncoderParams& params, std::string_view text) {
  return encode(params, tokenize(text, params.shape.vocab));
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Vector head_logits(const ClassificationHead& head, const Vector& projected) {
  if (head.weights.rows() != projected.size())
    throw ShapeError("classification head input dim does not match encoder output");
  return head.weights.transpose() * projected + head.bias;
}

Vector classify(const EncoderParams& params, const ClassificationHead& head,
                const TokenSequence& tokens) {
  if (head.weights.rows() != static_cast<Eigen::Index>(params.shape.output))
    throw ShapeError("classification head input dim does not match encoder output");
  return softmax(head_logits(head, forward(params, tokens).projected));
}

DssmParams DssmParams::init_random(EncoderShape shape, std::uint64_t seed) {
  DssmParams p;
  p.query_tower = EncoderParams::init_random(shape, seed);
  p.item_tower = EncoderParams::init_random(shape, seed ^ 0x9e3779b97f4a7c15ULL);
  return p;
}

Vector encode_baseline(const DssmParams& params, Tower tower, std::string_view text) {
  const auto& p = params.tower(tower);
  return encode(p, tokenize_trigrams(text, p.shape.vocab));
}

std::vector<float> to_float(const Vector& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

SiameseEmbedder::SiameseEmbedder(std::shared_ptr<const EncoderParams> params)
    : params_(std::move(params)), version_(checkpoint::digest(*params_)) {}

std::vector<float> SiameseEmbedder::embed_query(std::string_view text) const {
  return to_float(encode_text(*params_, text));
}

std::vector<float> SiameseEmbedder::embed_item(std::string_view text) const {
  return to_float(encode_text(*params_, text));
}

DssmEmbedder::DssmEmbedder(std::shared_ptr<const DssmParams> params)
    : params_(std::move(params)), version_(checkpoint::digest(*params_)) {}

std::vector<float> DssmEmbedder::embed_query(std::string_view text) const {
  return to_float(encode_baseline(*params_, Tower::query, text));
}

std::vector<float> DssmEmbedder::embed_item(std::string_view text) const {
  return to_float(encode_baseline(*params_, Tower::item, text));
}

}  // namespace semret::encoder
