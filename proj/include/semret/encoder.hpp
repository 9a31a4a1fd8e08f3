#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semret/text.hpp"

namespace semret::encoder {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Thrown when a parameter or intermediate value is NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string tensor, const std::string& what)
      : std::runtime_error(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EncoderShape {
  std::uint32_t vocab = 16384;  // hash buckets
  std::uint32_t hidden = 64;
  std::uint32_t output = 64;

  bool operator==(const EncoderShape&) const = default;
};

/// Trainable tensors of one encoder tower.
///
/// Tensor declaration order (also the checkpoint order):
///   embedding [vocab x hidden], dense1_w [hidden x hidden], dense1_b [hidden],
///   dense2_w [hidden x output], dense2_b [output].
/// Weight matrices are stored (in x out) so that a layer computes W^T x + b.
struct EncoderParams {
  EncoderShape shape;
  Matrix embedding;
  Matrix dense1_w;
  Vector dense1_b;
  Matrix dense2_w;
  Vector dense2_b;

  /// All-zero tensors of the given shape.
  static EncoderParams zeros(EncoderShape shape);
  /// Uniform in [-1/sqrt(hidden), 1/sqrt(hidden)].
  static EncoderParams init_random(EncoderShape shape, std::uint64_t seed);

  /// Throws ShapeError or NonFiniteError.
  void validate() const;

  template <class F>
  void visit_tensors(F&& f) {
    f("embedding", std::span<double>(embedding.data(), embedding.size()));
    f("dense1_w", std::span<double>(dense1_w.data(), dense1_w.size()));
    f("dense1_b", std::span<double>(dense1_b.data(), dense1_b.size()));
    f("dense2_w", std::span<double>(dense2_w.data(), dense2_w.size()));
    f("dense2_b", std::span<double>(dense2_b.data(), dense2_b.size()));
  }
  template <class F>
  void visit_tensors(F&& f) const {
    f("embedding", std::span<const double>(embedding.data(), embedding.size()));
    f("dense1_w", std::span<const double>(dense1_w.data(), dense1_w.size()));
    f("dense1_b", std::span<const double>(dense1_b.data(), dense1_b.size()));
    f("dense2_w", std::span<const double>(dense2_w.data(), dense2_w.size()));
    f("dense2_b", std::span<const double>(dense2_b.data(), dense2_b.size()));
  }
};

enum class Task { department = 0, product_type = 1 };
std::string_view task_name(Task task);

/// Softmax classifier over the pre-normalization projection, used only during
/// stage-1 pretraining.
struct ClassificationHead {
  Task task = Task::department;
  Matrix weights;  // output x classes
  Vector bias;     // classes

  static ClassificationHead zeros(Task task, std::uint32_t input_dim, std::size_t classes);
  static ClassificationHead init_random(Task task, std::uint32_t input_dim, std::size_t classes,
                                        std::uint64_t seed);
  std::size_t classes() const { return static_cast<std::size_t>(bias.size()); }
};

/// Intermediate activations of one forward pass, kept for backprop.
struct EncodeTrace {
  Vector pooled;     // mean of embedding rows
  Vector hidden;     // tanh(dense1)
  Vector projected;  // dense2 output, pre-normalization
  double norm = 0.0;
  Vector output;     // unit-norm embedding
  bool degenerate = false;  // projected was all zero; output is e1
};

EncodeTrace forward(const EncoderParams& params, const TokenSequence& tokens);

/// Unit-norm sentence embedding.
Vector encode(const EncoderParams& params, const TokenSequence& tokens);
Vector encode_text(const EncoderParams& params, std::string_view text);

Vector softmax(const Vector& logits);
Vector head_logits(const ClassificationHead& head, const Vector& projected);

/// Class probabilities from the head applied to the pre-normalization projection.
Vector classify(const EncoderParams& params, const ClassificationHead& head,
                const TokenSequence& tokens);

// DSSM-style baseline: letter-trigram hashing, two independent towers.

enum class Tower { query, item };

struct DssmParams {
  EncoderParams query_tower;
  EncoderParams item_tower;

  static DssmParams init_random(EncoderShape shape, std::uint64_t seed);
  const EncoderParams& tower(Tower t) const { return t == Tower::query ? query_tower : item_tower; }
  EncoderParams& tower(Tower t) { return t == Tower::query ? query_tower : item_tower; }
};

Vector encode_baseline(const DssmParams& params, Tower tower, std::string_view text);

/// A frozen text-to-vector model with a version tag, as consumed by the index
/// pipeline, the offline simulation and the service.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::vector<float> embed_query(std::string_view text) const = 0;
  virtual std::vector<float> embed_item(std::string_view text) const = 0;
  virtual std::uint32_t dim() const = 0;
  virtual const std::string& model_version() const = 0;
};

class SiameseEmbedder final : public TextEmbedder {
 public:
  explicit SiameseEmbedder(std::shared_ptr<const EncoderParams> params);
  std::vector<float> embed_query(std::string_view text) const override;
  std::vector<float> embed_item(std::string_view text) const override;
  std::uint32_t dim() const override { return params_->shape.output; }
  const std::string& model_version() const override { return version_; }
  const EncoderParams& params() const { return *params_; }

 private:
  std::shared_ptr<const EncoderParams> params_;
  std::string version_;
};

class DssmEmbedder final : public TextEmbedder {
 public:
  explicit DssmEmbedder(std::shared_ptr<const DssmParams> params);
  std::vector<float> embed_query(std::string_view text) const override;
  std::vector<float> embed_item(std::string_view text) const override;
  std::uint32_t dim() const override { return params_->query_tower.shape.output; }
  const std::string& model_version() const override { return version_; }

 private:
  std::shared_ptr<const DssmParams> params_;
  std::string version_;
};

std::vector<float> to_float(const Vector& v);

}  // namespace semret::encoder
