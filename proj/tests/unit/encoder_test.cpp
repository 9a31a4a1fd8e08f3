#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "semret/checkpoint.hpp"
#include "semret/encoder.hpp"

using namespace semret;
using namespace semret::encoder;

namespace {

const EncoderShape kSmall{97, 16, 8};

}  // namespace

TEST(Encoder, OutputsAreUnitNorm) {
  const auto p = EncoderParams::init_random(kSmall, 1);
  for (const char* t : {"red running shoes", "x", "", "the the the the"})
    EXPECT_NEAR(encode_text(p, t).norm(), 1.0, 1e-12) << t;
}

TEST(Encoder, DeterministicForSeed) {
  const auto a = EncoderParams::init_random(kSmall, 4);
  const auto b = EncoderParams::init_random(kSmall, 4);
  const auto c = EncoderParams::init_random(kSmall, 5);
  EXPECT_EQ(encode_text(a, "garden hose"), encode_text(b, "garden hose"));
  EXPECT_NE(encode_text(a, "garden hose"), encode_text(c, "garden hose"));
}

TEST(Encoder, MeanPoolingIgnoresOrder) {
  const auto p = EncoderParams::init_random(kSmall, 2);
  EXPECT_TRUE(encode_text(p, "dog bed large").isApprox(encode_text(p, "large bed dog"), 1e-14));
}

TEST(Encoder, ForwardMatchesManualComputation) {
  const auto p = EncoderParams::init_random(kSmall, 8);
  const auto tokens = tokenize("blue kettle", kSmall.vocab);
  Vector pooled = Vector::Zero(kSmall.hidden);
  for (auto b : tokens.buckets) pooled += p.embedding.row(b).transpose();
  pooled /= static_cast<double>(tokens.buckets.size());
  const Vector h = (p.dense1_w.transpose() * pooled + p.dense1_b).array().tanh().matrix();
  const Vector z = p.dense2_w.transpose() * h + p.dense2_b;
  const auto trace = forward(p, tokens);
  EXPECT_TRUE(trace.projected.isApprox(z, 1e-12));
  EXPECT_TRUE(trace.output.isApprox(z / z.norm(), 1e-12));
}

TEST(Encoder, ZeroParamsDegenerateToFirstAxis) {
  const auto p = EncoderParams::zeros(kSmall);
  const auto trace = forward(p, tokenize("anything", kSmall.vocab));
  EXPECT_TRUE(trace.degenerate);
  EXPECT_EQ(trace.output(0), 1.0);
  EXPECT_EQ(trace.output.norm(), 1.0);
}

TEST(Encoder, ValidateRejectsNonFinite) {
  auto p = EncoderParams::init_random(kSmall, 1);
  p.validate();
  p.dense1_b(3) = std::nan("");
  try {
    p.validate();
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.tensor(), "dense1_b");
  }
}

TEST(Encoder, ShapeValidation) {
  EXPECT_THROW(EncoderParams::zeros({1, 4, 4}), ShapeError);
  auto p = EncoderParams::init_random(kSmall, 1);
  p.dense2_b.resize(3);
  EXPECT_THROW(p.validate(), ShapeError);
}

TEST(Encoder, SoftmaxSumsToOne) {
  Vector logits(4);
  logits << 1000.0, 999.0, -5.0, 0.0;
  const auto s = softmax(logits);
  EXPECT_NEAR(s.sum(), 1.0, 1e-12);
  EXPECT_TRUE(s.allFinite());
  EXPECT_GT(s(0), s(1));
}

TEST(Encoder, DssmTowersAreIndependent) {
  const auto d = DssmParams::init_random(kSmall, 9);
  const auto q = encode_baseline(d, Tower::query, "lamp shade");
  const auto i = encode_baseline(d, Tower::item, "lamp shade");
  EXPECT_NEAR(q.norm(), 1.0, 1e-12);
  EXPECT_FALSE(q.isApprox(i, 1e-6));
}

TEST(Checkpoint, RoundTripEqualsQuantized) {
  const auto p = EncoderParams::init_random(kSmall, 12);
  std::stringstream buf;
  checkpoint::write(buf, p);
  const auto back = checkpoint::read_encoder(buf);
  const auto q = checkpoint::quantized(p);
  EXPECT_EQ(back.shape, p.shape);
  EXPECT_EQ(back.embedding, q.embedding);
  EXPECT_EQ(back.dense2_b, q.dense2_b);
  EXPECT_EQ(checkpoint::digest(back), checkpoint::digest(p));
}

TEST(Checkpoint, DssmRoundTripAndMagic) {
  const auto d = DssmParams::init_random(kSmall, 3);
  std::stringstream buf;
  checkpoint::write(buf, d);
  EXPECT_EQ(buf.str().substr(0, 4), "DSSM");
  const auto back = checkpoint::read_dssm(buf);
  EXPECT_EQ(back.item_tower.dense1_w, checkpoint::quantized(d).item_tower.dense1_w);
  std::stringstream again(buf.str());
  EXPECT_THROW(checkpoint::read_encoder(again), checkpoint::FormatError);
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  std::stringstream buf;
  checkpoint::write(buf, EncoderParams::init_random(kSmall, 1));
  std::stringstream cut(buf.str().substr(0, buf.str().size() - 5));
  EXPECT_THROW(checkpoint::read_encoder(cut), checkpoint::FormatError);
}

TEST(Checkpoint, VersionTagTracksParameters) {
  auto a = std::make_shared<const EncoderParams>(EncoderParams::init_random(kSmall, 1));
  auto b = std::make_shared<const EncoderParams>(EncoderParams::init_random(kSmall, 2));
  SiameseEmbedder ea(a), eb(b);
  EXPECT_EQ(ea.model_version().substr(0, 5), "stwr-");
  EXPECT_NE(ea.model_version(), eb.model_version());
  EXPECT_EQ(ea.embed_query("mug"), ea.embed_item("mug"));
}
