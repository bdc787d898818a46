// tests/speaker_encoder_test.cpp

// Copyright 2026 osa-vocoder authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "osa/speaker_encoder.hpp"
#include "test_support.hpp"

namespace osa {
namespace {

EncoderConfig SmallConfig() {
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.cell_size = 24;
  cfg.proj_size = 12;
  return cfg;
}

RowMatrix<float> RandomFrames(Index n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::RandomMatrix<float>(n, kFeatureDim, rng);
}

double Ge2eValue(const RowMatrix<double> &e, Index N, Index M, double w, double b) {
  nn::Tape<double> tape(false);
  return Ge2eLoss(tape, nn::Tensor<double>::FromMatrix(e), N, M, nn::Tensor<double>::Scalar(w),
                  nn::Tensor<double>::Scalar(b))
      .item();
}

// Direct evaluation of the loss definition with explicit loops.
double Ge2eOracle(const RowMatrix<double> &e, Index N, Index M, double w, double b) {
  const Index D = e.cols();
  const auto cosine = [](const RowVector<double> &x, const RowVector<double> &y) {
    return x.dot(y) / (x.norm() * y.norm());
  };
  double total = 0.0;
  for (Index j = 0; j < N; ++j) {
    for (Index i = 0; i < M; ++i) {
      const RowVector<double> eji = e.row(j * M + i);
      std::vector<double> s(N);
      for (Index k = 0; k < N; ++k) {
        RowVector<double> c = RowVector<double>::Zero(D);
        int count = 0;
        for (Index m = 0; m < M; ++m) {
          if (k == j && m == i) continue;
          c += e.row(k * M + m);
          ++count;
        }
        c /= count;
        s[k] = w * cosine(eji, c) + b;
      }
      double z = 0.0;
      for (double v : s) z += std::exp(v);
      total += -s[j] + std::log(z);
    }
  }
  return total / static_cast<double>(N * M);
}

TEST(Ge2eTest, MatchesDirectEvaluation) {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(seed);
    const Index N = 2 + seed % 3, M = 2 + seed % 4;
    const auto e = testing::RandomMatrix<double>(N * M, 5, rng);
    const double w = 2.0 + seed, b = -1.0 * seed;
    EXPECT_NEAR(Ge2eValue(e, N, M, w, b), Ge2eOracle(e, N, M, w, b), 1e-10) << seed;
  }
}

TEST(Ge2eTest, OrthogonalClustersClosedForm) {
  const Index N = 4, M = 2;
  RowMatrix<double> e = RowMatrix<double>::Zero(N * M, 4);
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < M; ++i) e(j * M + i, j) = 1.0;
  const double expected = -5.0 + std::log(std::exp(5.0) + 3.0 * std::exp(-5.0));
  EXPECT_NEAR(Ge2eValue(e, N, M, 10.0, -5.0), expected, 1e-12);
  EXPECT_NEAR(expected, 0.000136, 5e-7);
}

TEST(Ge2eTest, IdenticalEmbeddingsGiveLogN) {
  for (Index N : {2, 3, 7}) {
    const RowMatrix<double> e = RowMatrix<double>::Constant(N * 3, 4, 0.7);
    EXPECT_NEAR(Ge2eValue(e, N, 3, 10.0, -5.0), std::log(static_cast<double>(N)), 1e-12);
  }
}

TEST(Ge2eTest, OwnCentroidExcludesSelfWithTwoUtterances) {
  // With M=2 the own centroid of e_j1 is e_j2: moving e_j1 along e_j2 leaves
  // S(j,1,j) at w + b regardless of e_j1's length.
  std::mt19937_64 rng(3);
  RowMatrix<double> e = testing::RandomMatrix<double>(4, 3, rng);
  e.row(0) = 2.5 * e.row(1);
  const double base = Ge2eOracle(e, 2, 2, 10.0, -5.0);
  EXPECT_NEAR(Ge2eValue(e, 2, 2, 10.0, -5.0), base, 1e-12);
  RowMatrix<double> e2 = e;
  e2.row(0) = 0.5 * e.row(1);
  // Length changes of e_j1 do not affect any cosine; own centroids of the
  // other rows only scale.
  EXPECT_NEAR(Ge2eValue(e2, 2, 2, 10.0, -5.0), Ge2eOracle(e2, 2, 2, 10.0, -5.0), 1e-12);
}

TEST(Ge2eTest, InvariantToGlobalRotation) {
  std::mt19937_64 rng(5);
  const auto e = testing::RandomMatrix<double>(12, 6, rng);
  const auto a = testing::RandomMatrix<double>(6, 6, rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ();
  const RowMatrix<double> rotated = e * q;
  EXPECT_NEAR(Ge2eValue(e, 3, 4, 10.0, -5.0), Ge2eValue(rotated, 3, 4, 10.0, -5.0), 1e-10);
}

TEST(Ge2eTest, RejectsDegenerateBatches) {
  const RowMatrix<double> e = RowMatrix<double>::Ones(4, 3);
  EXPECT_THROW(Ge2eValue(e, 1, 4, 10.0, -5.0), Error);
  EXPECT_THROW(Ge2eValue(e, 4, 1, 10.0, -5.0), Error);
}

TEST(EncoderTest, WindowEmbeddingIsUnitNormAndDeterministic) {
  const SpeakerEncoder<float> enc(SmallConfig(), 1);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = RandomFrames(160, seed);
    const auto a = enc.EncodeWindow(f), b = enc.EncodeWindow(f);
    EXPECT_NEAR(a.Norm(), 1.0, 1e-6);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.dim(), 12u);
  }
}

TEST(EncoderTest, OneFrameChangeChangesEmbedding) {
  const SpeakerEncoder<float> enc(SmallConfig(), 2);
  const auto f = RandomFrames(160, 9);
  const auto a = enc.EncodeWindow(f);
  // Memory of the very first frames can decay below float resolution.
  for (Index frame : {100, 150, 159}) {
    auto g = f;
    g.row(frame).setConstant(3.0f);
    EXPECT_NE(enc.EncodeWindow(g).values, a.values) << frame;
  }
}

TEST(EncoderTest, WindowLengthIsEnforced) {
  const SpeakerEncoder<float> enc(SmallConfig(), 1);
  EXPECT_THROW(enc.EncodeWindow(RandomFrames(159, 1)), Error);
  EXPECT_THROW(enc.EncodeWindow(RandomFrames(161, 1)), Error);
}

TEST(EncoderTest, WindowStarts) {
  const SpeakerEncoder<float> enc(SmallConfig(), 1);
  EXPECT_EQ(enc.WindowStarts(160), (std::vector<Index>{0}));
  EXPECT_EQ(enc.WindowStarts(320), (std::vector<Index>{0, 80, 160}));
  EXPECT_EQ(enc.WindowStarts(240), (std::vector<Index>{0, 80}));
  // Trailing frames not covered by the hop grid get an end-aligned window.
  EXPECT_EQ(enc.WindowStarts(250), (std::vector<Index>{0, 80, 90}));
  EXPECT_EQ(enc.WindowStarts(100), (std::vector<Index>{0}));
}

TEST(EncoderTest, SingleWindowUtteranceEqualsWindowEmbedding) {
  const SpeakerEncoder<float> enc(SmallConfig(), 3);
  const auto f = RandomFrames(160, 4);
  const auto u = enc.EmbedUtterance(f), w = enc.EncodeWindow(f);
  for (size_t i = 0; i < u.values.size(); ++i) EXPECT_NEAR(u.values[i], w.values[i], 1e-6);
}

TEST(EncoderTest, RepeatedWindowsEqualOneWindow) {
  const SpeakerEncoder<float> enc(SmallConfig(), 3);
  // Period-80 content makes the windows at 0, 80 and 160 identical.
  const auto block = RandomFrames(80, 6);
  RowMatrix<float> f(320, kFeatureDim);
  for (int r = 0; r < 4; ++r) f.middleRows(r * 80, 80) = block;
  const auto u = enc.EmbedUtterance(f), w = enc.EncodeWindow(f.topRows(160));
  for (size_t i = 0; i < u.values.size(); ++i) EXPECT_NEAR(u.values[i], w.values[i], 1e-6);
}

TEST(EncoderTest, UtteranceEmbeddingIsAlwaysUnitNorm) {
  const SpeakerEncoder<float> enc(SmallConfig(), 4);
  for (Index n : {40, 41, 159, 160, 161, 300, 333}) EXPECT_NEAR(enc.EmbedUtterance(RandomFrames(n, n)).Norm(), 1.0, 1e-6);
}

TEST(EncoderTest, ShortUtterances) {
  const SpeakerEncoder<float> enc(SmallConfig(), 4);
  EXPECT_THROW(enc.EmbedUtterance(RowMatrix<float>(0, kFeatureDim)), Error);
  EXPECT_THROW(enc.EmbedUtterance(RandomFrames(39, 1)), Error);
  EXPECT_NO_THROW(enc.EmbedUtterance(RandomFrames(40, 1)));
}

TEST(EncoderTest, CheckpointRoundTrip) {
  const SpeakerEncoder<float> enc(SmallConfig(), 7);
  const auto back = EncoderFromCheckpoint<float>(nn::DecodeCheckpoint(nn::EncodeCheckpoint(EncoderCheckpoint(enc))));
  const auto f = RandomFrames(200, 1);
  EXPECT_EQ(enc.EmbedUtterance(f).values, back.EmbedUtterance(f).values);
  EXPECT_EQ(back.config().cell_size, 24);
}

// Each speaker is a fixed random mean vector plus frame noise.
SpeakerCorpus ClusterCorpus(int speakers, int utts, Index frames, uint64_t seed) {
  std::mt19937_64 rng(seed);
  SpeakerCorpus c;
  for (int s = 0; s < speakers; ++s) {
    const RowMatrix<float> mean = testing::RandomMatrix<float>(1, kFeatureDim, rng);
    c.speaker_ids.push_back("s" + std::to_string(s));
    c.utterances.emplace_back();
    for (int u = 0; u < utts; ++u) {
      RowMatrix<float> f = testing::RandomMatrix<float>(frames, kFeatureDim, rng, 0.5);
      f.rowwise() += mean.row(0);
      c.utterances.back().push_back(f);
    }
  }
  return c;
}

EncoderTrainConfig FastTrainConfig(uint64_t seed) {
  EncoderTrainConfig t;
  t.steps = 100;
  t.speakers_per_batch = 4;
  t.utterances_per_speaker = 4;
  t.crop_frames = 20;
  t.seed = seed;
  return t;
}

TEST(EncoderTrainingTest, LossDecreasesOnSeparableCorpus) {
  // Median over five seeds of (mean of last ten losses) / (mean of first ten).
  std::vector<double> ratios;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    SpeakerEncoder<float> enc(SmallConfig(), seed);
    const auto losses = TrainEncoder(enc, ClusterCorpus(6, 4, 40, seed), FastTrainConfig(seed));
    ASSERT_EQ(losses.size(), 100u);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) {
      head += losses[i];
      tail += losses[90 + i];
    }
    ratios.push_back(tail / head);
    EXPECT_GT(enc.scale().item(), 0.0f);
  }
  std::sort(ratios.begin(), ratios.end());
  EXPECT_LT(ratios[2], 1.0);
}

TEST(EncoderTrainingTest, SeededRunsAreReproducible) {
  const auto corpus = ClusterCorpus(4, 3, 30, 8);
  auto cfg = FastTrainConfig(3);
  cfg.steps = 15;
  SpeakerEncoder<float> a(SmallConfig(), 1), b(SmallConfig(), 1);
  EXPECT_EQ(TrainEncoder(a, corpus, cfg), TrainEncoder(b, corpus, cfg));
}

TEST(EncoderTrainingTest, InsufficientSpeakers) {
  SpeakerEncoder<float> enc(SmallConfig(), 1);
  try {
    TrainEncoder(enc, ClusterCorpus(1, 5, 40, 1), FastTrainConfig(1));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
  // Utterances shorter than the crop do not count.
  auto cfg = FastTrainConfig(1);
  cfg.crop_frames = 50;
  EXPECT_THROW(TrainEncoder(enc, ClusterCorpus(6, 4, 40, 1), cfg), Error);
}

}  // namespace
}  // namespace osa
