#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "brady/arrest_net.hpp"
#include "brady/errors.hpp"
#include "brady/pipeline.hpp"
#include "brady/synth.hpp"
#include "oracles/gradcheck.hpp"

using namespace brady;

namespace {

bool params_equal(const NetParams& a, const NetParams& b) {
  std::ostringstream sa, sb;
  save(sa, a);
  save(sb, b);
  return sa.str() == sb.str();
}

// Interval sequences with k long gaps for class k (2k gaps for class 3).
std::vector<SeriesSample> toy_arrest_data(int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<SeriesSample> out;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < per_class; ++i) {
      CycleSeries c;
      for (int j = 0; j < 10; ++j) c.amplitudes.push_back(0.8 + noise(rng));
      for (int j = 0; j < 9; ++j) c.intervals.push_back(0.4 + noise(rng));
      std::vector<int> pos{0, 1, 2, 3, 4, 5, 6, 7, 8};
      std::shuffle(pos.begin(), pos.end(), rng);
      const int gaps = k == 3 ? 6 : k;
      for (int g = 0; g < gaps; ++g) c.intervals[pos[g]] = 1.2 + noise(rng);
      out.push_back(make_cycle_sample(c, k));
    }
  }
  return out;
}

SeriesSample random_sample(const NetConfig& c, std::mt19937_64& rng, int valid) {
  std::normal_distribution<double> n;
  SeriesSample s;
  s.channels = Eigen::MatrixXd::Zero(c.effective_in_channels(), c.effective_length());
  s.valid = valid;
  for (int j = 0; j < valid; ++j)
    for (int ch = 0; ch < s.channels.rows(); ++ch) s.channels(ch, j) = n(rng);
  return s;
}

}  // namespace

TEST(InitParams, DeterministicAndSeedSensitive) {
  NetConfig c;
  EXPECT_TRUE(params_equal(init_params(c), init_params(c)));
  NetConfig d = c;
  d.seed = c.seed + 1;
  EXPECT_FALSE(params_equal(init_params(c), init_params(d)));
  const auto p = init_params(c);
  for (const auto& b : p.conv) {
    EXPECT_TRUE((b.gamma.array() == 1.0).all());
    EXPECT_TRUE((b.beta.array() == 0.0).all());
  }
}

TEST(InitParams, KernelBounds) {
  NetConfig c;
  c.conv_kernels = {8, 5, 3};
  EXPECT_NO_THROW(init_params(c));
  c.conv_kernels = {12, 5, 3};
  EXPECT_THROW(init_params(c), InvalidConfig);
  c.conv_kernels = {8, 0, 3};
  EXPECT_THROW(validate(c), InvalidConfig);
  c = NetConfig{};
  c.dropout_rate = 1.0;
  EXPECT_THROW(validate(c), InvalidConfig);
}

TEST(Forward, ZeroWeightsGiveUniform) {
  NetParams p = init_params(NetConfig{}).zeros_like();
  for (auto& b : p.conv) b.running_var.setOnes();
  std::mt19937_64 rng(1);
  const auto s = random_sample(p.config, rng, 10);
  const auto probs = forward(p, s);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(probs(k), 0.25);
}

TEST(Forward, EvalDeterministicAndSimplex) {
  const auto p = init_params(NetConfig{});
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_sample(p.config, rng, 1 + i % 10);
    const auto a = forward(p, s);
    const auto b = forward(p, s);
    EXPECT_TRUE(a == b);
    EXPECT_NEAR(a.sum(), 1.0, 1e-9);
    EXPECT_TRUE((a.array() >= 0.0).all());
  }
}

TEST(Forward, ShapeMismatch) {
  const auto p = init_params(NetConfig{});
  SeriesSample s;
  s.channels = Eigen::MatrixXd::Zero(3, 10);
  s.valid = 10;
  EXPECT_THROW(forward(p, s), ShapeMismatch);
  s.channels = Eigen::MatrixXd::Zero(2, 10);
  s.valid = 11;
  EXPECT_THROW(forward(p, s), ShapeMismatch);
}

TEST(Forward, UntrainedMeanNearUniform) {
  const auto p = init_params(NetConfig{});
  std::mt19937_64 rng(3);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < 1000; ++i) mean += forward(p, random_sample(p.config, rng, 2 + i % 9));
  mean /= 1000.0;
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(mean(k), 0.25, 0.15);
}

TEST(Forward, MaskedPositionsIgnored) {
  const auto p = init_params(NetConfig{});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int valid = 1; valid < 10; ++valid) {
    auto s = random_sample(p.config, rng, valid);
    const auto ref = forward(p, s);
    for (int j = valid; j < s.length(); ++j)
      for (int ch = 0; ch < 2; ++ch) s.channels(ch, j) = n(rng);
    EXPECT_TRUE(forward(p, s) == ref) << "valid " << valid;
  }
}

TEST(Backward, GradientMatchesFiniteDifferences) {
  const NetConfig c = gradcheck::small_config();
  NetParams p = init_params(c);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& b : p.conv) {
    for (auto& g : b.gamma) g += n(rng);
    for (auto& v : b.beta) v += n(rng);
  }
  const auto batch = gradcheck::random_batch(c, 9);
  for (const ForwardOptions opt : {ForwardOptions{Mode::Train, 17}, ForwardOptions{Mode::Eval, 0}}) {
    for (const auto& t : gradcheck::check(p, batch, opt)) {
      EXPECT_LT(t.max_rel_error, 1e-3) << t.name;
    }
  }
}

TEST(Backward, LogitGradientIsProbsMinusOneHot) {
  const auto p = init_params(NetConfig{});
  std::mt19937_64 rng(5);
  auto s = random_sample(p.config, rng, 10);
  s.label = 2;
  const std::vector<SeriesSample> batch{s};
  const auto lg = loss_and_gradient(p, batch, {Mode::Eval, 0});
  Eigen::VectorXd expected = lg.probs.col(0);
  expected(2) -= 1.0;
  EXPECT_TRUE(lg.dlogits.col(0) == expected);
  EXPECT_NEAR(lg.loss, -std::log(lg.probs(2, 0)), 1e-12);
}

TEST(Backward, ShapesMirrorParamsAndFinite) {
  const auto p = init_params(NetConfig{});
  std::mt19937_64 rng(6);
  const auto g = backward(p, random_sample(p.config, rng, 7), 1);
  std::vector<Eigen::Index> ps, gs;
  p.for_each_trainable([&](const std::string&, const auto& t) { ps.push_back(t.size()); });
  g.for_each_trainable([&](const std::string&, const auto& t) {
    gs.push_back(t.size());
    EXPECT_TRUE(t.allFinite());
  });
  EXPECT_EQ(ps, gs);
  EXPECT_THROW(backward(p, random_sample(p.config, rng, 7), 4), ShapeMismatch);
}

TEST(Backward, ZeroStepLeavesLossUnchanged) {
  const NetConfig c = gradcheck::small_config();
  const auto p = init_params(c);
  const auto batch = gradcheck::random_batch(c, 10);
  const auto lg = loss_and_gradient(p, batch, {Mode::Train, 3});
  NetParams q = p;
  std::vector<const double*> grads;
  lg.grad.for_each_trainable([&](const std::string&, const auto& t) { grads.push_back(t.data()); });
  std::size_t k = 0;
  q.for_each_trainable([&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] -= 0.0 * grads[k][i];
    ++k;
  });
  EXPECT_EQ(loss(q, batch, {Mode::Train, 3}), lg.loss);
}

TEST(Train, OverfitsSmallDataset) {
  const auto data = toy_arrest_data(10, 11);
  TrainConfig t;
  t.epochs = 200;
  t.batch_size = 8;
  t.seed = 3;
  const auto r = train(data, t, NetConfig{});
  ASSERT_EQ(r.loss_history.size(), 200u);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
  int correct = 0;
  for (const auto& s : data) correct += predict_arrest(r.params, s) == *s.label;
  EXPECT_EQ(correct, 40);
}

TEST(Train, DeterministicHistory) {
  const auto data = toy_arrest_data(4, 12);
  TrainConfig t;
  t.epochs = 5;
  const auto a = train(data, t, NetConfig{});
  const auto b = train(data, t, NetConfig{});
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_TRUE(params_equal(a.params, b.params));
}

TEST(Train, SingleClassIsDegenerate) {
  auto data = toy_arrest_data(3, 13);
  data.resize(3);
  EXPECT_THROW(train(data, TrainConfig{}, NetConfig{}), DegenerateDataset);
}

TEST(Predict, ArgmaxTieGoesLow) {
  EXPECT_EQ(argmax_low(std::vector<double>{0.1, 0.6, 0.2, 0.1}), 1);
  EXPECT_EQ(argmax_low(std::vector<double>{0.4, 0.4, 0.1, 0.1}), 0);
  EXPECT_EQ(argmax_low(std::vector<double>{0.1, 0.2, 0.35, 0.35}), 2);
}

TEST(Predict, SixArrestsScoreThree) {
  // Network trained on generator recordings that differ only in their
  // arrests; held-out recordings with six inserted arrests must be
  // category 3.
  PipelineConfig cfg;
  cfg.net.input_mode = InputMode::ResampledSignal;
  cfg.train.epochs = 60;
  std::mt19937_64 rng(5);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int lo[] = {0, 1, 3, 6};
  const int hi[] = {0, 2, 5, 8};
  std::vector<ExtractedRecording> data;
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < 40; ++i) {
      SeverityProfile p;
      p.base_interval = uniform(0.38, 0.42);
      p.noise_sd = uniform(0.005, 0.03);
      p.interval_jitter = uniform(0.04, 0.1);
      p.seed = rng();
      p.n_arrests = pick(lo[k], hi[k]);
      for (int a = 0; a < p.n_arrests; ++a) p.arrest_durations.push_back(uniform(0.8, 1.6) * p.base_interval);
      const auto rec = generate(p, static_cast<MovementKind>(i % 3));
      ASSERT_EQ(rec.label.arrest_category, k);
      data.push_back(extract_recording(rec.recording, cfg));
    }
  }
  const auto net = train_arrest_model(data, cfg).params;

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SeverityProfile p;
    p.n_arrests = 6;
    p.arrest_durations.assign(6, 0.6);
    p.noise_sd = 0.01;
    p.interval_jitter = 0.05;
    p.seed = 1000 + seed;
    const auto rec = generate(p, static_cast<MovementKind>(seed % 3));
    ASSERT_EQ(rec.label.arrest_category, 3);
    EXPECT_EQ(predict_arrest(net, arrest_sample(extract_recording(rec.recording, cfg), cfg.net)), 3)
        << "seed " << seed;
  }
}

TEST(Samples, CycleSampleIsZNormalised) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  for (int n = 3; n <= 12; ++n) {
    CycleSeries c;
    for (int j = 0; j < n; ++j) c.amplitudes.push_back(u(rng));
    for (int j = 0; j + 1 < n; ++j) c.intervals.push_back(u(rng));
    const auto s = make_cycle_sample(c);
    EXPECT_EQ(s.valid, std::min(n, 10));
    for (int ch = 0; ch < 2; ++ch) {
      const Eigen::VectorXd v = s.channels.row(ch).head(s.valid).transpose();
      const double mean = v.mean();
      const double sd = std::sqrt((v.array() - mean).square().mean());
      EXPECT_LT(std::abs(mean), 1e-9);
      EXPECT_NEAR(sd, 1.0, 1e-9);
      for (int j = s.valid; j < s.length(); ++j) EXPECT_EQ(s.channels(ch, j), 0.0);
    }
  }
}

TEST(Samples, SignalSampleIsZNormalised) {
  std::vector<double> v;
  for (int i = 0; i < 150; ++i) v.push_back(std::sin(0.3 * i) + 0.01 * i);
  const auto s = make_signal_sample(v);
  EXPECT_EQ(s.channels.rows(), 1);
  EXPECT_EQ(s.length(), kSignalSampleLength);
  EXPECT_LT(std::abs(s.channels.row(0).mean()), 1e-9);
}

TEST(Serialization, RoundTripIsBitIdentical) {
  NetConfig c;
  c.input_mode = InputMode::ResampledSignal;
  c.seed = 99;
  const auto p = init_params(c);
  std::stringstream buf;
  save(buf, p);
  const auto q = load_net(buf);
  EXPECT_EQ(q.config, p.config);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const auto s = random_sample(c, rng, 64);
    EXPECT_TRUE(forward(p, s) == forward(q, s));
  }
}

TEST(Serialization, CorruptionAndVersionAreRejected) {
  const auto p = init_params(NetConfig{});
  std::ostringstream out;
  save(out, p);
  const std::string bytes = out.str();

  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x20;
  std::istringstream a(flipped);
  EXPECT_THROW(load_net(a), ModelFormatError);

  std::string version = bytes;
  version[8] = 7;  // first byte of the little-endian version after the magic
  std::istringstream b(version);
  EXPECT_THROW(load_net(b), ModelFormatError);

  std::istringstream c(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_net(c), ModelFormatError);

  std::istringstream d("NOTANET!");
  EXPECT_THROW(load_net(d), ModelFormatError);
}
