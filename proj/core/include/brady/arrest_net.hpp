#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "brady/signal.hpp"

namespace brady {

enum class InputMode { CycleFeatures, ResampledSignal };

std::string_view to_string(InputMode m);
InputMode parse_input_mode(std::string_view s);

// Channels x length sequence with a prefix validity mask.
struct SeriesSample {
  Eigen::MatrixXd channels;  // C x L
  int valid = 0;             // positions [0, valid) are real data
  std::optional<int> label;

  int length() const { return static_cast<int>(channels.cols()); }
};

inline constexpr int kCycleSampleLength = 10;
inline constexpr int kSignalSampleLength = 64;

// Two channels (amplitude, interval) over the first <= 10 cycles; interval j
// is the gap ending at peak j, position 0 takes the mean interval. Each
// channel is z-normalised over the valid positions (constant channels -> 0).
SeriesSample make_cycle_sample(const CycleSeries& c, std::optional<int> label = {},
                               int length = kCycleSampleLength);
// Raw distance signal linearly resampled to `length` points, z-normalised.
SeriesSample make_signal_sample(std::span<const double> values, std::optional<int> label = {},
                                int length = kSignalSampleLength);

struct NetConfig {
  InputMode input_mode = InputMode::CycleFeatures;
  int lstm_hidden = 8;
  std::array<int, 3> conv_channels{32, 64, 32};
  std::array<int, 3> conv_kernels{8, 5, 3};
  double dropout_rate = 0.3;
  int n_classes = 4;
  double bn_momentum = 0.9;
  std::uint64_t seed = 1;

  int in_channels() const { return input_mode == InputMode::CycleFeatures ? 2 : 1; }
  int length() const {
    return input_mode == InputMode::CycleFeatures ? kCycleSampleLength : kSignalSampleLength;
  }
  // Explicit overrides used by tests and benchmarks for small nets.
  std::optional<int> length_override;
  std::optional<int> in_channels_override;
  int effective_length() const { return length_override.value_or(length()); }
  int effective_in_channels() const { return in_channels_override.value_or(in_channels()); }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Throws InvalidConfig.
void validate(const NetConfig& cfg);

struct ConvBlock {
  Eigen::MatrixXd weight;  // out x (in * kernel), column = in_channel * kernel + tap
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

struct NetParams {
  static constexpr std::uint32_t kFormatVersion = 1;

  NetConfig config;
  Eigen::MatrixXd lstm_wx;  // 4H x C, gate order i, f, g, o
  Eigen::MatrixXd lstm_wh;  // 4H x H
  Eigen::VectorXd lstm_b;   // 4H
  std::array<ConvBlock, 3> conv;
  Eigen::MatrixXd dense_w;  // K x (H + C3)
  Eigen::VectorXd dense_b;  // K

  // Visits trainable tensors in serialization order.
  template <class Self, class F>
  static void visit_trainable(Self& self, F&& f) {
    f("lstm_wx", self.lstm_wx);
    f("lstm_wh", self.lstm_wh);
    f("lstm_b", self.lstm_b);
    for (std::size_t l = 0; l < self.conv.size(); ++l) {
      const std::string p = "conv" + std::to_string(l);
      f(p + "_w", self.conv[l].weight);
      f(p + "_gamma", self.conv[l].gamma);
      f(p + "_beta", self.conv[l].beta);
    }
    f("dense_w", self.dense_w);
    f("dense_b", self.dense_b);
  }
  template <class F>
  void for_each_trainable(F&& f) { visit_trainable(*this, std::forward<F>(f)); }
  template <class F>
  void for_each_trainable(F&& f) const { visit_trainable(*this, std::forward<F>(f)); }

  // Same shapes, all zeros (gradient accumulator).
  NetParams zeros_like() const;
  std::size_t parameter_count() const;
};

NetParams init_params(const NetConfig& cfg);

enum class Mode { Train, Eval };

struct ForwardOptions {
  Mode mode = Mode::Eval;
  std::uint64_t dropout_seed = 0;  // Train mode only
};

// Per-class probabilities for each sample (K x B), using batch statistics in
// train mode and running statistics in eval mode.
Eigen::MatrixXd forward_batch(const NetParams& p, std::span<const SeriesSample> batch,
                              const ForwardOptions& opt = {});
Eigen::VectorXd forward(const NetParams& p, const SeriesSample& x, Mode mode = Mode::Eval);

struct LossAndGrad {
  double loss = 0.0;  // mean cross-entropy over the batch
  NetParams grad;
  Eigen::MatrixXd probs;
  Eigen::MatrixXd dlogits;  // K x B, d(loss)/d(logits)
  // Batch normalisation statistics observed in train mode, per conv block.
  std::array<Eigen::VectorXd, 3> batch_mean;
  std::array<Eigen::VectorXd, 3> batch_var;
};

// Mean cross-entropy and its gradient w.r.t. every trainable tensor. Every
// sample must carry a label in 0..n_classes-1.
LossAndGrad loss_and_gradient(const NetParams& p, std::span<const SeriesSample> batch,
                              const ForwardOptions& opt = {Mode::Train, 0});
NetParams backward(const NetParams& p, const SeriesSample& x, int label,
                   Mode mode = Mode::Train);
double loss(const NetParams& p, std::span<const SeriesSample> batch,
            const ForwardOptions& opt = {Mode::Train, 0});

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 7;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainResult {
  NetParams params;
  std::vector<double> loss_history;  // mean train-mode batch loss per epoch
};

// Throws DegenerateDataset when fewer than two classes are present.
TrainResult train(std::span<const SeriesSample> data, const TrainConfig& cfg,
                  const NetConfig& net);

// Argmax with ties resolved toward the lower class.
int argmax_low(std::span<const double> probs);
int argmax_low(const Eigen::VectorXd& probs);
int predict_arrest(const NetParams& p, const SeriesSample& x);

void save(std::ostream& out, const NetParams& p);
NetParams load_net(std::istream& in);
void save_net_file(const std::string& path, const NetParams& p);
NetParams load_net_file(const std::string& path);

}  // namespace brady
