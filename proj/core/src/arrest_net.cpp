#include "brady/arrest_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include "brady/errors.hpp"
#include "brady/json_io.hpp"

namespace brady {

namespace {
constexpr double kBnEps = 1e-5;
}

std::string_view to_string(InputMode m) {
  return m == InputMode::CycleFeatures ? "cycle_features" : "resampled_signal";
}

InputMode parse_input_mode(std::string_view s) {
  if (s == "cycle_features") return InputMode::CycleFeatures;
  if (s == "resampled_signal") return InputMode::ResampledSignal;
  throw InvalidConfig("unknown input_mode '" + std::string(s) + "'");
}

namespace {

void znormalize_row(Eigen::MatrixXd& m, Eigen::Index row, int valid) {
  if (valid <= 0) return;
  auto r = m.row(row).head(valid);
  const double mean = r.mean();
  r.array() -= mean;
  const double sd = std::sqrt(r.squaredNorm() / valid);
  if (sd < 1e-12) {
    r.setZero();
  } else {
    r /= sd;
  }
}

}  // namespace

SeriesSample make_cycle_sample(const CycleSeries& c, std::optional<int> label, int length) {
  SeriesSample s;
  s.label = label;
  s.channels = Eigen::MatrixXd::Zero(2, length);
  const int n = std::min<int>(static_cast<int>(c.amplitudes.size()), length);
  s.valid = n;
  const double mean_interval =
      c.intervals.empty()
          ? 0.0
          : std::accumulate(c.intervals.begin(), c.intervals.end(), 0.0) /
                static_cast<double>(c.intervals.size());
  for (int j = 0; j < n; ++j) {
    s.channels(0, j) = c.amplitudes[static_cast<std::size_t>(j)];
    const auto k = static_cast<std::size_t>(j);
    s.channels(1, j) = (j >= 1 && k - 1 < c.intervals.size()) ? c.intervals[k - 1] : mean_interval;
  }
  znormalize_row(s.channels, 0, n);
  znormalize_row(s.channels, 1, n);
  return s;
}

SeriesSample make_signal_sample(std::span<const double> values, std::optional<int> label,
                                int length) {
  SeriesSample s;
  s.label = label;
  s.channels = Eigen::MatrixXd::Zero(1, length);
  s.valid = length;
  const auto n = values.size();
  if (n == 0) {
    s.valid = 0;
    return s;
  }
  for (int j = 0; j < length; ++j) {
    const double pos = length == 1 ? 0.0
                                   : static_cast<double>(j) * static_cast<double>(n - 1) /
                                         static_cast<double>(length - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    s.channels(0, j) = (1.0 - frac) * values[lo] + frac * values[hi];
  }
  znormalize_row(s.channels, 0, length);
  return s;
}

void validate(const NetConfig& cfg) {
  const int len = cfg.effective_length();
  if (cfg.lstm_hidden <= 0) throw InvalidConfig("lstm_hidden must be positive");
  if (cfg.n_classes < 2) throw InvalidConfig("n_classes must be >= 2");
  if (len <= 0 || cfg.effective_in_channels() <= 0) throw InvalidConfig("bad input shape");
  for (std::size_t l = 0; l < 3; ++l) {
    if (cfg.conv_channels[l] <= 0) throw InvalidConfig("conv channels must be positive");
    if (cfg.conv_kernels[l] <= 0 || cfg.conv_kernels[l] > len) {
      throw InvalidConfig("conv kernel " + std::to_string(cfg.conv_kernels[l]) +
                          " must be in 1.." + std::to_string(len));
    }
  }
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw InvalidConfig("dropout_rate must be in [0, 1)");
  }
  if (!(cfg.bn_momentum >= 0.0 && cfg.bn_momentum < 1.0)) {
    throw InvalidConfig("bn_momentum must be in [0, 1)");
  }
}

NetParams NetParams::zeros_like() const {
  NetParams z = *this;
  z.for_each_trainable([](const std::string&, auto& t) { t.setZero(); });
  for (auto& c : z.conv) {
    c.running_mean.setZero();
    c.running_var.setZero();
  }
  return z;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for_each_trainable([&n](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

NetParams init_params(const NetConfig& cfg) {
  validate(cfg);
  NetParams p;
  p.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  auto fill = [&rng](auto& m, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  const int h = cfg.lstm_hidden;
  const int c_in = cfg.effective_in_channels();
  p.lstm_wx.resize(4 * h, c_in);
  p.lstm_wh.resize(4 * h, h);
  p.lstm_b.resize(4 * h);
  fill(p.lstm_wx, h);
  fill(p.lstm_wh, h);
  fill(p.lstm_b, h);
  int prev = c_in;
  for (std::size_t l = 0; l < 3; ++l) {
    auto& blk = p.conv[l];
    const int out = cfg.conv_channels[l];
    const int k = cfg.conv_kernels[l];
    blk.weight.resize(out, prev * k);
    fill(blk.weight, prev * k);
    blk.gamma = Eigen::VectorXd::Ones(out);
    blk.beta = Eigen::VectorXd::Zero(out);
    blk.running_mean = Eigen::VectorXd::Zero(out);
    blk.running_var = Eigen::VectorXd::Ones(out);
    prev = out;
  }
  const int feat = h + cfg.conv_channels[2];
  p.dense_w.resize(cfg.n_classes, feat);
  p.dense_b.resize(cfg.n_classes);
  fill(p.dense_w, feat);
  fill(p.dense_b, feat);
  return p;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LstmTrace {
  std::vector<Eigen::VectorXd> x, h_prev, c_prev, i, f, g, o, tanh_c;
};

struct Cache {
  int batch = 0;
  int length = 0;
  std::vector<int> valid;
  Eigen::RowVectorXd mask;  // 1 x (B * L)
  std::vector<LstmTrace> lstm;
  Eigen::MatrixXd h_final;  // H x B
  Eigen::MatrixXd drop;     // H x B
  std::array<Eigen::MatrixXd, 3> cols;
  std::array<Eigen::MatrixXd, 3> xhat;
  std::array<Eigen::MatrixXd, 3> act;
  std::array<Eigen::VectorXd, 3> inv_std;
  std::array<Eigen::VectorXd, 3> mean;
  std::array<Eigen::VectorXd, 3> var;
  std::array<int, 3> pad_left{};
  Eigen::MatrixXd feat;
  Eigen::MatrixXd probs;
};

Eigen::MatrixXd im2col(const Eigen::MatrixXd& in, int kernel, int pad_left, int length,
                       const std::vector<int>& valid) {
  const auto c_in = in.rows();
  const auto batch = static_cast<int>(valid.size());
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(c_in * kernel, static_cast<Eigen::Index>(batch) * length);
  for (int b = 0; b < batch; ++b) {
    const int base = b * length;
    for (int t = 0; t < valid[static_cast<std::size_t>(b)]; ++t) {
      for (int j = 0; j < kernel; ++j) {
        const int s = t + j - pad_left;
        if (s < 0 || s >= valid[static_cast<std::size_t>(b)]) continue;
        for (Eigen::Index c = 0; c < c_in; ++c) col(c * kernel + j, base + t) = in(c, base + s);
      }
    }
  }
  return col;
}

Eigen::MatrixXd col2im(const Eigen::MatrixXd& dcol, Eigen::Index c_in, int kernel, int pad_left,
                       int length, const std::vector<int>& valid) {
  const auto batch = static_cast<int>(valid.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(c_in, static_cast<Eigen::Index>(batch) * length);
  for (int b = 0; b < batch; ++b) {
    const int base = b * length;
    for (int t = 0; t < valid[static_cast<std::size_t>(b)]; ++t) {
      for (int j = 0; j < kernel; ++j) {
        const int s = t + j - pad_left;
        if (s < 0 || s >= valid[static_cast<std::size_t>(b)]) continue;
        for (Eigen::Index c = 0; c < c_in; ++c) d(c, base + s) += dcol(c * kernel + j, base + t);
      }
    }
  }
  return d;
}

void check_batch(const NetParams& p, std::span<const SeriesSample> batch) {
  if (batch.empty()) throw ShapeMismatch("empty batch");
  const int c_in = p.config.effective_in_channels();
  const int len = p.config.effective_length();
  for (const auto& s : batch) {
    if (s.channels.rows() != c_in || s.channels.cols() != len) {
      throw ShapeMismatch("sample is " + std::to_string(s.channels.rows()) + "x" +
                          std::to_string(s.channels.cols()) + ", network expects " +
                          std::to_string(c_in) + "x" + std::to_string(len));
    }
    if (s.valid < 1 || s.valid > len) throw ShapeMismatch("sample has no valid positions");
    if (!s.channels.leftCols(s.valid).allFinite()) throw ShapeMismatch("non-finite sample values");
  }
}

Cache run_forward(const NetParams& p, std::span<const SeriesSample> batch,
                  const ForwardOptions& opt) {
  check_batch(p, batch);
  const auto& cfg = p.config;
  const bool train = opt.mode == Mode::Train;
  const int h_dim = cfg.lstm_hidden;
  Cache c;
  c.batch = static_cast<int>(batch.size());
  c.length = cfg.effective_length();
  const Eigen::Index width = static_cast<Eigen::Index>(c.batch) * c.length;
  c.mask = Eigen::RowVectorXd::Zero(width);
  for (const auto& s : batch) c.valid.push_back(s.valid);
  for (int b = 0; b < c.batch; ++b) {
    c.mask.segment(static_cast<Eigen::Index>(b) * c.length, c.valid[static_cast<std::size_t>(b)]).setOnes();
  }

  // Recurrent branch over the valid prefix.
  c.lstm.resize(batch.size());
  c.h_final.resize(h_dim, c.batch);
  for (int b = 0; b < c.batch; ++b) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(h_dim);
    Eigen::VectorXd cell = Eigen::VectorXd::Zero(h_dim);
    auto& tr = c.lstm[static_cast<std::size_t>(b)];
    const auto& x = batch[static_cast<std::size_t>(b)].channels;
    for (int t = 0; t < c.valid[static_cast<std::size_t>(b)]; ++t) {
      Eigen::VectorXd xt = x.col(t);
      Eigen::VectorXd z = p.lstm_wx * xt + p.lstm_wh * h + p.lstm_b;
      Eigen::VectorXd gi = z.segment(0, h_dim).unaryExpr(&sigmoid);
      Eigen::VectorXd gf = z.segment(h_dim, h_dim).unaryExpr(&sigmoid);
      Eigen::VectorXd gg = z.segment(2 * h_dim, h_dim).array().tanh();
      Eigen::VectorXd go = z.segment(3 * h_dim, h_dim).unaryExpr(&sigmoid);
      tr.x.push_back(xt);
      tr.h_prev.push_back(h);
      tr.c_prev.push_back(cell);
      cell = gf.cwiseProduct(cell) + gi.cwiseProduct(gg);
      Eigen::VectorXd tc = cell.array().tanh();
      h = go.cwiseProduct(tc);
      tr.i.push_back(std::move(gi));
      tr.f.push_back(std::move(gf));
      tr.g.push_back(std::move(gg));
      tr.o.push_back(std::move(go));
      tr.tanh_c.push_back(std::move(tc));
    }
    c.h_final.col(b) = h;
  }
  c.drop = Eigen::MatrixXd::Ones(h_dim, c.batch);
  if (train && cfg.dropout_rate > 0.0) {
    std::mt19937_64 rng(opt.dropout_seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 - cfg.dropout_rate;
    for (Eigen::Index i = 0; i < c.drop.size(); ++i) {
      c.drop.data()[i] = u(rng) < keep ? 1.0 / keep : 0.0;
    }
  }

  // Convolutional branch.
  Eigen::MatrixXd a(cfg.effective_in_channels(), width);
  for (int b = 0; b < c.batch; ++b) {
    a.middleCols(static_cast<Eigen::Index>(b) * c.length, c.length) = batch[static_cast<std::size_t>(b)].channels;
  }
  a.array().rowwise() *= c.mask.array();
  const double n_valid = c.mask.sum();
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& blk = p.conv[l];
    const int k = cfg.conv_kernels[l];
    c.pad_left[l] = (k - 1) / 2;
    c.cols[l] = im2col(a, k, c.pad_left[l], c.length, c.valid);
    Eigen::MatrixXd z = blk.weight * c.cols[l];
    if (train) {
      c.mean[l] = (z.array().rowwise() * c.mask.array()).rowwise().sum() / n_valid;
      Eigen::MatrixXd centered = z.colwise() - c.mean[l];
      c.var[l] = (centered.array().square().rowwise() * c.mask.array()).rowwise().sum() / n_valid;
    } else {
      c.mean[l] = blk.running_mean;
      c.var[l] = blk.running_var;
    }
    c.inv_std[l] = (c.var[l].array() + kBnEps).rsqrt();
    c.xhat[l] = ((z.colwise() - c.mean[l]).array().colwise() * c.inv_std[l].array()).matrix();
    c.xhat[l].array().rowwise() *= c.mask.array();
    Eigen::MatrixXd y = (c.xhat[l].array().colwise() * blk.gamma.array()).colwise() + blk.beta.array();
    c.act[l] = y.cwiseMax(0.0);
    c.act[l].array().rowwise() *= c.mask.array();
    a = c.act[l];
  }

  const int c3 = cfg.conv_channels[2];
  c.feat.resize(h_dim + c3, c.batch);
  for (int b = 0; b < c.batch; ++b) {
    c.feat.col(b).head(h_dim) = c.h_final.col(b).cwiseProduct(c.drop.col(b));
    c.feat.col(b).tail(c3) = a.middleCols(static_cast<Eigen::Index>(b) * c.length, c.length)
                                 .rowwise()
                                 .sum() /
                             static_cast<double>(c.valid[static_cast<std::size_t>(b)]);
  }
  Eigen::MatrixXd logits = (p.dense_w * c.feat).colwise() + p.dense_b;
  c.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const double mx = logits.col(b).maxCoeff();
    Eigen::VectorXd e = (logits.col(b).array() - mx).exp();
    c.probs.col(b) = e / e.sum();
  }
  return c;
}

}  // namespace

Eigen::MatrixXd forward_batch(const NetParams& p, std::span<const SeriesSample> batch,
                              const ForwardOptions& opt) {
  return run_forward(p, batch, opt).probs;
}

Eigen::VectorXd forward(const NetParams& p, const SeriesSample& x, Mode mode) {
  return forward_batch(p, std::span<const SeriesSample>(&x, 1), {mode, 0}).col(0);
}

LossAndGrad loss_and_gradient(const NetParams& p, std::span<const SeriesSample> batch,
                              const ForwardOptions& opt) {
  const auto& cfg = p.config;
  for (const auto& s : batch) {
    if (!s.label || *s.label < 0 || *s.label >= cfg.n_classes) {
      throw ShapeMismatch("every training sample needs a label in 0.." +
                          std::to_string(cfg.n_classes - 1));
    }
  }
  Cache c = run_forward(p, batch, opt);
  const bool train = opt.mode == Mode::Train;
  const int h_dim = cfg.lstm_hidden;
  const double inv_batch = 1.0 / c.batch;

  LossAndGrad out;
  out.grad = p.zeros_like();
  out.probs = c.probs;
  out.dlogits = c.probs;
  for (int b = 0; b < c.batch; ++b) {
    const int y = *batch[static_cast<std::size_t>(b)].label;
    out.loss -= std::log(std::max(c.probs(y, b), 1e-300));
    out.dlogits(y, b) -= 1.0;
  }
  out.loss *= inv_batch;
  out.dlogits *= inv_batch;
  for (std::size_t l = 0; l < 3; ++l) {
    out.batch_mean[l] = c.mean[l];
    out.batch_var[l] = c.var[l];
  }

  auto& g = out.grad;
  g.dense_w = out.dlogits * c.feat.transpose();
  g.dense_b = out.dlogits.rowwise().sum();
  const Eigen::MatrixXd dfeat = p.dense_w.transpose() * out.dlogits;

  // Convolutional branch.
  const int c3 = cfg.conv_channels[2];
  const Eigen::Index width = static_cast<Eigen::Index>(c.batch) * c.length;
  Eigen::MatrixXd dact = Eigen::MatrixXd::Zero(c3, width);
  for (int b = 0; b < c.batch; ++b) {
    const int v = c.valid[static_cast<std::size_t>(b)];
    const Eigen::VectorXd dpool = dfeat.col(b).tail(c3) / static_cast<double>(v);
    for (int t = 0; t < v; ++t) dact.col(static_cast<Eigen::Index>(b) * c.length + t) = dpool;
  }
  const double n_valid = c.mask.sum();
  for (int li = 2; li >= 0; --li) {
    const auto l = static_cast<std::size_t>(li);
    const auto& blk = p.conv[l];
    Eigen::MatrixXd dy = dact.cwiseProduct((c.act[l].array() > 0.0).cast<double>().matrix());
    g.conv[l].gamma = dy.cwiseProduct(c.xhat[l]).rowwise().sum();
    g.conv[l].beta = dy.rowwise().sum();
    Eigen::MatrixXd dxhat = dy.array().colwise() * blk.gamma.array();
    Eigen::MatrixXd dz;
    if (train) {
      const Eigen::VectorXd sum_dxhat = dxhat.rowwise().sum();
      const Eigen::VectorXd sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat[l]).rowwise().sum();
      dz = (n_valid * dxhat).colwise() - sum_dxhat;
      dz -= (c.xhat[l].array().colwise() * sum_dxhat_xhat.array()).matrix();
      dz = (dz.array().colwise() * (c.inv_std[l].array() / n_valid)).matrix();
    } else {
      dz = dxhat.array().colwise() * c.inv_std[l].array();
    }
    dz.array().rowwise() *= c.mask.array();
    g.conv[l].weight = dz * c.cols[l].transpose();
    if (l > 0) {
      const Eigen::MatrixXd dcol = blk.weight.transpose() * dz;
      dact = col2im(dcol, p.conv[l - 1].weight.rows(), cfg.conv_kernels[l], c.pad_left[l],
                    c.length, c.valid);
    }
  }

  // Recurrent branch (backpropagation through time).
  for (int b = 0; b < c.batch; ++b) {
    const auto& tr = c.lstm[static_cast<std::size_t>(b)];
    Eigen::VectorXd dh = dfeat.col(b).head(h_dim).cwiseProduct(c.drop.col(b));
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(h_dim);
    Eigen::VectorXd dz(4 * h_dim);
    for (int t = static_cast<int>(tr.x.size()) - 1; t >= 0; --t) {
      const auto s = static_cast<std::size_t>(t);
      const auto& gi = tr.i[s];
      const auto& gf = tr.f[s];
      const auto& gg = tr.g[s];
      const auto& go = tr.o[s];
      const auto& tc = tr.tanh_c[s];
      const Eigen::VectorXd d_o = dh.cwiseProduct(tc);
      dc += dh.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());
      dz.segment(0, h_dim) = dc.cwiseProduct(gg).cwiseProduct((gi.array() * (1.0 - gi.array())).matrix());
      dz.segment(h_dim, h_dim) =
          dc.cwiseProduct(tr.c_prev[s]).cwiseProduct((gf.array() * (1.0 - gf.array())).matrix());
      dz.segment(2 * h_dim, h_dim) = dc.cwiseProduct(gi).cwiseProduct((1.0 - gg.array().square()).matrix());
      dz.segment(3 * h_dim, h_dim) = d_o.cwiseProduct((go.array() * (1.0 - go.array())).matrix());
      g.lstm_wx += dz * tr.x[s].transpose();
      g.lstm_wh += dz * tr.h_prev[s].transpose();
      g.lstm_b += dz;
      dh = p.lstm_wh.transpose() * dz;
      dc = dc.cwiseProduct(gf);
    }
  }
  return out;
}

NetParams backward(const NetParams& p, const SeriesSample& x, int label, Mode mode) {
  SeriesSample s = x;
  s.label = label;
  return loss_and_gradient(p, std::span<const SeriesSample>(&s, 1), {mode, 0}).grad;
}

double loss(const NetParams& p, std::span<const SeriesSample> batch, const ForwardOptions& opt) {
  const Eigen::MatrixXd probs = forward_batch(p, batch, opt);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (!batch[b].label) throw ShapeMismatch("sample without label");
    total -= std::log(std::max(probs(*batch[b].label, static_cast<Eigen::Index>(b)), 1e-300));
  }
  return total / static_cast<double>(batch.size());
}

TrainResult train(std::span<const SeriesSample> data, const TrainConfig& cfg,
                  const NetConfig& net) {
  if (cfg.epochs < 0 || cfg.batch_size <= 0 || !(cfg.learning_rate >= 0.0)) {
    throw InvalidConfig("epochs >= 0, batch_size > 0 and learning_rate >= 0 required");
  }
  std::vector<int> seen(static_cast<std::size_t>(net.n_classes), 0);
  for (const auto& s : data) {
    if (!s.label || *s.label < 0 || *s.label >= net.n_classes) {
      throw DegenerateDataset("every training sample needs a label in 0.." +
                              std::to_string(net.n_classes - 1));
    }
    seen[static_cast<std::size_t>(*s.label)] = 1;
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2) {
    throw DegenerateDataset("training data must contain at least two classes");
  }

  TrainResult result;
  result.params = init_params(net);
  NetParams& p = result.params;
  NetParams m = p.zeros_like();
  NetParams v = p.zeros_like();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<SeriesSample> batch;
  long step = 0;
  const double momentum = net.bn_momentum;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      const auto lg = loss_and_gradient(p, batch, {Mode::Train, rng()});
      epoch_loss += lg.loss * static_cast<double>(end - start);

      for (std::size_t l = 0; l < 3; ++l) {
        p.conv[l].running_mean = momentum * p.conv[l].running_mean + (1.0 - momentum) * lg.batch_mean[l];
        p.conv[l].running_var = momentum * p.conv[l].running_var + (1.0 - momentum) * lg.batch_var[l];
      }

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      std::vector<double*> pv, mv, vv;
      std::vector<const double*> gv;
      std::vector<Eigen::Index> sizes;
      p.for_each_trainable([&](const std::string&, auto& t) { pv.push_back(t.data()); sizes.push_back(t.size()); });
      m.for_each_trainable([&](const std::string&, auto& t) { mv.push_back(t.data()); });
      v.for_each_trainable([&](const std::string&, auto& t) { vv.push_back(t.data()); });
      lg.grad.for_each_trainable([&](const std::string&, const auto& t) { gv.push_back(t.data()); });
      for (std::size_t k = 0; k < pv.size(); ++k) {
        for (Eigen::Index i = 0; i < sizes[k]; ++i) {
          const double gi = gv[k][i];
          mv[k][i] = cfg.beta1 * mv[k][i] + (1.0 - cfg.beta1) * gi;
          vv[k][i] = cfg.beta2 * vv[k][i] + (1.0 - cfg.beta2) * gi * gi;
          pv[k][i] -= cfg.learning_rate * (mv[k][i] / bc1) / (std::sqrt(vv[k][i] / bc2) + cfg.epsilon);
        }
      }
    }
    result.loss_history.push_back(data.empty() ? 0.0 : epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

int argmax_low(std::span<const double> probs) {
  int best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

int argmax_low(const Eigen::VectorXd& probs) {
  return argmax_low(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
}

int predict_arrest(const NetParams& p, const SeriesSample& x) {
  return argmax_low(forward(p, x, Mode::Eval));
}

namespace {

constexpr char kMagic[8] = {'B', 'R', 'A', 'D', 'Y', 'N', 'E', 'T'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& buf, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ModelFormatError("truncated network file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos += 8;
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

template <class F>
void for_each_stored(NetParams& p, F&& f) {
  p.for_each_trainable(f);
  for (std::size_t l = 0; l < p.conv.size(); ++l) {
    const std::string prefix = "conv" + std::to_string(l);
    f(prefix + "_running_mean", p.conv[l].running_mean);
    f(prefix + "_running_var", p.conv[l].running_var);
  }
}

std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

}  // namespace

// Layout (little-endian): magic[8], u32 version, u32 config_len, config JSON,
// u32 tensor_count, per tensor {u32 name_len, name, u32 rows, u32 cols,
// f64 x rows*cols column-major}, u32 CRC-32 of all preceding bytes.
void save(std::ostream& out, const NetParams& p) {
  std::string buf(kMagic, sizeof(kMagic));
  put_u32(buf, NetParams::kFormatVersion);
  const std::string cfg = nlohmann::json(p.config).dump();
  put_u32(buf, static_cast<std::uint32_t>(cfg.size()));
  buf += cfg;
  NetParams copy = p;
  std::uint32_t count = 0;
  for_each_stored(copy, [&count](const std::string&, auto&) { ++count; });
  put_u32(buf, count);
  for_each_stored(copy, [&buf](const std::string& name, auto& t) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put_u32(buf, static_cast<std::uint32_t>(t.rows()));
    put_u32(buf, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(buf, t.data()[i]);
  });
  put_u32(buf, crc32(buf));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

NetParams load_net(std::istream& in) {
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < sizeof(kMagic) + 12 || buf.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0) {
    throw ModelFormatError("not a network file (bad magic)");
  }
  Reader tail{buf, buf.size() - 4};
  const std::uint32_t stored_crc = tail.u32();
  if (stored_crc != crc32(std::string_view(buf).substr(0, buf.size() - 4))) {
    throw ModelFormatError("network file checksum mismatch");
  }
  Reader r{buf, sizeof(kMagic)};
  const std::uint32_t version = r.u32();
  if (version != NetParams::kFormatVersion) {
    throw ModelFormatError("unsupported network file version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = r.u32();
  NetConfig cfg;
  try {
    cfg = nlohmann::json::parse(r.bytes(cfg_len)).get<NetConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("bad network config: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelFormatError(std::string("bad network config: ") + e.what());
  }
  NetParams p = init_params(cfg);
  std::uint32_t expected = 0;
  for_each_stored(p, [&expected](const std::string&, auto&) { ++expected; });
  if (r.u32() != expected) throw ModelFormatError("tensor count mismatch");
  for_each_stored(p, [&r](const std::string& name, auto& t) {
    const std::uint32_t name_len = r.u32();
    if (r.bytes(name_len) != name) throw ModelFormatError("unexpected tensor, wanted " + name);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (rows != t.rows() || cols != t.cols()) throw ModelFormatError("shape mismatch for " + name);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.f64();
  });
  if (r.pos != buf.size() - 4) throw ModelFormatError("trailing bytes in network file");
  return p;
}

void save_net_file(const std::string& path, const NetParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path);
  save(out, p);
}

NetParams load_net_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path);
  return load_net(in);
}

}  // namespace brady
