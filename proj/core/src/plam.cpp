#include "brady/plam.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "brady/errors.hpp"
#include "brady/ordinal_boost.hpp"
#include "brady/synth.hpp"

namespace brady {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxHalvings = 40;
constexpr std::size_t kStallCycles = 10;

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double feature_value(const FeatureVector& f, int j) {
  switch (j) {
    case 0: return f.mean_amp;
    case 1: return f.rsd_amp;
    case 2: return f.mean_int;
    default: return f.rsd_int;
  }
}

// Log-likelihood of one observation and its first and second derivatives
// with respect to the upper threshold (theta_y), the lower threshold
// (theta_{y-1}) and eta.
struct RowTerms {
  double ll = 0.0;
  double d_hi = 0.0;
  double d_lo = 0.0;
  double d_eta = 0.0;
  double h_hi_hi = 0.0;
  double h_lo_lo = 0.0;
  double h_hi_lo = 0.0;
  double h_eta_eta = 0.0;
  double h_hi_eta = 0.0;
  double h_lo_eta = 0.0;
};

double row_probability(int y, double eta, const std::array<double, 3>& theta) {
  const bool has_hi = y < 3;
  const bool has_lo = y > 0;
  const double a = has_hi ? theta[static_cast<std::size_t>(y)] - eta : 0.0;
  const double b = has_lo ? theta[static_cast<std::size_t>(y - 1)] - eta : 0.0;
  if (!has_lo) return logistic(a);
  if (!has_hi) return logistic(-b);
  if (b > 0.0) return logistic(-b) - logistic(-a);
  return logistic(a) - logistic(b);
}

double row_loglik(int y, double eta, const std::array<double, 3>& theta) {
  const double p = row_probability(y, eta, theta);
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

RowTerms row_terms(int y, double eta, const std::array<double, 3>& theta) {
  RowTerms r;
  const double p = row_probability(y, eta, theta);
  if (!(p > 0.0)) {
    r.ll = -std::numeric_limits<double>::infinity();
    return r;
  }
  r.ll = std::log(p);
  double fa = 0.0;
  double dfa = 0.0;
  double fb = 0.0;
  double dfb = 0.0;
  if (y < 3) {
    const double a = theta[static_cast<std::size_t>(y)] - eta;
    const double fp = logistic(a);
    const double fm = logistic(-a);
    fa = fp * fm;
    dfa = fa * (fm - fp);
  }
  if (y > 0) {
    const double b = theta[static_cast<std::size_t>(y - 1)] - eta;
    const double fp = logistic(b);
    const double fm = logistic(-b);
    fb = fp * fm;
    dfb = fb * (fm - fp);
  }
  const double ua = fa / p;
  const double ub = fb / p;
  const double ud = ua - ub;
  r.d_hi = ua;
  r.d_lo = -ub;
  r.d_eta = -ud;
  r.h_hi_hi = dfa / p - ua * ua;
  r.h_lo_lo = -dfb / p - ub * ub;
  r.h_hi_lo = ua * ub;
  r.h_eta_eta = (dfa - dfb) / p - ud * ud;
  r.h_hi_eta = -dfa / p + ua * ud;
  r.h_lo_eta = dfb / p - ub * ud;
  return r;
}

bool ordered(const std::array<double, 3>& t) {
  return std::isfinite(t[0]) && std::isfinite(t[2]) && t[0] < t[1] && t[1] < t[2];
}

std::array<double, 3> empirical_thresholds(std::span<const LabeledFeatures> rows) {
  std::array<double, 4> counts{};
  for (const auto& r : rows) counts[static_cast<std::size_t>(r.score)] += 1.0;
  const double n = static_cast<double>(rows.size());
  std::array<double, 3> theta{};
  double cum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    cum += counts[c];
    const double q = cum / n;
    theta[c] = std::log(q / (1.0 - q));
  }
  return theta;
}

// Solves (-H) d = g, adding a ridge if -H is not numerically positive definite.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& neg_h, const Eigen::VectorXd& g) {
  Eigen::MatrixXd m = neg_h;
  double ridge = 0.0;
  const double scale = std::max(1e-300, m.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 30; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd d = llt.solve(g);
      if (d.allFinite()) return d;
    }
    ridge = ridge == 0.0 ? 1e-10 * scale : ridge * 10.0;
    m = neg_h;
    m.diagonal().array() += ridge;
  }
  return g;
}

class Fitter {
 public:
  Fitter(std::span<const LabeledFeatures> rows, const PlamConfig& cfg) : rows_(rows), cfg_(cfg) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    fatigue_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = rows[static_cast<std::size_t>(i)];
      fatigue_(i) = r.features.fatigue;
      arrest_.push_back(std::clamp(r.features.arrest, 0, 3));
      y_.push_back(r.score);
    }
    const Eigen::MatrixXd dpen = difference_penalty(cfg.n_basis, 2);
    for (int j = 0; j < kNumSmooths; ++j) {
      auto& s = model_.smooths[static_cast<std::size_t>(j)];
      std::vector<double> x;
      for (const auto& r : rows) x.push_back(feature_value(r.features, j));
      const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
      s.lambda = cfg.lambda[static_cast<std::size_t>(j)];
      if (!(*mx - *mn > 1e-12 * std::max(1.0, std::abs(*mn)))) {
        s.aliased = true;
        designs_.emplace_back();
        continue;
      }
      s.basis = BSplineBasis(*mn, *mx, cfg.n_basis, 3);
      const Eigen::MatrixXd b = s.basis.design(x);
      s.z = sum_to_zero_basis(b.colwise().sum().transpose());
      s.penalty = s.z.transpose() * dpen * s.z;
      s.coef = Eigen::VectorXd::Zero(cfg.n_basis - 1);
      designs_.push_back(b * s.z);
    }

    const double f_mean = fatigue_.mean();
    model_.fatigue_aliased = (fatigue_.array() - f_mean).abs().maxCoeff() <= 1e-12 * std::max(1.0, std::abs(f_mean));
    std::array<int, 4> counts{};
    for (int a : arrest_) ++counts[static_cast<std::size_t>(a)];
    model_.gamma_aliased = {true, false, false, false};
    bool dropped_for_reference = counts[0] > 0;
    for (std::size_t k = 1; k < 4; ++k) {
      if (counts[k] == 0) {
        model_.gamma_aliased[k] = true;
      } else if (!dropped_for_reference) {
        // Without reference-category rows the indicators sum to one and
        // duplicate the thresholds; the first present category takes over.
        model_.gamma_aliased[k] = true;
        dropped_for_reference = true;
      }
    }
  }

  PlamModel run(const PlamModel* warm) {
    model_.theta = empirical_thresholds(rows_);
    if (warm != nullptr && ordered(warm->theta)) {
      model_.theta = warm->theta;
      if (!model_.fatigue_aliased) model_.beta1 = warm->beta1;
      for (std::size_t k = 1; k < 4; ++k) {
        if (!model_.gamma_aliased[k]) model_.gamma[k] = warm->gamma[k];
      }
    }
    smooth_eta_.assign(kNumSmooths, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows_.size())));
    param_eta_ = parametric_eta(model_.beta1, model_.gamma);

    double obj = objective(total_eta(), model_.theta, penalty_total());
    model_.objective_history.push_back(obj);
    const double n = static_cast<double>(rows_.size());
    for (int cycle = 0; cycle < cfg_.max_cycles; ++cycle) {
      double change = parametric_step(obj);
      for (int j = 0; j < kNumSmooths; ++j) change = std::max(change, smooth_step(j, obj));
      model_.objective_history.push_back(obj);
      model_.cycles = cycle + 1;
      const double ll = obj + 0.5 * penalty_total();
      if (-2.0 * ll / n < 1e-8) model_.separation = true;
      // Coefficients still moving along a flat ridge of the objective.
      const auto& h = model_.objective_history;
      if (change >= cfg_.tol && h.size() > kStallCycles &&
          obj - h[h.size() - 1 - kStallCycles] <= 1e-12 * (1.0 + std::abs(obj))) {
        model_.separation = true;
        break;
      }
      if (change < cfg_.tol || (-2.0 * ll / n < 1e-8)) {
        model_.converged = change < cfg_.tol;
        break;
      }
    }
    model_.log_likelihood = objective(total_eta(), model_.theta, 0.0);
    if (!model_.converged && !model_.separation) {
      std::ostringstream msg;
      msg << "backfitting did not converge in " << cfg_.max_cycles << " cycles; objective tail:";
      const auto& h = model_.objective_history;
      for (std::size_t i = h.size() > 5 ? h.size() - 5 : 0; i < h.size(); ++i) msg << ' ' << h[i];
      throw NonConvergence(msg.str());
    }
    return model_;
  }

 private:
  Eigen::VectorXd parametric_eta(double beta1, const std::array<double, 4>& gamma) const {
    Eigen::VectorXd e = beta1 * fatigue_;
    for (std::size_t i = 0; i < arrest_.size(); ++i) {
      e(static_cast<Eigen::Index>(i)) += gamma[static_cast<std::size_t>(arrest_[i])];
    }
    return e;
  }

  Eigen::VectorXd total_eta() const {
    Eigen::VectorXd e = param_eta_;
    for (const auto& s : smooth_eta_) e += s;
    return e;
  }

  double penalty_total() const {
    double pen = 0.0;
    for (const auto& s : model_.smooths) {
      if (!s.aliased) pen += s.lambda * s.coef.dot(s.penalty * s.coef);
    }
    return pen;
  }

  double objective(const Eigen::VectorXd& eta, const std::array<double, 3>& theta,
                   double penalty) const {
    double ll = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      ll += row_loglik(y_[i], eta(static_cast<Eigen::Index>(i)), theta);
    }
    return ll - 0.5 * penalty;
  }

  bool inside(double v) const { return std::abs(v) <= cfg_.separation_bound; }

  // Newton step on (theta, beta1, gamma) with the smooths held fixed.
  double parametric_step(double& obj) {
    const Eigen::VectorXd eta = total_eta();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(7);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(7, 7);
    for (std::size_t i = 0; i < y_.size(); ++i) {
      const int y = y_[i];
      const RowTerms t = row_terms(y, eta(static_cast<Eigen::Index>(i)), model_.theta);
      std::array<int, 2> idx{y < 3 ? y : -1, y > 0 ? y - 1 : -1};
      std::array<double, 2> d{t.d_hi, t.d_lo};
      std::array<double, 2> he{t.h_hi_eta, t.h_lo_eta};
      for (int a = 0; a < 2; ++a) {
        if (idx[a] < 0) continue;
        g(idx[a]) += d[a];
      }
      if (idx[0] >= 0) h(idx[0], idx[0]) += t.h_hi_hi;
      if (idx[1] >= 0) h(idx[1], idx[1]) += t.h_lo_lo;
      if (idx[0] >= 0 && idx[1] >= 0) {
        h(idx[0], idx[1]) += t.h_hi_lo;
        h(idx[1], idx[0]) += t.h_hi_lo;
      }
      // d eta / d(beta1, gamma1..3)
      std::array<double, 4> v{fatigue_(static_cast<Eigen::Index>(i)), 0.0, 0.0, 0.0};
      if (arrest_[i] > 0) v[static_cast<std::size_t>(arrest_[i])] = 1.0;
      for (int a = 0; a < 4; ++a) {
        const double va = v[static_cast<std::size_t>(a)];
        if (va == 0.0) continue;
        g(3 + a) += t.d_eta * va;
        for (int th = 0; th < 2; ++th) {
          if (idx[th] < 0) continue;
          h(idx[th], 3 + a) += he[th] * va;
          h(3 + a, idx[th]) += he[th] * va;
        }
        for (int b = 0; b < 4; ++b) h(3 + a, 3 + b) += t.h_eta_eta * va * v[static_cast<std::size_t>(b)];
      }
    }
    std::vector<int> free{0, 1, 2};
    if (!model_.fatigue_aliased) free.push_back(3);
    for (int k = 1; k < 4; ++k) {
      if (!model_.gamma_aliased[static_cast<std::size_t>(k)]) free.push_back(3 + k);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd gf(nf);
    Eigen::MatrixXd hf(nf, nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf(a) = g(free[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < nf; ++b) {
        hf(a, b) = h(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
      }
    }
    const Eigen::VectorXd dir = newton_direction(-hf, gf);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(7);
    for (Eigen::Index a = 0; a < nf; ++a) delta(free[static_cast<std::size_t>(a)]) = dir(a);

    const Eigen::VectorXd smooth_sum = eta - param_eta_;
    const double pen = penalty_total();
    double step = 1.0;
    for (int k = 0; k <= kMaxHalvings; ++k, step *= 0.5) {
      std::array<double, 3> theta{};
      for (std::size_t c = 0; c < 3; ++c) theta[c] = model_.theta[c] + step * delta(static_cast<Eigen::Index>(c));
      const double beta1 = model_.beta1 + step * delta(3);
      std::array<double, 4> gamma{0.0, 0.0, 0.0, 0.0};
      for (std::size_t c = 1; c < 4; ++c) gamma[c] = model_.gamma[c] + step * delta(static_cast<Eigen::Index>(3 + c));
      bool in_box = inside(beta1) && std::all_of(theta.begin(), theta.end(), [this](double v) { return inside(v); }) &&
                    std::all_of(gamma.begin(), gamma.end(), [this](double v) { return inside(v); });
      if (!in_box) {
        model_.separation = true;
        continue;
      }
      if (!ordered(theta)) continue;
      Eigen::VectorXd pe = parametric_eta(beta1, gamma);
      const double trial = objective(smooth_sum + pe, theta, pen);
      if (!(trial >= obj)) continue;
      obj = trial;
      double change = std::abs(beta1 - model_.beta1);
      for (std::size_t c = 0; c < 3; ++c) change = std::max(change, std::abs(theta[c] - model_.theta[c]));
      for (std::size_t c = 1; c < 4; ++c) change = std::max(change, std::abs(gamma[c] - model_.gamma[c]));
      model_.theta = theta;
      model_.beta1 = beta1;
      model_.gamma = gamma;
      param_eta_ = std::move(pe);
      return change;
    }
    return 0.0;
  }

  // Penalized Newton (IRLS) step on smooth j with everything else fixed.
  double smooth_step(int j, double& obj) {
    auto& s = model_.smooths[static_cast<std::size_t>(j)];
    if (s.aliased) return 0.0;
    const auto& x = designs_[static_cast<std::size_t>(j)];
    const Eigen::VectorXd eta = total_eta();
    const auto n = static_cast<Eigen::Index>(y_.size());
    Eigen::VectorXd u(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const RowTerms t = row_terms(y_[static_cast<std::size_t>(i)], eta(i), model_.theta);
      u(i) = t.d_eta;
      w(i) = -t.h_eta_eta;
    }
    const Eigen::VectorXd grad = x.transpose() * u - s.lambda * (s.penalty * s.coef);
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x + s.lambda * s.penalty;
    const Eigen::VectorXd dir = newton_direction(info, grad);

    const Eigen::VectorXd rest = eta - smooth_eta_[static_cast<std::size_t>(j)];
    const double pen_rest = penalty_total() - s.lambda * s.coef.dot(s.penalty * s.coef);
    double step = 1.0;
    for (int k = 0; k <= kMaxHalvings; ++k, step *= 0.5) {
      const Eigen::VectorXd c = s.coef + step * dir;
      if (c.cwiseAbs().maxCoeff() > cfg_.separation_bound) {
        model_.separation = true;
        continue;
      }
      Eigen::VectorXd se = x * c;
      const double trial = objective(rest + se, model_.theta, pen_rest + s.lambda * c.dot(s.penalty * c));
      if (!(trial >= obj)) continue;
      obj = trial;
      const double change = (c - s.coef).cwiseAbs().maxCoeff();
      s.coef = c;
      smooth_eta_[static_cast<std::size_t>(j)] = std::move(se);
      return change;
    }
    return 0.0;
  }

  std::span<const LabeledFeatures> rows_;
  const PlamConfig& cfg_;
  PlamModel model_;
  Eigen::VectorXd fatigue_;
  std::vector<int> arrest_;
  std::vector<int> y_;
  std::vector<Eigen::MatrixXd> designs_;
  Eigen::VectorXd param_eta_;
  std::vector<Eigen::VectorXd> smooth_eta_;
};

void check_rows(std::span<const LabeledFeatures> rows) {
  if (rows.size() < 30) {
    throw DegenerateDataset("need at least 30 rows, got " + std::to_string(rows.size()));
  }
  std::array<int, 4> counts{};
  for (const auto& r : rows) {
    if (r.score < 0 || r.score > 3) throw DegenerateDataset("score outside 0..3");
    const auto& f = r.features;
    if (!std::isfinite(f.mean_amp) || !std::isfinite(f.rsd_amp) || !std::isfinite(f.mean_int) ||
        !std::isfinite(f.rsd_int) || !std::isfinite(f.fatigue)) {
      throw DegenerateDataset("non-finite feature value");
    }
    ++counts[static_cast<std::size_t>(r.score)];
  }
  for (std::size_t c = 0; c < 4; ++c) {
    if (counts[c] == 0) throw DegenerateDataset("score level " + std::to_string(c) + " absent");
  }
}

PlamModel fit_fixed_lambda(std::span<const LabeledFeatures> rows, const PlamConfig& cfg,
                           const PlamModel* warm) {
  std::vector<LabeledFeatures> sorted(rows.begin(), rows.end());
  auto key = [](const LabeledFeatures& r) {
    const auto& x = r.features;
    return std::tuple(r.score, x.mean_amp, x.rsd_amp, x.mean_int, x.rsd_int, x.fatigue, x.arrest);
  };
  std::sort(sorted.begin(), sorted.end(),
            [&key](const LabeledFeatures& a, const LabeledFeatures& b) { return key(a) < key(b); });
  Fitter f(sorted, cfg);
  return f.run(warm);
}

}  // namespace

double SmoothTerm::eval(double x) const {
  if (aliased || coef.size() == 0) return 0.0;
  return (basis.eval(x) * z * coef)(0);
}

double PlamModel::eta(const FeatureVector& f) const {
  double e = beta1 * f.fatigue + gamma[static_cast<std::size_t>(std::clamp(f.arrest, 0, 3))];
  for (int j = 0; j < kNumSmooths; ++j) e += smooths[static_cast<std::size_t>(j)].eval(feature_value(f, j));
  return e;
}

std::array<double, 3> PlamModel::cumulative_probs(const FeatureVector& f) const {
  const double e = eta(f);
  return {logistic(theta[0] - e), logistic(theta[1] - e), logistic(theta[2] - e)};
}

std::array<double, 4> PlamModel::class_probs(const FeatureVector& f) const {
  const double e = eta(f);
  std::array<double, 4> p{};
  for (int y = 0; y < 4; ++y) p[static_cast<std::size_t>(y)] = row_probability(y, e, theta);
  return p;
}

PlamModel fit_plam(std::span<const LabeledFeatures> rows, const PlamConfig& cfg,
                   const PlamModel* warm_start) {
  check_rows(rows);
  if (cfg.n_basis < 5) throw InvalidConfig("n_basis must be >= 5");
  if (!cfg.select_lambda) return fit_fixed_lambda(rows, cfg, warm_start);

  if (cfg.lambda_grid.empty()) throw InvalidConfig("lambda_grid is empty");
  const int k = 5;
  const FoldPlan plan = stratified_kfold(rows, k, cfg.seed);
  double best_dev = std::numeric_limits<double>::infinity();
  double best_lambda = cfg.lambda_grid.front();
  for (double lambda : cfg.lambda_grid) {
    PlamConfig c = cfg;
    c.select_lambda = false;
    c.lambda.fill(lambda);
    double dev = 0.0;
    for (int fold = 0; fold < k && std::isfinite(dev); ++fold) {
      std::vector<LabeledFeatures> train;
      std::vector<LabeledFeatures> test;
      for (auto i : plan.train_indices(fold)) train.push_back(rows[i]);
      for (auto i : plan.test_indices(fold)) test.push_back(rows[i]);
      try {
        dev += plam_deviance(fit_fixed_lambda(train, c, nullptr), test);
      } catch (const NonConvergence&) {
        dev = std::numeric_limits<double>::infinity();
      } catch (const DegenerateDataset&) {
        dev = std::numeric_limits<double>::infinity();
      }
    }
    if (dev < best_dev) {
      best_dev = dev;
      best_lambda = lambda;
    }
  }
  PlamConfig c = cfg;
  c.select_lambda = false;
  c.lambda.fill(best_lambda);
  return fit_fixed_lambda(rows, c, warm_start);
}

double plam_deviance(const PlamModel& m, std::span<const LabeledFeatures> rows) {
  double ll = 0.0;
  for (const auto& r : rows) ll += row_loglik(r.score, m.eta(r.features), m.theta);
  return -2.0 * ll;
}

double null_deviance(std::span<const LabeledFeatures> rows) {
  std::array<double, 4> counts{};
  for (const auto& r : rows) counts[static_cast<std::size_t>(r.score)] += 1.0;
  const double n = static_cast<double>(rows.size());
  double ll = 0.0;
  for (double c : counts) {
    if (c > 0.0) ll += c * std::log(c / n);
  }
  return -2.0 * ll;
}

double deviance_explained(const PlamModel& m, std::span<const LabeledFeatures> rows) {
  const double d0 = null_deviance(rows);
  if (!(d0 > 0.0)) return 0.0;
  return 1.0 - plam_deviance(m, rows) / d0;
}

ParametricVector parametric_coefficients(const PlamModel& m) {
  ParametricVector v{m.fatigue_aliased ? kNaN : m.beta1, 0.0, 0.0, 0.0};
  for (std::size_t k = 1; k < 4; ++k) v[k] = m.gamma_aliased[k] ? kNaN : m.gamma[k];
  return v;
}

namespace {

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BootstrapResult bootstrap_inference(std::span<const LabeledFeatures> rows, const PlamConfig& cfg,
                                    int n_boot, std::uint64_t seed, int threads) {
  if (n_boot < 1) throw InvalidConfig("bootstrap needs at least one replicate");
  const PlamModel full = fit_plam(rows, cfg);
  std::array<std::vector<std::size_t>, 4> by_class;
  for (std::size_t i = 0; i < rows.size(); ++i) by_class[static_cast<std::size_t>(rows[i].score)].push_back(i);

  std::vector<ParametricVector> reps(static_cast<std::size_t>(n_boot));
  std::vector<char> failed(static_cast<std::size_t>(n_boot), 0);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int b = next++; b < n_boot; b = next++) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
      std::vector<LabeledFeatures> sample;
      sample.reserve(rows.size());
      for (const auto& members : by_class) {
        if (members.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        for (std::size_t i = 0; i < members.size(); ++i) sample.push_back(rows[members[pick(rng)]]);
      }
      try {
        reps[static_cast<std::size_t>(b)] = parametric_coefficients(fit_plam(sample, cfg, &full));
      } catch (const NonConvergence&) {
        failed[static_cast<std::size_t>(b)] = 1;
      }
    }
  };
  const int n_threads = std::max(1, std::min(threads, n_boot));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  BootstrapResult out;
  out.requested = n_boot;
  for (int b = 0; b < n_boot; ++b) {
    if (failed[static_cast<std::size_t>(b)]) {
      ++out.skipped;
    } else {
      out.replicates.push_back(reps[static_cast<std::size_t>(b)]);
    }
  }
  if (out.skipped * 10 > n_boot) {
    throw NonConvergence(std::to_string(out.skipped) + " of " + std::to_string(n_boot) +
                         " bootstrap replicates failed to converge");
  }
  out.estimate = parametric_coefficients(full);
  const boost::math::normal_distribution<double> normal;
  for (std::size_t k = 0; k < kNumParametric; ++k) {
    std::vector<double> v;
    for (const auto& r : out.replicates) {
      if (std::isfinite(r[k])) v.push_back(r[k]);
    }
    out.se[k] = kNaN;
    out.p_value[k] = kNaN;
    out.ci_low[k] = kNaN;
    out.ci_high[k] = kNaN;
    if (v.size() >= 2) {
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out.se[k] = std::sqrt(ss / static_cast<double>(v.size() - 1));
      out.ci_low[k] = percentile(v, 0.025);
      out.ci_high[k] = percentile(v, 0.975);
    }
    if (!std::isfinite(out.estimate[k]) || !(out.se[k] > 0.0)) {
      out.degenerate[k] = true;
      continue;
    }
    out.p_value[k] = 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(out.estimate[k]) / out.se[k]));
  }
  return out;
}

std::vector<LabeledFeatures> simulate_cumulative_logit(const PlamSimSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> arrest(0, 3);
  std::vector<LabeledFeatures> rows;
  rows.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    LabeledFeatures r;
    auto& f = r.features;
    f.mean_amp = 0.5 + unit(rng);
    f.rsd_amp = 0.05 + 0.25 * unit(rng);
    f.mean_int = 0.3 + 0.3 * unit(rng);
    f.rsd_int = 0.05 + 0.25 * unit(rng);
    f.fatigue = gauss(rng);
    f.arrest = arrest(rng);
    const double eta = spec.beta1 * f.fatigue + spec.gamma[static_cast<std::size_t>(f.arrest)];
    double u = unit(rng);
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    const double latent = eta + std::log(u / (1.0 - u));
    r.score = static_cast<int>(std::count_if(spec.theta.begin(), spec.theta.end(),
                                             [latent](double t) { return t < latent; }));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace brady
