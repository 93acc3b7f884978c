// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "brady/errors.hpp"
#include "brady/json_io.hpp"
#include "brady/pipeline.hpp"
#include "brady/synth.hpp"
#include "oracles/fatigue_props.hpp"
#include "oracles/gradcheck.hpp"
#include "oracles/oracles.hpp"

using namespace brady;

namespace {

// Tolerances and limits.
constexpr double kSavgolWeightTol = 1e-12;
constexpr double kPassthroughRelTol = 1e-9;
constexpr double kGradRelTol = 1e-3;
constexpr double kTrapezoidTol = 1e-12;
constexpr double kObjectiveTol = 1e-10;
constexpr double kSingleGroupTol = 1e-9;
constexpr double kMinExact = 0.80;
constexpr double kMinWithinOne = 0.98;
constexpr double kMinAuc = 0.95;
constexpr double kMinExactDrop = 0.03;
constexpr double kMinAucDrop = 0.02;

constexpr double kLimitFilter = 1.0;
constexpr double kLimitGrad = 30.0;
constexpr double kLimitFatigue = 5.0;
constexpr double kLimitAuc = 5.0;
constexpr double kLimitPlam = 600.0;
constexpr double kLimitEndToEnd = 900.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome with_limit(Outcome o, double elapsed, double limit) {
  o.detail += "; " + fmt("%.2f", elapsed) + " s";
  if (limit > 0.0) {
    o.detail += " (limit " + fmt("%.0f", limit) + " s)";
    if (elapsed >= limit) o.pass = false;
  }
  return o;
}

// 1
Outcome filter_oracle() {
  double worst_weight = 0.0;
  for (auto [w, p] : {std::pair{5, 2}, std::pair{7, 3}}) {
    const auto exact = oracle::savgol_weights_exact(w, p);
    const auto got = savgol_coefficients(w, p, w / 2);
    for (int i = 0; i < w; ++i) {
      worst_weight = std::max(worst_weight, std::abs(got[i] - oracle::to_double(exact[i])));
    }
  }
  double worst_poly = 0.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (auto [w, p] : {std::pair{5, 2}, std::pair{7, 3}, std::pair{5, 4}}) {
    for (int degree = 0; degree <= p; ++degree) {
      std::vector<double> c(static_cast<std::size_t>(degree) + 1);
      for (auto& v : c) v = coef(rng);
      std::vector<double> x;
      for (int i = 0; i < 60; ++i) {
        const double t = -1.0 + 2.0 * i / 59.0;
        double y = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) y = y * t + *it;
        x.push_back(y + 3.0);
      }
      const auto y = savgol_filter(x, w, p);
      double scale = 0.0;
      double err = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        scale = std::max(scale, std::abs(x[i]));
        err = std::max(err, std::abs(y[i] - x[i]));
      }
      worst_poly = std::max(worst_poly, err / scale);
    }
  }
  return {worst_weight <= kSavgolWeightTol && worst_poly <= kPassthroughRelTol,
          "max weight error " + fmt("%.2e", worst_weight) + ", max polynomial rel error " +
              fmt("%.2e", worst_poly)};
}

// 2
Outcome gradient_check() {
  const NetConfig c = gradcheck::small_config();
  NetParams p = init_params(c);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& b : p.conv) {
    for (auto& g : b.gamma) g += n(rng);
    for (auto& v : b.beta) v += n(rng);
  }
  const auto batch = gradcheck::random_batch(c, 9);
  double worst = 0.0;
  std::string worst_name;
  int tensors = 0;
  for (const ForwardOptions opt : {ForwardOptions{Mode::Train, 17}, ForwardOptions{Mode::Eval, 0}}) {
    for (const auto& t : gradcheck::check(p, batch, opt)) {
      ++tensors;
      if (t.max_rel_error >= worst) {
        worst = t.max_rel_error;
        worst_name = t.name;
      }
    }
  }
  return {worst < kGradRelTol, std::to_string(tensors) + " tensor checks, max rel error " +
                                   fmt("%.2e", worst) + " (" + worst_name + ")"};
}

// 3
Outcome fatigue_properties() {
  int failing = 0;
  std::string first;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto bad = props::fatigue_violations(seed);
    if (!bad.empty()) {
      if (failing == 0) first = "seed " + std::to_string(seed) + ": " + bad.front();
      ++failing;
    }
  }
  return {failing == 0, std::to_string(100 - failing) + "/100 seeds hold" +
                            (first.empty() ? "" : "; " + first)};
}

// 4
Outcome auc_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(2, 200);
  std::uniform_int_distribution<int> label(0, 3);
  int exact_matches = 0;
  double worst_trap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = trial == 0 ? 200 : size(rng);
    std::uniform_int_distribution<int> level(0, std::max(1, n / (1 + trial % 4)));
    std::vector<int> truth(static_cast<std::size_t>(n));
    std::vector<double> score(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      truth[i] = label(rng);
      score[i] = level(rng) * 0.01 + 0.002 * truth[i] * (trial % 3);
    }
    truth[0] = 0;
    truth[1] = 3;
    const auto r = binary_auc(truth, score);
    exact_matches += r.auc == oracle::brute_auc(truth, score);
    worst_trap = std::max(worst_trap, std::abs(trapezoid_area(r.roc) - r.auc));
  }
  return {exact_matches == 50 && worst_trap <= kTrapezoidTol,
          std::to_string(exact_matches) + "/50 exact, max trapezoid deviation " +
              fmt("%.1e", worst_trap)};
}

// 5 (report text is kept for criterion 10)
struct PlamRun {
  Outcome outcome;
  std::string report;
};

PlamRun plam_recovery() {
  constexpr int kBoot = 200;
  PlamSimSpec spec;
  spec.n = 500;
  spec.beta1 = 2.0;
  spec.gamma = {0.0, 0.5, 1.0, 1.5};
  spec.seed = 5;
  const auto rows = simulate_cumulative_logit(spec);
  const auto rec = bootstrap_inference(rows, PlamConfig{}, kBoot, 505);
  const double z = std::abs(rec.estimate[0] - spec.beta1) / rec.se[0];
  const bool recovered = z <= 3.0 && rec.p_value[0] < 0.01;

  int rejections = 0;
  json null_p = json::array();
  for (std::uint64_t s = 0; s < 20; ++s) {
    PlamSimSpec null_spec = spec;
    null_spec.beta1 = 0.0;
    null_spec.seed = 1000 + s;
    const auto b = bootstrap_inference(simulate_cumulative_logit(null_spec), PlamConfig{}, kBoot,
                                       2000 + s);
    rejections += b.p_value[0] < 0.1;
    null_p.push_back(number_or_null(b.p_value[0]));
  }
  const json report = {{"recovery", rec}, {"null_fatigue_p", null_p}, {"null_rejections", rejections}};
  return {{recovered && rejections <= 5,
           "beta1 " + fmt("%.3f", rec.estimate[0]) + " (SE " + fmt("%.3f", rec.se[0]) + ", |z| " +
               fmt("%.2f", z) + ", p " + fmt("%.1e", rec.p_value[0]) + "), null rejections " +
               std::to_string(rejections) + "/20"},
          report.dump(2) + "\n"};
}

// 6
Outcome backfitting_monotone() {
  double worst_drop = 0.0;
  int cycles = 0;
  int datasets = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    std::vector<LabeledFeatures> rows;
    if (s % 2 == 0) {
      PlamSimSpec spec;
      spec.n = 300;
      spec.beta1 = 0.5 * static_cast<double>(s);
      spec.seed = 60 + s;
      rows = simulate_cumulative_logit(spec);
    } else {
      DatasetSpec spec;
      spec.counts = {15, 25, 25, 20};
      for (const auto& r : generate_dataset(spec, 600 + s)) {
        const auto e = extract_recording(r.recording, PipelineConfig{});
        rows.push_back({e.row.features, *e.row.score});
      }
    }
    const auto m = fit_plam(rows);
    ++datasets;
    for (std::size_t i = 1; i < m.objective_history.size(); ++i) {
      worst_drop = std::max(worst_drop, m.objective_history[i - 1] - m.objective_history[i]);
      ++cycles;
    }
  }
  return {worst_drop <= kObjectiveTol, std::to_string(datasets) + " datasets, " +
                                           std::to_string(cycles) + " cycles, largest decrease " +
                                           fmt("%.2e", worst_drop)};
}

// 7 and 8 share one run.
struct EndToEnd {
  std::size_t recordings = 0;
  std::size_t failed = 0;
  EvalReport full;
  EvalReport ablated;
  std::string report;
  double seconds = 0.0;
};

PipelineConfig end_to_end_config() {
  PipelineConfig cfg;
  cfg.net.input_mode = InputMode::ResampledSignal;
  cfg.train.epochs = 50;
  return cfg;
}

EndToEnd end_to_end(bool with_ablation) {
  const auto t0 = Clock::now();
  EndToEnd out;
  DatasetSpec spec;
  spec.counts = {52, 170, 225, 153};
  const auto dataset = generate_dataset(spec, 2024);
  const PipelineConfig cfg = end_to_end_config();
  std::vector<ExtractedRecording> extracted;
  for (const auto& r : dataset) {
    try {
      extracted.push_back(extract_recording(r.recording, cfg));
    } catch (const Error&) {
      ++out.failed;
    }
  }
  out.recordings = dataset.size();
  const auto cv = cross_validate(extracted, cfg);
  out.full = evaluate(cv.truth, cv.pred, cv.severe_prob);
  out.report = eval_report_json(cv);
  out.seconds = seconds_since(t0);
  if (with_ablation) {
    CvOptions opt;
    opt.ablate_fatigue_arrest = true;
    const auto ab = cross_validate(extracted, cfg, opt);
    out.ablated = evaluate(ab.truth, ab.pred, ab.severe_prob);
  }
  return out;
}

// 9
Outcome mixed_model() {
  int kept = 0;
  int within = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(900 + s);
    std::normal_distribution<double> u(0.0, 0.1);
    std::normal_distribution<double> e(0.0, 0.5);
    std::vector<GroupedValue> d;
    for (int g = 0; g < 3; ++g) {
      const double ug = u(rng);
      for (int i = 0; i < 40; ++i) d.push_back({ug + e(rng), g});
    }
    const auto m = fit_mixed(d);
    kept += m.p_value >= 0.05;
    within += std::abs(m.beta0) <= 3.0 * m.se_beta0;
  }
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    std::mt19937_64 rng(950 + s);
    std::normal_distribution<double> e(0.2, 0.7);
    std::vector<GroupedValue> d;
    std::vector<double> v;
    for (int i = 0; i < 15 + static_cast<int>(s); ++i) {
      v.push_back(e(rng));
      d.push_back({v.back(), 0});
    }
    const auto m = fit_mixed(d);
    const auto ref = oracle::mean_test(v);
    worst = std::max({worst, std::abs(m.beta0 - ref.mean), std::abs(m.se_beta0 - ref.se),
                      std::abs(m.p_value - ref.p)});
  }
  return {kept >= 17 && within == 20 && worst <= kSingleGroupTol,
          std::to_string(kept) + "/20 non-rejections, " + std::to_string(within) +
              "/20 within 3 SE, single-group max deviation " + fmt("%.1e", worst)};
}

void print(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail
            << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto want = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  bool all_pass = true;

  auto run = [&](int id, const std::string& name, double limit, const std::function<Outcome()>& fn) {
    if (!want(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    o = with_limit(o, seconds_since(t0), limit);
    all_pass = all_pass && o.pass;
    print(id, name, o);
  };

  run(1, "savitzky-golay weights and polynomial passthrough", kLimitFilter, filter_oracle);
  run(2, "arrest network gradient check", kLimitGrad, gradient_check);
  run(3, "fatigue feature properties", kLimitFatigue, fatigue_properties);
  run(4, "AUC against brute-force pair counting", kLimitAuc, auc_oracle);

  std::string plam_report;
  run(5, "PLAM coefficient recovery and null calibration", kLimitPlam, [&] {
    auto r = plam_recovery();
    plam_report = r.report;
    write_file("acceptance_plam.json", plam_report);
    return r.outcome;
  });
  run(6, "backfitting objective is monotone", 0.0, backfitting_monotone);

  EndToEnd e2e;
  bool have_e2e = false;
  if (want(7) || want(8) || want(10)) {
    try {
      e2e = end_to_end(want(8));
      have_e2e = true;
      write_file("acceptance_e2e.json", e2e.report);
    } catch (const std::exception& e) {
      std::cout << "end-to-end run failed: " << e.what() << std::endl;
    }
  }
  if (want(7)) {
    Outcome o{false, "not run"};
    if (have_e2e) {
      const auto& c = e2e.full.confusion;
      o.pass = c.exact_accuracy >= kMinExact && c.within_one_accuracy >= kMinWithinOne &&
               e2e.full.auc_defined && e2e.full.auc.auc >= kMinAuc && e2e.failed == 0;
      o.detail = std::to_string(e2e.recordings) + " recordings (" + std::to_string(e2e.failed) +
                 " failed extraction), exact " + fmt("%.4f", c.exact_accuracy) + ", within-one " +
                 fmt("%.4f", c.within_one_accuracy) + ", AUC " + fmt("%.4f", e2e.full.auc.auc);
      o = with_limit(o, e2e.seconds, kLimitEndToEnd);
    }
    all_pass = all_pass && o.pass;
    print(7, "end-to-end synthetic cross-validation", o);
  }
  if (want(8)) {
    Outcome o{false, "not run"};
    if (have_e2e) {
      const double d_exact = e2e.full.confusion.exact_accuracy - e2e.ablated.confusion.exact_accuracy;
      const double d_auc = e2e.full.auc.auc - e2e.ablated.auc.auc;
      o.pass = d_exact >= kMinExactDrop && d_auc >= kMinAucDrop;
      o.detail = "exact drop " + fmt("%.4f", d_exact) + " (need " + fmt("%.2f", kMinExactDrop) +
                 "), AUC drop " + fmt("%.4f", d_auc) + " (need " + fmt("%.2f", kMinAucDrop) + ")";
    }
    all_pass = all_pass && o.pass;
    print(8, "ablation of fatigue and arrest features", o);
  }
  run(9, "mixed model calibration and single-group reduction", 0.0, mixed_model);

  if (want(10)) {
    Outcome o{true, ""};
    if (want(5)) {
      const auto again = plam_recovery().report;
      write_file("acceptance_plam.rerun.json", again);
      const bool same = !plam_report.empty() && again == read_file("acceptance_plam.json");
      o.pass = o.pass && same;
      o.detail += std::string("PLAM report ") + (same ? "identical" : "differs");
    }
    if (have_e2e) {
      const auto again = end_to_end(false).report;
      write_file("acceptance_e2e.rerun.json", again);
      const bool same = again == read_file("acceptance_e2e.json");
      o.pass = o.pass && same;
      o.detail += std::string(o.detail.empty() ? "" : ", ") + "end-to-end report " +
                  (same ? "identical" : "differs");
    } else {
      o = {false, "end-to-end run unavailable"};
    }
    all_pass = all_pass && o.pass;
    print(10, "byte-identical reruns", o);
  }

  std::cout << (all_pass ? "ALL PASS" : "SOME CRITERIA FAILED") << std::endl;
  return all_pass ? 0 : 1;
}
