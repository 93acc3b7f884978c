#include "brady/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "brady/errors.hpp"
#include "brady/json_io.hpp"
#include "brady/synth.hpp"

namespace brady {

namespace {

constexpr MovementKind kMovements[] = {MovementKind::FingerTapping, MovementKind::HandMovement,
                                       MovementKind::RapidAM};

std::size_t movement_index(MovementKind m) { return static_cast<std::size_t>(m); }

LabeledFeatures labeled(const FeatureRow& r) {
  if (!r.score) throw DegenerateDataset("row for subject '" + r.subject_id + "' has no score");
  return {r.features, *r.score};
}

}  // namespace

ExtractedRecording extract_recording(const Recording& r, const PipelineConfig& cfg) {
  ExtractedRecording e;
  e.raw = distance_signal(r);
  const FilterSetting& f = cfg.filter(r.movement);
  e.smooth = savgol_smooth(e.raw, f.window, f.polyorder);
  e.extrema = detect_extrema(e.smooth, cfg.extrema);
  e.cycles = cycles(e.smooth, e.extrema);
  const SummaryStats stats = summary_stats(e.cycles);
  const FatigueResult fatigue = fatigue_details(e.cycles.amplitudes, cfg.fatigue);

  e.row.subject_id = r.subject_id;
  e.row.movement = r.movement;
  e.row.side = r.side;
  e.row.score = r.score;
  e.row.features = {stats.mean_amp, stats.rsd_amp, stats.mean_int, stats.rsd_int, fatigue.value,
                    r.arrest.value_or(0)};
  e.arrest_label = r.arrest;
  if (fatigue.insufficient) e.flags.emplace_back(kFlagFewCycles);
  if (e.extrema.peaks.size() > kMaxCycles) e.flags.emplace_back(kFlagTruncated);
  return e;
}

SeriesSample arrest_sample(const ExtractedRecording& e, const NetConfig& net, std::optional<int> label) {
  const int length = net.effective_length();
  if (net.input_mode == InputMode::CycleFeatures) return make_cycle_sample(e.cycles, label, length);
  return make_signal_sample(e.raw.values, label, length);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(workers, n); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TrainResult train_arrest_model(std::span<const ExtractedRecording> data, const PipelineConfig& cfg) {
  const PipelineConfig c = cfg.seeded();
  std::vector<SeriesSample> samples;
  for (const auto& e : data) {
    if (e.arrest_label) samples.push_back(arrest_sample(e, c.net, e.arrest_label));
  }
  if (samples.empty()) throw DegenerateDataset("no recording carries an arrest label");
  return train(samples, c.train, c.net);
}

const TreeEnsemble& ClassifierSet::for_movement(MovementKind m) const {
  const auto& model = per_movement ? by_movement[movement_index(m)] : joint;
  if (!model) throw MissingArtifact("no classifier for movement " + std::string(to_string(m)));
  return *model;
}

ClassifierSet train_classifiers(std::span<const FeatureRow> rows, const PipelineConfig& cfg) {
  const PipelineConfig c = cfg.seeded();
  ClassifierSet out;
  out.per_movement = c.per_movement_classifier;
  if (!out.per_movement) {
    std::vector<LabeledFeatures> data;
    for (const auto& r : rows) data.push_back(labeled(r));
    out.joint = fit(data, c.boost);
    return out;
  }
  for (auto m : kMovements) {
    std::vector<LabeledFeatures> data;
    for (const auto& r : rows) {
      if (r.movement == m) data.push_back(labeled(r));
    }
    if (!data.empty()) out.by_movement[movement_index(m)] = fit(data, c.boost);
  }
  return out;
}

void save_classifiers_file(const std::string& path, const ClassifierSet& c) {
  json models = json::object();
  if (c.per_movement) {
    for (auto m : kMovements) {
      if (const auto& model = c.by_movement[movement_index(m)]) models[std::string(to_string(m))] = *model;
    }
  } else if (c.joint) {
    models["joint"] = *c.joint;
  }
  const json j = {{"format", "bradykit-classifier-set"},
                  {"version", ClassifierSet::kFormatVersion},
                  {"per_movement", c.per_movement},
                  {"models", std::move(models)}};
  std::ofstream out(path);
  if (!out) throw MissingArtifact("cannot write " + path);
  out << j.dump(1) << '\n';
}

ClassifierSet load_classifiers_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path);
  ClassifierSet c;
  try {
    const json j = json::parse(in);
    if (j.value("format", std::string()) != "bradykit-classifier-set" ||
        j.value("version", 0) != ClassifierSet::kFormatVersion) {
      throw ModelFormatError("not a classifier set (format/version mismatch): " + path);
    }
    c.per_movement = j.at("per_movement").get<bool>();
    const json& models = j.at("models");
    if (c.per_movement) {
      for (auto m : kMovements) {
        const auto it = models.find(std::string(to_string(m)));
        if (it != models.end()) c.by_movement[movement_index(m)] = it->get<TreeEnsemble>();
      }
    } else {
      c.joint = models.at("joint").get<TreeEnsemble>();
    }
  } catch (const json::exception& e) {
    throw ModelFormatError("bad classifier set " + path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ModelFormatError("bad classifier set " + path + ": " + e.what());
  }
  return c;
}

FeatureVector ablate_fatigue_arrest(FeatureVector f) {
  f.fatigue = 0.0;
  f.arrest = 0;
  return f;
}

namespace {

template <class RowAt>
FoldPlan fold_plan(const std::vector<int>& labels, const PipelineConfig& c, RowAt row_at) {
  auto key = [&row_at](std::size_t i) {
    const FeatureRow& r = row_at(i);
    const auto& f = r.features;
    return std::tuple(r.subject_id, r.movement, r.side, f.mean_amp, f.rsd_amp, f.mean_int, f.rsd_int,
                      f.fatigue, f.arrest);
  };
  return stratified_kfold(labels, c.folds, derive_seed(c.seed, 5),
                          [&key](std::size_t a, std::size_t b) { return key(a) < key(b); });
}

}  // namespace

CvOutcome cross_validate(std::span<const ExtractedRecording> data, const PipelineConfig& cfg,
                         const CvOptions& opt) {
  const PipelineConfig c = cfg.seeded();
  std::vector<int> labels;
  for (const auto& e : data) {
    if (!e.row.score) throw DegenerateDataset("cross-validation needs a score on every recording");
    if (!e.arrest_label) throw DegenerateDataset("cross-validation needs an arrest label on every recording");
    labels.push_back(*e.row.score);
  }
  CvOutcome out;
  out.plan = fold_plan(labels, c, [&data](std::size_t i) -> const FeatureRow& { return data[i].row; });
  const std::size_t n = data.size();
  out.truth = labels;
  out.pred.assign(n, 0);
  out.severe_prob.assign(n, 0.0);
  out.arrest_pred.assign(n, -1);
  for (const auto& e : data) out.movement.push_back(e.row.movement);

  parallel_for(static_cast<std::size_t>(c.folds), opt.threads, [&](std::size_t fold_index) {
    const int fold = static_cast<int>(fold_index);
    const auto train_idx = out.plan.train_indices(fold);
    const auto test_idx = out.plan.test_indices(fold);

    std::vector<FeatureRow> train_rows;
    for (auto i : train_idx) {
      FeatureRow r = data[i].row;
      r.features.arrest = *data[i].arrest_label;
      if (opt.ablate_fatigue_arrest) r.features = ablate_fatigue_arrest(r.features);
      train_rows.push_back(std::move(r));
    }
    const ClassifierSet classifiers = train_classifiers(train_rows, c);

    std::optional<NetParams> net;
    if (!opt.ablate_fatigue_arrest) {
      std::vector<ExtractedRecording> train_data;
      for (auto i : train_idx) train_data.push_back(data[i]);
      net = train_arrest_model(train_data, c).params;
    }
    for (auto i : test_idx) {
      FeatureVector f = data[i].row.features;
      if (net) {
        out.arrest_pred[i] = predict_arrest(*net, arrest_sample(data[i], c.net));
        f.arrest = out.arrest_pred[i];
      } else {
        f = ablate_fatigue_arrest(f);
      }
      const Prediction p = predict(classifiers.for_movement(data[i].row.movement), f);
      out.pred[i] = p.score;
      out.severe_prob[i] = p.probs[2] + p.probs[3];
    }
  });
  return out;
}

CvOutcome cross_validate_classifier(std::span<const FeatureRow> rows, const PipelineConfig& cfg,
                                    const CvOptions& opt) {
  const PipelineConfig c = cfg.seeded();
  std::vector<int> labels;
  for (const auto& r : rows) labels.push_back(labeled(r).score);
  CvOutcome out;
  out.plan = fold_plan(labels, c, [&rows](std::size_t i) -> const FeatureRow& { return rows[i]; });
  const std::size_t n = rows.size();
  out.truth = labels;
  out.pred.assign(n, 0);
  out.severe_prob.assign(n, 0.0);
  out.arrest_pred.assign(n, -1);
  for (const auto& r : rows) out.movement.push_back(r.movement);

  parallel_for(static_cast<std::size_t>(c.folds), opt.threads, [&](std::size_t fold_index) {
    const int fold = static_cast<int>(fold_index);
    std::vector<FeatureRow> train_rows;
    for (auto i : out.plan.train_indices(fold)) {
      FeatureRow r = rows[i];
      if (opt.ablate_fatigue_arrest) r.features = ablate_fatigue_arrest(r.features);
      train_rows.push_back(std::move(r));
    }
    const ClassifierSet classifiers = train_classifiers(train_rows, c);
    for (auto i : out.plan.test_indices(fold)) {
      FeatureVector f = rows[i].features;
      if (opt.ablate_fatigue_arrest) f = ablate_fatigue_arrest(f);
      const Prediction p = predict(classifiers.for_movement(rows[i].movement), f);
      out.pred[i] = p.score;
      out.severe_prob[i] = p.probs[2] + p.probs[3];
    }
  });
  return out;
}

ScoreSheetRow score_recording(const ExtractedRecording& e, const NetParams& net,
                              const ClassifierSet& classifiers) {
  ScoreSheetRow s;
  s.subject_id = e.row.subject_id;
  s.movement = e.row.movement;
  s.side = e.row.side;
  s.features = e.row.features;
  s.arrest = predict_arrest(net, arrest_sample(e, net.config));
  s.features.arrest = s.arrest;
  const Prediction p = predict(classifiers.for_movement(s.movement), s.features);
  s.score = p.score;
  s.probs = p.probs;
  s.truth = e.row.score;
  s.flags = e.flags;
  s.flags.emplace_back(kFlagArrestFromModel);
  return s;
}

std::vector<SignificanceRow> significance_table(std::span<const FeatureRow> rows,
                                                const PipelineConfig& cfg, int threads) {
  const PipelineConfig c = cfg.seeded();
  std::vector<SignificanceRow> out;
  std::vector<std::vector<LabeledFeatures>> cells;
  for (auto m : kMovements) {
    for (auto side : {Side::Left, Side::Right}) {
      std::vector<LabeledFeatures> cell;
      for (const auto& r : rows) {
        if (r.movement == m && r.side == side && r.score) cell.push_back({r.features, *r.score});
      }
      if (cell.empty()) continue;
      SignificanceRow row;
      row.movement = m;
      row.side = side;
      row.n = static_cast<int>(cell.size());
      out.push_back(row);
      cells.push_back(std::move(cell));
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& row = out[i];
    const auto& cell = cells[i];
    try {
      const PlamModel full = fit_plam(cell, c.plam);
      row.deviance_explained = deviance_explained(full, cell);
      row.separation = full.separation;
      row.bootstrap = bootstrap_inference(cell, c.plam, c.bootstrap_replicates,
                                          derive_seed(c.seed, 6 + i), threads);
    } catch (const Error& e) {
      row.error = e.kind() + ": " + e.what();
    }
  }
  return out;
}

namespace {

json eval_json(std::span<const int> truth, std::span<const int> pred, std::span<const double> prob) {
  if (truth.empty()) return nullptr;
  return evaluate(truth, pred, prob);
}

}  // namespace

std::string eval_report_json(const CvOutcome& cv) {
  json per_movement = json::object();
  std::vector<GroupedValue> diffs;
  for (auto m : kMovements) {
    std::vector<int> t;
    std::vector<int> p;
    std::vector<double> s;
    for (std::size_t i = 0; i < cv.truth.size(); ++i) {
      if (cv.movement[i] != m) continue;
      t.push_back(cv.truth[i]);
      p.push_back(cv.pred[i]);
      s.push_back(cv.severe_prob[i]);
      diffs.push_back({static_cast<double>(cv.pred[i] - cv.truth[i]), static_cast<int>(m)});
    }
    if (!t.empty()) per_movement[std::string(to_string(m))] = eval_json(t, p, s);
  }
  json mixed = nullptr;
  try {
    mixed = fit_mixed(diffs);
  } catch (const DegenerateGroups&) {
  }
  const json j = {{"n", cv.truth.size()},
                  {"folds", cv.plan.k > 0 ? json(cv.plan.k) : json(nullptr)},
                  {"overall", eval_json(cv.truth, cv.pred, cv.severe_prob)},
                  {"per_movement", std::move(per_movement)},
                  {"score_difference_mixed_model", std::move(mixed)}};
  return j.dump(2) + "\n";
}

std::string score_sheet_json(std::span<const ScoreSheetRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"subject_id", r.subject_id},
                   {"movement", std::string(to_string(r.movement))},
                   {"side", std::string(to_string(r.side))},
                   {"features", r.features},
                   {"arrest", r.arrest},
                   {"score", r.score},
                   {"probs", r.probs},
                   {"truth", r.truth ? json(*r.truth) : json(nullptr)},
                   {"flags", r.flags}});
  }
  return json{{"rows", std::move(arr)}}.dump(2) + "\n";
}

std::vector<ScoreSheetRow> parse_score_sheet(std::string_view text) {
  std::vector<ScoreSheetRow> out;
  try {
    const json j = json::parse(text);
    for (const auto& r : j.at("rows")) {
      ScoreSheetRow s;
      s.subject_id = r.at("subject_id").get<std::string>();
      s.movement = parse_movement(r.at("movement").get<std::string>());
      s.side = parse_side(r.at("side").get<std::string>());
      const auto& f = r.at("features");
      s.features = {f.at("mean_amp").get<double>(), f.at("rsd_amp").get<double>(),
                    f.at("mean_int").get<double>(), f.at("rsd_int").get<double>(),
                    f.at("fatigue").get<double>(),  f.at("arrest").get<int>()};
      s.arrest = r.at("arrest").get<int>();
      s.score = r.at("score").get<int>();
      s.probs = r.at("probs").get<std::array<double, kNumScores>>();
      if (!r.at("truth").is_null()) s.truth = r.at("truth").get<int>();
      s.flags = r.at("flags").get<std::vector<std::string>>();
      if (s.score < 0 || s.score >= kNumScores) throw MalformedInput("score out of range");
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("score sheet: ") + e.what());
  }
  return out;
}

CvOutcome pair_for_evaluation(std::span<const FeatureRow> truth,
                              std::span<const ScoreSheetRow> sheet) {
  if (truth.size() != sheet.size()) {
    throw LengthMismatch("truth has " + std::to_string(truth.size()) + " rows, score sheet has " +
                         std::to_string(sheet.size()));
  }
  CvOutcome out;
  out.plan.k = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& t = truth[i];
    const auto& s = sheet[i];
    if (t.subject_id != s.subject_id || t.movement != s.movement || t.side != s.side) {
      throw MalformedInput("row " + std::to_string(i) + ": truth '" + t.subject_id +
                           "' does not match score sheet '" + s.subject_id + "'");
    }
    if (!t.score) throw MalformedInput("row " + std::to_string(i) + ": truth row has no score");
    out.truth.push_back(*t.score);
    out.pred.push_back(s.score);
    out.severe_prob.push_back(s.probs[2] + s.probs[3]);
    out.arrest_pred.push_back(s.arrest);
    out.movement.push_back(s.movement);
  }
  return out;
}

std::string significance_json(std::span<const SignificanceRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json row = {{"movement", std::string(to_string(r.movement))},
                {"side", std::string(to_string(r.side))},
                {"n", r.n}};
    if (!r.error.empty()) {
      row["error"] = r.error;
    } else {
      const auto& b = *r.bootstrap;
      row["fatigue_p"] = number_or_null(b.p_value[0]);
      row["arrest_cat1_p"] = number_or_null(b.p_value[1]);
      row["arrest_cat2_p"] = number_or_null(b.p_value[2]);
      row["arrest_cat3_p"] = number_or_null(b.p_value[3]);
      row["deviance_explained"] = r.deviance_explained;
      row["separation"] = r.separation;
      row["bootstrap"] = b;
    }
    arr.push_back(std::move(row));
  }
  return json{{"rows", std::move(arr)}}.dump(2) + "\n";
}

}  // namespace brady
