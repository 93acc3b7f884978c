#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <regex>
#include <sstream>

#include "brady/arrest_net.hpp"
#include "brady/errors.hpp"
#include "brady/features.hpp"
#include "brady/landmark_io.hpp"
#include "brady/pipeline.hpp"
#include "brady/synth.hpp"

namespace brady::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".jsonl" || ext == ".csv") found.push_back(entry.path().string());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(in);
    }
  }
  return out;
}

struct Diagnostic {
  std::string file;
  std::string kind;
  std::optional<std::size_t> frame;
  std::string message;
};

std::optional<std::size_t> frame_of(const Error& e) {
  if (const auto* lc = dynamic_cast<const LandmarkCountError*>(&e)) return lc->frame();
  if (const auto* df = dynamic_cast<const DegenerateFrame*>(&e)) return df->frame();
  static const std::regex re("frame ([0-9]+)");
  std::smatch m;
  const std::string what = e.what();
  if (std::regex_search(what, m, re)) return std::stoull(m[1].str());
  return std::nullopt;
}

void print_diagnostic(const GlobalOptions& g, const Diagnostic& d) {
  if (g.json) {
    json j = {{"file", d.file},
              {"kind", d.kind},
              {"frame", d.frame ? json(*d.frame) : json(nullptr)},
              {"message", d.message}};
    std::cerr << json{{"diagnostic", j}}.dump() << "\n";
  } else {
    std::cerr << d.file << ": " << d.kind << ": " << d.message << "\n";
  }
}

struct Loaded {
  std::vector<std::string> files;                     // successfully extracted
  std::vector<ExtractedRecording> recordings;
  std::size_t attempted = 0;
};

// Loads and extracts every input; failures become diagnostics on stderr.
Loaded load_all(const GlobalOptions& g, const std::vector<std::string>& inputs,
                const PipelineConfig& cfg) {
  const auto files = expand_inputs(inputs);
  std::vector<std::optional<ExtractedRecording>> slots(files.size());
  std::vector<std::optional<Diagnostic>> diags(files.size());
  parallel_for(files.size(), g.threads, [&](std::size_t i) {
    try {
      slots[i] = extract_recording(load_recording(files[i]), cfg);
    } catch (const Error& e) {
      diags[i] = Diagnostic{files[i], e.kind(), frame_of(e), e.what()};
    }
  });
  Loaded out;
  out.attempted = files.size();
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (diags[i]) print_diagnostic(g, *diags[i]);
    if (slots[i]) {
      out.files.push_back(files[i]);
      out.recordings.push_back(std::move(*slots[i]));
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path);
  out << text;
  if (!out) throw MissingArtifact("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<FeatureRow> read_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot open " + path);
  return read_feature_csv(in);
}

}  // namespace

PipelineConfig resolve_config(const GlobalOptions& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config_file(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  validate(cfg);
  return cfg;
}

int cmd_extract(const GlobalOptions& g, const ExtractArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const Loaded loaded = load_all(g, a.inputs, cfg);
  if (loaded.recordings.empty()) {
    std::cerr << "bradykit: no recording could be extracted\n";
    return kExitPartial;
  }
  std::vector<FeatureRow> rows;
  for (const auto& e : loaded.recordings) rows.push_back(e.row);
  std::ostringstream csv;
  write_feature_csv(csv, rows);
  write_text(a.output, csv.str());

  if (g.debug) {
    const std::string dir = a.debug_dir.empty() ? a.output + ".debug" : a.debug_dir;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < loaded.files.size(); ++i) {
      const auto stem = fs::path(loaded.files[i]).stem().string();
      const auto path = (fs::path(dir) / (stem + ".debug.csv")).string();
      std::ofstream out(path);
      if (!out) throw MissingArtifact("cannot write " + path);
      const auto& e = loaded.recordings[i];
      write_debug_csv(out, e.raw, e.smooth, e.extrema);
    }
  }
  return kExitOk;
}

int cmd_train_arrest(const GlobalOptions& g, const TrainArrestArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const Loaded loaded = load_all(g, a.inputs, cfg);
  if (loaded.recordings.empty()) {
    std::cerr << "bradykit: no recording could be extracted\n";
    return kExitPartial;
  }
  const TrainResult result = train_arrest_model(loaded.recordings, cfg);
  save_net_file(a.output, result.params);
  const json history = {{"epochs", result.loss_history.size()}, {"loss", result.loss_history}};
  write_text(a.history.empty() ? a.output + ".history.json" : a.history, history.dump(2) + "\n");
  return loaded.recordings.size() == loaded.attempted ? kExitOk : kExitPartial;
}

int cmd_train_classifier(const GlobalOptions& g, const TrainClassifierArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const auto rows = read_features(a.features);
  const CvOutcome cv = cross_validate_classifier(rows, cfg, {false, g.threads});
  const ClassifierSet set = train_classifiers(rows, cfg);
  save_classifiers_file(a.output, set);
  write_text(a.report.empty() ? a.output + ".cv.json" : a.report, eval_report_json(cv));
  return kExitOk;
}

int cmd_score(const GlobalOptions& g, const ScoreArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const NetParams net = load_net_file(a.arrest_model);
  const ClassifierSet classifiers = load_classifiers_file(a.classifier);
  const Loaded loaded = load_all(g, a.inputs, cfg);
  if (loaded.recordings.empty()) {
    std::cerr << "bradykit: no recording could be extracted\n";
    return kExitPartial;
  }
  std::vector<ScoreSheetRow> sheet(loaded.recordings.size());
  parallel_for(sheet.size(), g.threads, [&](std::size_t i) {
    sheet[i] = score_recording(loaded.recordings[i], net, classifiers);
  });
  write_text(a.output, score_sheet_json(sheet));
  return loaded.recordings.size() == loaded.attempted ? kExitOk : kExitPartial;
}

int cmd_evaluate(const GlobalOptions& g, const EvaluateArgs& a) {
  (void)resolve_config(g);
  const auto truth = read_features(a.truth);
  const auto sheet = parse_score_sheet(read_text(a.pred));
  write_text(a.output, eval_report_json(pair_for_evaluation(truth, sheet)));
  return kExitOk;
}

int cmd_sigtest(const GlobalOptions& g, const SigtestArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const auto rows = read_features(a.features);
  const auto table = significance_table(rows, cfg, g.threads);
  write_text(a.output, significance_json(table));
  const bool any_failed =
      std::any_of(table.begin(), table.end(), [](const auto& r) { return !r.error.empty(); });
  return any_failed ? kExitPartial : kExitOk;
}

int cmd_synth(const GlobalOptions& g, const SynthArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  DatasetSpec spec;
  spec.counts = a.counts;
  spec.fps = a.fps;
  spec.n_cycles = a.n_cycles;
  for (int c : spec.counts) {
    if (c < 0) throw ConfigError("--counts must be non-negative");
  }
  const auto data = generate_dataset(spec, cfg.seed);
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream name;
    name << "synth-" << std::setw(5) << std::setfill('0') << i << ".jsonl";
    write_text((fs::path(a.out_dir) / name.str()).string(), to_jsonl(data[i].recording));
  }
  return kExitOk;
}

}  // namespace brady::cli
