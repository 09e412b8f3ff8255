#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "lstmviz/evaluation.hpp"
#include "lstmviz/ingest.hpp"
#include "lstmviz/salience.hpp"
#include "lstmviz/synthetic.hpp"
#include "lstmviz/trainer.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace lstmviz::cli {

namespace {

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir = cfg.str("out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

fs::path path_or(const RunConfig& cfg, const std::string& key, const std::string& fallback) {
  const std::string& v = cfg.str(key);
  return v.empty() ? fs::path(cfg.str("out")) / fallback : fs::path(v);
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

Dataset load_dataset(const fs::path& p, const std::string& what) {
  require_file(p, what);
  return read_dataset(p.string());
}

LoadedModel load(const RunConfig& cfg) {
  const fs::path p = path_or(cfg, "model", "model.lstm");
  require_file(p, "model file");
  return load_model(p.string());
}

void write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw UsageError("cannot write " + p.string());
  out << content;
  if (!out) throw UsageError("write failed: " + p.string());
}

void print_histogram(std::ostream& log, const std::string& name, const Dataset& d) {
  int classes = 0;
  for (const auto& s : d) classes = std::max(classes, s.label + 1);
  const auto h = class_histogram(d, classes);
  log << "  " << std::left << std::setw(6) << name << std::right << std::setw(7) << d.size()
      << " sequences; per class:";
  for (auto n : h) log << ' ' << n;
  log << '\n';
}

void write_splits(const RunConfig& cfg, std::ostream& log, const Dataset& train,
                  const Dataset& val, const Dataset& test) {
  const fs::path dir = out_dir(cfg);
  write_dataset((dir / "train.seq").string(), train);
  write_dataset((dir / "val.seq").string(), val);
  write_dataset((dir / "test.seq").string(), test);
  log << "wrote " << (dir / "train.seq").string() << ", val.seq, test.seq\n";
  print_histogram(log, "train", train);
  print_histogram(log, "val", val);
  print_histogram(log, "test", test);
}

fs::path first_existing(const fs::path& dir, std::initializer_list<const char*> names) {
  for (const char* n : names)
    if (fs::is_regular_file(dir / n)) return dir / n;
  throw UsageError("none of the expected files found in " + dir.string() + " (looked for " +
                   *names.begin() + ")");
}

void ingest_mnist(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = cfg.str("mnist_dir");
  if (dir.empty()) throw UsageError("ingest --source mnist needs --mnist-dir");
  auto load_pair = [&](const char* img_a, const char* img_b, const char* lab_a,
                       const char* lab_b) {
    const Bytes images = read_file(first_existing(dir, {img_a, img_b}).string());
    const Bytes labels = read_file(first_existing(dir, {lab_a, lab_b}).string());
    return read_idx(images, labels);
  };
  Dataset full = load_pair("train-images-idx3-ubyte", "train-images.idx3-ubyte",
                           "train-labels-idx1-ubyte", "train-labels.idx1-ubyte");
  Dataset test = load_pair("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte",
                           "t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte");
  const std::uint64_t seed = cfg.seed();
  const long long limit = cfg.integer("train_limit");
  if (limit < 0) throw UsageError("train_limit must be >= 0");
  if (limit > 0 && static_cast<std::size_t>(limit) < full.size()) {
    // A seeded subset of the training file, drawn before the validation carve-out.
    auto subset = split_plain(full, static_cast<double>(limit) / static_cast<double>(full.size()),
                              seed ^ 0x5eedULL);
    full = std::move(subset.train);
  }
  auto split = split_plain(full, cfg.real("train_fraction"), seed);
  log << "MNIST: " << full.size() << " training images, " << test.size() << " test images\n";
  write_splits(cfg, log, split.train, split.val, test);
}

void ingest_mitbih(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = cfg.str("records_dir");
  if (dir.empty()) throw UsageError("ingest --source mitbih needs --records-dir");
  if (!fs::is_directory(dir)) throw UsageError("records directory not found: " + dir.string());
  std::vector<fs::path> dats;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".dat") dats.push_back(e.path());
  std::sort(dats.begin(), dats.end());
  if (dats.empty()) throw UsageError("no .dat records in " + dir.string());

  const long long channel = cfg.integer("channel");
  Dataset all;
  for (const auto& dat : dats) {
    const std::string name = dat.stem().string();
    const fs::path hdr = dir / (name + ".header");
    const fs::path ann = dir / (name + ".ann");
    require_file(hdr, "header sidecar");
    require_file(ann, "annotation file");
    const Bytes hb = read_file(hdr.string());
    const Bytes ab = read_file(ann.string());
    const RecordHeader h = parse_record_header(std::string(hb.begin(), hb.end()));
    if (channel < 0 || channel >= h.channels) {
      throw UsageError("record " + name + " has no channel " + std::to_string(channel));
    }
    RawRecord rec = read_212(read_file(dat.string()), h.channels, h.samples);
    rec.fs = h.fs;
    rec.gain = h.gain;
    rec.baseline = h.baseline;
    rec.patient_id = name;
    const auto anns = parse_annotations(std::string(ab.begin(), ab.end()));
    Dataset beats = extract_beats(rec, anns, static_cast<std::size_t>(channel));
    log << "  record " << name << ": " << beats.size() << " beats\n";
    for (auto& b : beats) all.push_back(std::move(b));
  }

  SplitSpec spec;
  const auto fr = cfg.reals("fractions");
  if (fr.size() != 3) throw UsageError("fractions needs three values");
  spec.fractions = {fr[0], fr[1], fr[2]};
  spec.min_fraction = cfg.real("min_fraction");
  spec.seed = cfg.seed();
  const Splits s = split_by_patient(all, spec);
  log << "patients: " << s.patients[0].size() << " train / " << s.patients[1].size()
      << " validation / " << s.patients[2].size() << " test\n";
  write_splits(cfg, log, s.train, s.val, s.test);
}

void ingest_spike(const RunConfig& cfg, std::ostream& log) {
  const long long n_train = cfg.integer("spike_train"), n_test = cfg.integer("spike_test");
  if (n_train < 2 || n_test < 1) throw UsageError("spike_train must be >= 2 and spike_test >= 1");
  const std::uint64_t seed = cfg.seed();
  const Dataset full = make_spike_dataset(static_cast<std::size_t>(n_train), seed);
  const Dataset test = make_spike_dataset(static_cast<std::size_t>(n_test), seed + 1);
  auto split = split_plain(full, 0.9, seed);
  log << "spike testbed: T=64, class 1 carries a spike inside steps 40..48\n";
  write_splits(cfg, log, split.train, split.val, test);
}

EvalConfig eval_config(const RunConfig& cfg) {
  EvalConfig ec;
  ec.alphas = cfg.reals("alphas");
  ec.k = cfg.real("k");
  const std::string pattern = cfg.str("pattern");
  if (pattern == "block") {
    ec.occlusion = OcclusionConfig::scanline_block(ec.k);
  } else if (pattern == "contiguous") {
    ec.occlusion.k = ec.k;
    ec.occlusion.width = static_cast<int>(cfg.integer("w"));
  } else {
    throw UsageError("pattern must be contiguous or block, got '" + pattern + "'");
  }
  ec.mask.k = ec.k;
  ec.mask.lambda1 = cfg.real("lambda1");
  ec.mask.lambda2 = cfg.real("lambda2");
  ec.mask.lr = cfg.real("mask_lr");
  ec.mask.iterations = static_cast<int>(cfg.integer("iterations"));
  if (ec.mask.lambda1 < 0 || ec.mask.lambda2 < 0) throw UsageError("lambda1/lambda2 must be >= 0");
  if (ec.occlusion.width < 1) throw UsageError("w must be >= 1");
  try {
    ec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return ec;
}

}  // namespace

void cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  const std::string source = cfg.str("source");
  if (source == "mnist") {
    ingest_mnist(cfg, log);
  } else if (source == "mitbih") {
    ingest_mitbih(cfg, log);
  } else if (source == "spike") {
    ingest_spike(cfg, log);
  } else {
    throw UsageError("unknown source '" + source + "' (expected mnist, mitbih or spike)");
  }
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  const Dataset train_set = load_dataset(path_or(cfg, "train_data", "train.seq"), "training data");
  const Dataset val_set = load_dataset(path_or(cfg, "val_data", "val.seq"), "validation data");
  const fs::path test_path = path_or(cfg, "test_data", "test.seq");
  Dataset test_set;
  if (fs::is_regular_file(test_path)) test_set = read_dataset(test_path.string());
  if (train_set.empty() || val_set.empty()) throw UsageError("training and validation data must be non-empty");

  LstmConfig lc;
  lc.input_dim = static_cast<int>(train_set.front().dim());
  lc.hidden = static_cast<int>(cfg.integer("hidden"));
  lc.layers = static_cast<int>(cfg.integer("layers"));
  lc.dropout = cfg.real("dropout");
  lc.classes = static_cast<int>(cfg.integer("classes"));
  if (lc.classes <= 0) {
    for (const Dataset* d : std::initializer_list<const Dataset*>{&train_set, &val_set, &test_set})
      for (const auto& s : *d) lc.classes = std::max(lc.classes, s.label + 1);
  }
  try {
    lc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  TrainConfig tc;
  tc.lr = cfg.real("lr");
  tc.epochs = static_cast<int>(cfg.integer("epochs"));
  const long long mb = cfg.integer("minibatch");
  if (mb < 1 || tc.epochs < 0) throw UsageError("minibatch must be >= 1 and epochs >= 0");
  tc.minibatch = static_cast<std::size_t>(mb);
  tc.weight_decay = cfg.real("weight_decay");
  tc.seed = cfg.seed();

  log << "training " << lc.layers << "x" << lc.hidden << " LSTM, " << lc.classes << " classes, "
      << train_set.size() << " train / " << val_set.size() << " val sequences\n";
  const TrainResult r = train(train_set, val_set, lc, tc, [&](const EpochRecord& e) {
    log << "  epoch " << std::setw(3) << e.epoch << "  train_loss " << std::fixed
        << std::setprecision(5) << e.train_loss << "  val_loss " << e.val_loss << "  val_acc "
        << std::setprecision(4) << e.val_accuracy << std::endl
        << std::defaultfloat;
  });

  const fs::path dir = out_dir(cfg);
  const fs::path model_path = path_or(cfg, "model", "model.lstm");
  save_model(model_path.string(), lc, r.params);
  std::ostringstream hist;
  write_history_csv(hist, r.history);
  write_text(dir / "history.csv", hist.str());
  if (r.best_epoch > 0) log << "best epoch " << r.best_epoch << " (val_loss " << r.best_val_loss << ")\n";
  log << "wrote " << model_path.string() << " and " << (dir / "history.csv").string() << '\n';
  if (!test_set.empty()) {
    log << "test accuracy " << std::setprecision(6) << evaluate_accuracy(test_set, r.params, lc)
        << " on " << test_set.size() << " sequences\n";
  }
}

void cmd_salience(const RunConfig& cfg, std::ostream& log) {
  const std::string technique = cfg.str("technique");
  Technique tech = Technique::gradient;
  if (technique != "temporal") {
    try {
      tech = parse_technique(technique);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string(e.what()) + " (expected gradient, occlusion, mask or temporal)");
    }
  }
  const EvalConfig ec = eval_config(cfg);
  const LoadedModel m = load(cfg);
  const Dataset data = load_dataset(path_or(cfg, "test_data", "test.seq"), "input data");
  const long long index = cfg.integer("index");
  if (index < 0 || static_cast<std::size_t>(index) >= data.size()) {
    throw UsageError("index " + std::to_string(index) + " out of range (data holds " +
                     std::to_string(data.size()) + " sequences)");
  }
  const LabeledSequence& seq = data[static_cast<std::size_t>(index)];
  if (seq.dim() != m.config.input_dim) throw UsageError("sequence dimension does not match the model");
  int c = static_cast<int>(cfg.integer("class"));
  if (c < 0) c = seq.label;
  if (c >= m.config.classes) throw UsageError("class " + std::to_string(c) + " out of range");

  const int predicted = predict(std::span(&seq, 1), m.params, m.config).front();
  log << "sequence " << index << ": label " << seq.label << ", predicted " << predicted
      << ", explaining class " << c << '\n';

  const fs::path dir = out_dir(cfg);
  const std::string stem = technique + "_" + std::to_string(index);
  std::ostringstream csv;
  std::string svg;
  if (technique == "temporal") {
    const TemporalScores ts = temporal_output_scores(seq.values, m.params, m.config, c);
    write_temporal_csv(csv, ts);
    svg = temporal_svg(ts, "temporal output scores, sequence " + std::to_string(index) +
                               " (label " + std::to_string(seq.label) + ")");
  } else {
    const LstmScorer scorer(m.params, m.config);
    const SalienceMap map = compute_salience(tech, seq.values, scorer, c, ec);
    write_salience_csv(csv, seq.values, map);
    svg = salience_svg(seq.values, map,
                       technique + " salience, sequence " + std::to_string(index) + " (label " +
                           std::to_string(seq.label) + ", class " + std::to_string(c) + ")");
    for (const auto& [k, v] : map.meta) log << "  " << k << " = " << v << '\n';
  }
  write_text(dir / (stem + ".csv"), csv.str());
  write_text(dir / (stem + ".svg"), svg);
  log << "wrote " << (dir / (stem + ".csv")).string() << " and " << stem << ".svg\n";
}

void cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const EvalConfig ec = eval_config(cfg);
  std::vector<Technique> techniques;
  for (const auto& w : cfg.words("techniques")) {
    try {
      techniques.push_back(parse_technique(w));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string(e.what()) + " (evaluate compares gradient, occlusion, mask)");
    }
  }
  if (techniques.empty()) throw UsageError("no techniques to evaluate");
  const LoadedModel m = load(cfg);
  Dataset test = load_dataset(path_or(cfg, "test_data", "test.seq"), "test data");
  const long long limit = cfg.integer("limit");
  if (limit < 0) throw UsageError("limit must be >= 0");
  if (limit > 0 && static_cast<std::size_t>(limit) < test.size()) test.resize(static_cast<std::size_t>(limit));
  if (test.empty()) throw UsageError("test data is empty");

  const LstmScorer scorer(m.params, m.config);
  std::vector<ScoreReductionCurve> curves;
  for (Technique t : techniques) {
    log << "evaluating " << to_string(t) << " on " << test.size() << " sequences\n";
    std::size_t last_decile = 0;
    curves.push_back(curve(test, t, ec, scorer, [&](std::size_t done, std::size_t total) {
      const std::size_t decile = done * 10 / total;
      if (decile > last_decile) {
        last_decile = decile;
        log << "  " << decile * 10 << "%\n";
      }
    }));
  }
  const ComparisonTable table = report(curves);
  const fs::path dir = out_dir(cfg);
  std::ostringstream a, b;
  table.write_csv(a);
  table.write_curves_csv(b);
  write_text(dir / "evaluation.csv", a.str());
  write_text(dir / "evaluation_curves.csv", b.str());
  write_text(dir / "evaluation.svg", curves_svg(table, "average class score reduction"));
  log << a.str();
  log << "wrote " << (dir / "evaluation.csv").string() << ", evaluation_curves.csv, evaluation.svg\n";
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log,
                std::ostream& err) {
  try {
    if (command == "ingest") {
      cmd_ingest(cfg, log);
    } else if (command == "train") {
      cmd_train(cfg, log);
    } else if (command == "salience" || command == "temporal") {
      cmd_salience(cfg, log);
    } else if (command == "evaluate") {
      cmd_evaluate(cfg, log);
    } else {
      err << "error: unknown command '" << command << "'\n";
      return kUsageError;
    }
    return kSuccess;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const FormatError& e) {
    err << "error: malformed input: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kComputationError;
  }
}

}  // namespace lstmviz::cli
