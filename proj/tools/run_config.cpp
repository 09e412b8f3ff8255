#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lstmviz::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("setting '" + key + "' expects a number, got '" + text + "'");
  }
}

const char* source_name(RunConfig::Source s) {
  switch (s) {
    case RunConfig::Source::builtin: return "default";
    case RunConfig::Source::file: return "config file";
    case RunConfig::Source::flag: return "flag";
  }
  return "";
}

}  // namespace

const std::vector<SettingInfo>& setting_table() {
  static const std::vector<SettingInfo> table{
      {"seed", "0", "seed for splits, initialization, shuffling and dropout"},
      {"out", "out", "output directory"},
      // ingest
      {"source", "spike", "ingest source: mnist, mitbih or spike"},
      {"mnist_dir", "", "directory holding the four MNIST IDX files"},
      {"records_dir", "", "directory of <record>.dat/.header/.ann triples"},
      {"channel", "0", "signal channel used for heartbeats (0 = first)"},
      {"train_fraction", "0.9166666666666666", "MNIST: share of the training file kept for training"},
      {"train_limit", "0", "MNIST: keep only this many training images (0 = all)"},
      {"fractions", "0.7,0.1,0.2", "MIT-BIH patient split fractions train,val,test"},
      {"min_fraction", "0.9", "MIT-BIH class-balance factor"},
      {"spike_train", "2000", "spike testbed: training sequences"},
      {"spike_test", "500", "spike testbed: test sequences"},
      // datasets and model
      {"train_data", "", "training container (default <out>/train.seq)"},
      {"val_data", "", "validation container (default <out>/val.seq)"},
      {"test_data", "", "test container (default <out>/test.seq)"},
      {"model", "", "model file (default <out>/model.lstm)"},
      // training
      {"hidden", "128", "LSTM units per layer"},
      {"layers", "1", "stacked LSTM layers"},
      {"dropout", "0.1", "dropout probability on layer inputs"},
      {"classes", "0", "number of classes (0 = infer from the data)"},
      {"epochs", "100", "training epochs"},
      {"minibatch", "200", "minibatch size"},
      {"lr", "0.001", "Adam learning rate for training"},
      {"weight_decay", "0", "L2 penalty on weight matrices"},
      // salience
      {"technique", "mask", "gradient, occlusion, mask or temporal"},
      {"index", "0", "sequence index inside the data container"},
      {"class", "-1", "class to explain (-1 = the sequence label)"},
      {"k", "0", "deletion value"},
      {"w", "5", "occlusion width"},
      {"pattern", "contiguous", "occlusion pattern: contiguous or block (5x5 on 28-wide scanlines)"},
      {"lambda1", "0.01", "mask L1 weight"},
      {"lambda2", "0.001", "mask total-variation weight"},
      {"mask_lr", "0.001", "mask Adam learning rate"},
      {"iterations", "500", "mask optimisation steps"},
      // evaluation
      {"alphas", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", "salience thresholds"},
      {"techniques", "gradient,occlusion,mask", "techniques compared by evaluate"},
      {"limit", "0", "evaluate only the first N test sequences (0 = all)"},
  };
  return table;
}

RunConfig::RunConfig() {
  for (const auto& s : setting_table()) values_[s.key] = Entry{s.default_value, Source::builtin};
}

RunConfig::Entry& RunConfig::entry(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + key + "'");
  return it->second;
}

const RunConfig::Entry& RunConfig::entry(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown setting '" + key + "'");
  return it->second;
}

void RunConfig::apply_file_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string::npos) throw UsageError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (!values_.count(key)) throw UsageError(where + ": unknown setting '" + key + "'");
    Entry& e = values_[key];
    // A flag given before the file is read still wins.
    if (e.source == Source::flag) continue;
    e = Entry{trim(line.substr(eq + 1)), Source::file};
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_file_text(ss.str(), path);
}

void RunConfig::set_flag(const std::string& key, const std::string& value) {
  entry(key) = Entry{value, Source::flag};
}

const std::string& RunConfig::str(const std::string& key) const { return entry(key).value; }

double RunConfig::real(const std::string& key) const { return parse_real(key, str(key)); }

long long RunConfig::integer(const std::string& key) const {
  const std::string& text = str(key);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw UsageError("setting '" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t RunConfig::seed() const {
  const std::string& text = str("seed");
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw UsageError("seed must be a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::string> RunConfig::words(const std::string& key) const {
  return split_list(str(key));
}

RunConfig::Source RunConfig::source(const std::string& key) const { return entry(key).source; }

void RunConfig::print(std::ostream& out) const {
  out << "settings:\n";
  for (const auto& s : setting_table()) {
    const Entry& e = entry(s.key);
    out << "  " << std::left << std::setw(15) << s.key << " = "
        << (e.value.empty() ? "\"\"" : e.value) << "  (" << source_name(e.source) << ")\n";
  }
}

}  // namespace lstmviz::cli
