#include "lstmviz/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>

namespace lstmviz {

namespace {

const char* kSplitNames[3] = {"train", "val", "test"};

std::vector<const Matrix*> value_pointers(std::span<const LabeledSequence> data) {
  std::vector<const Matrix*> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(&s.values);
  return out;
}

}  // namespace

std::array<std::size_t, 3> apportion(std::size_t n, const std::array<Scalar, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::array<Scalar, 3> remainder{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const Scalar quota = fractions[s] * static_cast<Scalar>(n);
    counts[s] = static_cast<std::size_t>(std::floor(quota));
    remainder[s] = quota - std::floor(quota);
    assigned += counts[s];
  }
  std::array<int, 3> order{0, 1, 2};
  // Largest remainder first; earlier split wins ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) counts[order[k % 3]] += 1;
  return counts;
}

namespace {

// Describes the first (split, class) pair violating the balance constraint.
std::optional<std::string> find_imbalance(
    const std::array<std::vector<std::size_t>, 3>& class_counts,
    const std::array<Scalar, 3>& fractions, Scalar min_fraction) {
  const std::size_t classes = class_counts[0].size();
  auto total = [&](std::size_t k) {
    return class_counts[0][k] + class_counts[1][k] + class_counts[2][k];
  };
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < classes; ++k) {
    if (total(k) > 0) smallest = std::min(smallest, total(k));
  }
  if (smallest == std::numeric_limits<std::size_t>::max()) return std::nullopt;
  for (int s = 0; s < 3; ++s) {
    const Scalar required = min_fraction * fractions[s] * static_cast<Scalar>(smallest);
    for (std::size_t k = 0; k < classes; ++k) {
      if (total(k) > 0 && static_cast<Scalar>(class_counts[s][k]) < required) {
        return "class " + std::to_string(k) + " in " + kSplitNames[s] + " split has " +
               std::to_string(class_counts[s][k]) + " sequences, needs >= " +
               std::to_string(required);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

bool split_is_balanced(const std::array<std::vector<std::size_t>, 3>& class_counts,
                       const std::array<Scalar, 3>& fractions, Scalar min_fraction) {
  return !find_imbalance(class_counts, fractions, min_fraction).has_value();
}

Splits split_by_patient(const Dataset& data, const SplitSpec& spec) {
  for (Scalar f : spec.fractions) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("split fractions must lie in (0,1)");
  }
  std::vector<std::string> patients;
  std::map<std::string, std::size_t> patient_index;
  int max_label = 0;
  for (const auto& seq : data) {
    if (seq.patient_id.empty()) {
      throw std::invalid_argument("split_by_patient: every sequence needs a patient_id");
    }
    if (patient_index.try_emplace(seq.patient_id, patients.size()).second) {
      patients.push_back(seq.patient_id);
    }
    max_label = std::max(max_label, seq.label);
  }
  if (patients.size() < 3) throw std::invalid_argument("split_by_patient: need >= 3 patients");

  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::vector<std::size_t>> per_patient(patients.size(),
                                                    std::vector<std::size_t>(classes, 0));
  for (const auto& seq : data) per_patient[patient_index[seq.patient_id]][seq.label] += 1;

  const auto counts = apportion(patients.size(), spec.fractions);
  std::vector<std::size_t> order(patients.size());
  std::string last_failure;

  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(spec.seed, static_cast<std::uint64_t>(attempt));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<int> split_of(patients.size());
    std::array<std::vector<std::size_t>, 3> class_counts;
    for (auto& c : class_counts) c.assign(classes, 0);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < counts[s]; ++i, ++pos) {
        split_of[order[pos]] = s;
        for (std::size_t k = 0; k < classes; ++k) class_counts[s][k] += per_patient[order[pos]][k];
      }
    }

    if (auto failure = find_imbalance(class_counts, spec.fractions, spec.min_fraction)) {
      last_failure = std::move(*failure);
      continue;
    }

    Splits out;
    for (std::size_t p = 0; p < patients.size(); ++p) {
      out.patients[split_of[p]].push_back(patients[p]);
    }
    for (auto& names : out.patients) std::sort(names.begin(), names.end());
    for (const auto& seq : data) {
      switch (split_of[patient_index.at(seq.patient_id)]) {
        case 0: out.train.push_back(seq); break;
        case 1: out.val.push_back(seq); break;
        default: out.test.push_back(seq); break;
      }
    }
    return out;
  }
  throw SplitError("no class-balanced patient split found after " +
                   std::to_string(spec.max_retries) + " attempts; last failure: " + last_failure);
}

PlainSplit split_plain(const Dataset& data, Scalar train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw std::invalid_argument("split_plain: train fraction must lie in [0,1]");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<Scalar>(data.size())));
  PlainSplit out;
  out.train.reserve(n_train);
  out.val.reserve(data.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.train : out.val).push_back(data[order[i]]);
  }
  return out;
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const LstmConfig& config,
                  const TrainConfig& tc, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: training and validation sets must be non-empty");
  }
  if (tc.minibatch == 0) throw std::invalid_argument("train: minibatch must be >= 1");

  TrainResult result;
  result.params = init_params(config, tc.seed);
  if (tc.epochs <= 0) return result;

  LstmParams params = result.params;
  Vector flat = params.flatten();
  const Vector decay_mask = params.weight_indicator();
  AdamState adam(flat.size());
  const AdamHyper hyper{tc.lr};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Dataset batch;
  batch.reserve(tc.minibatch);
  std::uint64_t step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    auto rng = make_rng(tc.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    Scalar loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += tc.minibatch) {
      const std::size_t end = std::min(order.size(), begin + tc.minibatch);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train_set[order[i]]);

      const std::uint64_t dropout_seed = tc.seed ^ (0x9E3779B97F4A7C15ULL * ++step);
      LossGradient lg = backward_params(batch, params, config, dropout_seed, Mode::train);
      Vector grad = lg.grad.flatten();
      if (!std::isfinite(lg.loss) || !grad.allFinite()) {
        throw std::runtime_error("training diverged: non-finite loss in epoch " +
                                 std::to_string(epoch));
      }
      loss_sum += lg.loss * static_cast<Scalar>(batch.size());

      if (tc.weight_decay > 0.0) grad += tc.weight_decay * decay_mask.cwiseProduct(flat);
      adam_step(flat, grad, adam, hyper);
      params.assign(flat);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<Scalar>(train_set.size());
    rec.val_loss = mean_loss(val_set, params, config);
    rec.val_accuracy = evaluate_accuracy(val_set, params, config);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw std::runtime_error("training diverged: non-finite loss in epoch " +
                               std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (result.best_epoch == 0 || rec.val_loss < result.best_val_loss) {
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
      result.params = params;
    }
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::vector<int> predict(std::span<const LabeledSequence> data, const LstmParams& params,
                         const LstmConfig& config) {
  const Matrix scores = final_scores(value_pointers(data), params, config);
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = static_cast<int>(argmax(scores.col(static_cast<Eigen::Index>(i))));
  }
  return out;
}

Scalar evaluate_accuracy(std::span<const LabeledSequence> data, const LstmParams& params,
                         const LstmConfig& config) {
  if (data.empty()) throw std::invalid_argument("evaluate_accuracy: empty data");
  const auto predicted = predict(data, params, config);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += predicted[i] == data[i].label;
  return static_cast<Scalar>(correct) / static_cast<Scalar>(data.size());
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.val_loss) << ','
        << format_real(r.val_accuracy) << '\n';
  }
}

std::vector<std::size_t> class_histogram(std::span<const LabeledSequence> data, int classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(classes, 0)), 0);
  for (const auto& s : data) {
    if (s.label >= 0 && s.label < classes) counts[s.label] += 1;
  }
  return counts;
}

}  // namespace lstmviz
