#ifndef LSTMVIZ_TRAINER_HPP
#define LSTMVIZ_TRAINER_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lstmviz/lstm.hpp"
#include "lstmviz/sequence.hpp"

namespace lstmviz {

struct SplitSpec {
  std::array<Scalar, 3> fractions{0.7, 0.1, 0.2};  // train, val, test
  Scalar min_fraction = 0.9;
  std::uint64_t seed = 0;
  int max_retries = 1000;
};

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
  std::array<std::vector<std::string>, 3> patients;
};

/// Raised when no patient split satisfying the class-balance constraint is
/// found within the retry cap.
class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Largest-remainder apportionment of `n` items over `fractions`.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<Scalar, 3>& fractions);

/// True when every class k and split s has count(k, s) >= min_fraction *
/// fraction_s * (size of the smallest class). `class_counts[s][k]`.
bool split_is_balanced(const std::array<std::vector<std::size_t>, 3>& class_counts,
                       const std::array<Scalar, 3>& fractions, Scalar min_fraction);

/// Partitions whole patients into train/val/test, reshuffling with derived
/// seeds until the class-balance constraint holds.
Splits split_by_patient(const Dataset& data, const SplitSpec& spec);

struct PlainSplit {
  Dataset train;
  Dataset val;
};

/// Shuffled split without patient grouping; `train_fraction` of the items
/// (rounded to nearest) go to train, the rest to val.
PlainSplit split_plain(const Dataset& data, Scalar train_fraction, std::uint64_t seed);

struct TrainConfig {
  Scalar lr = 0.001;
  std::size_t minibatch = 200;
  int epochs = 100;
  Scalar weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  Scalar train_loss = 0.0;
  Scalar val_loss = 0.0;
  Scalar val_accuracy = 0.0;
};

struct TrainResult {
  LstmParams params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 when no epoch ran
  Scalar best_val_loss = 0.0;
};

/// Called after each epoch; used by the CLI for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam training with best-validation-loss model selection.
/// Throws std::runtime_error naming the epoch if the loss becomes non-finite.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const LstmConfig& config,
                  const TrainConfig& tc, const EpochCallback& on_epoch = {});

/// Fraction of sequences whose final-step argmax matches the label.
Scalar evaluate_accuracy(std::span<const LabeledSequence> data, const LstmParams& params,
                         const LstmConfig& config);

/// Predicted class per sequence (final-step argmax, lowest index on ties).
std::vector<int> predict(std::span<const LabeledSequence> data, const LstmParams& params,
                         const LstmConfig& config);

/// CSV: epoch,train_loss,val_loss,val_accuracy
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

/// Per-class sequence counts.
std::vector<std::size_t> class_histogram(std::span<const LabeledSequence> data, int classes);

}  // namespace lstmviz

#endif  // LSTMVIZ_TRAINER_HPP
