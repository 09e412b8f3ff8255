#ifndef LSTMVIZ_LSTM_HPP
#define LSTMVIZ_LSTM_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lstmviz/numerics.hpp"
#include "lstmviz/sequence.hpp"

namespace lstmviz {

struct LstmConfig {
  int input_dim = 1;
  int hidden = 128;
  int layers = 1;
  int classes = 2;
  Scalar dropout = 0.1;

  /// Throws std::invalid_argument when a count is < 1 or dropout is outside [0,1).
  void validate() const;
  int layer_input_dim(int layer) const { return layer == 0 ? input_dim : hidden; }
  bool operator==(const LstmConfig&) const = default;
};

/// Row blocks of each layer's stacked gate matrix, in storage order.
enum class Gate : int { input = 0, forget = 1, output = 2, candidate = 3 };

/// Weights of one LSTM layer. `W` is 4h x (n_in + h) acting on the
/// concatenation [input; previous hidden]; rows are grouped by Gate.
struct LayerParams {
  Matrix W;
  Vector b;
};

struct LstmParams {
  std::vector<LayerParams> layers;
  Matrix V;  // classes x hidden, applied to the top layer's hidden output
  Vector out_bias;

  /// All-zero parameters shaped for `config`.
  static LstmParams zeros(const LstmConfig& config);

  Eigen::Index size() const;
  /// Flat copy in serialization order: per layer W (row-major) then b, then V
  /// (row-major), then out_bias.
  Vector flatten() const;
  void assign(const Eigen::Ref<const Vector>& flat);
  /// Flat 0/1 vector marking weight-matrix entries (1) versus biases (0).
  Vector weight_indicator() const;
  bool operator==(const LstmParams& other) const;
};

enum class Mode { train, eval };

/// Per-layer activations for a batch of B equal-length sequences. Every
/// matrix has B columns; vectors are indexed by timestep.
struct LayerTrace {
  std::vector<Matrix> input;   // n_in x B, after dropout
  std::vector<Matrix> gates;   // 4h x B, post-activation
  std::vector<Matrix> cell;    // h x B
  std::vector<Matrix> hidden;  // h x B
  std::vector<Matrix> input_mask;  // n_in x B inverted-dropout scale, empty in eval mode
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  std::vector<Matrix> scores;  // per timestep, classes x B, pre-softmax

  Eigen::Index length() const { return static_cast<Eigen::Index>(scores.size()); }
  const Matrix& final_scores() const { return scores.back(); }
  const std::vector<Matrix>& top_hidden() const { return layers.back().hidden; }
};

LstmParams init_params(const LstmConfig& config, std::uint64_t seed);

/// Runs the stacked recurrence over one sequence (x is T x d_in).
ForwardTrace forward(const Matrix& x, const LstmParams& params, const LstmConfig& config,
                     Mode mode = Mode::eval, std::uint64_t seed = 0);

/// Batched forward over sequences that share the same length and dimension.
ForwardTrace forward_batch(std::span<const Matrix* const> xs, const LstmParams& params,
                           const LstmConfig& config, Mode mode = Mode::eval,
                           std::uint64_t seed = 0);

/// Pre-softmax score of class c after the last timestep, eval mode.
Scalar class_score(const Matrix& x, const LstmParams& params, const LstmConfig& config, int c);

/// Gradient of the final class score s_c with respect to every input element
/// (T x d_in), by backpropagation through time in eval mode.
Matrix backward_input(const Matrix& x, const LstmParams& params, const LstmConfig& config,
                      int c);

/// s_c and its input gradient from a single forward/backward pass.
std::pair<Scalar, Matrix> score_and_input_gradient(const Matrix& x, const LstmParams& params,
                                                   const LstmConfig& config, int c);

struct LossGradient {
  Scalar loss = 0.0;
  LstmParams grad;
};

/// Mean final-step cross-entropy over the batch and its exact gradient.
/// Sequences of different lengths are processed in equal-length groups.
LossGradient backward_params(std::span<const LabeledSequence> batch, const LstmParams& params,
                             const LstmConfig& config, std::uint64_t seed,
                             Mode mode = Mode::train);

/// Mean final-step cross-entropy in eval mode without gradients.
Scalar mean_loss(std::span<const LabeledSequence> data, const LstmParams& params,
                 const LstmConfig& config);

/// Final-step pre-softmax scores for many sequences (eval mode), one column
/// per sequence, batched where lengths agree.
Matrix final_scores(std::span<const Matrix* const> xs, const LstmParams& params,
                    const LstmConfig& config);

/// LSTMV1 container. Layout (all little-endian):
///   "LSTMV1" | u32 input_dim | u32 hidden | u32 layers | u32 classes | f64 dropout
///   | per layer: W row-major f64, b f64 | V row-major f64 | out_bias f64
void save_model(std::ostream& out, const LstmConfig& config, const LstmParams& params);
void save_model(const std::string& path, const LstmConfig& config, const LstmParams& params);

struct LoadedModel {
  LstmConfig config;
  LstmParams params;
};
LoadedModel load_model(std::istream& in);
LoadedModel load_model(const std::string& path);

}  // namespace lstmviz

#endif  // LSTMVIZ_LSTM_HPP
