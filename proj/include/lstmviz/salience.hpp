#ifndef LSTMVIZ_SALIENCE_HPP
#define LSTMVIZ_SALIENCE_HPP

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lstmviz/lstm.hpp"
#include "lstmviz/numerics.hpp"

namespace lstmviz {

/// A differentiable class score s_c(x) over T x d_in inputs. The salience
/// techniques only need this much of a model.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual Scalar score(const Matrix& x, int c) const = 0;
  /// Gradient of score(x, c) with respect to x, same shape as x.
  virtual Matrix score_gradient(const Matrix& x, int c) const = 0;
  virtual std::pair<Scalar, Matrix> score_and_gradient(const Matrix& x, int c) const {
    return {score(x, c), score_gradient(x, c)};
  }
  /// Scores of many inputs for one class.
  virtual Vector scores(std::span<const Matrix> xs, int c) const;
};

/// Eval-mode LSTM exposed as a ScoreModel. Holds references; the params and
/// config must outlive it.
class LstmScorer final : public ScoreModel {
 public:
  LstmScorer(const LstmParams& params, const LstmConfig& config)
      : params_(params), config_(config) {}

  Scalar score(const Matrix& x, int c) const override;
  Matrix score_gradient(const Matrix& x, int c) const override;
  std::pair<Scalar, Matrix> score_and_gradient(const Matrix& x, int c) const override;
  Vector scores(std::span<const Matrix> xs, int c) const override;

  const LstmParams& params() const { return params_; }
  const LstmConfig& config() const { return config_; }

 private:
  const LstmParams& params_;
  const LstmConfig& config_;
};

enum class Technique { gradient, occlusion, mask };

std::string to_string(Technique t);
/// Parses "gradient", "occlusion" or "mask"; throws std::invalid_argument otherwise.
Technique parse_technique(const std::string& name);

/// Importance per input element, in [0,1].
struct SalienceMap {
  Matrix values;
  Technique technique = Technique::gradient;
  std::map<std::string, std::string> meta;
};

/// Per-timestep class distributions of one sequence.
struct TemporalScores {
  Matrix probs;  // T x C
  std::vector<int> predicted;
  Vector true_class_prob;
  int true_class = 0;
};

TemporalScores temporal_output_scores(const Matrix& x, const LstmParams& params,
                                      const LstmConfig& config, int c);

/// m .* x + k (1 - m)
Matrix perturb(const Matrix& x, const Matrix& m, Scalar k);

SalienceMap input_derivative_salience(const Matrix& x, const ScoreModel& model, int c);

struct OcclusionConfig {
  enum class Pattern { contiguous, block };

  Scalar k = 0.0;
  int width = 5;
  Pattern pattern = Pattern::contiguous;
  // Block pattern: `pixels` contiguous steps every `stride` steps, `repeats` times.
  int pixels = 5;
  int stride = 28;
  int repeats = 5;

  /// A 5x5 pixel block on 28-wide scanline images.
  static OcclusionConfig scanline_block(Scalar k, int side = 5, int row_width = 28) {
    OcclusionConfig c;
    c.k = k;
    c.pattern = Pattern::block;
    c.pixels = side;
    c.stride = row_width;
    c.repeats = side;
    c.width = side;
    return c;
  }
};

/// Timestep indices (0-based) occluded at each iteration. Window starts slide
/// one step at a time from before the sequence to its end, clipped to [0,T),
/// so every timestep is occluded equally often.
std::vector<std::vector<Eigen::Index>> occlusion_windows(Eigen::Index T,
                                                         const OcclusionConfig& occ);

SalienceMap occlusion_salience(const Matrix& x, const ScoreModel& model,
                               const OcclusionConfig& occ, int c);

struct MaskConfig {
  Scalar k = 0.0;
  Scalar lambda1 = 0.01;
  Scalar lambda2 = 0.001;
  Scalar lr = 0.001;
  int iterations = 500;
  Scalar init = 1.0;
};

struct MaskObjective {
  Scalar score = 0.0;  // s_c(phi(x; m))
  Scalar l1 = 0.0;     // lambda1 * ||1 - m||_1
  Scalar tv = 0.0;     // lambda2 * sum_t |m_{t+1} - m_t|

  Scalar total() const { return score + l1 + tv; }
};

struct MaskResult {
  Matrix mask;
  std::vector<MaskObjective> history;  // objective before each update
  Scalar final_score = 0.0;
};

/// Gradient of the mask objective with respect to m, given the gradient of
/// s_c at the perturbed input.
Matrix mask_objective_gradient(const Matrix& x, const Matrix& m, const Matrix& score_grad,
                               const MaskConfig& mc);

/// Learns a deletion mask by projected Adam on
/// s_c(phi(x; m)) + lambda1 ||1 - m||_1 + lambda2 TV(m), with m kept in [0,1].
MaskResult learn_mask(const Matrix& x, const ScoreModel& model, int c, const MaskConfig& mc);

/// 1 - minmax(m); a constant mask yields an all-zero map.
SalienceMap mask_to_salience(const MaskResult& result);

/// CSV: t,x_0..x_{d-1},salience_0..salience_{d-1}
void write_salience_csv(std::ostream& out, const Matrix& x, const SalienceMap& map);
/// CSV: t,prob_class_0..prob_class_{C-1},predicted,true_class_prob
void write_temporal_csv(std::ostream& out, const TemporalScores& scores);

}  // namespace lstmviz

#endif  // LSTMVIZ_SALIENCE_HPP
