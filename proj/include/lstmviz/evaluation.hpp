#ifndef LSTMVIZ_EVALUATION_HPP
#define LSTMVIZ_EVALUATION_HPP

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lstmviz/salience.hpp"
#include "lstmviz/sequence.hpp"

namespace lstmviz {

struct EvalConfig {
  std::vector<Scalar> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  Scalar k = 0.0;
  OcclusionConfig occlusion;  // width 5 for scanline MNIST, 25 for heartbeats
  MaskConfig mask;

  /// Throws unless alphas is non-empty, sorted ascending and inside [0,1].
  void validate() const;
};

struct Reduction {
  Scalar reduction = 0.0;  // (s_c(x) - s_c(phi(x; b))) * (N - M) / N
  Eigen::Index deleted = 0;  // M
};

/// Binary deletion mask from a salience map: 0 where salience > alpha, else 1.
Matrix deletion_mask(const SalienceMap& salience, Scalar alpha);

/// Size-penalized class-score reduction after deleting (setting to k) every
/// element whose salience exceeds alpha.
Reduction scaled_reduction(const Matrix& x, const SalienceMap& salience, Scalar alpha, Scalar k,
                           const ScoreModel& model, int c);

/// Salience of one sequence with the technique's configured settings; the
/// deletion value k of `ec` overrides the per-technique k.
SalienceMap compute_salience(Technique technique, const Matrix& x, const ScoreModel& model, int c,
                             const EvalConfig& ec);

struct ScoreReductionCurve {
  Technique technique = Technique::gradient;
  std::vector<Scalar> alphas;
  std::vector<Scalar> mean_reduction;
  std::vector<Scalar> mean_deleted_fraction;  // mean M / N
  std::size_t samples = 0;
};

/// Called after each sequence of a curve computation (index, total).
using ProgressCallback = std::function<void(std::size_t, std::size_t)>;

/// Mean scaled reduction per alpha over `test`, using each sequence's label as c.
ScoreReductionCurve curve(std::span<const LabeledSequence> test, Technique technique,
                          const EvalConfig& ec, const ScoreModel& model,
                          const ProgressCallback& progress = {});

/// Reduction curves of several techniques on a shared alpha grid.
struct ComparisonTable {
  std::vector<Scalar> alphas;
  std::vector<std::string> techniques;
  std::vector<std::vector<Scalar>> reductions;  // [technique][alpha]
  std::vector<std::vector<Scalar>> deleted_fraction;
  Scalar y_min = 0.0;  // shared y-range across every series
  Scalar y_max = 0.0;

  /// CSV: alpha,<technique>... with one reduction column per technique.
  void write_csv(std::ostream& out) const;
  /// CSV: alpha, mean_reduction_<technique>..., mean_M_fraction_<technique>...
  void write_curves_csv(std::ostream& out) const;
};

/// Throws if no curves are given, the alpha grid is empty, or grids disagree.
ComparisonTable report(std::span<const ScoreReductionCurve> curves);

}  // namespace lstmviz

#endif  // LSTMVIZ_EVALUATION_HPP
