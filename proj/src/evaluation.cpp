#include "lstmviz/evaluation.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace lstmviz {

void EvalConfig::validate() const {
  if (alphas.empty()) throw std::invalid_argument("evaluation needs a non-empty alpha grid");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0)) {
      throw std::invalid_argument("alpha values must lie in [0,1]");
    }
    if (i > 0 && alphas[i] < alphas[i - 1]) {
      throw std::invalid_argument("alpha grid must be sorted ascending");
    }
  }
}

Matrix deletion_mask(const SalienceMap& salience, Scalar alpha) {
  return (salience.values.array() > alpha).select(Matrix::Zero(salience.values.rows(),
                                                               salience.values.cols()),
                                                  1.0);
}

Reduction scaled_reduction(const Matrix& x, const SalienceMap& salience, Scalar alpha, Scalar k,
                           const ScoreModel& model, int c) {
  if (salience.values.rows() != x.rows() || salience.values.cols() != x.cols()) {
    throw std::invalid_argument("scaled_reduction: salience shape does not match input");
  }
  const Matrix keep = deletion_mask(salience, alpha);
  Reduction r;
  r.deleted = x.size() - static_cast<Eigen::Index>(keep.sum());
  if (r.deleted == 0 || r.deleted == x.size()) return r;

  const auto n = static_cast<Scalar>(x.size());
  const Scalar drop = model.score(x, c) - model.score(perturb(x, keep, k), c);
  r.reduction = drop * (n - static_cast<Scalar>(r.deleted)) / n;
  return r;
}

SalienceMap compute_salience(Technique technique, const Matrix& x, const ScoreModel& model, int c,
                             const EvalConfig& ec) {
  switch (technique) {
    case Technique::gradient:
      return input_derivative_salience(x, model, c);
    case Technique::occlusion: {
      OcclusionConfig occ = ec.occlusion;
      occ.k = ec.k;
      return occlusion_salience(x, model, occ, c);
    }
    case Technique::mask: {
      MaskConfig mc = ec.mask;
      mc.k = ec.k;
      return mask_to_salience(learn_mask(x, model, c, mc));
    }
  }
  throw std::invalid_argument("unknown technique");
}

ScoreReductionCurve curve(std::span<const LabeledSequence> test, Technique technique,
                          const EvalConfig& ec, const ScoreModel& model,
                          const ProgressCallback& progress) {
  ec.validate();
  if (test.empty()) throw std::invalid_argument("curve: empty test set");

  ScoreReductionCurve out;
  out.technique = technique;
  out.alphas = ec.alphas;
  out.mean_reduction.assign(ec.alphas.size(), 0.0);
  out.mean_deleted_fraction.assign(ec.alphas.size(), 0.0);
  out.samples = test.size();

  // Per-sequence values are summed in sequence order, then divided once.
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& seq = test[i];
    const SalienceMap map = compute_salience(technique, seq.values, model, seq.label, ec);
    const auto n = static_cast<Scalar>(seq.values.size());
    for (std::size_t a = 0; a < ec.alphas.size(); ++a) {
      const Reduction r = scaled_reduction(seq.values, map, ec.alphas[a], ec.k, model, seq.label);
      out.mean_reduction[a] += r.reduction;
      out.mean_deleted_fraction[a] += static_cast<Scalar>(r.deleted) / n;
    }
    if (progress) progress(i + 1, test.size());
  }
  const auto count = static_cast<Scalar>(test.size());
  for (std::size_t a = 0; a < ec.alphas.size(); ++a) {
    out.mean_reduction[a] /= count;
    out.mean_deleted_fraction[a] /= count;
  }
  return out;
}

ComparisonTable report(std::span<const ScoreReductionCurve> curves) {
  if (curves.empty()) throw std::invalid_argument("report: no curves given");
  ComparisonTable table;
  table.alphas = curves.front().alphas;
  if (table.alphas.empty()) throw std::invalid_argument("report: empty alpha grid");
  bool first = true;
  for (const auto& c : curves) {
    if (c.alphas != table.alphas) throw std::invalid_argument("report: alpha grids differ");
    table.techniques.push_back(to_string(c.technique));
    table.reductions.push_back(c.mean_reduction);
    table.deleted_fraction.push_back(c.mean_deleted_fraction);
    for (Scalar v : c.mean_reduction) {
      table.y_min = first ? v : std::min(table.y_min, v);
      table.y_max = first ? v : std::max(table.y_max, v);
      first = false;
    }
  }
  return table;
}

void ComparisonTable::write_csv(std::ostream& out) const {
  out << "alpha";
  for (const auto& name : techniques) out << ',' << name;
  out << '\n';
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out << format_real(alphas[a]);
    for (const auto& series : reductions) out << ',' << format_real(series[a]);
    out << '\n';
  }
}

void ComparisonTable::write_curves_csv(std::ostream& out) const {
  out << "alpha";
  for (const auto& name : techniques) out << ",mean_reduction_" << name;
  for (const auto& name : techniques) out << ",mean_M_fraction_" << name;
  out << '\n';
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out << format_real(alphas[a]);
    for (const auto& series : reductions) out << ',' << format_real(series[a]);
    for (const auto& series : deleted_fraction) out << ',' << format_real(series[a]);
    out << '\n';
  }
}

}  // namespace lstmviz
