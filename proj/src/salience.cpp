#include "lstmviz/salience.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace lstmviz {

namespace {

Scalar sign(Scalar v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Scalar total_variation(const Matrix& m) {
  if (m.rows() < 2) return 0.0;
  return (m.bottomRows(m.rows() - 1) - m.topRows(m.rows() - 1)).cwiseAbs().sum();
}

std::vector<Eigen::Index> pattern_offsets(const OcclusionConfig& occ) {
  std::vector<Eigen::Index> offsets;
  if (occ.pattern == OcclusionConfig::Pattern::contiguous) {
    for (int i = 0; i < occ.width; ++i) offsets.push_back(i);
  } else {
    for (int j = 0; j < occ.repeats; ++j)
      for (int i = 0; i < occ.pixels; ++i) offsets.push_back(Eigen::Index{j} * occ.stride + i);
  }
  return offsets;
}

}  // namespace

Vector ScoreModel::scores(std::span<const Matrix> xs, int c) const {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) out[static_cast<Eigen::Index>(i)] = score(xs[i], c);
  return out;
}

Scalar LstmScorer::score(const Matrix& x, int c) const {
  return class_score(x, params_, config_, c);
}

Matrix LstmScorer::score_gradient(const Matrix& x, int c) const {
  return backward_input(x, params_, config_, c);
}

std::pair<Scalar, Matrix> LstmScorer::score_and_gradient(const Matrix& x, int c) const {
  return score_and_input_gradient(x, params_, config_, c);
}

Vector LstmScorer::scores(std::span<const Matrix> xs, int c) const {
  if (c < 0 || c >= config_.classes) throw std::out_of_range("LstmScorer: class out of range");
  std::vector<const Matrix*> ptrs;
  ptrs.reserve(xs.size());
  for (const auto& x : xs) ptrs.push_back(&x);
  return final_scores(ptrs, params_, config_).row(c).transpose();
}

std::string to_string(Technique t) {
  switch (t) {
    case Technique::gradient: return "gradient";
    case Technique::occlusion: return "occlusion";
    case Technique::mask: return "mask";
  }
  return "unknown";
}

Technique parse_technique(const std::string& name) {
  if (name == "gradient") return Technique::gradient;
  if (name == "occlusion") return Technique::occlusion;
  if (name == "mask") return Technique::mask;
  throw std::invalid_argument("unknown salience technique: " + name);
}

TemporalScores temporal_output_scores(const Matrix& x, const LstmParams& params,
                                      const LstmConfig& config, int c) {
  if (c < 0 || c >= config.classes) {
    throw std::out_of_range("temporal_output_scores: class out of range");
  }
  const ForwardTrace trace = forward(x, params, config, Mode::eval);
  TemporalScores out;
  out.true_class = c;
  out.probs.resize(trace.length(), config.classes);
  out.predicted.resize(static_cast<std::size_t>(trace.length()));
  out.true_class_prob.resize(trace.length());
  for (Eigen::Index t = 0; t < trace.length(); ++t) {
    const Vector p = softmax(trace.scores[t].col(0));
    out.probs.row(t) = p.transpose();
    out.predicted[static_cast<std::size_t>(t)] = static_cast<int>(argmax(p));
    out.true_class_prob[t] = p[c];
  }
  return out;
}

Matrix perturb(const Matrix& x, const Matrix& m, Scalar k) {
  if (x.rows() != m.rows() || x.cols() != m.cols()) {
    throw std::invalid_argument("perturb: mask shape does not match input");
  }
  return (m.array() * x.array() + k * (1.0 - m.array())).matrix();
}

SalienceMap input_derivative_salience(const Matrix& x, const ScoreModel& model, int c) {
  SalienceMap map;
  map.technique = Technique::gradient;
  map.values = minmax_scale(model.score_gradient(x, c).cwiseAbs());
  return map;
}

std::vector<std::vector<Eigen::Index>> occlusion_windows(Eigen::Index T,
                                                         const OcclusionConfig& occ) {
  if (occ.width < 1) throw std::invalid_argument("occlusion width must be >= 1");
  if (occ.width > T) {
    throw std::invalid_argument("occlusion width " + std::to_string(occ.width) +
                                " exceeds sequence length " + std::to_string(T));
  }
  if (occ.pattern == OcclusionConfig::Pattern::block &&
      (occ.pixels < 1 || occ.repeats < 1 || occ.stride < occ.pixels)) {
    throw std::invalid_argument("block occlusion needs pixels >= 1, repeats >= 1, stride >= pixels");
  }
  const auto offsets = pattern_offsets(occ);
  const Eigen::Index extent = offsets.back() + 1;
  if (extent > T) {
    throw std::invalid_argument("occlusion pattern extent " + std::to_string(extent) +
                                " exceeds sequence length " + std::to_string(T));
  }
  std::vector<std::vector<Eigen::Index>> windows;
  windows.reserve(static_cast<std::size_t>(T + extent - 1));
  for (Eigen::Index base = 1 - extent; base < T; ++base) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index o : offsets) {
      const Eigen::Index t = base + o;
      if (t >= 0 && t < T) idx.push_back(t);
    }
    windows.push_back(std::move(idx));
  }
  return windows;
}

SalienceMap occlusion_salience(const Matrix& x, const ScoreModel& model,
                               const OcclusionConfig& occ, int c) {
  const Eigen::Index T = x.rows();
  const auto windows = occlusion_windows(T, occ);

  std::vector<Matrix> occluded;
  occluded.reserve(windows.size());
  for (const auto& window : windows) {
    Matrix xo = x;
    for (Eigen::Index t : window) xo.row(t).setConstant(occ.k);
    occluded.push_back(std::move(xo));
  }
  const Vector s = model.scores(occluded, c);

  Vector accumulated = Vector::Zero(T);
  std::vector<char> hidden(static_cast<std::size_t>(T));
  for (std::size_t it = 0; it < windows.size(); ++it) {
    std::fill(hidden.begin(), hidden.end(), 0);
    for (Eigen::Index t : windows[it]) hidden[static_cast<std::size_t>(t)] = 1;
    for (Eigen::Index t = 0; t < T; ++t) {
      if (!hidden[static_cast<std::size_t>(t)]) accumulated[t] += s[static_cast<Eigen::Index>(it)];
    }
  }

  const Matrix scaled = minmax_scale(accumulated);
  SalienceMap map;
  map.technique = Technique::occlusion;
  map.values = scaled.col(0).replicate(1, x.cols());
  map.meta["k"] = format_real(occ.k);
  map.meta["w"] = std::to_string(occ.width);
  map.meta["pattern"] = occ.pattern == OcclusionConfig::Pattern::block ? "block" : "contiguous";
  return map;
}

Matrix mask_objective_gradient(const Matrix& x, const Matrix& m, const Matrix& score_grad,
                               const MaskConfig& mc) {
  Matrix g = (score_grad.array() * (x.array() - mc.k)).matrix();
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(t, j) < 1.0) g(t, j) -= mc.lambda1;
      Scalar tv = 0.0;
      if (t > 0) tv += sign(m(t, j) - m(t - 1, j));
      if (t + 1 < m.rows()) tv -= sign(m(t + 1, j) - m(t, j));
      g(t, j) += mc.lambda2 * tv;
    }
  }
  return g;
}

MaskResult learn_mask(const Matrix& x, const ScoreModel& model, int c, const MaskConfig& mc) {
  if (mc.iterations < 0) throw std::invalid_argument("learn_mask: iterations must be >= 0");
  if (!(mc.init >= 0.0 && mc.init <= 1.0)) {
    throw std::invalid_argument("learn_mask: mask init must lie in [0,1]");
  }
  MaskResult result;
  result.mask = Matrix::Constant(x.rows(), x.cols(), mc.init);
  result.history.reserve(static_cast<std::size_t>(mc.iterations));

  const Eigen::Index n = result.mask.size();
  AdamState adam(n);
  const AdamHyper hyper{mc.lr};
  Eigen::Map<Vector> flat(result.mask.data(), n);

  for (int it = 0; it < mc.iterations; ++it) {
    const Matrix phi = perturb(x, result.mask, mc.k);
    auto [s, score_grad] = model.score_and_gradient(phi, c);

    MaskObjective obj;
    obj.score = s;
    obj.l1 = mc.lambda1 * (1.0 - result.mask.array()).abs().sum();
    obj.tv = mc.lambda2 * total_variation(result.mask);
    if (!std::isfinite(obj.total()) || !score_grad.allFinite()) {
      throw std::domain_error("learn_mask: non-finite objective at iteration " +
                              std::to_string(it));
    }
    result.history.push_back(obj);

    const Matrix grad = mask_objective_gradient(x, result.mask, score_grad, mc);
    adam_step(flat, Eigen::Map<const Vector>(grad.data(), n), adam, hyper);
    flat = flat.cwiseMax(0.0).cwiseMin(1.0);
  }
  result.final_score = model.score(perturb(x, result.mask, mc.k), c);
  return result;
}

SalienceMap mask_to_salience(const MaskResult& result) {
  SalienceMap map;
  map.technique = Technique::mask;
  const Matrix scaled = minmax_scale(result.mask);
  const bool constant = result.mask.size() == 0 ||
                        !(result.mask.maxCoeff() > result.mask.minCoeff());
  map.values = constant ? Matrix::Zero(result.mask.rows(), result.mask.cols())
                        : Matrix((1.0 - scaled.array()).matrix());
  map.meta["final_score"] = format_real(result.final_score);
  return map;
}

void write_salience_csv(std::ostream& out, const Matrix& x, const SalienceMap& map) {
  if (x.rows() != map.values.rows() || x.cols() != map.values.cols()) {
    throw std::invalid_argument("write_salience_csv: salience shape does not match input");
  }
  out << 't';
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << ",x_" << j;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out << ",salience_" << j;
  out << '\n';
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    out << t;
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << format_real(x(t, j));
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << ',' << format_real(map.values(t, j));
    out << '\n';
  }
}

void write_temporal_csv(std::ostream& out, const TemporalScores& scores) {
  out << 't';
  for (Eigen::Index k = 0; k < scores.probs.cols(); ++k) out << ",prob_class_" << k;
  out << ",predicted,true_class_prob\n";
  for (Eigen::Index t = 0; t < scores.probs.rows(); ++t) {
    out << t;
    for (Eigen::Index k = 0; k < scores.probs.cols(); ++k) out << ',' << format_real(scores.probs(t, k));
    out << ',' << scores.predicted[static_cast<std::size_t>(t)] << ','
        << format_real(scores.true_class_prob[t]) << '\n';
  }
}

}  // namespace lstmviz
