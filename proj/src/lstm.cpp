#include "lstmviz/lstm.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace lstmviz {

namespace {

constexpr Eigen::Index kChunk = 64;  // columns per batched pass in training

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw std::domain_error(std::string("non-finite value in ") + what);
}

template <typename Fn>
void for_each_block(const LstmParams& p, Fn&& fn) {
  for (const auto& layer : p.layers) {
    fn(layer.W);
    fn(layer.b);
  }
  fn(p.V);
  fn(p.out_bias);
}

template <typename Fn>
void for_each_block(LstmParams& p, Fn&& fn) {
  for (auto& layer : p.layers) {
    fn(layer.W);
    fn(layer.b);
  }
  fn(p.V);
  fn(p.out_bias);
}

void check_input(const Matrix& x, const LstmConfig& config) {
  if (x.rows() < 1) throw std::invalid_argument("forward: sequence must have T >= 1");
  if (x.cols() != config.input_dim) {
    throw std::invalid_argument("forward: input dimension " + std::to_string(x.cols()) +
                                " does not match config input_dim " +
                                std::to_string(config.input_dim));
  }
}

void check_params(const LstmParams& p, const LstmConfig& config) {
  const auto h = static_cast<Eigen::Index>(config.hidden);
  if (p.layers.size() != static_cast<std::size_t>(config.layers) || p.V.rows() != config.classes ||
      p.V.cols() != h || p.out_bias.size() != config.classes) {
    throw std::invalid_argument("parameters do not match the LSTM configuration");
  }
  for (int l = 0; l < config.layers; ++l) {
    const auto& layer = p.layers[l];
    if (layer.W.rows() != 4 * h || layer.W.cols() != config.layer_input_dim(l) + h ||
        layer.b.size() != 4 * h) {
      throw std::invalid_argument("layer " + std::to_string(l) +
                                  " parameters do not match the LSTM configuration");
    }
  }
}

// Inverted-dropout scale matrix: each entry is 0 with probability p, else 1/(1-p).
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, Scalar p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  const Scalar scale = 1.0 / (1.0 - p);
  Matrix mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) mask(i, j) = keep(rng) ? scale : 0.0;
  return mask;
}

ForwardTrace run_forward(std::span<const Matrix* const> xs, const LstmParams& params,
                         const LstmConfig& config, Mode mode, std::mt19937_64& rng) {
  const auto batch = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index T = xs.front()->rows();
  const Eigen::Index h = config.hidden;
  const bool use_dropout = mode == Mode::train && config.dropout > 0.0;

  ForwardTrace trace;
  trace.layers.resize(config.layers);
  for (auto& lt : trace.layers) {
    lt.input.resize(T);
    lt.gates.resize(T);
    lt.cell.resize(T);
    lt.hidden.resize(T);
    if (use_dropout) lt.input_mask.resize(T);
  }
  trace.scores.resize(T);

  for (int l = 0; l < config.layers; ++l) {
    const auto& W = params.layers[l].W;
    const auto& b = params.layers[l].b;
    const Eigen::Index n_in = config.layer_input_dim(l);
    auto Wx = W.leftCols(n_in);
    auto Wh = W.rightCols(h);
    auto& lt = trace.layers[l];

    Matrix h_prev = Matrix::Zero(h, batch);
    Matrix c_prev = Matrix::Zero(h, batch);
    Matrix z(4 * h, batch);
    for (Eigen::Index t = 0; t < T; ++t) {
      Matrix in(n_in, batch);
      if (l == 0) {
        for (Eigen::Index j = 0; j < batch; ++j) in.col(j) = xs[j]->row(t).transpose();
      } else {
        in = trace.layers[l - 1].hidden[t];
      }
      if (use_dropout) {
        lt.input_mask[t] = dropout_mask(n_in, batch, config.dropout, rng);
        in.array() *= lt.input_mask[t].array();
      }

      z.noalias() = Wx * in;
      z.noalias() += Wh * h_prev;
      z.colwise() += b;

      Matrix gates(4 * h, batch);
      gates.topRows(3 * h) = z.topRows(3 * h).unaryExpr([](Scalar v) { return sigmoid(v); });
      gates.bottomRows(h) = z.bottomRows(h).array().tanh().matrix();

      const auto i_g = gates.middleRows(0, h).array();
      const auto f_g = gates.middleRows(h, h).array();
      const auto o_g = gates.middleRows(2 * h, h).array();
      const auto g_g = gates.middleRows(3 * h, h).array();

      Matrix c = (f_g * c_prev.array() + i_g * g_g).matrix();
      Matrix hid = (o_g * c.array().tanh()).matrix();

      lt.input[t] = std::move(in);
      lt.gates[t] = std::move(gates);
      lt.cell[t] = c;
      lt.hidden[t] = hid;
      h_prev = std::move(hid);
      c_prev = std::move(c);
    }
  }

  const auto& top = trace.layers.back().hidden;
  for (Eigen::Index t = 0; t < T; ++t) {
    trace.scores[t].noalias() = params.V * top[t];
    trace.scores[t].colwise() += params.out_bias;
  }
  return trace;
}

// Backpropagates a gradient on the final-step scores (classes x B). Parameter
// gradients are accumulated into `grad` when non-null; per-timestep input
// gradients (d_in x B) are written to `dx` when non-null.
void run_backward(const ForwardTrace& trace, const LstmParams& params, const LstmConfig& config,
                  const Matrix& d_scores, LstmParams* grad, std::vector<Matrix>* dx) {
  const Eigen::Index T = trace.length();
  const Eigen::Index batch = d_scores.cols();
  const Eigen::Index h = config.hidden;

  const auto& top = trace.layers.back().hidden;
  if (grad) {
    grad->V.noalias() += d_scores * top[T - 1].transpose();
    grad->out_bias += d_scores.rowwise().sum();
  }

  // Gradient arriving at each timestep's hidden output from the layer above.
  std::vector<Matrix> d_from_above(T);
  d_from_above[T - 1] = params.V.transpose() * d_scores;

  for (int l = config.layers - 1; l >= 0; --l) {
    const auto& W = params.layers[l].W;
    const auto& lt = trace.layers[l];
    const Eigen::Index n_in = config.layer_input_dim(l);
    const bool need_below = l > 0 || dx != nullptr;

    std::vector<Matrix> d_below(need_below ? T : 0);
    Matrix dh_rec = Matrix::Zero(h, batch);
    Matrix dc_next = Matrix::Zero(h, batch);
    Matrix dz(4 * h, batch);
    Matrix d_concat(n_in + h, batch);

    for (Eigen::Index t = T - 1; t >= 0; --t) {
      Matrix dh = dh_rec;
      if (d_from_above[t].size() != 0) dh += d_from_above[t];

      const auto& gates = lt.gates[t];
      const auto i_g = gates.middleRows(0, h).array();
      const auto f_g = gates.middleRows(h, h).array();
      const auto o_g = gates.middleRows(2 * h, h).array();
      const auto g_g = gates.middleRows(3 * h, h).array();
      const Eigen::ArrayXXd tanh_c = lt.cell[t].array().tanh();

      const Eigen::ArrayXXd dc =
          dh.array() * o_g * (1.0 - tanh_c.square()) + dc_next.array();
      dz.middleRows(0, h) = (dc * g_g * i_g * (1.0 - i_g)).matrix();
      if (t > 0) {
        dz.middleRows(h, h) = (dc * lt.cell[t - 1].array() * f_g * (1.0 - f_g)).matrix();
      } else {
        dz.middleRows(h, h).setZero();
      }
      dz.middleRows(2 * h, h) = (dh.array() * tanh_c * o_g * (1.0 - o_g)).matrix();
      dz.middleRows(3 * h, h) = (dc * i_g * (1.0 - g_g.square())).matrix();
      dc_next = (dc * f_g).matrix();

      if (grad) {
        auto& gW = grad->layers[l].W;
        gW.leftCols(n_in).noalias() += dz * lt.input[t].transpose();
        if (t > 0) gW.rightCols(h).noalias() += dz * lt.hidden[t - 1].transpose();
        grad->layers[l].b += dz.rowwise().sum();
      }

      d_concat.noalias() = W.transpose() * dz;
      dh_rec = d_concat.bottomRows(h);
      if (need_below) {
        Matrix d_in = d_concat.topRows(n_in);
        if (!lt.input_mask.empty()) d_in.array() *= lt.input_mask[t].array();
        d_below[t] = std::move(d_in);
      }
    }
    if (l > 0) {
      d_from_above = std::move(d_below);
    } else if (dx) {
      *dx = std::move(d_below);
    }
  }
}

std::vector<const Matrix*> pointers(std::span<const LabeledSequence> data, std::size_t begin,
                                    std::size_t end) {
  std::vector<const Matrix*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&data[i].values);
  return out;
}

// Groups indices by sequence length, preserving first-appearance order.
std::vector<std::vector<std::size_t>> group_by_length(std::span<const LabeledSequence> data) {
  std::map<Eigen::Index, std::size_t> slot;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(data[i].length(), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

}  // namespace

void LstmConfig::validate() const {
  if (input_dim < 1 || hidden < 1 || layers < 1 || classes < 1) {
    throw std::invalid_argument("LSTM config counts must all be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("LSTM dropout must lie in [0,1)");
  }
}

LstmParams LstmParams::zeros(const LstmConfig& config) {
  config.validate();
  const Eigen::Index h = config.hidden;
  LstmParams p;
  for (int l = 0; l < config.layers; ++l) {
    p.layers.push_back({Matrix::Zero(4 * h, config.layer_input_dim(l) + h), Vector::Zero(4 * h)});
  }
  p.V = Matrix::Zero(config.classes, h);
  p.out_bias = Vector::Zero(config.classes);
  return p;
}

Eigen::Index LstmParams::size() const {
  Eigen::Index n = 0;
  for_each_block(*this, [&](const auto& block) { n += block.size(); });
  return n;
}

Vector LstmParams::flatten() const {
  Vector flat(size());
  Eigen::Index k = 0;
  for_each_block(*this, [&](const auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      for (Eigen::Index c = 0; c < block.cols(); ++c) flat[k++] = block(r, c);
  });
  return flat;
}

void LstmParams::assign(const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != size()) throw std::invalid_argument("LstmParams::assign: length mismatch");
  Eigen::Index k = 0;
  for_each_block(*this, [&](auto& block) {
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      for (Eigen::Index c = 0; c < block.cols(); ++c) block(r, c) = flat[k++];
  });
}

Vector LstmParams::weight_indicator() const {
  Vector ind(size());
  Eigen::Index k = 0;
  auto mark = [&](Eigen::Index n, Scalar flag) {
    ind.segment(k, n).setConstant(flag);
    k += n;
  };
  for (const auto& layer : layers) {
    mark(layer.W.size(), 1.0);
    mark(layer.b.size(), 0.0);
  }
  mark(V.size(), 1.0);
  mark(out_bias.size(), 0.0);
  return ind;
}

bool LstmParams::operator==(const LstmParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].W != other.layers[l].W || layers[l].b != other.layers[l].b) return false;
  }
  return V == other.V && out_bias == other.out_bias;
}

LstmParams init_params(const LstmConfig& config, std::uint64_t seed) {
  LstmParams p = LstmParams::zeros(config);
  const Eigen::Index h = config.hidden;
  const Scalar range = 1.0 / std::sqrt(static_cast<Scalar>(h));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> uniform(-range, range);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(rng);
  };
  for (auto& layer : p.layers) {
    fill(layer.W);
    layer.b.segment(static_cast<int>(Gate::forget) * h, h).setOnes();
  }
  fill(p.V);
  return p;
}

ForwardTrace forward(const Matrix& x, const LstmParams& params, const LstmConfig& config,
                     Mode mode, std::uint64_t seed) {
  const Matrix* ptr = &x;
  return forward_batch(std::span<const Matrix* const>(&ptr, 1), params, config, mode, seed);
}

ForwardTrace forward_batch(std::span<const Matrix* const> xs, const LstmParams& params,
                           const LstmConfig& config, Mode mode, std::uint64_t seed) {
  config.validate();
  check_params(params, config);
  if (xs.empty()) throw std::invalid_argument("forward: empty batch");
  for (const Matrix* x : xs) {
    check_input(*x, config);
    if (x->rows() != xs.front()->rows()) {
      throw std::invalid_argument("forward_batch: sequences must share one length");
    }
    require_finite(*x, "forward input");
  }
  std::mt19937_64 rng(seed);
  return run_forward(xs, params, config, mode, rng);
}

Scalar class_score(const Matrix& x, const LstmParams& params, const LstmConfig& config, int c) {
  if (c < 0 || c >= config.classes) {
    throw std::out_of_range("class_score: class " + std::to_string(c) + " out of range");
  }
  return forward(x, params, config, Mode::eval).final_scores()(c, 0);
}

std::pair<Scalar, Matrix> score_and_input_gradient(const Matrix& x, const LstmParams& params,
                                                   const LstmConfig& config, int c) {
  if (c < 0 || c >= config.classes) {
    throw std::out_of_range("backward_input: class " + std::to_string(c) + " out of range");
  }
  const ForwardTrace trace = forward(x, params, config, Mode::eval);
  Matrix d_scores = Matrix::Zero(config.classes, 1);
  d_scores(c, 0) = 1.0;
  std::vector<Matrix> dx;
  run_backward(trace, params, config, d_scores, nullptr, &dx);

  Matrix grad(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) grad.row(t) = dx[t].col(0).transpose();
  require_finite(grad, "input gradient");
  return {trace.final_scores()(c, 0), std::move(grad)};
}

Matrix backward_input(const Matrix& x, const LstmParams& params, const LstmConfig& config,
                      int c) {
  return score_and_input_gradient(x, params, config, c).second;
}

LossGradient backward_params(std::span<const LabeledSequence> batch, const LstmParams& params,
                             const LstmConfig& config, std::uint64_t seed, Mode mode) {
  config.validate();
  check_params(params, config);
  if (batch.empty()) throw std::invalid_argument("backward_params: empty minibatch");

  LossGradient out{0.0, LstmParams::zeros(config)};
  const auto total = static_cast<Scalar>(batch.size());
  std::uint64_t chunk_index = 0;

  for (const auto& group : group_by_length(batch)) {
    for (std::size_t begin = 0; begin < group.size(); begin += kChunk) {
      const std::size_t end = std::min<std::size_t>(group.size(), begin + kChunk);
      std::vector<const Matrix*> xs;
      std::vector<int> labels;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& seq = batch[group[k]];
        if (seq.label < 0 || seq.label >= config.classes) {
          throw std::out_of_range("backward_params: label out of range");
        }
        check_input(seq.values, config);
        xs.push_back(&seq.values);
        labels.push_back(seq.label);
      }

      auto rng = make_rng(seed, chunk_index++);
      const ForwardTrace trace = run_forward(xs, params, config, mode, rng);

      const Matrix probs = softmax_columns(trace.final_scores());
      Matrix d_scores = probs / total;
      for (std::size_t j = 0; j < labels.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        out.loss += cross_entropy(probs.col(col), labels[j]);
        d_scores(labels[j], col) -= 1.0 / total;
      }
      run_backward(trace, params, config, d_scores, &out.grad, nullptr);
    }
  }
  out.loss /= total;
  return out;
}

Matrix final_scores(std::span<const Matrix* const> xs, const LstmParams& params,
                    const LstmConfig& config) {
  config.validate();
  check_params(params, config);
  Matrix out(config.classes, static_cast<Eigen::Index>(xs.size()));
  std::map<Eigen::Index, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check_input(*xs[i], config);
    by_length[xs[i]->rows()].push_back(i);
  }
  std::mt19937_64 unused(0);
  for (const auto& [length, idx] : by_length) {
    for (std::size_t begin = 0; begin < idx.size(); begin += kChunk) {
      const std::size_t end = std::min<std::size_t>(idx.size(), begin + kChunk);
      std::vector<const Matrix*> chunk;
      for (std::size_t k = begin; k < end; ++k) chunk.push_back(xs[idx[k]]);
      const ForwardTrace trace = run_forward(chunk, params, config, Mode::eval, unused);
      for (std::size_t k = begin; k < end; ++k) {
        out.col(static_cast<Eigen::Index>(idx[k])) =
            trace.final_scores().col(static_cast<Eigen::Index>(k - begin));
      }
    }
  }
  return out;
}

Scalar mean_loss(std::span<const LabeledSequence> data, const LstmParams& params,
                 const LstmConfig& config) {
  if (data.empty()) throw std::invalid_argument("mean_loss: empty data");
  const auto xs = pointers(data, 0, data.size());
  const Matrix scores = final_scores(xs, params, config);
  Scalar total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += cross_entropy(softmax(scores.col(static_cast<Eigen::Index>(i))), data[i].label);
  }
  return total / static_cast<Scalar>(data.size());
}

void save_model(std::ostream& out, const LstmConfig& config, const LstmParams& params) {
  config.validate();
  check_params(params, config);
  out.write("LSTMV1", 6);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.input_dim));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.hidden));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.layers));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(config.classes));
  detail::write_le<double>(out, config.dropout);
  const Vector flat = params.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) detail::write_le<double>(out, flat[i]);
  if (!out) throw std::runtime_error("save_model: write failed");
}

void save_model(const std::string& path, const LstmConfig& config, const LstmParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
  save_model(out, config, params);
}

LoadedModel load_model(std::istream& in) {
  detail::expect_magic(in, "LSTMV1");
  LoadedModel m;
  m.config.input_dim = static_cast<int>(detail::read_le<std::uint32_t>(in, "input_dim"));
  m.config.hidden = static_cast<int>(detail::read_le<std::uint32_t>(in, "hidden"));
  m.config.layers = static_cast<int>(detail::read_le<std::uint32_t>(in, "layers"));
  m.config.classes = static_cast<int>(detail::read_le<std::uint32_t>(in, "classes"));
  m.config.dropout = detail::read_le<double>(in, "dropout");
  m.params = LstmParams::zeros(m.config);
  Vector flat(m.params.size());
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = detail::read_le<double>(in, "weights");
  m.params.assign(flat);
  return m;
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace lstmviz
