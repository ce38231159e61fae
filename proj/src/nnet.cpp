#include "pwnn/nnet.hpp"

#include "pwnn/detail/vmath.hpp"
#include "pwnn/random.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace pwnn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sin: return "sin";
    case Activation::TanhSinComposite: return "tanh_sin";
    case Activation::SinTanhComposite: return "sin_tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sin") return Activation::Sin;
  if (name == "tanh_sin") return Activation::TanhSinComposite;
  if (name == "sin_tanh") return Activation::SinTanhComposite;
  if (name == "identity") return Activation::Identity;
  throw ContractError("unknown activation '" + name + "' (expected tanh, sin, tanh_sin, sin_tanh, identity)");
}

ActivationJet activation_jet(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      const double d1 = 1.0 - t * t;
      return {t, d1, -2.0 * t * d1};
    }
    case Activation::Sin: {
      const double s = std::sin(x);
      return {s, std::cos(x), -s};
    }
    case Activation::TanhSinComposite: {
      const double s = std::sin(x), c = std::cos(x);
      const double t = std::tanh(s);
      const double sech2 = 1.0 - t * t;
      return {t, sech2 * c, -2.0 * t * sech2 * c * c - sech2 * s};
    }
    case Activation::SinTanhComposite: {
      const double t = std::tanh(x);
      const double sech2 = 1.0 - t * t;
      const double s = std::sin(t), c = std::cos(t);
      return {s, c * sech2, -s * sech2 * sech2 - 2.0 * c * t * sech2};
    }
    case Activation::Identity: return {x, 1.0, 0.0};
  }
  return {0.0, 0.0, 0.0};
}

void ModelConfig::validate() const {
  if (input_dim < 1 || output_dim < 1 || hidden_layers < 1 || width < 1) {
    throw ContractError("ModelConfig: input_dim, output_dim, hidden_layers and width must all be >= 1");
  }
}

std::vector<LayerSlot> layer_layout(const ModelConfig& config) {
  config.validate();
  std::vector<LayerSlot> layout;
  Index offset = 0;
  Index fan_in = config.input_dim;
  for (Index i = 0; i <= config.hidden_layers; ++i) {
    const Index fan_out = (i == config.hidden_layers) ? config.output_dim : config.width;
    LayerSlot slot{fan_out, fan_in, offset, offset + fan_out * fan_in};
    layout.push_back(slot);
    offset = slot.bias_offset + fan_out;
    fan_in = fan_out;
  }
  return layout;
}

Index ModelConfig::param_count() const {
  const auto layout = layer_layout(*this);
  return layout.back().bias_offset + layout.back().rows;
}

std::vector<std::pair<Index, Index>> residual_blocks(const ModelConfig& config) {
  std::vector<std::pair<Index, Index>> blocks;
  if (!config.residual_connections) return blocks;
  for (Index first = 1; first < config.hidden_layers; first += 2) {
    blocks.emplace_back(first, std::min(first + 1, config.hidden_layers - 1));
  }
  return blocks;
}

Model::Model(ModelConfig config, Vector params)
    : config_(std::move(config)), params_(std::move(params)), layout_(layer_layout(config_)) {
  if (params_.size() != config_.param_count()) {
    throw ShapeError("Model: expected " + std::to_string(config_.param_count()) + " parameters, got " +
                     std::to_string(params_.size()));
  }
}

Model Model::zeros(const ModelConfig& config) { return Model(config, Vector::Zero(config.param_count())); }

Model Model::glorot(const ModelConfig& config, std::uint64_t seed) {
  Vector params = Vector::Zero(config.param_count());
  Rng rng = make_rng(seed, Stream::Init);
  for (const LayerSlot& slot : layer_layout(config)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index k = 0; k < slot.rows * slot.cols; ++k) params[slot.weight_offset + k] = dist(rng);
  }
  return Model(config, std::move(params));
}

void Model::set_params(Vector params) {
  if (params.size() != params_.size()) throw ShapeError("Model::set_params: length mismatch");
  params_ = std::move(params);
}

Eigen::Map<const Matrix> Model::weight(Index layer) const {
  const LayerSlot& s = layout_.at(static_cast<std::size_t>(layer));
  return Eigen::Map<const Matrix>(params_.data() + s.weight_offset, s.rows, s.cols);
}

Eigen::Map<const Vector> Model::bias(Index layer) const {
  const LayerSlot& s = layout_.at(static_cast<std::size_t>(layer));
  return Eigen::Map<const Vector>(params_.data() + s.bias_offset, s.rows);
}

void Model::check_finite() const {
  if (!params_.allFinite()) throw NumericError("Model: non-finite parameter");
}

namespace {

// Shared kernels: the tape-free and the recorded path call exactly these, so the
// two produce bitwise identical values.

Matrix seed_input(const Matrix& points, const std::vector<Matrix>& directions) {
  const Index n = points.rows();
  const Index d = points.cols();
  Matrix s(d, n * static_cast<Index>(directions.size() + 1));
  s.leftCols(n) = points.transpose();
  for (std::size_t j = 0; j < directions.size(); ++j) {
    const Matrix& v = directions[j];
    if (v.rows() != n || v.cols() != d) {
      throw ShapeError("forward: direction " + std::to_string(j) + " is " + shape_str(v.rows(), v.cols()) +
                       ", expected " + shape_str(n, d));
    }
    s.middleCols(n * static_cast<Index>(j + 1), n) = v.transpose();
  }
  return s;
}

std::vector<Matrix> unit_directions(Index n, Index d) {
  std::vector<Matrix> dirs;
  for (Index j = 0; j < d; ++j) {
    Matrix e = Matrix::Zero(n, d);
    e.col(j).setOnes();
    dirs.push_back(std::move(e));
  }
  return dirs;
}

template <typename W, typename B>
Matrix affine(const W& weight, const B& bias, const Matrix& in, Index n) {
  Matrix out(weight.rows(), in.cols());
  out.noalias() = weight * in;
  out.leftCols(n).colwise() += bias;
  return out;
}

using Array = Eigen::ArrayXXd;

// sigma on block 0, sigma' * tangent on the other blocks. Optionally returns the
// pointwise sigma' and sigma'' needed by the pullback. Column blocks of a
// column-major matrix are contiguous, so everything runs as flat loops.
Matrix activate(Activation a, const Matrix& z, Index n, Matrix* d1_out, Matrix* d2_out) {
  const Index rows = z.rows();
  const Index blocks = z.cols() / n;
  const Index m = rows * n;
  const bool second = d2_out != nullptr;
  Matrix out(rows, z.cols());
  Matrix d1(rows, n), d2;
  if (second) d2.resize(rows, n);
  const double* x = z.data();
  double* v = out.data();
  double* p1 = d1.data();
  double* p2 = second ? d2.data() : nullptr;
  switch (a) {
    case Activation::Tanh: {
      detail::vtanh(x, v, m);
      for (Index i = 0; i < m; ++i) {
        const double t = v[i], s = 1.0 - t * t;
        p1[i] = s;
        if (second) p2[i] = -2.0 * t * s;
      }
      break;
    }
    case Activation::Sin: {
      detail::vsin(x, v, m);
      detail::vcos(x, p1, m);
      if (second)
        for (Index i = 0; i < m; ++i) p2[i] = -v[i];
      break;
    }
    case Activation::TanhSinComposite: {
      Vector sn(m);
      detail::vsin(x, sn.data(), m);
      detail::vcos(x, p1, m);
      detail::vtanh(sn.data(), v, m);
      for (Index i = 0; i < m; ++i) {
        const double t = v[i], c = p1[i], sech2 = 1.0 - t * t, g = sech2 * c;
        p1[i] = g;
        if (second) p2[i] = -2.0 * t * g * c - sech2 * sn[i];
      }
      break;
    }
    case Activation::SinTanhComposite: {
      Vector th(m);
      detail::vtanh(x, th.data(), m);
      detail::vsin(th.data(), v, m);
      detail::vcos(th.data(), p1, m);
      for (Index i = 0; i < m; ++i) {
        const double t = th[i], c = p1[i], sech2 = 1.0 - t * t;
        p1[i] = c * sech2;
        if (second) p2[i] = -v[i] * sech2 * sech2 - 2.0 * c * t * sech2;
      }
      break;
    }
    case Activation::Identity: {
      std::copy(x, x + m, v);
      d1.setOnes();
      if (second) d2.setZero();
      break;
    }
  }
  for (Index b = 1; b < blocks; ++b) {
    const double* zb = x + b * m;
    double* ob = v + b * m;
    for (Index i = 0; i < m; ++i) ob[i] = p1[i] * zb[i];
  }
  if (d1_out != nullptr) *d1_out = std::move(d1);
  if (second) *d2_out = std::move(d2);
  return out;
}

void check_points(const Model& model, const Matrix& points) {
  if (points.cols() != model.config().input_dim) {
    throw ShapeError("forward: points have " + std::to_string(points.cols()) + " columns, model expects " +
                     std::to_string(model.config().input_dim));
  }
  model.check_finite();
}

bool skip_starts(const std::vector<std::pair<Index, Index>>& blocks, Index layer) {
  for (const auto& b : blocks)
    if (b.first == layer) return true;
  return false;
}

bool skip_ends(const std::vector<std::pair<Index, Index>>& blocks, Index layer) {
  for (const auto& b : blocks)
    if (b.second == layer) return true;
  return false;
}

EvalBatch unstack(const Matrix& stacked, const Matrix& points, bool with_grad) {
  const Index n = points.rows();
  EvalBatch batch;
  batch.points = points;
  batch.values = stacked.leftCols(n).transpose();
  if (with_grad) {
    for (Index j = 0; j < points.cols(); ++j) batch.input_grads.push_back(stacked.middleCols(n * (j + 1), n).transpose());
  }
  return batch;
}

}  // namespace

Matrix forward_directional(const Model& model, const Matrix& points, const std::vector<Matrix>& directions) {
  check_points(model, points);
  const Index n = points.rows();
  const auto blocks = residual_blocks(model.config());
  const Index hidden = model.config().hidden_layers;
  Matrix s = seed_input(points, directions);
  Matrix skip;
  for (Index layer = 0; layer < hidden; ++layer) {
    if (skip_starts(blocks, layer)) skip = s;
    Matrix z = affine(model.weight(layer), model.bias(layer), s, n);
    s = activate(model.config().activation, z, n, nullptr, nullptr);
    if (skip_ends(blocks, layer)) s += skip;
  }
  return affine(model.weight(hidden), model.bias(hidden), s, n);
}

Matrix forward_stacked(const Model& model, const Matrix& points, bool with_grad) {
  const std::vector<Matrix> dirs = with_grad ? unit_directions(points.rows(), points.cols()) : std::vector<Matrix>{};
  return forward_directional(model, points, dirs);
}

EvalBatch forward(const Model& model, const Matrix& points) {
  return unstack(forward_stacked(model, points, false), points, false);
}

EvalBatch forward_with_input_grad(const Model& model, const Matrix& points) {
  return unstack(forward_stacked(model, points, true), points, true);
}

BoundModel bind(Tape& tape, const Model& model, bool trainable) {
  BoundModel net;
  net.model = &model;
  for (Index layer = 0; layer < model.num_layers(); ++layer) {
    net.weights.push_back(trainable ? tape.leaf(model.weight(layer)) : tape.constant(model.weight(layer)));
    net.biases.push_back(trainable ? tape.leaf(model.bias(layer)) : tape.constant(model.bias(layer)));
  }
  return net;
}

Var Jet::value() const { return ad::cols(stacked, 0, n); }

Var Jet::grad(Index j) const {
  if (j < 0 || j >= dims) throw ShapeError("Jet::grad: input index out of range");
  return ad::cols(stacked, n * (j + 1), n);
}

namespace {

Var record_affine(Tape& tape, const Var& w, const Var& b, const Var& in, Index n) {
  Matrix out = affine(w.value(), b.value().col(0), in.value(), n);
  return tape.record(std::move(out), {w, b, in}, [w, b, in, n](Tape& t, const Matrix& g) {
    if (t.requires_grad(w)) t.accumulate(w, g * in.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, g.leftCols(n).rowwise().sum());
    if (t.requires_grad(in)) t.accumulate(in, w.value().transpose() * g);
  });
}

Var record_activation(Tape& tape, Activation a, const Var& z, Index n) {
  Matrix d1, d2;
  if (!tape.requires_grad(z)) return tape.constant(activate(a, z.value(), n, nullptr, nullptr));
  const bool tangents = z.value().cols() > n;
  Matrix out = activate(a, z.value(), n, &d1, tangents ? &d2 : nullptr);
  return tape.record(std::move(out), {z}, [z, n, d1 = std::move(d1), d2 = std::move(d2)](Tape& t, const Matrix& g) {
    const Matrix& zv = z.value();
    const Index blocks = zv.cols() / n;
    const Index m = zv.rows() * n;
    Matrix adj(zv.rows(), zv.cols());
    double* a0 = adj.data();
    const double* p1 = d1.data();
    const double* g0 = g.data();
    for (Index i = 0; i < m; ++i) a0[i] = g0[i] * p1[i];
    for (Index b = 1; b < blocks; ++b) {
      const double* gb = g0 + b * m;
      const double* zb = zv.data() + b * m;
      const double* p2 = d2.data();
      double* ab = a0 + b * m;
      for (Index i = 0; i < m; ++i) {
        a0[i] += gb[i] * zb[i] * p2[i];
        ab[i] = gb[i] * p1[i];
      }
    }
    t.accumulate(z, std::move(adj));
  });
}

}  // namespace

Jet record_forward(Tape& tape, const BoundModel& net, const Matrix& points, const std::vector<Matrix>& directions) {
  const Model& model = *net.model;
  check_points(model, points);
  const Index n = points.rows();
  const auto blocks = residual_blocks(model.config());
  const Index hidden = model.config().hidden_layers;
  Var s = tape.constant(seed_input(points, directions));
  Var skip;
  for (Index layer = 0; layer < hidden; ++layer) {
    if (skip_starts(blocks, layer)) skip = s;
    const auto li = static_cast<std::size_t>(layer);
    Var z = record_affine(tape, net.weights[li], net.biases[li], s, n);
    s = record_activation(tape, model.config().activation, z, n);
    if (skip_ends(blocks, layer)) s = ad::operator+(s, skip);
  }
  const auto lo = static_cast<std::size_t>(hidden);
  Var out = record_affine(tape, net.weights[lo], net.biases[lo], s, n);
  return Jet{out, n, static_cast<Index>(directions.size())};
}

Jet record_forward(Tape& tape, const BoundModel& net, const Matrix& points, bool with_input_grad) {
  const std::vector<Matrix> dirs =
      with_input_grad ? unit_directions(points.rows(), points.cols()) : std::vector<Matrix>{};
  return record_forward(tape, net, points, dirs);
}

Vector param_gradient(const Tape& tape, const BoundModel& net) {
  const Model& model = *net.model;
  Vector grad(model.params().size());
  for (Index layer = 0; layer < model.num_layers(); ++layer) {
    const LayerSlot& slot = model.layout()[static_cast<std::size_t>(layer)];
    const Matrix gw = tape.grad(net.weights[static_cast<std::size_t>(layer)]);
    const Matrix gb = tape.grad(net.biases[static_cast<std::size_t>(layer)]);
    Eigen::Map<Matrix>(grad.data() + slot.weight_offset, slot.rows, slot.cols) = gw;
    grad.segment(slot.bias_offset, slot.rows) = gb.col(0);
  }
  return grad;
}

Vector backward_params(Tape& tape, const Var& loss, const BoundModel& net) {
  tape.backward(loss);
  return param_gradient(tape, net);
}

double steplr_gamma(long max_iter) {
  if (max_iter <= 2) return 1.0;
  return 1.0 - 2.0 / static_cast<double>(max_iter);
}

AdamState::AdamState(const AdamConfig& cfg, Index n)
    : config(cfg), first_moment(Vector::Zero(n)), second_moment(Vector::Zero(n)), learning_rate(cfg.learning_rate) {}

void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Vector& grads, const std::string& term) {
  if (params.size() != grads.size() || state.first_moment.size() != grads.size()) {
    throw ShapeError("adam_step: parameter/gradient/state lengths differ");
  }
  if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient in loss term '" + term + "'");
  const AdamConfig& c = state.config;
  ++state.step;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
  state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = state.learning_rate / bc1;
  params.array() -= step_size * state.first_moment.array() / ((state.second_moment.array() / bc2).sqrt() + c.epsilon);
  state.learning_rate = c.learning_rate * std::pow(c.gamma, static_cast<double>(state.step));
}

}  // namespace pwnn
