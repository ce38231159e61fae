#ifndef PWNN_NNET_HPP
#define PWNN_NNET_HPP

// Fully connected / residual networks used as trial functions.
//
// Points are rows on the public surface (n x input_dim). Internally a batch is
// stored column-per-point, and the input Jacobian is carried alongside the
// values as extra column blocks:
//
//     S = [ Z | dZ/dx_1 | ... | dZ/dx_d ]      (features x n(d+1))
//
// so a layer is one GEMM over all blocks, the bias touches block 0 only, and the
// activation maps block 0 through sigma and scales the tangent blocks by sigma'.

#include "pwnn/common.hpp"
#include "pwnn/tape.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pwnn {

enum class Activation {
  Tanh,
  Sin,
  /// tanh(sin(x))
  TanhSinComposite,
  /// sin(tanh(x)); the other composition order.
  SinTanhComposite,
  Identity,
};

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// sigma, sigma' and sigma'' at x.
struct ActivationJet {
  double value, d1, d2;
};
ActivationJet activation_jet(Activation a, double x);

struct ModelConfig {
  Index input_dim = 1;
  Index output_dim = 1;
  Index hidden_layers = 4;
  Index width = 50;
  Activation activation = Activation::Tanh;
  bool residual_connections = true;

  void validate() const;
  Index param_count() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Location of one affine layer inside the flat parameter vector. Weights are
/// stored column-major (rows = fan-out) and followed by the bias.
struct LayerSlot {
  Index rows = 0;
  Index cols = 0;
  Index weight_offset = 0;
  Index bias_offset = 0;
};

std::vector<LayerSlot> layer_layout(const ModelConfig& config);

/// Hidden layers that receive an identity skip around them, as (first, last)
/// pairs of hidden-layer indices. Layer 0 lifts the input to the hidden width
/// and is never skipped; the remaining hidden layers are grouped in pairs, and a
/// trailing unpaired layer gets a single-layer skip.
std::vector<std::pair<Index, Index>> residual_blocks(const ModelConfig& config);

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, Vector params);

  static Model zeros(const ModelConfig& config);
  /// Glorot-uniform weights, zero biases.
  static Model glorot(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vector& params() const { return params_; }
  void set_params(Vector params);
  /// Mutable access for the optimizer; the length must not change.
  Eigen::Ref<Vector> mutable_params() { return params_; }

  const std::vector<LayerSlot>& layout() const { return layout_; }
  /// Number of affine layers (hidden layers + output layer).
  Index num_layers() const { return static_cast<Index>(layout_.size()); }
  Eigen::Map<const Matrix> weight(Index layer) const;
  Eigen::Map<const Vector> bias(Index layer) const;

  /// Throws NumericError when a parameter is NaN/inf.
  void check_finite() const;

 private:
  ModelConfig config_;
  Vector params_;
  std::vector<LayerSlot> layout_;
};

/// Values (n x output_dim) and, when requested, input gradients:
/// input_grads[j](n, o) = d output_o / d input_j at point n.
struct EvalBatch {
  Matrix points;
  Matrix values;
  std::vector<Matrix> input_grads;

  bool has_input_grads() const { return !input_grads.empty(); }
  double input_grad(Index point, Index output, Index input) const { return input_grads.at(input)(point, output); }
};

EvalBatch forward(const Model& model, const Matrix& points);
EvalBatch forward_with_input_grad(const Model& model, const Matrix& points);

/// Raw stacked evaluation without a tape: output_dim x n(d+1) when `with_grad`,
/// output_dim x n otherwise. Shares its kernels with the recorded path.
Matrix forward_stacked(const Model& model, const Matrix& points, bool with_grad);

/// Values plus one directional derivative per entry of `directions` (each
/// n x input_dim, row i the direction at point i): output_dim x n(1 + m).
/// With unit directions this is forward_stacked(..., true).
Matrix forward_directional(const Model& model, const Matrix& points, const std::vector<Matrix>& directions);

// ---------------------------------------------------------------------------
// Recorded evaluation

/// Parameter leaves of one model on a tape.
struct BoundModel {
  const Model* model = nullptr;
  std::vector<Var> weights;
  std::vector<Var> biases;
};

/// Puts the parameters on the tape, as leaves when `trainable`, else as constants
/// (evaluation only: no derivative buffers are kept).
BoundModel bind(Tape& tape, const Model& model, bool trainable = true);

/// Recorded network output for a batch of n points.
struct Jet {
  Var stacked;
  Index n = 0;
  Index dims = 0;

  /// output_dim x n
  Var value() const;
  /// output_dim x n: derivative along input j, or along direction j for a
  /// directional evaluation.
  Var grad(Index j) const;
};

/// Records forward evaluation on the tape. `points` is n x input_dim.
Jet record_forward(Tape& tape, const BoundModel& net, const Matrix& points, bool with_input_grad);
/// Records values and directional derivatives (see forward_directional).
Jet record_forward(Tape& tape, const BoundModel& net, const Matrix& points, const std::vector<Matrix>& directions);

/// Runs backward() from `loss` and returns d loss / d theta in the canonical
/// parameter order of `net.model`.
Vector backward_params(Tape& tape, const Var& loss, const BoundModel& net);
/// Gradient of an already swept tape with respect to the bound parameters.
Vector param_gradient(const Tape& tape, const BoundModel& net);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Multiplied into the learning rate after every step (StepLR, step size 1).
  double gamma = 1.0;
};

/// gamma = 1 - 2 / max_iter, so that the rate decays by about e^-2 over a run.
double steplr_gamma(long max_iter);

struct AdamState {
  AdamConfig config;
  Vector first_moment;
  Vector second_moment;
  long step = 0;
  double learning_rate = 0.0;

  AdamState() = default;
  AdamState(const AdamConfig& config, Index n);
};

/// One Adam update with bias correction, followed by the learning-rate decay.
/// `term` names the loss contribution in the diagnostic when grads are not finite.
void adam_step(AdamState& state, Eigen::Ref<Vector> params, const Vector& grads, const std::string& term = "loss");

}  // namespace pwnn

#endif  // PWNN_NNET_HPP
