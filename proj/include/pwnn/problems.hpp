#ifndef PWNN_PROBLEMS_HPP
#define PWNN_PROBLEMS_HPP

// Problem catalog: manufactured solutions and forcings, sensor data, the
// Allen-Cahn spectral reference and the DeepRitz energy loss.

#include "pwnn/nnet.hpp"
#include "pwnn/quad.hpp"
#include "pwnn/testfn.hpp"
#include "pwnn/weakform.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

namespace pwnn {

enum class PdeKind { Poisson, AllenCahn, DiffusionCoefficientInverse, PoissonHighDim };

std::string to_string(PdeKind k);

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Interior measurements u^delta = u + N(0, sigma^2).
struct Sensors {
  Matrix points;
  Vector values;
  /// Noise-free values at the same points.
  Vector clean;
  double sigma = 0.0;
};

/// Everything a training run needs besides the seed. Problem constructors fill
/// in the published settings; the CLI overrides individual fields.
struct Hyperparameters {
  Index n_particles = 200;
  Index top_k = 150;
  Index k_int = 50;
  /// Boundary points per face (per time sample for periodic problems).
  Index n_bd_per_side = 1;
  /// Space-time problems: time samples per iteration, initial points, periodic time samples.
  Index n_times = 0;
  Index n_init = 0;
  Index n_periodic = 0;
  long max_iter = 20000;
  double learning_rate = 1e-3;
  RSchedule schedule;
  TestFunctionKind test_function = TestFunctionKind::Wendland;
  MeshgridLayout meshgrid_layout = MeshgridLayout::CellCentred;
  ModelConfig model;
  LossWeights weights;
  /// Evaluation snapshot cadence in iterations.
  long eval_every = 100;

  void validate() const;
};

/// Allen-Cahn solution on the periodic grid x_j = -1 + 2j/nx and t_n = n/nt.
struct AllenCahnReference {
  Vector x;
  Vector t;
  /// (nt + 1) x nx, row n at time t_n.
  Matrix u;

  /// Linear interpolation in t, periodic linear interpolation in x.
  double at(double time, double pos) const;
};

enum class AllenCahnStepper {
  /// Exact integration of diffusion, fourth-order exponential Runge-Kutta for the cubic term.
  Etdrk4,
  /// Implicit diffusion, explicit cubic, first order.
  SemiImplicitEuler,
};

/// Fourier pseudo-spectral solve of u_t = lambda u_xx - 5u^3 + 5u, u(0,x) = x^2 cos(pi x),
/// periodic on [-1, 1], with grid_nt steps up to t = 1. The solve runs on
/// oversample * grid_nx nodes and is sampled at the grid_nx output nodes: the
/// initial data has a slope jump at x = +-1 whose smoothing layer, of width
/// sqrt(lambda t), is far below the output spacing for most of the interval.
/// Throws ConfigError for grid_nx < 256 or grid_nt < 1000.
AllenCahnReference allen_cahn_reference(Index grid_nx, Index grid_nt, double lambda = 1e-4,
                                        AllenCahnStepper stepper = AllenCahnStepper::Etdrk4, Index oversample = 16);

/// Columns t, x, u.
void write_reference_csv(std::ostream& out, const AllenCahnReference& ref);

struct ProblemSpec {
  std::string name;
  PdeKind kind = PdeKind::Poisson;
  /// Spatial domain.
  HyperRect domain;
  /// Final time for space-time problems; inputs are then (t, x).
  std::optional<double> t_final;
  /// Exact solution on network inputs; empty when only a reference exists.
  Field exact_solution;
  Field forcing;
  /// Dirichlet data on spatial points.
  Field boundary_fn;
  /// u(0, x) on spatial points.
  Field init_fn;
  /// Inverse problem: the coefficient to recover.
  Field exact_coefficient;
  std::optional<Sensors> sensors;
  /// Fixed boundary sensor locations (inverse problem); empty means resample each iteration.
  Matrix boundary_sensors;
  /// Diffusion constant of the Allen-Cahn equation.
  double diffusion = 0.0;
  std::shared_ptr<const AllenCahnReference> reference;
  Hyperparameters defaults;

  Index space_dim() const { return domain.dim(); }
  Index input_dim() const { return domain.dim() + (t_final ? 1 : 0); }
};

/// -u'' = f on (-1, 1) with u = x cos(omega x).
ProblemSpec poisson1d_spec(double omega);

/// u_t - lambda u_xx + 5u^3 - 5u = 0, periodic, u(0,x) = x^2 cos(pi x).
/// The reference is computed at (reference_nx, reference_nt) and cached per resolution.
ProblemSpec allen_cahn_spec(Index reference_nx = 256, Index reference_nt = 1000);

/// Seed that fixes the inverse-problem coefficient (sigma_1, sigma_2, x_1, y_1).
inline constexpr std::uint64_t kInverseCoefficientSeed = 20240101;

/// -div(a grad u) = f on [-1,1]^2 with u = sin(pi x) sin(pi y) and a Gaussian bump
/// a = 0.1 + exp(-(x-x1)^2/s1 - (y-y1)^2/s2). Sensor noise is drawn from `noise_seed`.
ProblemSpec inverse_spec(double noise_sigma, std::uint64_t noise_seed,
                         std::uint64_t coefficient_seed = kInverseCoefficientSeed);

struct BumpParameters {
  double sigma1, sigma2, x1, y1;
};
BumpParameters inverse_bump_parameters(std::uint64_t coefficient_seed);

/// -Laplace u = sum_i x_i sin(pi x_{i+1}) (cyclic) on [-1,1]^d with
/// u = (1/pi^2) sum_i x_i sin(pi x_{i+1}).
ProblemSpec highdim_spec(Index d);

/// Builds a spec by catalog name ("poisson1d", "allen_cahn", "inverse", "highdim") and parameters.
struct ProblemParams {
  double omega = 2.0 * 3.14159265358979323846;
  Index dim = 5;
  double noise_sigma = 0.01;
  std::uint64_t noise_seed = 0;
  std::uint64_t coefficient_seed = kInverseCoefficientSeed;
  Index reference_nx = 256;
  Index reference_nt = 1000;
};
ProblemSpec make_problem(const std::string& name, const ProblemParams& params);

/// |Omega| mean_j [0.5 |grad u(x_j)|^2 - f(x_j) u(x_j)] + boundary_weight mean_b (u(x_b) - g(x_b))^2
Var deepritz_loss(Tape& tape, const BoundModel& net, const Matrix& interior_points, const Matrix& boundary_points,
                  const ProblemSpec& spec, double boundary_weight);

}  // namespace pwnn

#endif  // PWNN_PROBLEMS_HPP
