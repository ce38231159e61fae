#ifndef PWNN_WEAKFORM_HPP
#define PWNN_WEAKFORM_HPP

// Weak residuals against the particle test functions, and the loss terms.
//
// For particle i with centre c_i and radius R_i the quadrature nodes are
// x_k = s_k R_i + c_i, and a residual is (1/K) sum_k w_k [ ... ] with the R_i^d
// and ball-volume prefactors dropped. grad_x phi_i(x_k) is assembled from the
// reference node, phi'(|s_k|) s_k / (|s_k| R_i), which avoids the cancellation in
// x_k - c_i when R_i is tiny.

#include "pwnn/nnet.hpp"
#include "pwnn/quad.hpp"
#include "pwnn/testfn.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace pwnn {

/// Scalar field evaluated at the rows of an n x dim matrix.
using Field = std::function<Vector(const Matrix& points)>;

/// A scalar trial function on the tape: values and directional derivatives at
/// the rows of `points`, laid out as record_forward does (1 x n(1 + m)).
using Trial = std::function<Jet(Tape& tape, const Matrix& points, const std::vector<Matrix>& directions)>;

Trial as_trial(const BoundModel& net);

/// phi and grad phi on the reference nodes, shared by every particle.
struct TestFunctionTable {
  Vector phi;
  /// K x d, phi'(|s_k|) s_k / |s_k|; zero at the centre.
  Matrix radial_grad;
  Vector weights;
  Vector norms;

  Index size() const { return phi.size(); }
};

TestFunctionTable tabulate(const BallQuadrature& quad, const TestFunction& fn);

/// Per-particle weak residuals, 1 x N on the tape.
struct ResidualBatch {
  Var residuals;

  Index size() const { return residuals.cols(); }
  Vector values() const { return residuals.value().row(0).transpose(); }
};

/// Particles with a time coordinate each (space-time problems).
struct TimedParticles {
  Vector times;
  ParticleSet particles;

  Index size() const { return times.size(); }
};

/// N_t times with their own particle sets, flattened time-major.
TimedParticles flatten_times(const Vector& times, const std::vector<ParticleSet>& per_time);

ParticleSet subset(const ParticleSet& p, const std::vector<Index>& indices);
TimedParticles subset(const TimedParticles& p, const std::vector<Index>& indices);

/// Stacked quadrature points of all particles, particle-major (N K x d).
Matrix particle_points(const ParticleSet& particles, const BallQuadrature& quad);

/// (1/K) sum_k w_k [grad u . grad phi_i - f phi_i]
ResidualBatch residual_poisson(Tape& tape, const Trial& u, const ParticleSet& particles, const BallQuadrature& quad,
                               const TestFunction& fn, const Field& forcing);
ResidualBatch residual_poisson(Tape& tape, const BoundModel& u, const ParticleSet& particles,
                               const BallQuadrature& quad, const TestFunction& fn, const Field& forcing);

/// (1/K) sum_k w_k [a grad u . grad phi_i - f phi_i]; gradients reach both models.
ResidualBatch residual_diffusion_coefficient(Tape& tape, const Trial& u, const Trial& a,
                                             const ParticleSet& particles, const BallQuadrature& quad,
                                             const TestFunction& fn, const Field& forcing);
ResidualBatch residual_diffusion_coefficient(Tape& tape, const BoundModel& u, const BoundModel& a,
                                             const ParticleSet& particles, const BallQuadrature& quad,
                                             const TestFunction& fn, const Field& forcing);

/// (1/K) sum_k w_k [(u_t + 5u^3 - 5u) phi_i + lambda u_x . grad_x phi_i] at (t_i, x_k).
/// The trial input is (t, x).
ResidualBatch residual_allen_cahn(Tape& tape, const Trial& u, const TimedParticles& particles,
                                  const BallQuadrature& quad, const TestFunction& fn, double lambda);
ResidualBatch residual_allen_cahn(Tape& tape, const BoundModel& u, const TimedParticles& particles,
                                  const BallQuadrature& quad, const TestFunction& fn, double lambda);

/// Indices of the k largest squared residuals, ties to the lower index, in
/// decreasing order of the square.
std::vector<Index> select_topk(const Vector& residuals, Index k);

/// Mean of the k largest squared residuals. Selection is not differentiated.
Var loss_interior(const ResidualBatch& batch, Index top_k);

/// Mean squared mismatch u(x_j) - target_j.
Var loss_boundary(Tape& tape, const Trial& u, const Matrix& points, const Vector& target);
/// Same reduction for interior sensor data.
Var loss_data(Tape& tape, const Trial& u, const Matrix& points, const Vector& target);
/// Mean squared mismatch of u(0, x_j) against target_j; trial input (t, x).
Var loss_initial(Tape& tape, const Trial& u, const Matrix& x_points, const Vector& target);
/// mean_t [u(t,lo) - u(t,hi)]^2 + [u_x(t,lo) - u_x(t,hi)]^2 for a (t, x) trial on x in [lo, hi].
Var loss_periodic(Tape& tape, const Trial& u, const Vector& times, double lo, double hi);

struct LossWeights {
  double interior = 1.0;
  /// Dirichlet and periodic boundary terms.
  double boundary = 5.0;
  double initial = 0.0;
  double data = 0.0;

  void validate() const;
};

struct LossComponents {
  std::optional<Var> interior;
  std::optional<Var> boundary;
  std::optional<Var> periodic;
  std::optional<Var> initial;
  std::optional<Var> data;
};

/// Weighted sum of the present components; absent ones contribute exactly 0.
Var total_loss(Tape& tape, const LossWeights& weights, const LossComponents& parts);

}  // namespace pwnn

#endif  // PWNN_WEAKFORM_HPP
