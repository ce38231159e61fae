#include "pwnn/weakform.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace pwnn {

TestFunctionTable tabulate(const BallQuadrature& quad, const TestFunction& fn) {
  fn.validate();
  if (fn.dim != quad.dim()) {
    throw ShapeError("tabulate: test function of dimension " + std::to_string(fn.dim) + " on a " +
                     std::to_string(quad.dim()) + "-dimensional quadrature");
  }
  const Index K = quad.size();
  TestFunctionTable t;
  t.phi.resize(K);
  t.radial_grad = Matrix::Zero(K, quad.dim());
  t.weights = quad.weights;
  t.norms = quad.nodes.rowwise().norm();
  for (Index k = 0; k < K; ++k) {
    const double r = t.norms(k);
    t.phi(k) = csrbf_value(fn, r);
    if (r > 0.0) t.radial_grad.row(k) = quad.nodes.row(k) * (csrbf_dr(fn, r) / r);
  }
  return t;
}

TimedParticles flatten_times(const Vector& times, const std::vector<ParticleSet>& per_time) {
  if (static_cast<std::size_t>(times.size()) != per_time.size()) {
    throw ShapeError("flatten_times: " + std::to_string(times.size()) + " times but " +
                     std::to_string(per_time.size()) + " particle sets");
  }
  Index total = 0;
  for (const ParticleSet& p : per_time) total += p.size();
  const Index d = per_time.empty() ? 0 : per_time.front().centers.cols();
  TimedParticles out;
  out.times.resize(total);
  out.particles.centers.resize(total, d);
  out.particles.radii.resize(total);
  Index row = 0;
  for (std::size_t j = 0; j < per_time.size(); ++j) {
    const ParticleSet& p = per_time[j];
    out.times.segment(row, p.size()).setConstant(times(static_cast<Index>(j)));
    out.particles.centers.middleRows(row, p.size()) = p.centers;
    out.particles.radii.segment(row, p.size()) = p.radii;
    row += p.size();
  }
  return out;
}

ParticleSet subset(const ParticleSet& p, const std::vector<Index>& indices) {
  ParticleSet out;
  out.centers.resize(static_cast<Index>(indices.size()), p.centers.cols());
  out.radii.resize(static_cast<Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index i = indices[k];
    if (i < 0 || i >= p.size()) throw ContractError("subset: particle index " + std::to_string(i) + " out of range");
    out.centers.row(static_cast<Index>(k)) = p.centers.row(i);
    out.radii(static_cast<Index>(k)) = p.radii(i);
  }
  return out;
}

TimedParticles subset(const TimedParticles& p, const std::vector<Index>& indices) {
  TimedParticles out;
  out.particles = subset(p.particles, indices);
  out.times.resize(static_cast<Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) out.times(static_cast<Index>(k)) = p.times(indices[k]);
  return out;
}

Trial as_trial(const BoundModel& net) {
  return [net](Tape& tape, const Matrix& points, const std::vector<Matrix>& directions) {
    return record_forward(tape, net, points, directions);
  };
}

Matrix particle_points(const ParticleSet& particles, const BallQuadrature& quad) {
  const Index K = quad.size();
  const Index d = quad.dim();
  if (particles.centers.cols() != d) {
    throw ShapeError("particle_points: particles in " + std::to_string(particles.centers.cols()) +
                     " dimensions, quadrature in " + std::to_string(d));
  }
  Matrix x(particles.size() * K, d);
  for (Index i = 0; i < particles.size(); ++i) {
    x.middleRows(i * K, K) = map_nodes(quad, particles.centers.row(i), particles.radii(i));
  }
  return x;
}

namespace {

using ad::operator+;
using ad::operator-;
using ad::operator*;

// Runs the trial and checks the stacked layout.
Jet evaluate(Tape& tape, const Trial& u, const Matrix& points, const std::vector<Matrix>& directions,
             const char* who) {
  Jet jet = u(tape, points, directions);
  const Index expect = points.rows() * static_cast<Index>(1 + directions.size());
  if (jet.stacked.rows() != 1 || jet.stacked.cols() != expect) {
    throw ShapeError(std::string(who) + ": trial returned " + shape_str(jet.stacked.rows(), jet.stacked.cols()) +
                     ", expected a single output of " + shape_str(1, expect));
  }
  return jet;
}

// grad_x phi_i at every node of every particle, N K x d.
Matrix testfn_gradients(const ParticleSet& particles, const TestFunctionTable& table) {
  const Index K = table.size();
  const Index d = table.radial_grad.cols();
  Matrix g(particles.size() * K, d);
  for (Index i = 0; i < particles.size(); ++i) {
    const double R = particles.radii(i);
    if (!(R > 0.0)) throw ContractError("particle " + std::to_string(i) + " has non-positive radius");
    for (Index k = 0; k < K; ++k) {
      if (table.norms(k) * R < kCenterEps) {
        g.row(i * K + k).setZero();
      } else {
        g.row(i * K + k) = table.radial_grad.row(k) / R;
      }
    }
  }
  return g;
}

// 1 x N K row of f(x_k) phi(s_k); failures name the particle.
Matrix forcing_times_phi(const Field& forcing, const Matrix& points, Index n_particles, const TestFunctionTable& table) {
  const Index K = table.size();
  Matrix out(1, n_particles * K);
  for (Index i = 0; i < n_particles; ++i) {
    Vector f;
    try {
      f = forcing(points.middleRows(i * K, K));
    } catch (const std::exception& e) {
      throw NumericError("forcing evaluation failed at particle " + std::to_string(i) + ": " + e.what());
    }
    if (f.size() != K) {
      throw ShapeError("forcing returned " + std::to_string(f.size()) + " values for " + std::to_string(K) +
                       " points at particle " + std::to_string(i));
    }
    if (!f.allFinite()) throw NumericError("forcing is not finite at particle " + std::to_string(i));
    out.middleCols(i * K, K) = f.cwiseProduct(table.phi).transpose();
  }
  return out;
}

Matrix repeat_row(const Vector& v, Index times) { return v.transpose().replicate(1, times); }

// (1/K) segment sums of w_k * integrand.
ResidualBatch reduce(const Var& integrand, const TestFunctionTable& table, Index n_particles) {
  const Index K = table.size();
  Var weighted = ad::cmul(integrand, repeat_row(table.weights, n_particles));
  return ResidualBatch{(1.0 / static_cast<double>(K)) * ad::segment_sum(weighted, K)};
}

void require_particles(Index n, const char* who) {
  if (n < 1) throw ContractError(std::string(who) + ": no particles");
}

}  // namespace

ResidualBatch residual_poisson(Tape& tape, const Trial& u, const ParticleSet& particles, const BallQuadrature& quad,
                               const TestFunction& fn, const Field& forcing) {
  require_particles(particles.size(), "residual_poisson");
  const TestFunctionTable table = tabulate(quad, fn);
  const Matrix x = particle_points(particles, quad);
  const Matrix fphi = forcing_times_phi(forcing, x, particles.size(), table);
  const Jet jet = evaluate(tape, u, x, {testfn_gradients(particles, table)}, "residual_poisson");
  return reduce(ad::add(jet.grad(0), -fphi), table, particles.size());
}

ResidualBatch residual_poisson(Tape& tape, const BoundModel& u, const ParticleSet& particles,
                               const BallQuadrature& quad, const TestFunction& fn, const Field& forcing) {
  return residual_poisson(tape, as_trial(u), particles, quad, fn, forcing);
}

ResidualBatch residual_diffusion_coefficient(Tape& tape, const Trial& u, const Trial& a,
                                             const ParticleSet& particles, const BallQuadrature& quad,
                                             const TestFunction& fn, const Field& forcing) {
  const char* who = "residual_diffusion_coefficient";
  require_particles(particles.size(), who);
  const TestFunctionTable table = tabulate(quad, fn);
  const Matrix x = particle_points(particles, quad);
  const Matrix fphi = forcing_times_phi(forcing, x, particles.size(), table);
  const Jet ju = evaluate(tape, u, x, {testfn_gradients(particles, table)}, who);
  const Jet ja = evaluate(tape, a, x, {}, who);
  return reduce(ad::add(ad::cmul(ja.value(), ju.grad(0)), -fphi), table, particles.size());
}

ResidualBatch residual_diffusion_coefficient(Tape& tape, const BoundModel& u, const BoundModel& a,
                                             const ParticleSet& particles, const BallQuadrature& quad,
                                             const TestFunction& fn, const Field& forcing) {
  return residual_diffusion_coefficient(tape, as_trial(u), as_trial(a), particles, quad, fn, forcing);
}

ResidualBatch residual_allen_cahn(Tape& tape, const Trial& u, const TimedParticles& tp, const BallQuadrature& quad,
                                  const TestFunction& fn, double lambda) {
  require_particles(tp.size(), "residual_allen_cahn");
  if (tp.times.size() != tp.particles.size()) throw ShapeError("residual_allen_cahn: times/particles mismatch");
  const Index d = quad.dim();
  const TestFunctionTable table = tabulate(quad, fn);
  const Index K = table.size();
  const Index n = tp.size();
  const Matrix x = particle_points(tp.particles, quad);
  const Matrix gphi = testfn_gradients(tp.particles, table);
  Matrix tx(n * K, d + 1);
  Matrix dir(n * K, d + 1);
  for (Index i = 0; i < n; ++i) {
    tx.block(i * K, 0, K, 1).setConstant(tp.times(i));
    dir.block(i * K, 0, K, 1) = table.phi;
  }
  tx.rightCols(d) = x;
  dir.rightCols(d) = lambda * gphi;
  const Jet jet = evaluate(tape, u, tx, {dir}, "residual_allen_cahn");
  const Var v = jet.value();
  const Var reaction = 5.0 * ad::cube(v) - 5.0 * v;
  const Var integrand = jet.grad(0) + ad::cmul(reaction, repeat_row(table.phi, n));
  return reduce(integrand, table, n);
}

ResidualBatch residual_allen_cahn(Tape& tape, const BoundModel& u, const TimedParticles& tp,
                                  const BallQuadrature& quad, const TestFunction& fn, double lambda) {
  return residual_allen_cahn(tape, as_trial(u), tp, quad, fn, lambda);
}

std::vector<Index> select_topk(const Vector& residuals, Index k) {
  const Index n = residuals.size();
  if (k < 1 || k > n) {
    throw ContractError("topK=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const Vector sq = residuals.array().square();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sq(a) > sq(b); });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

Var loss_interior(const ResidualBatch& batch, Index top_k) {
  const std::vector<Index> keep = select_topk(batch.values(), top_k);
  return ad::mean(ad::gather_cols(ad::square(batch.residuals), keep));
}

namespace {

Var mean_square_mismatch(Tape& tape, const Trial& u, const Matrix& points, const Vector& target, const char* who) {
  if (target.size() != points.rows()) {
    throw ShapeError(std::string(who) + ": " + std::to_string(points.rows()) + " points but " +
                     std::to_string(target.size()) + " target values");
  }
  if (points.rows() == 0) throw ContractError(std::string(who) + ": no points");
  const Jet jet = evaluate(tape, u, points, {}, who);
  return ad::mean(ad::square(ad::add(jet.value(), -Matrix(target.transpose()))));
}

}  // namespace

Var loss_boundary(Tape& tape, const Trial& u, const Matrix& points, const Vector& target) {
  return mean_square_mismatch(tape, u, points, target, "loss_boundary");
}

Var loss_data(Tape& tape, const Trial& u, const Matrix& points, const Vector& target) {
  return mean_square_mismatch(tape, u, points, target, "loss_data");
}

Var loss_initial(Tape& tape, const Trial& u, const Matrix& x_points, const Vector& target) {
  Matrix tx(x_points.rows(), x_points.cols() + 1);
  tx.col(0).setZero();
  tx.rightCols(x_points.cols()) = x_points;
  return mean_square_mismatch(tape, u, tx, target, "loss_initial");
}

Var loss_periodic(Tape& tape, const Trial& u, const Vector& times, double lo, double hi) {
  const Index n = times.size();
  if (n == 0) throw ContractError("loss_periodic: no time samples");
  Matrix pts(2 * n, 2);
  pts.col(0) << times, times;
  pts.col(1).head(n).setConstant(lo);
  pts.col(1).tail(n).setConstant(hi);
  Matrix ex = Matrix::Zero(2 * n, 2);
  ex.col(1).setOnes();
  const Jet jet = evaluate(tape, u, pts, {ex}, "loss_periodic");
  const Var v = jet.value();
  const Var g = jet.grad(0);
  const Var dv = ad::cols(v, 0, n) - ad::cols(v, n, n);
  const Var dg = ad::cols(g, 0, n) - ad::cols(g, n, n);
  return ad::mean(ad::square(dv) + ad::square(dg));
}

void LossWeights::validate() const {
  if (!(interior >= 0.0 && boundary >= 0.0 && initial >= 0.0 && data >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

Var total_loss(Tape& tape, const LossWeights& weights, const LossComponents& parts) {
  weights.validate();
  Var total = tape.constant(scalar_matrix(0.0));
  auto add = [&](const std::optional<Var>& term, double w) {
    if (term) total = total + w * *term;
  };
  add(parts.interior, weights.interior);
  add(parts.boundary, weights.boundary);
  add(parts.periodic, weights.boundary);
  add(parts.initial, weights.initial);
  add(parts.data, weights.data);
  return total;
}

}  // namespace pwnn
