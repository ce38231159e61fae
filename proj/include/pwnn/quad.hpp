#ifndef PWNN_QUAD_HPP
#define PWNN_QUAD_HPP

// Box domains, the unit-ball meshgrid rule, particle and boundary sampling,
// and the R_max schedule.

#include "pwnn/common.hpp"
#include "pwnn/random.hpp"

#include <string>

namespace pwnn {

struct HyperRect {
  Vector lower;
  Vector upper;

  HyperRect() = default;
  HyperRect(Vector lower, Vector upper);
  /// [lo, hi]^d
  static HyperRect cube(Index d, double lo, double hi);

  Index dim() const { return lower.size(); }
  double volume() const;
  /// Shortest side length.
  double min_side() const;
  bool contains(const Eigen::Ref<const RowVector>& x, double tol = 0.0) const;
  void validate() const;
};

/// Volume of the unit ball in R^d, pi^{d/2} / Gamma(d/2 + 1).
double unit_ball_volume(Index d);

enum class MeshgridLayout {
  /// Centres of the n^d cells of [-1,1]^d.
  CellCentred,
  /// Vertices -1 + 2j/n, j = 0..n per axis, filtered in double precision. This
  /// reproduces the node counts 1233 (d=5, n=6), 1161 (d=10, n=4), 60 (d=2, n=9).
  Vertex,
};

std::string to_string(MeshgridLayout layout);
MeshgridLayout meshgrid_layout_from_string(const std::string& name);

struct BallQuadrature {
  /// K x d, every row strictly inside the unit ball.
  Matrix nodes;
  Vector weights;
  double volume = 0.0;
  Index n_per_axis = 0;
  MeshgridLayout layout = MeshgridLayout::CellCentred;

  Index size() const { return nodes.rows(); }
  Index dim() const { return nodes.cols(); }

  /// volume * sum_k w_k f(s_k) / K for f taking a row vector.
  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (Index k = 0; k < size(); ++k) acc += weights(k) * f(RowVector(nodes.row(k)));
    return volume * acc / static_cast<double>(size());
  }
};

/// Number of grid nodes with n_per_axis cells per axis lying in the open unit ball.
Index meshgrid_count(Index d, Index n_per_axis, MeshgridLayout layout = MeshgridLayout::CellCentred);

/// Uniform grid over [-1,1]^d restricted to |s| < 1, unit weights.
BallQuadrature unit_ball_meshgrid(Index d, Index n_per_axis, MeshgridLayout layout = MeshgridLayout::CellCentred);

/// n_per_axis whose retained count is closest to `target` (smaller n on ties).
Index meshgrid_for_count(Index d, Index target, MeshgridLayout layout = MeshgridLayout::CellCentred);

enum class RStrategy { Descending, Fixed, Ascending };

std::string to_string(RStrategy s);
RStrategy r_strategy_from_string(const std::string& name);

struct RSchedule {
  RStrategy kind = RStrategy::Descending;
  double r_min = 1e-6;
  double r_max_init = 1e-4;
  /// Terminal value for Descending, starting value for Ascending.
  double r_bound = 1e-6;
  long max_iter = 20000;

  void validate() const;
};

/// R_max at iteration `iter`; iterations past max_iter clamp to the terminal value.
double r_max_at(const RSchedule& schedule, long iter);

struct ParticleSet {
  Matrix centers;
  Vector radii;

  Index size() const { return radii.size(); }
};

/// Radii ~ U[r_min, R_max(iter)], then each centre uniform on the box shrunk by its radius.
ParticleSet sample_particles(const HyperRect& domain, Index n_particles, const RSchedule& schedule, long iter,
                             Rng& rng);

/// n_per_side uniform points on each face, faces ordered (x_0 = lower, x_0 = upper, x_1 = lower, ...).
Matrix boundary_points(const HyperRect& domain, Index n_per_side, Rng& rng);

/// n uniform points in the box.
Matrix uniform_points(const HyperRect& domain, Index n, Rng& rng);

/// Tensor grid with `per_axis` equally spaced points per axis, endpoints included.
Matrix grid_points(const HyperRect& domain, Index per_axis);

/// Rows s_k R + center.
Matrix map_nodes(const BallQuadrature& quad, const Eigen::Ref<const RowVector>& center, double R);

}  // namespace pwnn

#endif  // PWNN_QUAD_HPP
