#include "pwnn/quad.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace pwnn {

HyperRect::HyperRect(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

HyperRect HyperRect::cube(Index d, double lo, double hi) {
  return HyperRect(Vector::Constant(d, lo), Vector::Constant(d, hi));
}

double HyperRect::volume() const { return (upper - lower).prod(); }

double HyperRect::min_side() const { return (upper - lower).minCoeff(); }

bool HyperRect::contains(const Eigen::Ref<const RowVector>& x, double tol) const {
  if (x.size() != dim()) return false;
  for (Index j = 0; j < dim(); ++j) {
    if (x(j) < lower(j) - tol || x(j) > upper(j) + tol) return false;
  }
  return true;
}

void HyperRect::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw ConfigError("HyperRect: bounds have sizes " + std::to_string(lower.size()) + " and " +
                      std::to_string(upper.size()));
  }
  for (Index j = 0; j < lower.size(); ++j) {
    if (!(lower(j) < upper(j))) {
      throw ConfigError("HyperRect: lower[" + std::to_string(j) + "] must be below upper[" + std::to_string(j) + "]");
    }
  }
}

double unit_ball_volume(Index d) {
  if (d < 0) throw ContractError("unit_ball_volume: negative dimension");
  // V_d = V_{d-2} 2 pi / d
  double v = d % 2 == 0 ? 1.0 : 2.0;
  for (Index k = d % 2 == 0 ? 2 : 3; k <= d; k += 2) v *= 2.0 * std::numbers::pi / static_cast<double>(k);
  return v;
}

namespace {

// Cell centres (2j + 1 - n)/n are tested in integers, so the set is exactly
// symmetric and exactly inside the open ball.
template <typename Visit>
void walk_cells(Index d, Index n, Index axis, long long norm2, RowVector& s, Visit& visit) {
  if (axis == d) {
    visit(s);
    return;
  }
  const long long limit = static_cast<long long>(n) * n;
  for (Index j = 0; j < n; ++j) {
    const long long m = 2 * static_cast<long long>(j) + 1 - n;
    const long long next = norm2 + m * m;
    if (next >= limit) continue;
    s(axis) = static_cast<double>(m) / static_cast<double>(n);
    walk_cells(d, n, axis + 1, next, s, visit);
  }
}

// Vertex j of the n-cell grid as a linspace builds it: -1 + j (2/n), the last
// one pinned to 1. The filter sums squares in axis order in double precision, so
// vertices exactly on the sphere land on either side of 1 by rounding; this is
// what yields 1233 nodes for d=5, n=6. Such vertices sit at r = 1 where phi and
// phi' vanish.
double grid_vertex(Index j, Index n) {
  if (j == n) return 1.0;
  return -1.0 + static_cast<double>(j) * (2.0 / static_cast<double>(n));
}

template <typename Visit>
void walk_vertices(Index d, Index n, Index axis, double norm2, RowVector& s, Visit& visit) {
  if (axis == d) {
    visit(s);
    return;
  }
  for (Index j = 0; j <= n; ++j) {
    const double c = grid_vertex(j, n);
    const double next = norm2 + c * c;
    if (!(next < 1.0)) continue;
    s(axis) = c;
    walk_vertices(d, n, axis + 1, next, s, visit);
  }
}

template <typename Visit>
void walk_ball(Index d, Index n, MeshgridLayout layout, Visit& visit) {
  RowVector s(d);
  if (layout == MeshgridLayout::CellCentred) {
    walk_cells(d, n, 0, 0LL, s, visit);
  } else {
    walk_vertices(d, n, 0, 0.0, s, visit);
  }
}

void check_meshgrid_args(Index d, Index n) {
  if (d < 1) throw ConfigError("unit_ball_meshgrid: dimension must be >= 1, got " + std::to_string(d));
  if (n < 2) throw ConfigError("unit_ball_meshgrid: n_per_axis must be >= 2, got " + std::to_string(n));
}

Index min_feasible_n(Index d, MeshgridLayout layout) {
  for (Index n = 2;; ++n) {
    if (meshgrid_count(d, n, layout) > 0) return n;
  }
}

}  // namespace

Index meshgrid_count(Index d, Index n_per_axis, MeshgridLayout layout) {
  check_meshgrid_args(d, n_per_axis);
  Index count = 0;
  auto visit = [&](const RowVector&) { ++count; };
  walk_ball(d, n_per_axis, layout, visit);
  return count;
}

BallQuadrature unit_ball_meshgrid(Index d, Index n_per_axis, MeshgridLayout layout) {
  check_meshgrid_args(d, n_per_axis);
  std::vector<double> flat;
  auto visit = [&](const RowVector& p) { flat.insert(flat.end(), p.data(), p.data() + d); };
  walk_ball(d, n_per_axis, layout, visit);
  const Index k = static_cast<Index>(flat.size()) / d;
  if (k == 0) {
    throw ConfigError("unit_ball_meshgrid: no grid node of n_per_axis=" + std::to_string(n_per_axis) +
                      " lies inside the unit ball in d=" + std::to_string(d) + "; use n_per_axis >= " +
                      std::to_string(min_feasible_n(d, layout)));
  }
  BallQuadrature q;
  q.nodes = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), k, d);
  q.weights = Vector::Ones(k);
  q.volume = unit_ball_volume(d);
  q.n_per_axis = n_per_axis;
  q.layout = layout;
  return q;
}

Index meshgrid_for_count(Index d, Index target, MeshgridLayout layout) {
  if (target < 1) throw ConfigError("meshgrid_for_count: target K_int must be >= 1");
  Index best = 2;
  Index best_gap = std::numeric_limits<Index>::max();
  for (Index n = 2;; ++n) {
    const Index count = meshgrid_count(d, n, layout);
    const Index gap = std::abs(count - target);
    if (count > 0 && gap < best_gap) {
      best = n;
      best_gap = gap;
    }
    if (count > target) break;
  }
  return best;
}

std::string to_string(MeshgridLayout layout) {
  return layout == MeshgridLayout::CellCentred ? "cell_centred" : "vertex";
}

MeshgridLayout meshgrid_layout_from_string(const std::string& name) {
  if (name == "cell_centred") return MeshgridLayout::CellCentred;
  if (name == "vertex") return MeshgridLayout::Vertex;
  throw ConfigError("unknown meshgrid layout '" + name + "' (expected cell_centred, vertex)");
}

std::string to_string(RStrategy s) {
  switch (s) {
    case RStrategy::Descending: return "descending";
    case RStrategy::Fixed: return "fixed";
    case RStrategy::Ascending: return "ascending";
  }
  return "?";
}

RStrategy r_strategy_from_string(const std::string& name) {
  if (name == "descending") return RStrategy::Descending;
  if (name == "fixed") return RStrategy::Fixed;
  if (name == "ascending") return RStrategy::Ascending;
  throw ConfigError("unknown R strategy '" + name + "' (expected descending, fixed, ascending)");
}

void RSchedule::validate() const {
  if (!(r_min > 0.0)) throw ConfigError("RSchedule: r_min must be positive");
  if (!(r_min <= r_max_init)) throw ConfigError("RSchedule: r_min must not exceed r_max");
  if (kind != RStrategy::Fixed && !(r_min <= r_bound && r_bound <= r_max_init)) {
    throw ConfigError("RSchedule: r_bound must lie in [r_min, r_max]");
  }
  if (max_iter < 0) throw ConfigError("RSchedule: max_iter must be >= 0");
}

double r_max_at(const RSchedule& schedule, long iter) {
  if (iter < 0) throw ContractError("r_max_at: negative iteration");
  if (schedule.kind == RStrategy::Fixed || schedule.max_iter == 0) {
    return schedule.kind == RStrategy::Ascending ? schedule.r_bound : schedule.r_max_init;
  }
  const double frac = static_cast<double>(std::min(iter, schedule.max_iter)) / static_cast<double>(schedule.max_iter);
  if (schedule.kind == RStrategy::Descending) {
    return schedule.r_max_init + (schedule.r_bound - schedule.r_max_init) * frac;
  }
  return schedule.r_bound + (schedule.r_max_init - schedule.r_bound) * frac;
}

ParticleSet sample_particles(const HyperRect& domain, Index n_particles, const RSchedule& schedule, long iter,
                             Rng& rng) {
  if (n_particles < 1) throw ConfigError("sample_particles: N_p must be >= 1");
  const double r_hi = r_max_at(schedule, iter);
  if (!(2.0 * r_hi < domain.min_side())) {
    throw ConfigError("sample_particles: R_max=" + std::to_string(r_hi) +
                      " leaves no room for centres; it must be below half the narrowest side (" +
                      std::to_string(0.5 * domain.min_side()) + ")");
  }
  const double r_lo = std::min(schedule.r_min, r_hi);
  const Index d = domain.dim();
  ParticleSet p;
  p.centers.resize(n_particles, d);
  p.radii.resize(n_particles);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < n_particles; ++i) {
    const double R = r_lo + (r_hi - r_lo) * unit(rng);
    p.radii(i) = R;
    for (Index j = 0; j < d; ++j) {
      const double lo = domain.lower(j) + R;
      const double hi = domain.upper(j) - R;
      p.centers(i, j) = lo + (hi - lo) * unit(rng);
    }
  }
  return p;
}

Matrix boundary_points(const HyperRect& domain, Index n_per_side, Rng& rng) {
  if (n_per_side < 1) throw ConfigError("boundary_points: n_per_side must be >= 1");
  const Index d = domain.dim();
  Matrix pts(2 * d * n_per_side, d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Index row = 0;
  for (Index face = 0; face < d; ++face) {
    for (int side = 0; side < 2; ++side) {
      const double fixed = side == 0 ? domain.lower(face) : domain.upper(face);
      for (Index k = 0; k < n_per_side; ++k, ++row) {
        for (Index j = 0; j < d; ++j) {
          pts(row, j) = j == face ? fixed : domain.lower(j) + (domain.upper(j) - domain.lower(j)) * unit(rng);
        }
      }
    }
  }
  return pts;
}

Matrix uniform_points(const HyperRect& domain, Index n, Rng& rng) {
  const Index d = domain.dim();
  Matrix pts(n, d);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) pts(i, j) = domain.lower(j) + (domain.upper(j) - domain.lower(j)) * unit(rng);
  }
  return pts;
}

Matrix grid_points(const HyperRect& domain, Index per_axis) {
  if (per_axis < 2) throw ConfigError("grid_points: need at least 2 points per axis");
  const Index d = domain.dim();
  Index total = 1;
  for (Index j = 0; j < d; ++j) total *= per_axis;
  Matrix pts(total, d);
  for (Index i = 0; i < total; ++i) {
    Index rest = i;
    for (Index j = d; j-- > 0;) {
      const Index k = rest % per_axis;
      rest /= per_axis;
      pts(i, j) = domain.lower(j) + (domain.upper(j) - domain.lower(j)) * static_cast<double>(k) /
                                        static_cast<double>(per_axis - 1);
    }
  }
  return pts;
}

Matrix map_nodes(const BallQuadrature& quad, const Eigen::Ref<const RowVector>& center, double R) {
  if (center.size() != quad.dim()) {
    throw ShapeError("map_nodes: centre has " + std::to_string(center.size()) + " coordinates, quadrature " +
                     std::to_string(quad.dim()));
  }
  return (quad.nodes * R).rowwise() + center;
}

}  // namespace pwnn
