#include "pwnn/problems.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <ostream>
#include <tuple>

namespace pwnn {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string to_string(PdeKind k) {
  switch (k) {
    case PdeKind::Poisson: return "poisson";
    case PdeKind::AllenCahn: return "allen_cahn";
    case PdeKind::DiffusionCoefficientInverse: return "diffusion_coefficient_inverse";
    case PdeKind::PoissonHighDim: return "poisson_highdim";
  }
  return "unknown";
}

void NoiseModel::validate() const {
  require(std::isfinite(sigma) && sigma >= 0.0, "noise_sigma: must be finite and >= 0");
}

void Hyperparameters::validate() const {
  const Index total = n_particles * std::max<Index>(1, n_times);
  require(n_particles >= 1, "n_particles: must be >= 1");
  require(top_k >= 1 && top_k <= total, "top_k: must be in [1, " + std::to_string(total) + "]");
  require(k_int >= 1, "k_int: must be >= 1");
  require(n_bd_per_side >= 0, "n_bd_per_side: must be >= 0");
  require(n_times >= 0 && n_init >= 0 && n_periodic >= 0, "n_times, n_init, n_periodic: must be >= 0");
  require(max_iter >= 0, "max_iter: must be >= 0");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate: must be > 0");
  require(eval_every >= 1, "eval_every: must be >= 1");
  schedule.validate();
  model.validate();
  weights.validate();
}

// ---------------------------------------------------------------------------
// Allen-Cahn reference

double AllenCahnReference::at(double time, double pos) const {
  const Index nt = t.size() - 1, nx = x.size();
  const double ft = std::clamp(time, 0.0, 1.0) * static_cast<double>(nt);
  const Index n0 = std::min<Index>(static_cast<Index>(ft), nt - 1);
  const double a = ft - static_cast<double>(n0);
  double fx = (pos + 1.0) / 2.0 * static_cast<double>(nx);
  fx -= std::floor(fx / static_cast<double>(nx)) * static_cast<double>(nx);
  const Index j0 = std::min<Index>(static_cast<Index>(fx), nx - 1), j1 = (j0 + 1) % nx;
  const double b = fx - static_cast<double>(j0);
  auto row = [&](Index n) { return (1.0 - b) * u(n, j0) + b * u(n, j1); };
  return (1.0 - a) * row(n0) + a * row(n0 + 1);
}

AllenCahnReference allen_cahn_reference(Index grid_nx, Index grid_nt, double lambda, AllenCahnStepper stepper,
                                        Index oversample) {
  require(grid_nx >= 256, "reference_nx: must be >= 256");
  require(grid_nt >= 1000, "reference_nt: must be >= 1000");
  require(std::isfinite(lambda) && lambda > 0.0, "lambda: must be > 0");
  require(oversample >= 1, "oversample: must be >= 1");
  using Complex = std::complex<double>;
  using CVec = Eigen::VectorXcd;

  AllenCahnReference ref;
  ref.x = Vector(grid_nx);
  for (Index j = 0; j < grid_nx; ++j) ref.x(j) = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(grid_nx);
  ref.t = Vector(grid_nt + 1);
  for (Index n = 0; n <= grid_nt; ++n) ref.t(n) = static_cast<double>(n) / static_cast<double>(grid_nt);
  ref.u.resize(grid_nt + 1, grid_nx);

  const Index nx = grid_nx * oversample;
  Vector xs(nx);
  for (Index j = 0; j < nx; ++j) xs(j) = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(nx);
  const Vector u0 = (xs.array().square() * (kPi * xs.array()).cos()).matrix();
  auto store = [&](Index n, const Vector& u) {
    for (Index j = 0; j < grid_nx; ++j) ref.u(n, j) = u(j * oversample);
  };
  store(0, u0);

  const double dt = 1.0 / static_cast<double>(grid_nt);
  // wavenumbers on a period of length 2
  Vector L(nx);
  for (Index m = 0; m < nx; ++m) {
    const Index k = m <= nx / 2 ? m : m - nx;
    const double kk = kPi * static_cast<double>(k);
    L(m) = -lambda * kk * kk;
  }

  Eigen::FFT<double> fft;
  auto to_physical = [&](const CVec& v) {
    CVec z;
    fft.inv(z, v);
    return Vector(z.real());
  };
  auto to_spectral = [&](const Vector& u) {
    CVec z = u.cast<Complex>(), out;
    fft.fwd(out, z);
    return out;
  };
  auto nonlinear = [&](const CVec& v) {
    const Vector u = to_physical(v);
    return to_spectral(Vector(5.0 * u.array() - 5.0 * u.array().cube()));
  };

  CVec v = to_spectral(u0);
  if (stepper == AllenCahnStepper::SemiImplicitEuler) {
    const Vector denom = (1.0 - dt * L.array()).matrix();
    for (Index n = 1; n <= grid_nt; ++n) {
      v = ((v + dt * nonlinear(v)).array() / denom.array().cast<Complex>()).matrix();
      store(n, to_physical(v));
    }
    return ref;
  }

  // Coefficients by contour averaging, which avoids cancellation for small |L dt|.
  constexpr int M = 32;
  Vector E(nx), E2(nx), Q(nx), f1(nx), f2(nx), f3(nx);
  for (Index m = 0; m < nx; ++m) {
    const double h = L(m) * dt;
    E(m) = std::exp(h);
    E2(m) = std::exp(h / 2.0);
    Complex q = 0.0, a = 0.0, b = 0.0, c = 0.0;
    for (int j = 1; j <= M; ++j) {
      const Complex z = h + std::exp(Complex(0.0, kPi * (j - 0.5) / M));
      const Complex ez = std::exp(z), z3 = z * z * z;
      q += (std::exp(z / 2.0) - 1.0) / z;
      a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
      b += (2.0 + z + ez * (z - 2.0)) / z3;
      c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
    }
    Q(m) = dt * q.real() / M;
    f1(m) = dt * a.real() / M;
    f2(m) = dt * b.real() / M;
    f3(m) = dt * c.real() / M;
  }
  const auto cE = E.cast<Complex>().array(), cE2 = E2.cast<Complex>().array(), cQ = Q.cast<Complex>().array();
  const auto c1 = f1.cast<Complex>().array(), c2 = f2.cast<Complex>().array(), c3 = f3.cast<Complex>().array();
  for (Index n = 1; n <= grid_nt; ++n) {
    const CVec Nv = nonlinear(v);
    const CVec a = (cE2 * v.array() + cQ * Nv.array()).matrix();
    const CVec Na = nonlinear(a);
    const CVec b = (cE2 * v.array() + cQ * Na.array()).matrix();
    const CVec Nb = nonlinear(b);
    const CVec c = (cE2 * a.array() + cQ * (2.0 * Nb.array() - Nv.array())).matrix();
    const CVec Nc = nonlinear(c);
    v = (cE * v.array() + c1 * Nv.array() + 2.0 * c2 * (Na.array() + Nb.array()) + c3 * Nc.array()).matrix();
    store(n, to_physical(v));
  }
  return ref;
}

void write_reference_csv(std::ostream& out, const AllenCahnReference& ref) {
  const auto old = out.precision(17);
  out << "t,x,u\n";
  for (Index n = 0; n < ref.t.size(); ++n)
    for (Index j = 0; j < ref.x.size(); ++j) out << ref.t(n) << ',' << ref.x(j) << ',' << ref.u(n, j) << '\n';
  out.precision(old);
}

// ---------------------------------------------------------------------------
// Catalog

ProblemSpec poisson1d_spec(double omega) {
  require(std::isfinite(omega), "omega: must be finite");
  ProblemSpec s;
  s.name = "poisson1d";
  s.kind = PdeKind::Poisson;
  s.domain = HyperRect::cube(1, -1.0, 1.0);
  s.exact_solution = [omega](const Matrix& p) {
    const auto x = p.col(0).array();
    return Vector(x * (omega * x).cos());
  };
  s.forcing = [omega](const Matrix& p) {
    const auto x = p.col(0).array();
    return Vector(2.0 * omega * (omega * x).sin() + omega * omega * x * (omega * x).cos());
  };
  s.boundary_fn = s.exact_solution;
  Hyperparameters& h = s.defaults;
  h.n_particles = 200;
  h.top_k = 150;
  h.k_int = 50;
  h.n_bd_per_side = 1;
  h.max_iter = 20000;
  h.model.input_dim = 1;
  h.model.activation = Activation::TanhSinComposite;
  h.weights = LossWeights{1.0, 5.0, 0.0, 0.0};
  return s;
}

namespace {

std::shared_ptr<const AllenCahnReference> cached_reference(Index nx, Index nt, double lambda) {
  static std::mutex mutex;
  static std::map<std::tuple<Index, Index, double>, std::shared_ptr<const AllenCahnReference>> cache;
  const std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{nx, nt, lambda}];
  if (!slot) slot = std::make_shared<const AllenCahnReference>(allen_cahn_reference(nx, nt, lambda));
  return slot;
}

}  // namespace

ProblemSpec allen_cahn_spec(Index reference_nx, Index reference_nt) {
  ProblemSpec s;
  s.name = "allen_cahn";
  s.kind = PdeKind::AllenCahn;
  s.domain = HyperRect::cube(1, -1.0, 1.0);
  s.t_final = 1.0;
  s.diffusion = 1e-4;
  s.init_fn = [](const Matrix& p) {
    const auto x = p.col(0).array();
    return Vector(x.square() * (kPi * x).cos());
  };
  s.forcing = [](const Matrix& p) { return Vector(Vector::Zero(p.rows())); };
  auto ref = cached_reference(reference_nx, reference_nt, s.diffusion);
  s.reference = ref;
  s.exact_solution = [ref](const Matrix& tx) {
    Vector out(tx.rows());
    for (Index i = 0; i < tx.rows(); ++i) out(i) = ref->at(tx(i, 0), tx(i, 1));
    return out;
  };
  Hyperparameters& h = s.defaults;
  h.n_particles = 50;
  h.n_times = 100;
  h.top_k = 4000;
  h.k_int = 25;
  h.n_init = 200;
  h.n_periodic = 100;
  h.n_bd_per_side = 0;
  h.max_iter = 50000;
  h.model.input_dim = 2;
  h.model.width = 100;
  h.model.activation = Activation::TanhSinComposite;
  h.weights = LossWeights{100.0, 5.0, 50.0, 0.0};
  return s;
}

BumpParameters inverse_bump_parameters(std::uint64_t coefficient_seed) {
  Rng rng = make_rng(coefficient_seed, Stream::Problem);
  std::uniform_real_distribution<double> width(0.01, 0.5), centre(-0.5, 0.5);
  BumpParameters b{};
  b.sigma1 = width(rng);
  b.sigma2 = width(rng);
  b.x1 = centre(rng);
  b.y1 = centre(rng);
  return b;
}

ProblemSpec inverse_spec(double noise_sigma, std::uint64_t noise_seed, std::uint64_t coefficient_seed) {
  NoiseModel{noise_sigma, noise_seed}.validate();
  const BumpParameters bp = inverse_bump_parameters(coefficient_seed);
  ProblemSpec s;
  s.name = "inverse";
  s.kind = PdeKind::DiffusionCoefficientInverse;
  s.domain = HyperRect::cube(2, -1.0, 1.0);
  s.exact_solution = [](const Matrix& p) {
    return Vector((kPi * p.col(0).array()).sin() * (kPi * p.col(1).array()).sin());
  };
  s.exact_coefficient = [bp](const Matrix& p) {
    const auto dx = p.col(0).array() - bp.x1, dy = p.col(1).array() - bp.y1;
    return Vector(0.1 + (-dx.square() / bp.sigma1 - dy.square() / bp.sigma2).exp());
  };
  // -div(a grad u) = -a Lap u - grad a . grad u, with Lap u = -2 pi^2 u
  s.forcing = [bp](const Matrix& p) {
    const auto x = p.col(0).array(), y = p.col(1).array();
    const auto dx = x - bp.x1, dy = y - bp.y1;
    const Eigen::ArrayXd g = (-dx.square() / bp.sigma1 - dy.square() / bp.sigma2).exp();
    const Eigen::ArrayXd a = 0.1 + g;
    const Eigen::ArrayXd ax = -2.0 * dx / bp.sigma1 * g, ay = -2.0 * dy / bp.sigma2 * g;
    const Eigen::ArrayXd sx = (kPi * x).sin(), sy = (kPi * y).sin();
    const Eigen::ArrayXd ux = kPi * (kPi * x).cos() * sy, uy = kPi * sx * (kPi * y).cos();
    return Vector(2.0 * kPi * kPi * a * sx * sy - ax * ux - ay * uy);
  };
  s.boundary_fn = [](const Matrix& p) { return Vector(Vector::Zero(p.rows())); };

  constexpr Index lattice = 10;
  Sensors sensors;
  sensors.points.resize(lattice * lattice, 2);
  for (Index i = 0; i < lattice; ++i)
    for (Index j = 0; j < lattice; ++j) {
      sensors.points(i * lattice + j, 0) = -1.0 + (2.0 * static_cast<double>(i) + 1.0) / lattice;
      sensors.points(i * lattice + j, 1) = -1.0 + (2.0 * static_cast<double>(j) + 1.0) / lattice;
    }
  sensors.clean = s.exact_solution(sensors.points);
  sensors.sigma = noise_sigma;
  sensors.values = sensors.clean;
  if (noise_sigma > 0.0) {
    Rng rng = make_rng(noise_seed, Stream::Noise);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Index i = 0; i < sensors.values.size(); ++i) sensors.values(i) += noise(rng);
  }
  s.sensors = sensors;

  constexpr Index per_side = 25;
  s.boundary_sensors.resize(4 * per_side, 2);
  Index row = 0;
  for (Index axis = 0; axis < 2; ++axis)
    for (double side : {-1.0, 1.0})
      for (Index j = 0; j < per_side; ++j, ++row) {
        s.boundary_sensors(row, axis) = side;
        s.boundary_sensors(row, 1 - axis) = -1.0 + (2.0 * static_cast<double>(j) + 1.0) / per_side;
      }

  Hyperparameters& h = s.defaults;
  h.n_particles = 200;
  h.top_k = 150;
  h.k_int = 60;
  h.n_bd_per_side = per_side;
  h.max_iter = 20000;
  h.model.input_dim = 2;
  h.model.activation = Activation::Tanh;
  h.weights = LossWeights{1.0, 5.0, 0.0, 5.0};
  return s;
}

ProblemSpec highdim_spec(Index d) {
  require(d >= 2, "dim: must be >= 2 (the cyclic forcing needs distinct coordinates)");
  ProblemSpec s;
  s.name = "highdim";
  s.kind = PdeKind::PoissonHighDim;
  s.domain = HyperRect::cube(d, -1.0, 1.0);
  s.forcing = [d](const Matrix& p) {
    Vector f = Vector::Zero(p.rows());
    for (Index i = 0; i < d; ++i) f.array() += p.col(i).array() * (kPi * p.col((i + 1) % d).array()).sin();
    return f;
  };
  s.exact_solution = [f = s.forcing](const Matrix& p) { return Vector(f(p) / (kPi * kPi)); };
  s.boundary_fn = s.exact_solution;
  Hyperparameters& h = s.defaults;
  h.n_particles = 80;
  h.top_k = 80;
  h.k_int = d == 10 ? 1161 : 1233;
  h.n_bd_per_side = 100;
  h.max_iter = d == 10 ? 50000 : 20000;
  h.model.input_dim = d;
  h.model.width = d == 10 ? 25 : 50;
  h.model.activation = Activation::Tanh;
  h.weights = LossWeights{1.0, 5.0, 0.0, 0.0};
  return s;
}

ProblemSpec make_problem(const std::string& name, const ProblemParams& params) {
  if (name == "poisson1d") return poisson1d_spec(params.omega);
  if (name == "allen_cahn") return allen_cahn_spec(params.reference_nx, params.reference_nt);
  if (name == "inverse") return inverse_spec(params.noise_sigma, params.noise_seed, params.coefficient_seed);
  if (name == "highdim") return highdim_spec(params.dim);
  throw ConfigError("problem: unknown problem '" + name + "' (poisson1d, allen_cahn, inverse, highdim)");
}

// ---------------------------------------------------------------------------
// DeepRitz

Var deepritz_loss(Tape& tape, const BoundModel& net, const Matrix& interior_points, const Matrix& boundary_points,
                  const ProblemSpec& spec, double boundary_weight) {
  using namespace ad;
  if (spec.t_final) throw ContractError("deepritz_loss: only stationary problems have an energy");
  if (!std::isfinite(boundary_weight) || boundary_weight < 0.0)
    throw ContractError("deepritz_loss: boundary weight must be >= 0");
  const Index d = spec.space_dim();
  if (interior_points.cols() != d || boundary_points.cols() != d)
    throw ShapeError("deepritz_loss: points must have " + std::to_string(d) + " columns");
  if (interior_points.rows() == 0) throw ContractError("deepritz_loss: no interior points");

  const Jet jet = record_forward(tape, net, interior_points, true);
  Var grad_sq = square(jet.grad(0));
  for (Index j = 1; j < d; ++j) grad_sq = grad_sq + square(jet.grad(j));
  const Matrix f = spec.forcing(interior_points).transpose();
  const Var energy = 0.5 * grad_sq - cmul(jet.value(), f);
  Var loss = spec.domain.volume() * mean(energy);
  if (boundary_points.rows() > 0 && boundary_weight > 0.0) {
    const Vector g = spec.boundary_fn(boundary_points);
    loss = loss + boundary_weight * loss_boundary(tape, as_trial(net), boundary_points, g);
  }
  return loss;
}

}  // namespace pwnn
