#include "doctest.h"

#include "oracles.hpp"
#include "pwnn/weakform.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace pwnn;

namespace {

using ScalarFn = std::function<double(const RowVector&)>;
using GradFn = std::function<RowVector(const RowVector&)>;

// Analytic trial function: values and directional derivatives put on the tape as constants.
Trial stub(ScalarFn u, GradFn grad) {
  return [u, grad](Tape& tape, const Matrix& p, const std::vector<Matrix>& dirs) {
    const Index n = p.rows();
    Matrix s(1, n * static_cast<Index>(1 + dirs.size()));
    for (Index i = 0; i < n; ++i) {
      const RowVector x = p.row(i);
      s(0, i) = u(x);
      for (std::size_t m = 0; m < dirs.size(); ++m) s(0, n * static_cast<Index>(m + 1) + i) = grad(x).dot(dirs[m].row(i));
    }
    return Jet{tape.constant(s), n, static_cast<Index>(dirs.size())};
  };
}

Field constant_field(double c) {
  return [c](const Matrix& x) { return Vector::Constant(x.rows(), c); };
}

Model constant_model(Index input_dim, double c, Index width = 6) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.hidden_layers = 2;
  cfg.width = width;
  cfg.activation = Activation::Tanh;
  Model m = Model::zeros(cfg);
  Vector p = m.params();
  p(p.size() - 1) = c;
  m.set_params(p);
  return m;
}

Model random_net(Index input_dim, std::uint64_t seed, Index width = 8, Index hidden = 3,
                 Activation act = Activation::TanhSinComposite) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.hidden_layers = hidden;
  cfg.width = width;
  cfg.activation = act;
  Model m = Model::glorot(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Vector p = m.params();
  for (Index i = 0; i < p.size(); ++i) p(i) += u(rng);
  m.set_params(p);
  return m;
}

ParticleSet particles_1d(std::initializer_list<double> centers, std::initializer_list<double> radii) {
  ParticleSet p;
  p.centers.resize(static_cast<Index>(centers.size()), 1);
  p.radii.resize(static_cast<Index>(radii.size()));
  Index i = 0;
  for (double c : centers) p.centers(i++, 0) = c;
  i = 0;
  for (double r : radii) p.radii(i++) = r;
  return p;
}

const TestFunction wendland1{TestFunctionKind::Wendland, 1};

// Independent scalar-loop residual for a network, using grad_x_testfn on x_k - c.
Vector oracle_poisson(const Model& m, const ParticleSet& ps, const BallQuadrature& q, const TestFunction& fn,
                      const Field& f) {
  Vector out(ps.size());
  for (Index i = 0; i < ps.size(); ++i) {
    long double acc = 0.0L;
    for (Index k = 0; k < q.size(); ++k) {
      const RowVector x = q.nodes.row(k) * ps.radii(i) + ps.centers.row(i);
      const EvalBatch e = forward_with_input_grad(m, Matrix(x));
      const Vector gphi = grad_x_testfn(fn, x.transpose(), Vector(ps.centers.row(i).transpose()), ps.radii(i));
      double dot = 0.0;
      for (Index j = 0; j < x.size(); ++j) dot += e.input_grad(0, 0, j) * gphi(j);
      const double phi = csrbf_value(fn, (x - ps.centers.row(i)).norm() / ps.radii(i));
      acc += q.weights(k) * (dot - f(Matrix(x))(0) * phi);
    }
    out(i) = static_cast<double>(acc / q.size());
  }
  return out;
}

}  // namespace

TEST_CASE("weakform: zero network and zero forcing give zero residuals") {
  const Model m = Model::zeros(random_net(1, 1).config());
  Tape tape;
  const ResidualBatch r = residual_poisson(tape, bind(tape, m), particles_1d({0.0, 0.5}, {0.1, 0.2}),
                                           unit_ball_meshgrid(1, 10), wendland1, constant_field(0.0));
  CHECK(r.values().isZero());
}

TEST_CASE("weakform: constant trial leaves only the forcing term") {
  const Model m = constant_model(1, 0.7);
  const BallQuadrature q = unit_ball_meshgrid(1, 12);
  const ParticleSet ps = particles_1d({-0.3, 0.4}, {0.05, 0.2});
  const Field f = [](const Matrix& x) { return Vector(x.col(0).array().sin() + 2.0); };
  Tape tape;
  const Vector r = residual_poisson(tape, bind(tape, m), ps, q, wendland1, f).values();
  for (Index i = 0; i < ps.size(); ++i) {
    double expect = 0.0;
    for (Index k = 0; k < q.size(); ++k) {
      const double x = q.nodes(k, 0) * ps.radii(i) + ps.centers(i, 0);
      expect -= q.weights(k) * (std::sin(x) + 2.0) * csrbf_value(wendland1, std::abs(q.nodes(k, 0)));
    }
    CHECK(r(i) == doctest::Approx(expect / q.size()).epsilon(1e-13));
  }
}

TEST_CASE("weakform: Poisson residual matches a scalar-loop oracle") {
  std::mt19937_64 rng(17);
  for (Index d : {1, 2}) {
    const Model m = random_net(d, 10 + static_cast<std::uint64_t>(d));
    const BallQuadrature q = unit_ball_meshgrid(d, d == 1 ? 9 : 6);
    const TestFunction fn{TestFunctionKind::Wendland, d};
    const HyperRect box = HyperRect::cube(d, -1.0, 1.0);
    RSchedule s;
    s.kind = RStrategy::Fixed;
    s.r_min = 0.05;
    s.r_max_init = 0.3;
    Rng prng = make_rng(5, Stream::Particles);
    const ParticleSet ps = sample_particles(box, 4, s, 0, prng);
    const Field f = [](const Matrix& x) { return Vector(x.rowwise().squaredNorm().array() + 1.0); };
    Tape tape;
    const Vector r = residual_poisson(tape, bind(tape, m), ps, q, fn, f).values();
    const Vector ref = oracle_poisson(m, ps, q, fn, f);
    CHECK((r - ref).cwiseAbs().maxCoeff() < 1e-11 * (1.0 + ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("weakform: exact solution drives the Poisson residual to zero") {
  // u = x^2, -u'' = -2
  const Trial u = stub([](const RowVector& x) { return x(0) * x(0); },
                       [](const RowVector& x) { return RowVector::Constant(1, 2.0 * x(0)); });
  const BallQuadrature q = unit_ball_meshgrid(1, 200);
  const ParticleSet ps = particles_1d({-0.9, -0.3, 0.0, 0.41, 0.85}, {1e-2, 1e-2, 1e-2, 1e-2, 1e-2});
  Tape tape;
  const Vector r = residual_poisson(tape, u, ps, q, wendland1, constant_field(-2.0)).values();
  CHECK(r.cwiseAbs().maxCoeff() < 1e-4);
  // and the defect shrinks as the rule is refined
  Tape coarse_tape;
  const Vector coarse = residual_poisson(coarse_tape, u, ps, unit_ball_meshgrid(1, 6), wendland1,
                                         constant_field(-2.0)).values();
  CHECK(r.cwiseAbs().maxCoeff() < coarse.cwiseAbs().maxCoeff());
}

TEST_CASE("weakform: diffusion residual with unit coefficient reduces to Poisson bitwise") {
  for (Index d : {1, 2}) {
    const Model u = random_net(d, 21 + static_cast<std::uint64_t>(d));
    const Model a = constant_model(d, 1.0);
    const BallQuadrature q = unit_ball_meshgrid(d, 8);
    const TestFunction fn{TestFunctionKind::Wendland, d};
    RSchedule s;
    s.r_min = 1e-4;
    s.r_max_init = 1e-2;
    s.r_bound = 1e-4;
    Rng prng = make_rng(6, Stream::Particles);
    const ParticleSet ps = sample_particles(HyperRect::cube(d, -1.0, 1.0), 7, s, 0, prng);
    const Field f = [](const Matrix& x) { return Vector(x.col(0).array().cos()); };
    Tape t1, t2;
    const Vector rp = residual_poisson(t1, bind(t1, u), ps, q, fn, f).values();
    const Vector rd = residual_diffusion_coefficient(t2, bind(t2, u), bind(t2, a), ps, q, fn, f).values();
    CHECK(rp == rd);
  }
}

TEST_CASE("weakform: diffusion residual with constant u leaves the forcing term") {
  const Model u = constant_model(2, -1.5);
  const Model a = random_net(2, 3);
  const BallQuadrature q = unit_ball_meshgrid(2, 6);
  const TestFunction fn{TestFunctionKind::Wendland, 2};
  ParticleSet ps;
  ps.centers = Matrix::Zero(1, 2);
  ps.radii = Vector::Constant(1, 0.3);
  Tape tape;
  const Vector r = residual_diffusion_coefficient(tape, bind(tape, u), bind(tape, a), ps, q, fn,
                                                  constant_field(3.0)).values();
  double expect = 0.0;
  for (Index k = 0; k < q.size(); ++k) expect -= 3.0 * csrbf_value(fn, q.nodes.row(k).norm());
  CHECK(r(0) == doctest::Approx(expect / q.size()).epsilon(1e-13));
}

TEST_CASE("weakform: Allen-Cahn residual trivial cases") {
  const BallQuadrature q = unit_ball_meshgrid(1, 25);
  TimedParticles tp;
  tp.times = Vector::LinSpaced(3, 0.2, 1.0);
  tp.particles = particles_1d({-0.5, 0.1, 0.7}, {0.01, 0.02, 0.03});
  for (double c : {0.0, 1.0, -1.0}) {
    const Model m = constant_model(2, c);
    Tape tape;
    const Vector r = residual_allen_cahn(tape, bind(tape, m), tp, q, wendland1, 1e-4).values();
    CHECK(r.cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("weakform: Allen-Cahn residual of u = x matches a high-resolution integral") {
  // V * residual approximates int_{-1}^{1} [(5x^3 - 5x) phi(|s|) + lambda phi'(|s|) sgn(s) / R] ds with
  // x = c + s R. The oracle integrates that with composite Gauss-Legendre split at the kink s = 0.
  const double lambda = 1e-4;
  const Trial u = stub([](const RowVector& tx) { return tx(1); },
                       [](const RowVector&) { RowVector g(2); g << 0.0, 1.0; return g; });
  const BallQuadrature q = unit_ball_meshgrid(1, 2000);
  TimedParticles tp;
  tp.times = Vector::Constant(3, 0.5);
  tp.particles = particles_1d({-0.6, 0.05, 0.8}, {0.1, 0.3, 0.15});
  Tape tape;
  const Vector r = residual_allen_cahn(tape, u, tp, q, wendland1, lambda).values();
  for (Index i = 0; i < tp.size(); ++i) {
    const double c = tp.particles.centers(i, 0), R = tp.particles.radii(i);
    auto integrand = [&](double s) {
      const double x = c + s * R;
      const double sg = s > 0 ? 1.0 : -1.0;
      return (5 * x * x * x - 5 * x) * csrbf_value(wendland1, std::abs(s)) +
             lambda * csrbf_dr(wendland1, std::abs(s)) * sg / R;
    };
    const double exact = oracle::gauss_legendre(integrand, -1.0, 0.0, 200) + oracle::gauss_legendre(integrand, 0.0, 1.0, 200);
    CHECK(std::abs(q.volume * r(i) - exact) < 1e-8);
  }
}

TEST_CASE("weakform: Allen-Cahn residual of u = t + x^2 matches a high-resolution integral") {
  const double lambda = 0.1;
  const Trial u = stub([](const RowVector& tx) { return tx(0) + tx(1) * tx(1); },
                       [](const RowVector& tx) { RowVector g(2); g << 1.0, 2.0 * tx(1); return g; });
  const BallQuadrature q = unit_ball_meshgrid(1, 2000);
  TimedParticles tp;
  tp.times = Vector::LinSpaced(2, 0.1, 0.9);
  tp.particles = particles_1d({-0.3, 0.5}, {0.2, 0.05});
  Tape tape;
  const Vector r = residual_allen_cahn(tape, u, tp, q, wendland1, lambda).values();
  for (Index i = 0; i < tp.size(); ++i) {
    const double t = tp.times(i), c = tp.particles.centers(i, 0), R = tp.particles.radii(i);
    auto integrand = [&](double s) {
      const double x = c + s * R, v = t + x * x;
      const double sg = s > 0 ? 1.0 : -1.0;
      return (1.0 + 5 * v * v * v - 5 * v) * csrbf_value(wendland1, std::abs(s)) +
             lambda * 2.0 * x * csrbf_dr(wendland1, std::abs(s)) * sg / R;
    };
    const double exact = oracle::gauss_legendre(integrand, -1.0, 0.0, 200) + oracle::gauss_legendre(integrand, 0.0, 1.0, 200);
    CHECK(std::abs(q.volume * r(i) - exact) < 1e-8 * (1.0 + std::abs(exact)));
  }
}

TEST_CASE("weakform: topK interior loss") {
  Tape tape;
  auto batch = [&](std::initializer_list<double> v) {
    Matrix m(1, static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) m(0, i++) = x;
    return ResidualBatch{tape.constant(m)};
  };
  CHECK(loss_interior(batch({3, 1, 2}), 2).scalar() == 6.5);
  CHECK(loss_interior(batch({3, -1, 2}), 3).scalar() == doctest::Approx(14.0 / 3.0));
  CHECK(loss_interior(batch({-2, 2, -2, 2}), 1).scalar() == 4.0);
  CHECK(loss_interior(batch({-2, 2, -2, 2}), 3).scalar() == 4.0);
  CHECK_THROWS_AS(loss_interior(batch({1, 2}), 0), ContractError);
  CHECK_THROWS_AS(loss_interior(batch({1, 2}), 3), ContractError);

  Vector ties(4);
  ties << 1.0, -2.0, 2.0, 0.5;
  CHECK(select_topk(ties, 2) == std::vector<Index>{1, 2});
  CHECK(select_topk(ties, 3) == std::vector<Index>{1, 2, 0});

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix v(1, 30);
  for (Index i = 0; i < 30; ++i) v(0, i) = n(rng);
  std::vector<Index> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix pv(1, 30);
  for (Index i = 0; i < 30; ++i) pv(0, i) = v(0, perm[static_cast<std::size_t>(i)]);
  for (Index k : {1, 7, 30}) {
    CHECK(loss_interior(ResidualBatch{tape.constant(v)}, k).scalar() ==
          doctest::Approx(loss_interior(ResidualBatch{tape.constant(pv)}, k).scalar()).epsilon(1e-15));
  }
  std::vector<double> sq;
  for (Index i = 0; i < 30; ++i) sq.push_back(v(0, i) * v(0, i));
  std::sort(sq.rbegin(), sq.rend());
  CHECK(loss_interior(ResidualBatch{tape.constant(v)}, 7).scalar() ==
        doctest::Approx(std::accumulate(sq.begin(), sq.begin() + 7, 0.0) / 7.0).epsilon(1e-14));
}

TEST_CASE("weakform: selection is not differentiated and unselected particles get no gradient") {
  Tape tape;
  Matrix v(1, 3);
  v << 3.0, 1.0, 2.0;
  Var r = tape.leaf(v);
  tape.backward(loss_interior(ResidualBatch{r}, 2));
  const Matrix g = tape.grad(r);
  CHECK(g(0, 0) == doctest::Approx(3.0));
  CHECK(g(0, 1) == 0.0);
  CHECK(g(0, 2) == doctest::Approx(2.0));
}

TEST_CASE("weakform: boundary, data and initial mismatch") {
  const Model zero = Model::zeros(constant_model(2, 0.0).config());
  const Model one = constant_model(2, 1.0);
  std::mt19937_64 rng(9);
  const Matrix pts = oracle::random_points(11, 2, rng);
  Tape tape;
  const Trial z = as_trial(bind(tape, zero));
  CHECK(loss_boundary(tape, z, pts, Vector::Zero(11)).scalar() == 0.0);
  CHECK(loss_boundary(tape, z, pts, Vector::Ones(11)).scalar() == 1.0);
  CHECK(loss_data(tape, as_trial(bind(tape, one)), pts, Vector::Ones(11)).scalar() == 0.0);

  const Model m = random_net(2, 44);
  const Vector target = oracle::random_points(11, 1, rng).col(0);
  const Vector values = forward(m, pts).values.col(0);
  const double expect = (values - target).squaredNorm() / 11.0;
  CHECK(loss_boundary(tape, as_trial(bind(tape, m)), pts, target).scalar() == doctest::Approx(expect).epsilon(1e-14));
  CHECK(loss_data(tape, as_trial(bind(tape, m)), pts, target).scalar() == doctest::Approx(expect).epsilon(1e-14));

  const Matrix xs = oracle::random_points(5, 1, rng);
  Matrix t0x(5, 2);
  t0x.col(0).setZero();
  t0x.col(1) = xs.col(0);
  const Vector init = xs.col(0).array().square();
  const double expect0 = (forward(m, t0x).values.col(0) - init).squaredNorm() / 5.0;
  CHECK(loss_initial(tape, as_trial(bind(tape, m)), xs, init).scalar() == doctest::Approx(expect0).epsilon(1e-14));
  CHECK(loss_initial(tape, as_trial(bind(tape, one)), xs, Vector::Zero(5)).scalar() == 1.0);
  CHECK_THROWS_AS(loss_boundary(tape, z, pts, Vector::Zero(3)), ShapeError);
}

TEST_CASE("weakform: periodic mismatch") {
  const Vector times = Vector::LinSpaced(4, 0.25, 1.0);
  Tape tape;
  const Trial even = stub([](const RowVector& tx) { return tx(1) * tx(1); },
                          [](const RowVector& tx) { RowVector g(2); g << 0.0, 2.0 * tx(1); return g; });
  const Trial odd = stub([](const RowVector& tx) { return tx(1); },
                         [](const RowVector&) { RowVector g(2); g << 0.0, 1.0; return g; });
  const Trial flat = stub([](const RowVector&) { return 3.0; }, [](const RowVector&) { return RowVector::Zero(2); });
  CHECK(loss_periodic(tape, even, times, -1.0, 1.0).scalar() == 16.0);
  CHECK(loss_periodic(tape, odd, times, -1.0, 1.0).scalar() == 4.0);
  CHECK(loss_periodic(tape, flat, times, -1.0, 1.0).scalar() == 0.0);

  const Model m = random_net(2, 71);
  Matrix lo(4, 2), hi(4, 2);
  lo << times, Vector::Constant(4, -1.0);
  hi << times, Vector::Constant(4, 1.0);
  const EvalBatch el = forward_with_input_grad(m, lo), eh = forward_with_input_grad(m, hi);
  double expect = 0.0;
  for (Index i = 0; i < 4; ++i) {
    expect += std::pow(el.values(i, 0) - eh.values(i, 0), 2) + std::pow(el.input_grad(i, 0, 1) - eh.input_grad(i, 0, 1), 2);
  }
  CHECK(loss_periodic(tape, as_trial(bind(tape, m)), times, -1.0, 1.0).scalar() ==
        doctest::Approx(expect / 4.0).epsilon(1e-13));
}

TEST_CASE("weakform: total loss") {
  Tape tape;
  auto k = [&](double v) { return tape.constant(scalar_matrix(v)); };
  LossWeights zero{0.0, 0.0, 0.0, 0.0};
  LossComponents parts;
  parts.interior = k(2.0);
  parts.boundary = k(3.0);
  CHECK(total_loss(tape, zero, parts).scalar() == 0.0);
  CHECK(total_loss(tape, LossWeights{1.0, 0.0, 0.0, 0.0}, parts).scalar() == 2.0);
  CHECK(total_loss(tape, LossWeights{1.0, 5.0, 0.0, 0.0}, parts).scalar() == 17.0);
  parts.periodic = k(0.5);
  parts.initial = k(0.25);
  parts.data = k(4.0);
  CHECK(total_loss(tape, LossWeights{100.0, 5.0, 50.0, 2.0}, parts).scalar() == 200.0 + 15.0 + 2.5 + 12.5 + 8.0);
  CHECK(total_loss(tape, LossWeights{}, LossComponents{}).scalar() == 0.0);
  CHECK_THROWS_AS(total_loss(tape, LossWeights{-1.0, 0.0, 0.0, 0.0}, parts), ConfigError);
}

TEST_CASE("weakform: implemented interior loss is the unscaled loss divided by R^2d V^2 for equal radii") {
  for (Index d : {1, 2}) {
    const Model m = random_net(d, 90 + static_cast<std::uint64_t>(d));
    const BallQuadrature q = unit_ball_meshgrid(d, 7);
    const TestFunction fn{TestFunctionKind::Wendland, d};
    ParticleSet ps;
    ps.centers = Matrix::Constant(2, d, 0.1);
    ps.centers(1, 0) = -0.4;
    const double R = 0.2;
    ps.radii = Vector::Constant(2, R);
    const Field f = [](const Matrix& x) { return Vector(x.col(0).array().exp()); };
    // scaled residual: R^d V (1/K) sum_k (...), i.e. the integral over the support ball
    const Vector raw = oracle_poisson(m, ps, q, fn, f);
    const double scale = std::pow(R, static_cast<double>(d)) * q.volume;
    const double paper_loss = ((scale * raw).array().square()).mean();
    Tape tape;
    const double implemented = loss_interior(residual_poisson(tape, bind(tape, m), ps, q, fn, f), 2).scalar();
    CHECK(implemented == doctest::Approx(paper_loss / (scale * scale)).epsilon(1e-10));
  }
}

TEST_CASE("weakform: total loss gradient matches finite differences") {
  for (Index d : {1, 2}) {
    const Model m0 = random_net(d, 120 + static_cast<std::uint64_t>(d), 6, 2);
    const BallQuadrature q = unit_ball_meshgrid(d, d == 1 ? 9 : 3);
    REQUIRE(q.size() == 9);
    const TestFunction fn{TestFunctionKind::Wendland, d};
    ParticleSet ps;
    ps.centers = Matrix::Constant(2, d, 0.2);
    ps.centers(1, 0) = -0.5;
    ps.radii = Vector::LinSpaced(2, 0.1, 0.3);
    const Field f = [](const Matrix& x) { return Vector(x.col(0).array().sin() * 3.0); };
    std::mt19937_64 rng(4);
    const Matrix bpts = oracle::random_points(4, d, rng);
    const Vector g = Vector::Constant(4, 0.3);

    auto loss_of = [&](const Model& m, Vector* grad) {
      Tape tape;
      const BoundModel net = bind(tape, m);
      LossComponents parts;
      parts.interior = loss_interior(residual_poisson(tape, net, ps, q, fn, f), 1);
      parts.boundary = loss_boundary(tape, as_trial(net), bpts, g);
      const Var total = total_loss(tape, LossWeights{1.0, 5.0, 0.0, 0.0}, parts);
      const double v = total.scalar();
      if (grad != nullptr) *grad = backward_params(tape, total, net);
      return v;
    };
    Vector grad;
    loss_of(m0, &grad);
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& p) {
          Model m = m0;
          m.set_params(p);
          return loss_of(m, nullptr);
        },
        m0.params());
    CHECK(oracle::relative_error(grad, fd) < 1e-5);
  }
}

TEST_CASE("weakform: test-function gradients from reference nodes agree with the direct formula") {
  const BallQuadrature q = unit_ball_meshgrid(2, 5);
  const TestFunction fn{TestFunctionKind::Wendland, 2};
  const TestFunctionTable t = tabulate(q, fn);
  const Vector c = Vector::Constant(2, 0.3);
  for (Index k = 0; k < q.size(); ++k) {
    const Vector x = (q.nodes.row(k) * 0.25).transpose() + c;
    const Vector direct = grad_x_testfn(fn, x, c, 0.25);
    CHECK((t.radial_grad.row(k).transpose() / 0.25 - direct).norm() < 1e-12 * (1.0 + direct.norm()));
    CHECK(t.phi(k) == doctest::Approx(csrbf_value(fn, q.nodes.row(k).norm())));
  }
}

TEST_CASE("weakform: failing forcing names the particle") {
  const Model m = random_net(1, 5);
  const ParticleSet ps = particles_1d({-0.5, 0.5}, {0.1, 0.1});
  const Field bad = [](const Matrix& x) {
    Vector v = Vector::Zero(x.rows());
    if (x(0, 0) > 0.0) v(0) = std::nan("");
    return v;
  };
  Tape tape;
  try {
    residual_poisson(tape, bind(tape, m), ps, unit_ball_meshgrid(1, 4), wendland1, bad);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("particle 1") != std::string::npos);
  }
}
