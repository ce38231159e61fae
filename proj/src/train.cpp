#include "pwnn/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace pwnn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool is_space_time(const ProblemSpec& spec) { return spec.t_final.has_value(); }

/// Times in (0, T]: T (1 - U) with U uniform on [0, 1).
Vector draw_times(Index n, double t_final, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector t(n);
  for (Index i = 0; i < n; ++i) t(i) = t_final * (1.0 - u(rng));
  return t;
}

RSchedule run_schedule(const TrainConfig& cfg) {
  RSchedule s = cfg.hp.schedule;
  s.max_iter = cfg.hp.max_iter;
  return s;
}

std::vector<Index> iota_range(Index begin, Index end) {
  std::vector<Index> v(static_cast<std::size_t>(end - begin));
  std::iota(v.begin(), v.end(), begin);
  return v;
}

}  // namespace

std::string to_string(Method m) { return m == Method::DeepRitz ? "deepritz" : "particlewnn"; }

Method method_from_string(const std::string& name) {
  if (name == "particlewnn") return Method::ParticleWNN;
  if (name == "deepritz") return Method::DeepRitz;
  throw ConfigError("method: unknown method '" + name + "' (particlewnn, deepritz)");
}

Index TrainConfig::effective_top_k() const {
  if (top_k_fraction <= 0.0) return hp.top_k;
  const Index total = hp.n_particles * std::max<Index>(1, hp.n_times);
  return std::clamp<Index>(static_cast<Index>(std::llround(top_k_fraction * static_cast<double>(total))), 1, total);
}

void TrainConfig::validate(const ProblemSpec& spec) const {
  require(std::isfinite(top_k_fraction) && top_k_fraction >= 0.0 && top_k_fraction <= 1.0,
          "top_k_fraction: must be in [0, 1]");
  Hyperparameters h = hp;
  h.top_k = effective_top_k();
  h.validate();
  require(hp.model.input_dim == spec.input_dim(),
          "model.input_dim: must be " + std::to_string(spec.input_dim()) + " for problem " + spec.name);
  require(hp.model.output_dim == 1, "model.output_dim: must be 1");
  require(deepritz_points >= 1, "deepritz_points: must be >= 1");
  require(chunk_columns >= 0, "chunk_columns: must be >= 0");
  const RSchedule s = run_schedule(*this);
  const double widest = std::max(s.r_max_init, s.kind == RStrategy::Fixed ? 0.0 : s.r_bound);
  if (!(2.0 * widest < spec.domain.min_side())) {
    std::ostringstream msg;
    msg << "schedule.r_max: radius " << widest << " does not fit the domain (need 2 R < " << spec.domain.min_side()
        << ")";
    throw ConfigError(msg.str());
  }
  if (method == Method::DeepRitz) {
    require(spec.kind == PdeKind::Poisson || spec.kind == PdeKind::PoissonHighDim,
            "method: deepritz applies to the Poisson problems only");
  }
  if (is_space_time(spec)) {
    require(hp.n_times >= 1, "n_times: must be >= 1 for a space-time problem");
  }
  if (spec.kind == PdeKind::DiffusionCoefficientInverse) require(spec.sensors.has_value(), "problem: sensors missing");
}

// ---------------------------------------------------------------------------
// Evaluation

EvalSet default_eval_set(const ProblemSpec& spec) {
  EvalSet e;
  if (spec.kind == PdeKind::AllenCahn) {
    if (!spec.reference) throw ContractError("default_eval_set: Allen-Cahn spec without reference");
    const AllenCahnReference& r = *spec.reference;
    const Index step = std::max<Index>(1, (r.t.size() - 1) / 100);
    std::vector<Index> rows;
    for (Index n = 0; n < r.t.size(); n += step) rows.push_back(n);
    const Index nx = r.x.size();
    e.points.resize(static_cast<Index>(rows.size()) * nx, 2);
    e.exact.resize(e.points.rows());
    Index k = 0;
    for (Index n : rows)
      for (Index j = 0; j < nx; ++j, ++k) {
        e.points(k, 0) = r.t(n);
        e.points(k, 1) = r.x(j);
        e.exact(k) = r.u(n, j);
      }
    return e;
  }
  const Index d = spec.space_dim();
  if (d == 1) {
    e.points = grid_points(spec.domain, 1000);
  } else if (d == 2) {
    e.points = grid_points(spec.domain, 100);
  } else {
    Rng rng = make_rng(0, Stream::Evaluation);
    e.points = uniform_points(spec.domain, 10000, rng);
  }
  e.exact = spec.exact_solution(e.points);
  if (spec.exact_coefficient) e.exact_coefficient = spec.exact_coefficient(e.points);
  return e;
}

Metrics evaluate(const Vector& predicted, const Vector& exact) {
  if (predicted.size() != exact.size()) throw ShapeError("evaluate: prediction and reference lengths differ");
  if (exact.size() == 0) throw ContractError("evaluate: empty evaluation set");
  const Vector err = predicted - exact;
  Metrics m;
  const double norm = exact.norm();
  m.absolute = norm == 0.0;
  m.rel_l2 = m.absolute ? err.norm() : err.norm() / norm;
  m.mae = err.cwiseAbs().maxCoeff();
  return m;
}

Metrics evaluate(const Model& model, const Matrix& points, const Vector& exact) {
  return evaluate(Vector(forward(model, points).values.col(0)), exact);
}

// ---------------------------------------------------------------------------
// One iteration

BallQuadrature training_quadrature(const ProblemSpec& spec, const TrainConfig& cfg) {
  const Index d = spec.space_dim();
  return unit_ball_meshgrid(d, meshgrid_for_count(d, cfg.hp.k_int, cfg.hp.meshgrid_layout), cfg.hp.meshgrid_layout);
}

Model initial_model(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, int which) {
  ModelConfig mc = cfg.hp.model;
  mc.input_dim = spec.input_dim();
  Rng rng = make_rng(seed, Stream::Init, static_cast<std::uint64_t>(which));
  return Model::glorot(mc, rng());
}

Draws draw_iteration(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, long iter) {
  const Hyperparameters& h = cfg.hp;
  const RSchedule sched = run_schedule(cfg);
  const auto it = static_cast<std::uint64_t>(iter);
  Draws d;
  d.r_max = r_max_at(sched, iter);

  if (cfg.method == Method::DeepRitz) {
    Rng ri = make_rng(seed, Stream::Interior, it);
    d.interior_points = uniform_points(spec.domain, cfg.deepritz_points, ri);
  } else if (is_space_time(spec)) {
    Rng rt = make_rng(seed, Stream::Times, it);
    const Vector times = draw_times(h.n_times, *spec.t_final, rt);
    Rng rp = make_rng(seed, Stream::Particles, it);
    std::vector<ParticleSet> per_time;
    per_time.reserve(static_cast<std::size_t>(h.n_times));
    for (Index i = 0; i < h.n_times; ++i) per_time.push_back(sample_particles(spec.domain, h.n_particles, sched, iter, rp));
    d.timed = flatten_times(times, per_time);
  } else {
    Rng rp = make_rng(seed, Stream::Particles, it);
    d.particles = sample_particles(spec.domain, h.n_particles, sched, iter, rp);
  }

  if (is_space_time(spec)) {
    Rng ri = make_rng(seed, Stream::Initial, it);
    d.initial_points = uniform_points(spec.domain, h.n_init, ri);
    Rng rper = make_rng(seed, Stream::Periodic, it);
    d.periodic_times = draw_times(h.n_periodic, *spec.t_final, rper);
  } else if (spec.boundary_sensors.rows() > 0) {
    d.boundary = spec.boundary_sensors;
  } else if (h.n_bd_per_side > 0) {
    Rng rb = make_rng(seed, Stream::Boundary, it);
    d.boundary = boundary_points(spec.domain, h.n_bd_per_side, rb);
  }
  return d;
}

LossEvaluation evaluate_loss(const ProblemSpec& spec, const TrainConfig& cfg, const BallQuadrature& quad,
                             const Draws& draws, const Model& u, const Model* a, bool with_grad) {
  const Hyperparameters& h = cfg.hp;
  const bool inverse = spec.kind == PdeKind::DiffusionCoefficientInverse;
  if (inverse && a == nullptr) throw ContractError("evaluate_loss: the inverse problem needs a coefficient model");
  const TestFunction fn{h.test_function, spec.space_dim()};
  const LossWeights& w = h.weights;

  LossEvaluation out;
  out.grad_u = Vector::Zero(u.params().size());
  if (a != nullptr) out.grad_a = Vector::Zero(a->params().size());

  Tape main;
  const BoundModel bu = bind(main, u, with_grad);
  std::optional<BoundModel> ba;
  if (a != nullptr) ba = bind(main, *a, with_grad);
  LossComponents parts;
  double interior_weighted = 0.0;
  bool interior_on_main = false;

  if (cfg.method == Method::DeepRitz) {
    const Matrix none(0, spec.space_dim());
    parts.interior = deepritz_loss(main, bu, draws.interior_points, none, spec, 0.0);
    interior_on_main = true;
  } else {
    const bool timed = is_space_time(spec);
    const Index n_total = timed ? draws.timed.size() : draws.particles.size();
    const Index top_k = cfg.effective_top_k();
    auto residuals = [&](Tape& tape, const BoundModel& nu, const BoundModel* na, const std::vector<Index>* idx) {
      if (timed) {
        return idx ? residual_allen_cahn(tape, nu, subset(draws.timed, *idx), quad, fn, spec.diffusion)
                   : residual_allen_cahn(tape, nu, draws.timed, quad, fn, spec.diffusion);
      }
      const ParticleSet& ps = draws.particles;
      if (inverse) {
        return idx ? residual_diffusion_coefficient(tape, nu, *na, subset(ps, *idx), quad, fn, spec.forcing)
                   : residual_diffusion_coefficient(tape, nu, *na, ps, quad, fn, spec.forcing);
      }
      return idx ? residual_poisson(tape, nu, subset(ps, *idx), quad, fn, spec.forcing)
                 : residual_poisson(tape, nu, ps, quad, fn, spec.forcing);
    };

    const Index width = std::max(h.model.width, h.model.input_dim);
    const Index budget = cfg.chunk_columns > 0
                             ? cfg.chunk_columns
                             : std::max<Index>(2000, static_cast<Index>(3e7) / (width * (h.model.hidden_layers + 1) * 4));
    const Index per_particle = 2 * quad.size() * (inverse ? 2 : 1);
    const Index chunk = std::max<Index>(1, budget / per_particle);

    if (n_total <= chunk) {
      parts.interior = loss_interior(residuals(main, bu, ba ? &*ba : nullptr, nullptr), top_k);
      interior_on_main = true;
    } else {
      // Values of every residual without derivatives, then a recorded pass over
      // the selected particles only, chunk by chunk.
      Vector r(n_total);
      // With top_k covering every particle the selection is known without the values.
      if (top_k >= n_total) r.setZero();
      for (Index start = 0; start < n_total && top_k < n_total; start += chunk) {
        const Index end = std::min(n_total, start + chunk);
        const std::vector<Index> idx = iota_range(start, end);
        Tape t;
        const BoundModel nu = bind(t, u, false);
        std::optional<BoundModel> na;
        if (a != nullptr) na = bind(t, *a, false);
        r.segment(start, end - start) = residuals(t, nu, na ? &*na : nullptr, &idx).values();
      }
      const std::vector<Index> keep = select_topk(r, top_k);
      double sum_sq = 0.0;
      for (std::size_t start = 0; start < keep.size(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t end = std::min(keep.size(), start + static_cast<std::size_t>(chunk));
        const std::vector<Index> idx(keep.begin() + static_cast<std::ptrdiff_t>(start),
                                     keep.begin() + static_cast<std::ptrdiff_t>(end));
        Tape t;
        const BoundModel nu = bind(t, u, with_grad);
        std::optional<BoundModel> na;
        if (a != nullptr) na = bind(t, *a, with_grad);
        const Var sq = ad::sum(ad::square(residuals(t, nu, na ? &*na : nullptr, &idx).residuals));
        sum_sq += sq.scalar();
        if (with_grad && w.interior != 0.0) {
          const Var scaled = ad::operator*(w.interior / static_cast<double>(top_k), sq);
          out.grad_u += backward_params(t, scaled, nu);
          if (na) out.grad_a += param_gradient(t, *na);
        }
      }
      out.loss.interior = sum_sq / static_cast<double>(top_k);
      interior_weighted = w.interior * out.loss.interior;
    }
  }

  const Trial trial = as_trial(bu);
  if (draws.boundary.rows() > 0) {
    parts.boundary = loss_boundary(main, trial, draws.boundary, spec.boundary_fn(draws.boundary));
  }
  if (is_space_time(spec)) {
    if (draws.initial_points.rows() > 0)
      parts.initial = loss_initial(main, trial, draws.initial_points, spec.init_fn(draws.initial_points));
    if (draws.periodic_times.size() > 0)
      parts.periodic = loss_periodic(main, trial, draws.periodic_times, spec.domain.lower(0), spec.domain.upper(0));
  }
  if (spec.sensors && cfg.method == Method::ParticleWNN) {
    parts.data = loss_data(main, trial, spec.sensors->points, spec.sensors->values);
  }

  const Var total = total_loss(main, w, parts);
  // backward() releases intermediate values, so read the terms first.
  if (interior_on_main) out.loss.interior = parts.interior->scalar();
  if (parts.boundary) out.loss.boundary = parts.boundary->scalar();
  if (parts.periodic) out.loss.periodic = parts.periodic->scalar();
  if (parts.initial) out.loss.initial = parts.initial->scalar();
  if (parts.data) out.loss.data = parts.data->scalar();
  out.loss.total = total.scalar() + interior_weighted;
  if (with_grad && main.requires_grad(total)) {
    out.grad_u += backward_params(main, total, bu);
    if (ba) out.grad_a += param_gradient(main, *ba);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

const char* first_non_finite(const LossBreakdown& l) {
  if (!std::isfinite(l.interior)) return "interior";
  if (!std::isfinite(l.boundary)) return "boundary";
  if (!std::isfinite(l.periodic)) return "periodic";
  if (!std::isfinite(l.initial)) return "initial";
  if (!std::isfinite(l.data)) return "data";
  if (!std::isfinite(l.total)) return "total";
  return nullptr;
}

}  // namespace

TrainResult train(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, const TrainHooks& hooks) {
  cfg.validate(spec);
  const bool inverse = spec.kind == PdeKind::DiffusionCoefficientInverse;
  const BallQuadrature quad = training_quadrature(spec, cfg);

  TrainResult res;
  res.u = initial_model(spec, cfg, seed, 0);
  if (inverse) res.a = initial_model(spec, cfg, seed, 1);
  RunReport& rep = res.report;
  rep.seed = seed;
  rep.k_int_actual = quad.size();
  rep.n_per_axis = quad.n_per_axis;

  AdamConfig ac;
  ac.learning_rate = cfg.hp.learning_rate;
  ac.gamma = steplr_gamma(cfg.hp.max_iter);
  AdamState su(ac, res.u.params().size());
  std::optional<AdamState> sa;
  if (res.a) sa = AdamState(ac, res.a->params().size());

  const EvalSet eval = default_eval_set(spec);
  double train_ms = 0.0;
  auto snapshot = [&](long iter) {
    EvalRecord e;
    e.iter = iter;
    e.u = evaluate(res.u, eval.points, eval.exact);
    if (res.a && eval.exact_coefficient.size() > 0) e.a = evaluate(*res.a, eval.points, eval.exact_coefficient);
    e.wall_ms = cfg.deterministic ? 0.0 : train_ms;
    rep.evals.push_back(e);
    if (hooks.on_eval) hooks.on_eval(e);
  };
  snapshot(0);

  for (long k = 0; k < cfg.hp.max_iter; ++k) {
    const auto t0 = Clock::now();
    if (hooks.on_params) hooks.on_params(k, res.u, res.a ? &*res.a : nullptr);
    const Draws draws = draw_iteration(spec, cfg, seed, k);
    LossEvaluation le;
    try {
      le = evaluate_loss(spec, cfg, quad, draws, res.u, res.a ? &*res.a : nullptr, true);
    } catch (const NumericError& e) {
      rep.aborted = true;
      rep.diagnostic = "iteration " + std::to_string(k) + ": " + e.what();
      break;
    }
    if (const char* term = first_non_finite(le.loss)) {
      rep.aborted = true;
      rep.diagnostic = "iteration " + std::to_string(k) + ": non-finite " + term + " loss";
      break;
    }
    if (!le.grad_u.allFinite() || (res.a && !le.grad_a.allFinite())) {
      rep.aborted = true;
      rep.diagnostic = "iteration " + std::to_string(k) + ": non-finite gradient for " +
                       (le.grad_u.allFinite() ? "the coefficient network" : "the solution network");
      break;
    }
    IterationRecord rec;
    rec.iter = k;
    rec.loss = le.loss;
    rec.learning_rate = su.learning_rate;
    rec.r_max = draws.r_max;

    Vector pu = res.u.params();
    adam_step(su, pu, le.grad_u, "u");
    res.u.set_params(pu);
    if (res.a) {
      Vector pa = res.a->params();
      adam_step(*sa, pa, le.grad_a, "a");
      res.a->set_params(pa);
    }
    train_ms += ms_since(t0);
    rec.wall_ms = cfg.deterministic ? 0.0 : train_ms;
    rep.history.push_back(rec);
    if (hooks.on_iteration) hooks.on_iteration(rec);
    if ((k + 1) % cfg.hp.eval_every == 0 || k + 1 == cfg.hp.max_iter) snapshot(k + 1);
  }
  if (rep.aborted) snapshot(static_cast<long>(rep.history.size()));
  rep.final = rep.evals.back();
  rep.train_seconds = cfg.deterministic ? 0.0 : train_ms / 1000.0;
  return res;
}

LossBreakdown replay_loss(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, long iter,
                          const Model& u, const Model* a) {
  cfg.validate(spec);
  const BallQuadrature quad = training_quadrature(spec, cfg);
  return evaluate_loss(spec, cfg, quad, draw_iteration(spec, cfg, seed, iter), u, a, false).loss;
}

// ---------------------------------------------------------------------------
// Seeds and sweeps

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

Aggregate aggregate(const std::vector<RunReport>& reports) {
  Aggregate g;
  std::vector<double> l2, mae, sec, l2a, maea;
  for (const RunReport& r : reports) {
    l2.push_back(r.final.u.rel_l2);
    mae.push_back(r.final.u.mae);
    sec.push_back(r.train_seconds);
    if (r.final.a) {
      l2a.push_back(r.final.a->rel_l2);
      maea.push_back(r.final.a->mae);
    }
    if (r.aborted) ++g.aborted;
  }
  g.runs = static_cast<Index>(reports.size());
  g.rel_l2 = summarize(l2);
  g.mae = summarize(mae);
  g.seconds = summarize(sec);
  if (!l2a.empty()) {
    g.rel_l2_a = summarize(l2a);
    g.mae_a = summarize(maea);
  }
  return g;
}

MultiSeedResult multi_seed(const ProblemSpec& spec, const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           int workers, const std::function<void(std::uint64_t, const TrainResult&)>& on_done) {
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  cfg.validate(spec);
  MultiSeedResult out;
  out.runs.resize(seeds.size());
  std::mutex done_mutex;
  auto run_one = [&](std::size_t i) {
    out.runs[i] = train(spec, cfg, seeds[i]);
    if (on_done) {
      const std::lock_guard<std::mutex> lock(done_mutex);
      on_done(seeds[i], out.runs[i]);
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), seeds.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(seeds.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
          try {
            run_one(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<RunReport> reports;
  for (const auto& r : out.runs) reports.push_back(r.report);
  out.aggregate = aggregate(reports);
  return out;
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

Index parse_index(const std::string& key, const std::string& v) {
  const double x = parse_double(key, v);
  if (x != std::floor(x)) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<Index>(x);
}

}  // namespace

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  Hyperparameters& h = cfg.hp;
  if (key == "r_strategy") h.schedule.kind = r_strategy_from_string(value);
  else if (key == "r_max") h.schedule.r_max_init = parse_double(key, value);
  else if (key == "r_min") h.schedule.r_min = parse_double(key, value);
  else if (key == "r_bound") h.schedule.r_bound = parse_double(key, value);
  else if (key == "n_particles") h.n_particles = parse_index(key, value);
  else if (key == "top_k") h.top_k = parse_index(key, value);
  else if (key == "k_int") h.k_int = parse_index(key, value);
  else if (key == "n_bd_per_side") h.n_bd_per_side = parse_index(key, value);
  else if (key == "max_iter") h.max_iter = static_cast<long>(parse_index(key, value));
  else if (key == "learning_rate") h.learning_rate = parse_double(key, value);
  else if (key == "width") h.model.width = parse_index(key, value);
  else if (key == "hidden_layers") h.model.hidden_layers = parse_index(key, value);
  else throw ConfigError("sweep." + key + ": not a sweepable key");
}

SweepResult ablation_sweep(const ProblemSpec& spec, const TrainConfig& base, const std::vector<SweepAxis>& axes,
                           const std::vector<std::uint64_t>& seeds, int workers,
                           const std::function<void(const SweepCell&)>& on_cell) {
  if (axes.empty()) throw ConfigError("sweep: at least one axis is required");
  for (const auto& ax : axes)
    if (ax.values.empty()) throw ConfigError("sweep." + ax.key + ": no values");
  SweepResult out;
  out.axes = axes;
  // Validate every cell before training any.
  std::vector<std::size_t> pos(axes.size(), 0);
  std::vector<SweepCell> cells;
  while (true) {
    SweepCell c;
    c.config = base;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      c.coordinates.push_back(axes[i].values[pos[i]]);
      apply_override(c.config, axes[i].key, axes[i].values[pos[i]]);
    }
    c.config.validate(spec);
    cells.push_back(std::move(c));
    bool done = true;
    for (std::size_t i = axes.size(); i-- > 0;) {
      if (++pos[i] < axes[i].values.size()) {
        done = false;
        break;
      }
      pos[i] = 0;
    }
    if (done) break;
  }
  for (SweepCell& c : cells) {
    c.aggregate = multi_seed(spec, c.config, seeds, workers).aggregate;
    if (on_cell) on_cell(c);
    out.cells.push_back(std::move(c));
  }
  return out;
}

std::vector<SweepAxis> named_sweep(const std::string& kind) {
  if (kind == "r_strategy")
    return {{"r_strategy", {"fixed", "ascending", "descending"}}, {"r_max", {"1e-1", "1e-2", "1e-3", "1e-4", "1e-5"}}};
  if (kind == "np_topk") return {{"n_particles", {"200", "250", "300", "350", "400"}}};
  if (kind == "np_kint")
    return {{"n_particles", {"800", "400", "200", "100", "50"}}, {"k_int", {"5", "10", "20", "40", "80"}}};
  throw ConfigError("sweep.kind: unknown sweep '" + kind + "' (r_strategy, np_topk, np_kint)");
}

// ---------------------------------------------------------------------------
// CSV

void write_history_csv(std::ostream& out, const RunReport& report, bool with_timing) {
  const auto old = out.precision(17);
  out << "iter,loss,interior,boundary,periodic,initial,data,lr,r_max" << (with_timing ? ",wall_ms" : "") << '\n';
  for (const auto& r : report.history) {
    out << r.iter << ',' << r.loss.total << ',' << r.loss.interior << ',' << r.loss.boundary << ',' << r.loss.periodic
        << ',' << r.loss.initial << ',' << r.loss.data << ',' << r.learning_rate << ',' << r.r_max;
    if (with_timing) out << ',' << r.wall_ms;
    out << '\n';
  }
  out.precision(old);
}

void write_evals_csv(std::ostream& out, const RunReport& report, bool with_timing) {
  const bool coef = !report.evals.empty() && report.evals.front().a.has_value();
  const auto old = out.precision(17);
  out << "iter,rel_l2,mae,absolute" << (coef ? ",rel_l2_a,mae_a" : "") << (with_timing ? ",wall_ms" : "") << '\n';
  for (const auto& e : report.evals) {
    out << e.iter << ',' << e.u.rel_l2 << ',' << e.u.mae << ',' << (e.u.absolute ? 1 : 0);
    if (coef) out << ',' << e.a->rel_l2 << ',' << e.a->mae;
    if (with_timing) out << ',' << e.wall_ms;
    out << '\n';
  }
  out.precision(old);
}

namespace {

std::string pm(const Summary& s) {
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << s.mean << "+-" << s.stddev;
  return o.str();
}

}  // namespace

void write_sweep_table(std::ostream& out, const SweepResult& sweep) {
  if (sweep.axes.size() > 2) throw ContractError("write_sweep_table: at most two axes");
  const SweepAxis& rows = sweep.axes[0];
  if (sweep.axes.size() == 1) {
    out << rows.key << ",rel_l2\n";
    for (std::size_t i = 0; i < sweep.cells.size(); ++i) out << rows.values[i] << ',' << pm(sweep.cells[i].aggregate.rel_l2) << '\n';
    return;
  }
  const SweepAxis& cols = sweep.axes[1];
  out << rows.key << '\\' << cols.key;
  for (const auto& c : cols.values) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < rows.values.size(); ++r) {
    out << rows.values[r];
    for (std::size_t c = 0; c < cols.values.size(); ++c) out << ',' << pm(sweep.cells[r * cols.values.size() + c].aggregate.rel_l2);
    out << '\n';
  }
}

void write_sweep_long(std::ostream& out, const SweepResult& sweep) {
  const auto old = out.precision(17);
  for (const auto& ax : sweep.axes) out << ax.key << ',';
  out << "runs,aborted,rel_l2_mean,rel_l2_std,mae_mean,mae_std,seconds_mean,seconds_std,rel_l2_a_mean,rel_l2_a_std,"
         "mae_a_mean,mae_a_std\n";
  for (const auto& c : sweep.cells) {
    for (const auto& v : c.coordinates) out << v << ',';
    const Aggregate& g = c.aggregate;
    out << g.runs << ',' << g.aborted << ',' << g.rel_l2.mean << ',' << g.rel_l2.stddev << ',' << g.mae.mean << ','
        << g.mae.stddev << ',' << g.seconds.mean << ',' << g.seconds.stddev << ',';
    if (g.rel_l2_a) {
      out << g.rel_l2_a->mean << ',' << g.rel_l2_a->stddev << ',' << g.mae_a->mean << ',' << g.mae_a->stddev;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  out.precision(old);
}

}  // namespace pwnn
