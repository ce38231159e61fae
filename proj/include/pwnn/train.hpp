#ifndef PWNN_TRAIN_HPP
#define PWNN_TRAIN_HPP

// The particle training loop, evaluation metrics, multi-seed runs and sweeps.

#include "pwnn/problems.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pwnn {

enum class Method { ParticleWNN, DeepRitz };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct TrainConfig {
  Hyperparameters hp;
  Method method = Method::ParticleWNN;
  /// Uniform interior points per iteration for DeepRitz.
  Index deepritz_points = 10000;
  /// Leave wall-clock fields at zero so reports are reproducible bit for bit.
  bool deterministic = false;
  /// Upper bound on recorded columns per tape; 0 picks one from the network size.
  Index chunk_columns = 0;
  /// When > 0, top_k follows the particle count: round(fraction * total particles).
  double top_k_fraction = 0.0;

  void validate(const ProblemSpec& spec) const;
  /// top_k after applying top_k_fraction.
  Index effective_top_k() const;
};

/// Unweighted loss terms and the weighted total.
struct LossBreakdown {
  double total = 0.0;
  double interior = 0.0;
  double boundary = 0.0;
  double periodic = 0.0;
  double initial = 0.0;
  double data = 0.0;
};

struct IterationRecord {
  long iter = 0;
  LossBreakdown loss;
  double learning_rate = 0.0;
  double r_max = 0.0;
  /// Training time since iteration 0, evaluation excluded.
  double wall_ms = 0.0;
};

struct Metrics {
  double rel_l2 = 0.0;
  double mae = 0.0;
  /// ||u|| was zero: rel_l2 holds the absolute L2 norm of the error.
  bool absolute = false;
};

struct EvalRecord {
  long iter = 0;
  Metrics u;
  /// Inverse problem: error in the recovered coefficient.
  std::optional<Metrics> a;
  double wall_ms = 0.0;
};

struct RunReport {
  std::uint64_t seed = 0;
  std::vector<IterationRecord> history;
  std::vector<EvalRecord> evals;
  /// Last evaluation (after the final iteration).
  EvalRecord final;
  double train_seconds = 0.0;
  /// Retained quadrature nodes and grid resolution actually used.
  Index k_int_actual = 0;
  Index n_per_axis = 0;
  bool aborted = false;
  std::string diagnostic;
};

struct TrainResult {
  RunReport report;
  Model u;
  /// Coefficient network for the inverse problem.
  std::optional<Model> a;
};

/// Points and reference values for the metrics.
struct EvalSet {
  Matrix points;
  Vector exact;
  /// Exact coefficient (inverse problem), empty otherwise.
  Vector exact_coefficient;
};

/// 1000 uniform points for d = 1, a 100 x 100 grid for d = 2, 10^4 seeded
/// uniform points for d >= 3; Allen-Cahn uses every tenth reference time row.
EvalSet default_eval_set(const ProblemSpec& spec);

/// relative L2 = ||pred - exact|| / ||exact||, mae = max |pred - exact|.
Metrics evaluate(const Vector& predicted, const Vector& exact);
Metrics evaluate(const Model& model, const Matrix& points, const Vector& exact);

/// Everything drawn at one iteration; reproducible from (seed, iteration).
struct Draws {
  double r_max = 0.0;
  ParticleSet particles;
  TimedParticles timed;
  Matrix boundary;
  Matrix initial_points;
  Vector periodic_times;
  Matrix interior_points;
};

Draws draw_iteration(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, long iter);

/// Loss at the given draws and, when requested, its gradient per model.
struct LossEvaluation {
  LossBreakdown loss;
  Vector grad_u;
  Vector grad_a;
};

LossEvaluation evaluate_loss(const ProblemSpec& spec, const TrainConfig& cfg, const BallQuadrature& quad,
                             const Draws& draws, const Model& u, const Model* a, bool with_grad);

/// Initial networks for a run (Glorot, seeded from the Init stream).
Model initial_model(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, int which = 0);

/// Quadrature used for a config: the meshgrid whose count is closest to k_int.
BallQuadrature training_quadrature(const ProblemSpec& spec, const TrainConfig& cfg);

using IterationCallback = std::function<void(const IterationRecord&)>;
using EvalCallback = std::function<void(const EvalRecord&)>;

struct TrainHooks {
  IterationCallback on_iteration;
  EvalCallback on_eval;
  /// Called with the parameters at the start of each iteration (before the update).
  std::function<void(long iter, const Model& u, const Model* a)> on_params;
};

/// Runs max_iter iterations. A non-finite loss or gradient stops the run with
/// report.aborted set, the diagnostic filled in and the last finite parameters returned.
TrainResult train(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, const TrainHooks& hooks = {});

/// Recomputes the loss recorded at `iter` from the parameters at the start of that iteration.
LossBreakdown replay_loss(const ProblemSpec& spec, const TrainConfig& cfg, std::uint64_t seed, long iter,
                          const Model& u, const Model* a);

// ---------------------------------------------------------------------------
// Seeds and sweeps

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for a single value.
  double stddev = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct Aggregate {
  Summary rel_l2, mae, seconds;
  std::optional<Summary> rel_l2_a, mae_a;
  Index runs = 0;
  Index aborted = 0;
};

Aggregate aggregate(const std::vector<RunReport>& reports);

struct MultiSeedResult {
  std::vector<TrainResult> runs;
  Aggregate aggregate;
};

/// Trains one run per seed; `workers` > 1 runs seeds on separate threads. Each
/// run is independent, so results do not depend on the worker count.
MultiSeedResult multi_seed(const ProblemSpec& spec, const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds,
                           int workers = 1, const std::function<void(std::uint64_t, const TrainResult&)>& on_done = {});

/// Sets a hyperparameter from a sweep value: r_strategy, r_max, r_min, n_particles,
/// top_k, k_int, n_bd_per_side, max_iter, learning_rate, width, hidden_layers.
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct SweepCell {
  std::vector<std::string> coordinates;
  TrainConfig config;
  Aggregate aggregate;
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepCell> cells;
};

/// Cartesian product of the axes (first axis slowest), multi_seed per cell.
SweepResult ablation_sweep(const ProblemSpec& spec, const TrainConfig& base, const std::vector<SweepAxis>& axes,
                           const std::vector<std::uint64_t>& seeds, int workers = 1,
                           const std::function<void(const SweepCell&)>& on_cell = {});

/// Named sweeps: "r_strategy" (strategy x r_max), "np_topk" (n_particles at the
/// base top_k), "np_kint" (n_particles x k_int).
std::vector<SweepAxis> named_sweep(const std::string& kind);

// ---------------------------------------------------------------------------
// CSV output

/// iter, loss, interior, boundary, periodic, initial, data, lr, r_max[, wall_ms]
void write_history_csv(std::ostream& out, const RunReport& report, bool with_timing);
/// iter, rel_l2, mae, absolute[, rel_l2_a, mae_a][, wall_ms]
void write_evals_csv(std::ostream& out, const RunReport& report, bool with_timing);
/// Rows: first axis; columns: second axis (or a single "value" column); cells "mean+-std" of rel_l2.
void write_sweep_table(std::ostream& out, const SweepResult& sweep);
/// One row per cell with every aggregate statistic.
void write_sweep_long(std::ostream& out, const SweepResult& sweep);

}  // namespace pwnn

#endif  // PWNN_TRAIN_HPP
