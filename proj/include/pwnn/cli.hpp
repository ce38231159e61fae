#ifndef PWNN_CLI_HPP
#define PWNN_CLI_HPP

// Experiment configs, output artifacts and the run/sweep/eval/reference commands.

#include "pwnn/train.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pwnn::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// A config or checkpoint problem tied to a field path such as "hyperparameters.top_k".
class FieldError : public ConfigError {
 public:
  FieldError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RunConfig {
  std::string problem;
  ProblemParams params;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  /// Output directory; empty means <output root>/<problem>-<hash prefix>.
  std::string out;
  int workers = 1;
  /// Sweep axes (sweep command only).
  std::vector<SweepAxis> sweep;
};

/// Strict parse: unknown keys, wrong types and invalid values raise FieldError.
/// Only "problem" is required; everything else defaults to the problem's published settings.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// The resolved config as JSON with every field present; serialize(parse_config(serialize(c))) == serialize(c).
std::string serialize(const RunConfig& config);

/// 64-bit FNV-1a of the compact resolved config without "out" and "workers", as 16 hex digits.
std::string config_hash(const RunConfig& config);

ProblemSpec build_problem(const RunConfig& config);

/// Applies the library's validation and rethrows its errors as FieldError.
void validate(const RunConfig& config, const ProblemSpec& spec);

/// Sweep axes from "key=v1,v2,..." strings or a named sweep.
std::vector<SweepAxis> parse_axes(const std::vector<std::string>& specs);

/// Output directory for a config: config.out, else $PWNN_OUT_ROOT (default "runs") / <problem>-<hash prefix>.
std::string output_dir(const RunConfig& config);

/// Points, coordinates, u_nn, u_exact, abs_error[, a_nn, a_exact, abs_error_a].
void write_pointwise_csv(std::ostream& out, const Matrix& points, const std::vector<std::string>& coordinate_names,
                         const Vector& predicted, const Vector& exact, const Vector* predicted_a = nullptr,
                         const Vector* exact_a = nullptr);

/// Checkpoint JSON: format tag, config, config hash, seed and the parameters of each network.
void write_checkpoint(const std::string& path, const RunConfig& config, std::uint64_t seed, const TrainResult& result);

struct Checkpoint {
  RunConfig config;
  std::uint64_t seed = 0;
  Model u;
  std::optional<Model> a;
};

/// Throws FieldError for anything malformed.
Checkpoint read_checkpoint(const std::string& path);

/// Evaluation points for `eval`: "default" or a number of points per axis.
Matrix eval_grid(const ProblemSpec& spec, const std::string& grid);

/// Subcommands. Progress and one-line JSON errors go to `log`.
int cmd_run(const RunConfig& config, std::ostream& log);
int cmd_sweep(const RunConfig& config, std::ostream& log);
int cmd_eval(const std::string& checkpoint_path, const std::string& grid, const std::string& out_path,
             std::ostream& log);
int cmd_reference(Index nx, Index nt, const std::string& out_path, std::ostream& log);

/// Full command line: pwnn run|sweep|eval|reference ...
int main(int argc, const char* const* argv, std::ostream& log);

}  // namespace pwnn::cli

#endif  // PWNN_CLI_HPP
