#include "pwnn/cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace pwnn::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

FieldError::FieldError(std::string field, const std::string& message)
    : ConfigError(field + ": " + message), field_(std::move(field)) {}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Strict reader over one JSON object: every key must be consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw FieldError(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return join(path_, key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  Obj child(const std::string& key) { return Obj(raw(key), path(key)); }

  void get(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number()) throw FieldError(path(key), "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw FieldError(path(key), "must be finite");
  }

  template <class Int>
  void get_int(const std::string& key, Int& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw FieldError(path(key), "expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (!v.is_number_unsigned()) throw FieldError(path(key), "must be >= 0");
      out = v.get<Int>();
    } else {
      out = static_cast<Int>(v.get<std::int64_t>());
    }
  }

  void get(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_boolean()) throw FieldError(path(key), "expected true or false");
    out = v.get<bool>();
  }

  void get(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) throw FieldError(path(key), "expected a string");
    out = v.get<std::string>();
  }

  // String-valued enum via a converter that throws on unknown names.
  template <class E, class F>
  void get_enum(const std::string& key, E& out, F convert) {
    if (!has(key)) return;
    std::string s;
    get(key, s);
    try {
      out = convert(s);
    } catch (const std::invalid_argument& e) {
      throw FieldError(path(key), e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw FieldError(path(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// Library validation messages start with the offending field name.
std::string field_for(const std::string& message) {
  const auto colon = message.find(':');
  const std::string prefix = colon == std::string::npos ? "" : message.substr(0, colon);
  static const std::set<std::string> top = {"problem",  "method",  "deepritz_points", "chunk_columns",
                                            "top_k_fraction", "seeds", "workers", "sweep"};
  static const std::set<std::string> params = {"omega",      "dim",          "noise_sigma", "noise_seed",
                                               "coefficient_seed", "reference_nx", "reference_nt"};
  static const std::set<std::string> hp = {"n_particles", "top_k",         "k_int",      "n_bd_per_side",
                                           "n_times",     "n_init",        "n_periodic", "max_iter",
                                           "learning_rate", "eval_every"};
  if (prefix.empty()) {
    if (message.rfind("loss weights", 0) == 0) return "hyperparameters.weights";
    return "config";
  }
  if (top.count(prefix) || prefix.rfind("sweep.", 0) == 0) return prefix;
  if (params.count(prefix)) return "problem_params." + prefix;
  if (hp.count(prefix) || prefix.rfind("schedule.", 0) == 0 || prefix.rfind("model.", 0) == 0)
    return "hyperparameters." + prefix;
  if (prefix == "n_times, n_init, n_periodic") return "hyperparameters";
  if (prefix == "RSchedule") return "hyperparameters.schedule";
  if (prefix == "ModelConfig") return "hyperparameters.model";
  return "config";
}

template <class F>
auto as_field_errors(F&& f) {
  try {
    return f();
  } catch (const FieldError&) {
    throw;
  } catch (const ConfigError& e) {
    throw FieldError(field_for(e.what()), e.what());
  } catch (const ContractError& e) {
    throw FieldError(field_for(e.what()), e.what());
  }
}

std::string strip_prefix(const FieldError& e) {
  const std::string w = e.what();
  const std::string p = e.field() + ": ";
  std::string m = w.rfind(p, 0) == 0 ? w.substr(p.size()) : w;
  // Library messages repeat the field name.
  const auto colon = m.find(": ");
  if (colon != std::string::npos && field_for(m) == e.field()) m = m.substr(colon + 2);
  return m;
}

std::string value_string(const json& v, const std::string& path) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw FieldError(path, "expected a string or a number");
}

std::vector<SweepAxis> parse_sweep(const json& j, const std::string& path) {
  if (j.is_object()) {
    Obj o(j, path);
    std::string kind;
    if (!o.has("kind")) throw FieldError(path + ".kind", "required field missing");
    o.get("kind", kind);
    o.finish();
    return as_field_errors([&] { return named_sweep(kind); });
  }
  if (!j.is_array()) throw FieldError(path, "expected {\"kind\": ...} or a list of axes");
  std::vector<SweepAxis> axes;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    Obj o(j[i], p);
    SweepAxis ax;
    if (!o.has("key")) throw FieldError(p + ".key", "required field missing");
    if (!o.has("values")) throw FieldError(p + ".values", "required field missing");
    o.get("key", ax.key);
    const json& vals = o.raw("values");
    if (!vals.is_array() || vals.empty()) throw FieldError(p + ".values", "expected a non-empty list");
    for (std::size_t k = 0; k < vals.size(); ++k) ax.values.push_back(value_string(vals[k], p + ".values"));
    o.finish();
    axes.push_back(std::move(ax));
  }
  return axes;
}

json model_json(const ModelConfig& m) {
  return json{{"hidden_layers", m.hidden_layers},
              {"width", m.width},
              {"activation", to_string(m.activation)},
              {"residual_connections", m.residual_connections}};
}

json to_json(const RunConfig& c) {
  const Hyperparameters& h = c.train.hp;
  json sweep = json::array();
  for (const auto& ax : c.sweep) sweep.push_back(json{{"key", ax.key}, {"values", ax.values}});
  json j;
  j["problem"] = c.problem;
  j["problem_params"] = json{{"omega", c.params.omega},
                             {"dim", c.params.dim},
                             {"noise_sigma", c.params.noise_sigma},
                             {"noise_seed", c.params.noise_seed},
                             {"coefficient_seed", c.params.coefficient_seed},
                             {"reference_nx", c.params.reference_nx},
                             {"reference_nt", c.params.reference_nt}};
  j["method"] = to_string(c.train.method);
  j["hyperparameters"] = json{
      {"n_particles", h.n_particles},
      {"top_k", h.top_k},
      {"k_int", h.k_int},
      {"n_bd_per_side", h.n_bd_per_side},
      {"n_times", h.n_times},
      {"n_init", h.n_init},
      {"n_periodic", h.n_periodic},
      {"max_iter", h.max_iter},
      {"learning_rate", h.learning_rate},
      {"eval_every", h.eval_every},
      {"test_function", to_string(h.test_function)},
      {"meshgrid_layout", to_string(h.meshgrid_layout)},
      {"schedule",
       json{{"kind", to_string(h.schedule.kind)},
            {"r_min", h.schedule.r_min},
            {"r_max", h.schedule.r_max_init},
            {"r_bound", h.schedule.r_bound}}},
      {"model", model_json(h.model)},
      {"weights",
       json{{"interior", h.weights.interior},
            {"boundary", h.weights.boundary},
            {"initial", h.weights.initial},
            {"data", h.weights.data}}},
  };
  j["deepritz_points"] = c.train.deepritz_points;
  j["chunk_columns"] = c.train.chunk_columns;
  j["top_k_fraction"] = c.train.top_k_fraction;
  j["seeds"] = c.seeds;
  j["deterministic"] = c.train.deterministic;
  j["workers"] = c.workers;
  j["out"] = c.out;
  j["sweep"] = sweep;
  return j;
}

RunConfig from_json(const json& j) {
  Obj root(j, "");
  RunConfig c;
  if (!root.has("problem")) throw FieldError("problem", "required field missing");
  root.get("problem", c.problem);

  if (root.has("problem_params")) {
    Obj p = root.child("problem_params");
    p.get("omega", c.params.omega);
    p.get_int("dim", c.params.dim);
    p.get("noise_sigma", c.params.noise_sigma);
    p.get_int("noise_seed", c.params.noise_seed);
    p.get_int("coefficient_seed", c.params.coefficient_seed);
    p.get_int("reference_nx", c.params.reference_nx);
    p.get_int("reference_nt", c.params.reference_nt);
    p.finish();
  }
  const ProblemSpec spec = as_field_errors([&] { return make_problem(c.problem, c.params); });

  TrainConfig& t = c.train;
  t.hp = spec.defaults;
  root.get_enum("method", t.method, method_from_string);
  root.get_int("deepritz_points", t.deepritz_points);
  root.get_int("chunk_columns", t.chunk_columns);
  root.get("top_k_fraction", t.top_k_fraction);
  root.get("deterministic", t.deterministic);
  root.get_int("workers", c.workers);
  root.get("out", c.out);

  if (root.has("hyperparameters")) {
    Obj h = root.child("hyperparameters");
    Hyperparameters& hp = t.hp;
    h.get_int("n_particles", hp.n_particles);
    h.get_int("top_k", hp.top_k);
    h.get_int("k_int", hp.k_int);
    h.get_int("n_bd_per_side", hp.n_bd_per_side);
    h.get_int("n_times", hp.n_times);
    h.get_int("n_init", hp.n_init);
    h.get_int("n_periodic", hp.n_periodic);
    h.get_int("max_iter", hp.max_iter);
    h.get("learning_rate", hp.learning_rate);
    h.get_int("eval_every", hp.eval_every);
    h.get_enum("test_function", hp.test_function, test_function_from_string);
    h.get_enum("meshgrid_layout", hp.meshgrid_layout, meshgrid_layout_from_string);
    if (h.has("schedule")) {
      Obj s = h.child("schedule");
      s.get_enum("kind", hp.schedule.kind, r_strategy_from_string);
      s.get("r_min", hp.schedule.r_min);
      s.get("r_max", hp.schedule.r_max_init);
      s.get("r_bound", hp.schedule.r_bound);
      s.finish();
    }
    if (h.has("model")) {
      Obj m = h.child("model");
      m.get_int("hidden_layers", hp.model.hidden_layers);
      m.get_int("width", hp.model.width);
      m.get_enum("activation", hp.model.activation, activation_from_string);
      m.get("residual_connections", hp.model.residual_connections);
      m.finish();
      if (hp.model.hidden_layers < 1) throw FieldError(m.path("hidden_layers"), "must be >= 1");
      if (hp.model.width < 1) throw FieldError(m.path("width"), "must be >= 1");
    }
    if (h.has("weights")) {
      Obj w = h.child("weights");
      w.get("interior", hp.weights.interior);
      w.get("boundary", hp.weights.boundary);
      w.get("initial", hp.weights.initial);
      w.get("data", hp.weights.data);
      w.finish();
    }
    h.finish();
  }

  if (root.has("seeds")) {
    const json& s = root.raw("seeds");
    if (!s.is_array()) throw FieldError("seeds", "expected a list of non-negative integers");
    c.seeds.clear();
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) throw FieldError("seeds", "expected a list of non-negative integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  if (root.has("sweep")) c.sweep = parse_sweep(root.raw("sweep"), "sweep");
  root.finish();
  validate(c, spec);
  return c;
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string hash_line(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

json summary_json(const Summary& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; }

json aggregate_json(const Aggregate& g) {
  json j{{"runs", g.runs},
         {"aborted", g.aborted},
         {"rel_l2", summary_json(g.rel_l2)},
         {"mae", summary_json(g.mae)},
         {"train_seconds", summary_json(g.seconds)}};
  if (g.rel_l2_a) {
    j["rel_l2_a"] = summary_json(*g.rel_l2_a);
    j["mae_a"] = summary_json(*g.mae_a);
  }
  return j;
}

json header(const RunConfig& c) { return json{{"config_hash", config_hash(c)}, {"config", to_json(c)}}; }

void log_error(std::ostream& log, const std::string& kind, const std::string& field, const std::string& message) {
  json e{{"error", kind}};
  if (!field.empty()) e["field"] = field;
  e["message"] = message;
  log << e.dump() << std::endl;
}

std::string sci(double v) {
  std::ostringstream o;
  o << std::scientific << std::setprecision(3) << v;
  return o.str();
}

// Runs a command body and maps exceptions onto exit codes.
template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const FieldError& e) {
    log_error(log, "config", e.field(), strip_prefix(e));
    return kExitConfig;
  } catch (const ConfigError& e) {
    log_error(log, "config", field_for(e.what()), e.what());
    return kExitConfig;
  } catch (const ContractError& e) {
    log_error(log, "config", field_for(e.what()), e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    log_error(log, "numeric", "", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    log_error(log, "runtime", "", e.what());
    return kExitFailure;
  }
}

std::vector<std::string> coordinate_names(const ProblemSpec& spec) {
  if (spec.t_final) return {"t", "x"};
  const Index d = spec.space_dim();
  if (d == 1) return {"x"};
  if (d == 2) return {"x", "y"};
  std::vector<std::string> n;
  for (Index j = 0; j < d; ++j) n.push_back("x" + std::to_string(j));
  return n;
}

Vector params_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw FieldError(path, "expected a list of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FieldError(path, "entry " + std::to_string(i) + " is not a number");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  if (!v.allFinite()) throw FieldError(path, "non-finite parameter");
  return v;
}

json params_to_json(const Vector& p) { return json(std::vector<double>(p.data(), p.data() + p.size())); }

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FieldError("config", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FieldError("config", "cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return parse_config(s.str());
}

std::string serialize(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) {
  json j = to_json(config);
  j.erase("out");
  j.erase("workers");
  return fnv1a(j.dump());
}

ProblemSpec build_problem(const RunConfig& config) {
  return as_field_errors([&] { return make_problem(config.problem, config.params); });
}

void validate(const RunConfig& c, const ProblemSpec& spec) {
  if (c.seeds.empty()) throw FieldError("seeds", "at least one seed is required");
  if (c.workers < 1) throw FieldError("workers", "must be >= 1");
  as_field_errors([&] {
    c.train.validate(spec);
    for (const auto& ax : c.sweep)
      if (ax.values.empty()) throw FieldError("sweep." + ax.key, "no values");
    if (c.sweep.empty()) return 0;
    // Every cell of the product, so a bad combination fails before anything runs.
    std::vector<std::size_t> pos(c.sweep.size(), 0);
    while (true) {
      TrainConfig probe = c.train;
      for (std::size_t i = 0; i < c.sweep.size(); ++i) apply_override(probe, c.sweep[i].key, c.sweep[i].values[pos[i]]);
      probe.validate(spec);
      std::size_t i = c.sweep.size();
      while (i-- > 0 && ++pos[i] == c.sweep[i].values.size()) pos[i] = 0;
      if (i == static_cast<std::size_t>(-1)) break;
    }
    return 0;
  });
}

std::vector<SweepAxis> parse_axes(const std::vector<std::string>& specs) {
  std::vector<SweepAxis> axes;
  for (const std::string& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      const auto named = as_field_errors([&] { return named_sweep(s); });
      axes.insert(axes.end(), named.begin(), named.end());
      continue;
    }
    SweepAxis ax;
    ax.key = s.substr(0, eq);
    std::stringstream rest(s.substr(eq + 1));
    for (std::string v; std::getline(rest, v, ',');)
      if (!v.empty()) ax.values.push_back(v);
    if (ax.key.empty() || ax.values.empty()) throw FieldError("sweep", "axis '" + s + "' must look like key=v1,v2");
    axes.push_back(std::move(ax));
  }
  return axes;
}

std::string output_dir(const RunConfig& config) {
  if (!config.out.empty()) return config.out;
  const char* root = std::getenv("PWNN_OUT_ROOT");
  const fs::path base = (root && *root) ? fs::path(root) : fs::path("runs");
  return (base / (config.problem + "-" + config_hash(config).substr(0, 8))).string();
}

void write_pointwise_csv(std::ostream& out, const Matrix& points, const std::vector<std::string>& names,
                         const Vector& predicted, const Vector& exact, const Vector* predicted_a,
                         const Vector* exact_a) {
  if (static_cast<Index>(names.size()) != points.cols() || predicted.size() != points.rows() ||
      exact.size() != points.rows())
    throw ShapeError("write_pointwise_csv: sizes disagree");
  const bool coef = predicted_a && exact_a;
  const auto old = out.precision(17);
  for (const auto& n : names) out << n << ',';
  out << "u_nn,u_exact,abs_error" << (coef ? ",a_nn,a_exact,abs_error_a" : "") << '\n';
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < points.cols(); ++j) out << points(i, j) << ',';
    out << predicted(i) << ',' << exact(i) << ',' << std::abs(predicted(i) - exact(i));
    if (coef) out << ',' << (*predicted_a)(i) << ',' << (*exact_a)(i) << ',' << std::abs((*predicted_a)(i) - (*exact_a)(i));
    out << '\n';
  }
  out.precision(old);
}

void write_checkpoint(const std::string& path, const RunConfig& config, std::uint64_t seed, const TrainResult& r) {
  json j = header(config);
  j["format"] = "pwnn-checkpoint";
  j["version"] = 1;
  j["seed"] = seed;
  j["iterations"] = r.report.history.size();
  j["aborted"] = r.report.aborted;
  j["models"] = json{{"u", params_to_json(r.u.params())}};
  if (r.a) j["models"]["a"] = params_to_json(r.a->params());
  write_file(path, j.dump(1) + "\n");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FieldError("checkpoint", "cannot read " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw FieldError("checkpoint", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "pwnn-checkpoint")
    throw FieldError("checkpoint.format", "not a pwnn checkpoint");
  if (!j.contains("version") || j["version"] != 1) throw FieldError("checkpoint.version", "unsupported version");
  if (!j.contains("config")) throw FieldError("checkpoint.config", "required field missing");
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) throw FieldError("checkpoint.seed", "expected an integer");
  if (!j.contains("models") || !j["models"].is_object()) throw FieldError("checkpoint.models", "required field missing");

  Checkpoint c;
  try {
    c.config = from_json(j["config"]);
  } catch (const FieldError& e) {
    throw FieldError("checkpoint.config." + e.field(), strip_prefix(e));
  }
  if (j.contains("config_hash") && j["config_hash"] != config_hash(c.config))
    throw FieldError("checkpoint.config_hash", "does not match the stored config");
  c.seed = j["seed"].get<std::uint64_t>();
  const ProblemSpec spec = build_problem(c.config);
  ModelConfig mc = c.config.train.hp.model;
  mc.input_dim = spec.input_dim();
  const json& m = j["models"];
  auto load = [&](const std::string& name) {
    if (!m.contains(name)) throw FieldError("checkpoint.models." + name, "required field missing");
    const Vector p = params_from_json(m[name], "checkpoint.models." + name);
    if (p.size() != mc.param_count())
      throw FieldError("checkpoint.models." + name, "expected " + std::to_string(mc.param_count()) +
                                                        " parameters, got " + std::to_string(p.size()));
    return Model(mc, p);
  };
  c.u = load("u");
  if (spec.kind == PdeKind::DiffusionCoefficientInverse) c.a = load("a");
  return c;
}

Matrix eval_grid(const ProblemSpec& spec, const std::string& grid) {
  if (grid == "default") return default_eval_set(spec).points;
  Index n = 0;
  try {
    std::size_t used = 0;
    n = std::stol(grid, &used);
    if (used != grid.size()) n = 0;
  } catch (const std::exception&) {
    n = 0;
  }
  if (n < 2) throw FieldError("grid", "expected 'default' or a number of points per axis >= 2");
  if (!spec.t_final) return grid_points(spec.domain, n);
  const Vector lo = (Vector(spec.input_dim()) << 0.0, spec.domain.lower).finished();
  const Vector hi = (Vector(spec.input_dim()) << *spec.t_final, spec.domain.upper).finished();
  return grid_points(HyperRect(lo, hi), n);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_run(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const ProblemSpec spec = build_problem(config);
    validate(config, spec);
    const fs::path dir = output_dir(config);
    const std::string hash = config_hash(config);
    const bool timing = !config.train.deterministic;
    write_file(dir / "config.json", header(config).dump(2) + "\n");
    log << "run " << config.problem << " seeds=" << config.seeds.size() << " out=" << dir.string() << std::endl;

    const MultiSeedResult res =
        multi_seed(spec, config.train, config.seeds, config.workers, [&](std::uint64_t seed, const TrainResult& r) {
          log << "seed " << seed << ": rel_l2 " << sci(r.report.final.u.rel_l2) << " mae " << sci(r.report.final.u.mae);
          if (r.report.final.a) log << " rel_l2_a " << sci(r.report.final.a->rel_l2);
          log << " iters " << r.report.history.size() << (r.report.aborted ? " ABORTED" : "") << std::endl;
        });

    json seeds = json::array();
    bool aborted = false;
    for (const TrainResult& r : res.runs) {
      const RunReport& rep = r.report;
      const fs::path sd = dir / ("seed_" + std::to_string(rep.seed));
      std::ostringstream hist, evals;
      hist << hash_line(hash);
      write_history_csv(hist, rep, timing);
      evals << hash_line(hash);
      write_evals_csv(evals, rep, timing);
      write_file(sd / "history.csv", hist.str());
      write_file(sd / "evals.csv", evals.str());
      write_checkpoint((sd / "checkpoint.json").string(), config, rep.seed, r);
      json e{{"seed", rep.seed},
             {"iterations", rep.history.size()},
             {"rel_l2", rep.final.u.rel_l2},
             {"mae", rep.final.u.mae},
             {"absolute", rep.final.u.absolute}};
      if (rep.final.a) {
        e["rel_l2_a"] = rep.final.a->rel_l2;
        e["mae_a"] = rep.final.a->mae;
      }
      e["train_seconds"] = rep.train_seconds;
      e["k_int_actual"] = rep.k_int_actual;
      e["n_per_axis"] = rep.n_per_axis;
      e["aborted"] = rep.aborted;
      e["diagnostic"] = rep.diagnostic;
      seeds.push_back(e);
      if (rep.aborted) {
        aborted = true;
        log_error(log, "numeric", "", "seed " + std::to_string(rep.seed) + ": " + rep.diagnostic);
      }
    }
    json summary = header(config);
    summary["seeds"] = seeds;
    summary["aggregate"] = aggregate_json(res.aggregate);
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    log << "rel_l2 " << sci(res.aggregate.rel_l2.mean) << " +- " << sci(res.aggregate.rel_l2.stddev) << std::endl;
    return aborted ? kExitNumeric : kExitOk;
  });
}

int cmd_sweep(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    if (config.sweep.empty()) throw FieldError("sweep", "no sweep axes (config \"sweep\" or --axis)");
    const ProblemSpec spec = build_problem(config);
    validate(config, spec);
    const fs::path dir = output_dir(config);
    const std::string hash = config_hash(config);
    write_file(dir / "config.json", header(config).dump(2) + "\n");
    log << "sweep " << config.problem << " out=" << dir.string() << std::endl;

    const SweepResult sweep = as_field_errors([&] {
      return ablation_sweep(spec, config.train, config.sweep, config.seeds, config.workers, [&](const SweepCell& c) {
        for (std::size_t i = 0; i < c.coordinates.size(); ++i)
          log << config.sweep[i].key << "=" << c.coordinates[i] << ' ';
        log << "rel_l2 " << sci(c.aggregate.rel_l2.mean) << " +- " << sci(c.aggregate.rel_l2.stddev) << std::endl;
      });
    });

    std::ostringstream table, longform;
    table << hash_line(hash);
    write_sweep_table(table, sweep);
    longform << hash_line(hash);
    write_sweep_long(longform, sweep);
    if (sweep.axes.size() <= 2) write_file(dir / "sweep_table.csv", table.str());
    write_file(dir / "sweep_long.csv", longform.str());

    json cells = json::array();
    Index aborted = 0;
    for (const SweepCell& c : sweep.cells) {
      json coords;
      for (std::size_t i = 0; i < c.coordinates.size(); ++i) coords[sweep.axes[i].key] = c.coordinates[i];
      cells.push_back(json{{"coordinates", coords}, {"aggregate", aggregate_json(c.aggregate)}});
      aborted += c.aggregate.aborted;
    }
    json summary = header(config);
    summary["cells"] = cells;
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    if (aborted > 0) {
      log_error(log, "numeric", "", std::to_string(aborted) + " run(s) aborted on a non-finite loss");
      return kExitNumeric;
    }
    return kExitOk;
  });
}

int cmd_eval(const std::string& checkpoint_path, const std::string& grid, const std::string& out_path,
             std::ostream& log) {
  return guarded(log, [&] {
    const Checkpoint ck = read_checkpoint(checkpoint_path);
    const ProblemSpec spec = build_problem(ck.config);
    const Matrix points = eval_grid(spec, grid);
    Vector exact(points.rows());
    if (spec.exact_solution) {
      exact = spec.exact_solution(points);
    } else {
      for (Index i = 0; i < points.rows(); ++i) exact(i) = spec.reference->at(points(i, 0), points(i, 1));
    }
    const Vector pred = forward(ck.u, points).values.col(0);
    const Metrics m = evaluate(pred, exact);
    std::optional<Vector> pa, ea;
    std::optional<Metrics> ma;
    if (ck.a && spec.exact_coefficient) {
      pa = forward(*ck.a, points).values.col(0);
      ea = spec.exact_coefficient(points);
      ma = evaluate(*pa, *ea);
    }
    std::ostringstream csv;
    csv << hash_line(config_hash(ck.config));
    write_pointwise_csv(csv, points, coordinate_names(spec), pred, exact, pa ? &*pa : nullptr, ea ? &*ea : nullptr);
    const fs::path out = out_path.empty() ? fs::path(checkpoint_path).parent_path() / "pointwise.csv" : fs::path(out_path);
    write_file(out, csv.str());
    json line{{"points", points.rows()}, {"rel_l2", m.rel_l2}, {"mae", m.mae}, {"absolute", m.absolute}};
    if (ma) {
      line["rel_l2_a"] = ma->rel_l2;
      line["mae_a"] = ma->mae;
    }
    line["out"] = out.string();
    log << line.dump() << std::endl;
    return kExitOk;
  });
}

int cmd_reference(Index nx, Index nt, const std::string& out_path, std::ostream& log) {
  return guarded(log, [&] {
    if (nx < 256) throw FieldError("nx", "must be >= 256");
    if (nt < 1000) throw FieldError("nt", "must be >= 1000");
    const AllenCahnReference ref = allen_cahn_reference(nx, nt);
    std::ostringstream csv;
    write_reference_csv(csv, ref);
    write_file(out_path, csv.str());
    log << "reference " << nx << "x" << nt << " -> " << out_path << std::endl;
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int main(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"ParticleWNN weak-form PDE solver"};
  app.require_subcommand(1);

  std::string config_path, out, seeds, grid = "default", checkpoint;
  bool deterministic = false;
  int workers = 0;
  std::vector<std::string> axes;
  Index nx = 256, nt = 1000;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config,--config", config_path, "JSON run config")->required();
    sub->add_option("--seeds", seeds, "Comma-separated seeds (overrides the config)");
    sub->add_option("--out", out, "Output directory (default $PWNN_OUT_ROOT/<problem>-<hash>)");
    sub->add_flag("--deterministic", deterministic, "Omit wall-clock columns so reruns are byte-identical");
    sub->add_option("--workers", workers, "Seeds trained concurrently");
  };
  CLI::App* run = app.add_subcommand("run", "Train every seed and write reports, checkpoints and summary.json");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Cartesian hyperparameter sweep");
  add_common(sweep);
  sweep->add_option("--axis", axes, "key=v1,v2,... or a named sweep (r_strategy, np_topk, np_kint); repeatable");
  CLI::App* eval = app.add_subcommand("eval", "Pointwise errors of a checkpoint");
  eval->add_option("checkpoint,--checkpoint", checkpoint, "Checkpoint JSON")->required();
  eval->add_option("--grid", grid, "'default' or points per axis");
  eval->add_option("--out", out, "Output CSV (default: pointwise.csv next to the checkpoint)");
  CLI::App* ref = app.add_subcommand("reference", "Write the Allen-Cahn reference solution");
  ref->add_option("--nx", nx, "Spatial nodes");
  ref->add_option("--nt", nt, "Time steps");
  ref->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    log_error(log, "usage", "argv", e.what());
    return kExitConfig;
  }

  if (*eval) return cmd_eval(checkpoint, grid, out, log);
  if (*ref) return cmd_reference(nx, nt, out, log);

  RunConfig cfg;
  const int loaded = guarded(log, [&] {
    cfg = load_config(config_path);
    if (!seeds.empty()) {
      cfg.seeds.clear();
      std::stringstream s(seeds);
      for (std::string v; std::getline(s, v, ',');) {
        try {
          std::size_t used = 0;
          if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
          cfg.seeds.push_back(std::stoull(v, &used));
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
          throw FieldError("seeds", "'" + seeds + "' is not a comma-separated list of non-negative integers");
        }
      }
    }
    if (!out.empty()) cfg.out = out;
    if (deterministic) cfg.train.deterministic = true;
    if (workers != 0) cfg.workers = workers;
    if (!axes.empty()) cfg.sweep = parse_axes(axes);
    validate(cfg, build_problem(cfg));
    return kExitOk;
  });
  if (loaded != kExitOk) return loaded;
  return *run ? cmd_run(cfg, log) : cmd_sweep(cfg, log);
}

}  // namespace pwnn::cli
