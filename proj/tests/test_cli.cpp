#include "doctest.h"

#include "json.hpp"
#include "pwnn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace pwnn;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pwnn_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int run_cli(std::vector<std::string> args, std::string* log_out = nullptr) {
  args.insert(args.begin(), "pwnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), log);
  if (log_out) *log_out = log.str();
  return code;
}

// Rows of a CSV with '#' lines dropped.
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

const char* kSmall = R"({"problem": "poisson1d",
  "hyperparameters": {"max_iter": 6, "n_particles": 20, "top_k": 15, "k_int": 10, "eval_every": 3,
                      "model": {"width": 6, "hidden_layers": 2}},
  "deterministic": true})";

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const cli::FieldError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("cli: config defaults and round trip") {
  const cli::RunConfig c = cli::parse_config(R"({"problem": "highdim", "problem_params": {"dim": 10}})");
  CHECK(c.train.hp.k_int == 1161);
  CHECK(c.train.hp.model.width == 25);
  CHECK(c.train.hp.max_iter == 50000);
  CHECK(c.seeds.size() == 5);

  for (const char* text :
       {R"({"problem": "poisson1d", "problem_params": {"omega": 47.12388980384689674}, "hyperparameters": {"learning_rate": 0.1234567890123, "schedule": {"kind": "fixed"}}})",
        R"({"problem": "inverse", "problem_params": {"noise_sigma": 0.1}, "seeds": [3, 18446744073709551615]})",
        R"({"problem": "allen_cahn", "sweep": {"kind": "np_kint"}, "top_k_fraction": 0.75})",
        R"({"problem": "highdim", "method": "deepritz", "out": "x/y", "workers": 3})"}) {
    CAPTURE(text);
    const cli::RunConfig a = cli::parse_config(text);
    const std::string s1 = cli::serialize(a);
    const cli::RunConfig b = cli::parse_config(s1);
    CHECK(cli::serialize(b) == s1);
    CHECK(cli::config_hash(a) == cli::config_hash(b));
  }
  const cli::RunConfig ac = cli::parse_config(R"({"problem": "allen_cahn", "sweep": {"kind": "np_kint"}})");
  REQUIRE(ac.sweep.size() == 2);
  CHECK(ac.sweep[1].key == "k_int");
}

TEST_CASE("cli: config errors name the field") {
  CHECK(field_of([] { cli::parse_config(R"({"hyperparameters": {}})"); }) == "problem");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "hyperparameters": {"topk": 3}})"); }) ==
        "hyperparameters.topk");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "hyperparameters": {"model": {"depth": 3}}})"); }) ==
        "hyperparameters.model.depth");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "hyperparameters": {"k_int": 2.5}})"); }) ==
        "hyperparameters.k_int");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "hyperparameters": {"top_k": 500}})"); }) ==
        "hyperparameters.top_k");
  CHECK(field_of([] {
          cli::parse_config(R"({"problem": "poisson1d", "hyperparameters": {"schedule": {"r_max": 2.0}}})");
        }) == "hyperparameters.schedule.r_max");
  CHECK(field_of([] {
          cli::parse_config(R"({"problem": "poisson1d", "hyperparameters": {"model": {"activation": "relu"}}})");
        }) == "hyperparameters.model.activation");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "heat"})"); }) == "problem");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "highdim", "problem_params": {"dim": 1}})"); }) ==
        "problem_params.dim");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "seeds": [-1]})"); }) == "seeds");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "seeds": []})"); }) == "seeds");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "sweep": [{"key": "depth", "values": [1]}]})"); }) ==
        "sweep.depth");
  CHECK(field_of([] { cli::parse_config(R"({"problem": "poisson1d", "method": "deepritz", "problem_params": {"oops": 1}})"); }) ==
        "problem_params.oops");
  CHECK(field_of([] { cli::parse_config("{not json"); }) == "config");
}

TEST_CASE("cli: config hash") {
  const cli::RunConfig a = cli::parse_config(kSmall);
  cli::RunConfig b = a;
  b.out = "elsewhere";
  b.workers = 4;
  CHECK(cli::config_hash(a) == cli::config_hash(b));
  CHECK(cli::config_hash(a).size() == 16);
  b.train.hp.learning_rate *= 2.0;
  CHECK(cli::config_hash(a) != cli::config_hash(b));
  b = a;
  b.seeds = {0, 1};
  CHECK(cli::config_hash(a) != cli::config_hash(b));

  const fs::path root = scratch("root");
  setenv("PWNN_OUT_ROOT", root.c_str(), 1);
  CHECK(cli::output_dir(a) == (root / ("poisson1d-" + cli::config_hash(a).substr(0, 8))).string());
  unsetenv("PWNN_OUT_ROOT");
  CHECK(cli::output_dir(a).rfind("runs/", 0) == 0);
}

TEST_CASE("cli: run writes reports, checkpoints and a summary") {
  const fs::path dir = scratch("run");
  spit(dir / "small.json", kSmall);
  std::string log;
  REQUIRE(run_cli({"run", (dir / "small.json").string(), "--out", (dir / "a").string()}, &log) == cli::kExitOk);
  const json summary = json::parse(slurp(dir / "a" / "summary.json"));
  REQUIRE(summary["seeds"].size() == 5);
  const std::string hash = summary["config_hash"];
  CHECK(summary["config"]["hyperparameters"]["max_iter"] == 6);
  CHECK(summary["aggregate"]["runs"] == 5);
  for (int s = 0; s < 5; ++s) {
    CHECK(summary["seeds"][static_cast<std::size_t>(s)]["seed"] == s);
    const fs::path sd = dir / "a" / ("seed_" + std::to_string(s));
    for (const char* f : {"history.csv", "evals.csv"}) CHECK(slurp(sd / f).rfind("# config_hash=" + hash + "\n", 0) == 0);
    CHECK(json::parse(slurp(sd / "checkpoint.json"))["config_hash"] == hash);
    CHECK(read_csv(sd / "history.csv").size() == 7);
  }
  std::vector<double> l2;
  for (const auto& e : summary["seeds"]) l2.push_back(e["rel_l2"]);
  CHECK(summary["aggregate"]["rel_l2"]["mean"].get<double>() == doctest::Approx(summarize(l2).mean).epsilon(1e-15));

  // Same config, deterministic: byte-identical CSVs.
  REQUIRE(run_cli({"run", "--config", (dir / "small.json").string(), "--out", (dir / "b").string(), "--workers", "2"}) ==
          cli::kExitOk);
  for (int s = 0; s < 5; ++s)
    for (const char* f : {"history.csv", "evals.csv"}) {
      const fs::path rel = fs::path("seed_" + std::to_string(s)) / f;
      CHECK(slurp(dir / "a" / rel) == slurp(dir / "b" / rel));
    }

  // Seeds from the command line; wall-clock columns without --deterministic.
  json timed = json::parse(kSmall);
  timed["deterministic"] = false;
  spit(dir / "timed.json", timed.dump());
  REQUIRE(run_cli({"run", (dir / "timed.json").string(), "--seeds", "7", "--out", (dir / "t").string()}) ==
          cli::kExitOk);
  CHECK(read_csv(dir / "t" / "seed_7" / "history.csv")[0].back() == "wall_ms");
  CHECK(read_csv(dir / "t" / "seed_7" / "evals.csv")[0].back() == "wall_ms");
  CHECK(read_csv(dir / "a" / "seed_0" / "history.csv")[0].back() == "r_max");
}

TEST_CASE("cli: run exit codes") {
  const fs::path dir = scratch("codes");
  spit(dir / "missing.json", R"({"hyperparameters": {"max_iter": 1}})");
  std::string log;
  CHECK(run_cli({"run", (dir / "missing.json").string()}, &log) == cli::kExitConfig);
  const json err = json::parse(log);
  CHECK(err["error"] == "config");
  CHECK(err["field"] == "problem");

  CHECK(run_cli({"run", (dir / "nothere.json").string()}, &log) == cli::kExitConfig);
  CHECK(run_cli({"frobnicate"}, &log) == cli::kExitConfig);
  CHECK(run_cli({"run"}, &log) == cli::kExitConfig);
  spit(dir / "small.json", kSmall);
  CHECK(run_cli({"run", (dir / "small.json").string(), "--seeds", "1,-2"}, &log) == cli::kExitConfig);
  CHECK(json::parse(log)["field"] == "seeds");

  // A huge step drives the network to overflow.
  json blow = json::parse(kSmall);
  blow["hyperparameters"]["learning_rate"] = 1e300;
  blow["hyperparameters"]["max_iter"] = 20;
  spit(dir / "blow.json", blow.dump());
  CHECK(run_cli({"run", (dir / "blow.json").string(), "--seeds", "1", "--out", (dir / "blow").string()}, &log) ==
        cli::kExitNumeric);
  CHECK(log.find("\"numeric\"") != std::string::npos);
  const json s = json::parse(slurp(dir / "blow" / "summary.json"));
  CHECK(s["seeds"][0]["aborted"] == true);
  CHECK(s["seeds"][0]["diagnostic"].get<std::string>().rfind("iteration ", 0) == 0);
  CHECK(fs::exists(dir / "blow" / "seed_1" / "checkpoint.json"));
}

TEST_CASE("cli: sweep") {
  const fs::path dir = scratch("sweep");
  spit(dir / "small.json", kSmall);
  const std::string cfg = (dir / "small.json").string();

  REQUIRE(run_cli({"sweep", cfg, "--axis", "k_int=10", "--seeds", "0,1", "--out", (dir / "one").string()}) ==
          cli::kExitOk);
  REQUIRE(run_cli({"run", cfg, "--seeds", "0,1", "--out", (dir / "run").string()}) == cli::kExitOk);
  const json one = json::parse(slurp(dir / "one" / "summary.json"));
  const json run = json::parse(slurp(dir / "run" / "summary.json"));
  REQUIRE(one["cells"].size() == 1);
  CHECK(one["cells"][0]["aggregate"]["rel_l2"] == run["aggregate"]["rel_l2"]);
  CHECK(one["cells"][0]["aggregate"]["mae"] == run["aggregate"]["mae"]);

  REQUIRE(run_cli({"sweep", cfg, "--axis", "n_particles=20,30", "--axis", "k_int=5,10", "--seeds", "0", "--out",
                   (dir / "grid").string()}) == cli::kExitOk);
  CHECK(json::parse(slurp(dir / "grid" / "summary.json"))["cells"].size() == 4);
  const auto table = read_csv(dir / "grid" / "sweep_table.csv");
  REQUIRE(table.size() == 3);
  CHECK(table[0] == std::vector<std::string>{"n_particles\\k_int", "5", "10"});
  CHECK(read_csv(dir / "grid" / "sweep_long.csv").size() == 5);

  json rs = json::parse(kSmall);
  rs["hyperparameters"]["max_iter"] = 1;
  rs["sweep"] = {{"kind", "r_strategy"}};
  spit(dir / "rs.json", rs.dump());
  REQUIRE(run_cli({"sweep", (dir / "rs.json").string(), "--seeds", "0", "--out", (dir / "rs").string()}) ==
          cli::kExitOk);
  const auto rt = read_csv(dir / "rs" / "sweep_table.csv");
  REQUIRE(rt.size() == 4);
  CHECK(rt[0] == std::vector<std::string>{"r_strategy\\r_max", "1e-1", "1e-2", "1e-3", "1e-4", "1e-5"});
  CHECK(rt[1][0] == "fixed");
  CHECK(rt[3][0] == "descending");

  std::string log;
  CHECK(run_cli({"sweep", cfg, "--out", (dir / "none").string()}, &log) == cli::kExitConfig);
  CHECK(json::parse(log)["field"] == "sweep");
  CHECK(run_cli({"sweep", cfg, "--axis", "top_k=10,50", "--out", (dir / "bad").string()}, &log) == cli::kExitConfig);
  CHECK(json::parse(log)["field"] == "hyperparameters.top_k");
  CHECK_FALSE(fs::exists(dir / "bad" / "summary.json"));
}

TEST_CASE("cli: eval") {
  const fs::path dir = scratch("eval");
  json inv = json::parse(kSmall);
  inv["problem"] = "inverse";
  inv["hyperparameters"]["max_iter"] = 2;
  spit(dir / "inv.json", inv.dump());
  spit(dir / "small.json", kSmall);
  REQUIRE(run_cli({"run", (dir / "small.json").string(), "--seeds", "2", "--out", (dir / "p").string()}) ==
          cli::kExitOk);
  REQUIRE(run_cli({"run", (dir / "inv.json").string(), "--seeds", "2", "--out", (dir / "i").string()}) ==
          cli::kExitOk);

  std::string log;
  const fs::path ck = dir / "p" / "seed_2" / "checkpoint.json";
  REQUIRE(run_cli({"eval", ck.string()}, &log) == cli::kExitOk);
  const json line = json::parse(log);
  const auto rows = read_csv(dir / "p" / "seed_2" / "pointwise.csv");
  REQUIRE(rows.size() == 1001);
  CHECK(rows[0] == std::vector<std::string>{"x", "u_nn", "u_exact", "abs_error"});
  double max_err = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double un = std::stod(rows[i][1]), ue = std::stod(rows[i][2]), e = std::stod(rows[i][3]);
    CHECK(e == std::abs(un - ue));
    max_err = std::max(max_err, e);
  }
  CHECK(max_err == line["mae"].get<double>());
  const json summary = json::parse(slurp(dir / "p" / "summary.json"));
  CHECK(line["rel_l2"] == summary["seeds"][0]["rel_l2"]);

  // Checkpoint round trip.
  const cli::Checkpoint c = cli::read_checkpoint(ck.string());
  CHECK(c.seed == 2);
  CHECK(cli::config_hash(c.config) == summary["config_hash"].get<std::string>());

  REQUIRE(run_cli({"eval", (dir / "i" / "seed_2" / "checkpoint.json").string(), "--grid", "7", "--out",
                   (dir / "inv.csv").string()},
                  &log) == cli::kExitOk);
  const auto irows = read_csv(dir / "inv.csv");
  REQUIRE(irows.size() == 50);
  CHECK(irows[0].size() == 8);
  CHECK(json::parse(log).contains("rel_l2_a"));

  // Malformed checkpoints.
  spit(dir / "trunc.json", slurp(ck).substr(0, 200));
  CHECK(run_cli({"eval", (dir / "trunc.json").string()}, &log) == cli::kExitConfig);
  json bad = json::parse(slurp(ck));
  bad["models"]["u"].erase(0);
  spit(dir / "short.json", bad.dump());
  CHECK(run_cli({"eval", (dir / "short.json").string()}, &log) == cli::kExitConfig);
  CHECK(json::parse(log)["field"] == "checkpoint.models.u");
  bad = json::parse(slurp(ck));
  bad["config"]["hyperparameters"]["k_int"] = 11;
  spit(dir / "hash.json", bad.dump());
  CHECK(run_cli({"eval", (dir / "hash.json").string()}, &log) == cli::kExitConfig);
  CHECK(json::parse(log)["field"] == "checkpoint.config_hash");
  CHECK(run_cli({"eval", ck.string(), "--grid", "one"}, &log) == cli::kExitConfig);
}

TEST_CASE("cli: pointwise CSV of an exact fit") {
  const Matrix pts = Vector::LinSpaced(5, -1.0, 1.0);
  const Vector u = (pts.col(0).array() * 3.0).sin().matrix();
  std::ostringstream out;
  cli::write_pointwise_csv(out, pts, {"x"}, u, u);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,u_nn,u_exact,abs_error");
  int n = 0;
  while (std::getline(in, line)) {
    CHECK(line.substr(line.rfind(',') + 1) == "0");
    ++n;
  }
  CHECK(n == 5);
}

TEST_CASE("cli: evaluation grids") {
  const ProblemSpec ac = allen_cahn_spec();
  const Matrix g = cli::eval_grid(ac, "5");
  CHECK(g.rows() == 25);
  CHECK(g.col(0).minCoeff() == 0.0);
  CHECK(g.col(0).maxCoeff() == 1.0);
  CHECK(g.col(1).minCoeff() == -1.0);
  CHECK(cli::eval_grid(highdim_spec(3), "4").rows() == 64);
  CHECK(cli::eval_grid(poisson1d_spec(1.0), "default").rows() == 1000);
  CHECK_THROWS_AS(cli::eval_grid(ac, "1"), cli::FieldError);
}

TEST_CASE("cli: reference") {
  const fs::path dir = scratch("ref");
  std::string log;
  CHECK(run_cli({"reference", "--out", (dir / "r.csv").string()}, &log) == cli::kExitOk);
  const auto rows = read_csv(dir / "r.csv");
  CHECK(rows[0] == std::vector<std::string>{"t", "x", "u"});
  CHECK(rows.size() == 1 + 1001 * 256);
  CHECK(run_cli({"reference", "--nx", "64", "--out", (dir / "s.csv").string()}, &log) == cli::kExitConfig);
  CHECK(json::parse(log)["field"] == "nx");
}
