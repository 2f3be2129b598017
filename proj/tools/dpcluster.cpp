// dpcluster: planted-data generator, experiment runner and DP self-check.
#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#include "dpc/central.hpp"
#include "dpc/error.hpp"
#include "dpc/generator.hpp"
#include "dpc/kmeans.hpp"
#include "dpc/ldp_cluster.hpp"
#include "dpc/verify_dp.hpp"
#include "report.hpp"

namespace {

using dpc::cli::Json;

constexpr int kExitPrecondition = 2;
constexpr int kExitNotFound = 3;
constexpr int kExitDpFailure = 4;

struct DataConfig {
  std::string data;  // CSV path; empty means generate
  std::size_t n = 10000;
  int d = 10;
  std::int64_t side = 1025;
  std::size_t clusters = 1;
  std::size_t cluster_size = 0;  // 0: t (or n/4 for gen)
  double radius = 0.02;
};

struct RunConfig {
  DataConfig data;
  std::string algo = "1cluster";
  std::string model = "central";
  std::size_t t = 0;
  int k = 3;
  double eps = 1.0;
  double delta = 1e-6;
  double beta = 0.05;
  double lsh_a = 0.2;
  double lsh_b = 0.1;
  double lsh_c = 4.0;
  bool compress = false;
  std::size_t repetitions = 0;
  std::size_t list_cap = 0;
  double t_min = 0.0;
  double eps_cap = std::numeric_limits<double>::infinity();
  double delta_cap = 1.0;
  bool no_oracle = false;
  std::string report;
  std::string transcript;
  std::string centers;
};

struct SeedSetting {
  std::uint64_t value = 1;
  std::string source = "default";
};

void add_data_options(CLI::App* app, DataConfig& c) {
  app->add_option("--n", c.n, "points to generate")->check(CLI::PositiveNumber);
  app->add_option("--d", c.d, "dimension")->check(CLI::PositiveNumber);
  app->add_option("--domain-size", c.side, "grid points per axis |X|")->check(CLI::Range(std::int64_t{2}, std::int64_t{1} << 40));
  app->add_option("--clusters", c.clusters, "planted clusters");
  app->add_option("--cluster-size", c.cluster_size, "points per planted cluster");
  app->add_option("--radius", c.radius, "planted cluster radius")->check(CLI::NonNegativeNumber);
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw dpc::PreconditionError("config: values must be scalars");
}

// Config-file keys are long option names without the dashes and take
// precedence over the command line.
void apply_config(CLI::App* app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dpc::PreconditionError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw dpc::PreconditionError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw dpc::PreconditionError("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = key == "config" || key == "help" ? nullptr : app->get_option_no_throw("--" + key);
    if (!opt) throw dpc::PreconditionError("config: unknown key '" + key + "'");
    opt->clear();
    opt->add_result(json_scalar(value));
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw dpc::PreconditionError("config: " + key + ": " + e.what());
    }
  }
}

void resolve_seed(CLI::Option* opt, SeedSetting& seed) {
  if (opt->count() > 0) {
    seed.source = "flag";
    return;
  }
  if (const char* env = std::getenv("DPCLUSTER_SEED")) {
    try {
      seed.value = std::stoull(env);
    } catch (const std::exception&) {
      throw dpc::PreconditionError(std::string("DPCLUSTER_SEED is not an integer: ") + env);
    }
    seed.source = "env";
  }
}

dpc::Dataset make_dataset(const DataConfig& c, std::size_t default_cluster_size, dpc::Rng& rng) {
  if (!c.data.empty()) {
    std::ifstream in(c.data);
    if (!in) throw dpc::PreconditionError("cannot open dataset " + c.data);
    return dpc::read_dataset_csv(in);
  }
  dpc::GridSpec grid{c.d, c.side};
  grid.validate();
  const std::size_t size = c.cluster_size ? c.cluster_size : default_cluster_size;
  const auto planted = dpc::random_planted_config(grid, c.n, c.clusters, size, c.radius, rng);
  return dpc::generate_planted(planted, rng);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dpc::PreconditionError("cannot write " + path);
  return out;
}

void emit(const Json& record, const std::string& path) {
  if (path.empty()) {
    std::cout << record.dump() << "\n";
  } else {
    auto out = open_out(path);
    out << record.dump() << "\n";
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void check_cap(double eps, double delta, const RunConfig& c) {
  if (eps > c.eps_cap * (1 + 1e-12) || delta > c.delta_cap * (1 + 1e-12))
    throw dpc::BudgetExhausted("ledger (" + std::to_string(eps) + ", " + std::to_string(delta) +
                               ") exceeds the configured cap (" + std::to_string(c.eps_cap) + ", " +
                               std::to_string(c.delta_cap) + ")");
}

std::string sibling(const std::string& report, const std::string& explicit_path, const std::string& suffix) {
  if (!explicit_path.empty()) return explicit_path;
  return report.empty() ? std::string() : report + suffix;
}

Json config_json(const RunConfig& c, const SeedSetting& seed) {
  return {{"algo", c.algo},          {"model", c.model},
          {"n", c.data.n},           {"d", c.data.d},
          {"domain_size", c.data.side}, {"clusters", c.data.clusters},
          {"cluster_size", c.data.cluster_size}, {"radius", c.data.radius},
          {"data", c.data.data},     {"t", c.t},
          {"k", c.k},                {"eps", c.eps},
          {"delta", c.delta},        {"beta", c.beta},
          {"lsh_a", c.lsh_a},        {"lsh_b", c.lsh_b},
          {"lsh_c", c.lsh_c},        {"rounds_compress", c.compress},
          {"repetitions", c.repetitions}, {"list_cap", c.list_cap},
          {"t_min", c.t_min},        {"eps_cap", std::isfinite(c.eps_cap) ? Json(c.eps_cap) : Json("none")},
          {"delta_cap", c.delta_cap}, {"seed", seed.value},
          {"seed_source", seed.source}};
}

int cmd_gen(const DataConfig& c, const SeedSetting& seed, const std::string& out_path) {
  dpc::Rng master(seed.value);
  dpc::Rng data_rng = master.split();
  const auto data = make_dataset(c, c.n / 4, data_rng);
  if (out_path.empty()) {
    dpc::write_dataset_csv(std::cout, data);
  } else {
    auto out = open_out(out_path);
    dpc::write_dataset_csv(out, data);
  }
  return 0;
}

int cmd_run(const RunConfig& c, const SeedSetting& seed) {
  const auto start = std::chrono::steady_clock::now();
  if (c.model != "central" && c.model != "local") throw dpc::PreconditionError("--model must be central or local");
  if (c.algo != "1cluster" && c.algo != "kmeans") throw dpc::PreconditionError("--algo must be 1cluster or kmeans");

  dpc::Rng master(seed.value);
  dpc::Rng data_rng = master.split();
  dpc::Rng algo_rng = master.split();
  dpc::Rng eval_rng = master.split();

  const std::size_t default_size = c.algo == "1cluster" ? c.t : c.data.n / (2 * static_cast<std::size_t>(c.k));
  if (c.algo == "1cluster" && c.t == 0 && c.data.data.empty() && c.data.cluster_size == 0)
    throw dpc::PreconditionError("--t is required");
  const auto data = make_dataset(c.data, default_size, data_rng);
  const std::size_t t = c.t ? c.t : c.data.cluster_size;
  if (c.algo == "1cluster" && (t == 0 || t > data.size()))
    throw dpc::PreconditionError("--t must lie in [1, n]; got " + std::to_string(t) + " with n=" +
                                 std::to_string(data.size()));

  dpc::LshParams lsh;
  lsh.a = c.lsh_a;
  lsh.b = c.lsh_b;
  lsh.c = c.lsh_c;
  lsh.validate();

  Json record{{"schema_version", dpc::cli::kSchemaVersion}, {"command", "run"}, {"config", config_json(c, seed)}};
  record["dataset"] = {{"n", data.size()}, {"d", data.dim()}, {"domain_size", data.grid().side}};
  const std::string transcript_path = sibling(c.report, c.transcript, ".transcript.jsonl");
  bool not_found = false;

  if (c.algo == "1cluster") {
    dpc::Solution sol;
    Json local_stats;
    std::optional<dpc::LrOracle> oracle;
    if (c.model == "central") {
      dpc::CentralOptions opt;
      opt.lsh = lsh;
      opt.repetitions = c.repetitions;
      sol = dpc::solve_1cluster(data, t, c.eps, c.delta, c.beta, algo_rng, opt);
      const auto total = sol.budget_spent.total();
      check_cap(total.epsilon, total.delta, c);
    } else {
      dpc::LdpClusterOptions opt;
      opt.lsh = lsh;
      opt.repetitions = c.repetitions;
      opt.list_cap = c.list_cap;
      opt.compress = c.compress;
      oracle.emplace(data, c.eps, !transcript_path.empty());
      std::vector<std::size_t> users(data.size());
      for (std::size_t i = 0; i < users.size(); ++i) users[i] = i;
      dpc::ExclusionPredicate none;
      sol = dpc::ldp_1cluster(*oracle, users, t, c.eps, c.beta, none, algo_rng, opt);
      check_cap(oracle->max_user_epsilon(), 0.0, c);
      local_stats = {{"declared_eps", oracle->declared_epsilon()},
                     {"max_user_eps", oracle->max_user_epsilon()},
                     {"max_rounds_per_user", oracle->max_rounds_per_user()},
                     {"invocations", oracle->invocations()},
                     {"ledger_ok", oracle->ledger_ok()}};
    }
    not_found = sol.fallback;
    record["status"] = not_found ? "not_found" : "ok";
    record["solution"] = dpc::cli::solution_json(sol);
    record["truth"] = dpc::cli::truth_json(data, sol, t, !c.no_oracle);
    record["budget"] = dpc::cli::ledger_json(sol.budget_spent);
    if (oracle) {
      record["local"] = local_stats;
      if (!transcript_path.empty()) {
        auto out = open_out(transcript_path);
        oracle->write_transcript(out);
        record["transcript"] = transcript_path;
      }
    }
  } else {
    dpc::KMeansResult res;
    std::optional<dpc::LrOracle> oracle;
    if (c.model == "central") {
      dpc::DpKMeansOptions opt;
      opt.cluster.lsh = lsh;
      opt.cluster.repetitions = c.repetitions;
      opt.t_min = c.t_min;
      res = dpc::dp_kmeans_centralized(data, c.k, c.eps, c.delta, c.beta, algo_rng, opt);
    } else {
      dpc::LdpKMeansOptions opt;
      opt.cluster.lsh = lsh;
      opt.cluster.repetitions = c.repetitions;
      opt.cluster.list_cap = c.list_cap;
      opt.cluster.compress = c.compress;
      opt.t_min = c.t_min;
      oracle.emplace(data, dpc::ldp_kmeans_user_budget(data.size(), c.k, c.eps), !transcript_path.empty());
      res = dpc::ldp_kmeans(*oracle, c.k, c.eps, c.delta, c.beta, algo_rng, opt);
    }
    check_cap(res.privacy.epsilon, res.privacy.delta, c);
    dpc::annotate_trace(res, data);
    const double cost = dpc::cost(data, res.centers);
    const double baseline = dpc::cost(data, dpc::lloyd_baseline(data, c.k, eval_rng));
    record["status"] = "ok";
    record["summary"] = dpc::cli::kmeans_summary(cost, baseline, res);
    record["kmeans"] = dpc::cli::kmeans_json(res);
    record["trace_check"] = dpc::cli::trace_check_json(dpc::validate_trace(res, c.k, c.beta));
    record["budget"] = dpc::cli::ledger_json(res.budget);
    if (oracle) {
      record["local"] = {{"declared_eps", oracle->declared_epsilon()},
                         {"max_user_eps", oracle->max_user_epsilon()},
                         {"max_rounds_per_user", oracle->max_rounds_per_user()},
                         {"invocations", oracle->invocations()},
                         {"ledger_ok", oracle->ledger_ok()}};
      if (!transcript_path.empty()) {
        auto out = open_out(transcript_path);
        oracle->write_transcript(out);
        record["transcript"] = transcript_path;
      }
    }
    const std::string centers_path = sibling(c.report, c.centers, ".centers.csv");
    if (!centers_path.empty()) {
      auto out = open_out(centers_path);
      dpc::cli::write_centers_csv(out, res.centers);
      record["centers_file"] = centers_path;
    }
  }
  record["wall_time_s"] = seconds_since(start);
  emit(record, c.report);
  return not_found ? kExitNotFound : 0;
}

int cmd_verify(const dpc::VerifyOptions& o, const std::string& report) {
  const auto start = std::chrono::steady_clock::now();
  const auto checks = dpc::verify_dp(o);
  Json list = Json::array();
  bool all = true;
  for (const auto& c : checks) {
    list.push_back(dpc::cli::check_json(c));
    all = all && c.pass;
    std::cerr << (c.pass ? "PASS " : "FAIL ") << c.name << " worst=" << c.worst << " tol=" << c.tolerance << "\n";
  }
  Json record{{"schema_version", dpc::cli::kSchemaVersion},
              {"command", "verify-dp"},
              {"config",
               {{"trials", o.trials},
                {"eps", o.epsilon},
                {"gaussian_eps", o.gaussian_epsilon},
                {"delta", o.delta},
                {"seed", o.seed},
                {"inject_broken", o.inject_broken}}},
              {"pass", all},
              {"checks", list},
              {"wall_time_s", seconds_since(start)}};
  emit(record, report);
  return all ? 0 : kExitDpFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private clustering experiments"};
  app.require_subcommand(1);

  SeedSetting seed;
  std::string config_path;

  DataConfig gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "write a planted-cluster dataset as CSV");
  add_data_options(gen, gen_cfg);
  gen->add_option("--out", gen_out, "output path (default stdout)");
  auto* gen_seed = gen->add_option("--seed", seed.value, "random seed");
  gen->add_option("--config", config_path, "JSON file overriding flags");

  RunConfig run_cfg;
  auto* run = app.add_subcommand("run", "run a solver and emit a JSON-lines report");
  add_data_options(run, run_cfg.data);
  run->add_option("--data", run_cfg.data.data, "dataset CSV (default: generate)");
  run->add_option("--algo", run_cfg.algo, "1cluster or kmeans")->check(CLI::IsMember({"1cluster", "kmeans"}));
  run->add_option("--model", run_cfg.model, "central or local")->check(CLI::IsMember({"central", "local"}));
  run->add_option("--t", run_cfg.t, "target cluster size");
  run->add_option("--k", run_cfg.k, "number of centers")->check(CLI::PositiveNumber);
  run->add_option("--eps", run_cfg.eps, "epsilon")->check(CLI::PositiveNumber);
  run->add_option("--delta", run_cfg.delta, "delta");
  run->add_option("--beta", run_cfg.beta, "failure probability");
  run->add_option("--lsh-a", run_cfg.lsh_a, "far-collision exponent");
  run->add_option("--lsh-b", run_cfg.lsh_b, "near-collision exponent");
  run->add_option("--lsh-c", run_cfg.lsh_c, "approximation factor of the hash family");
  run->add_flag("--rounds-compress", run_cfg.compress, "fixed-point averaging messages");
  run->add_option("--repetitions", run_cfg.repetitions, "hash repetitions (0: default)");
  run->add_option("--list-cap", run_cfg.list_cap, "candidate list length for the local solver (0: default)");
  run->add_option("--t-min", run_cfg.t_min, "k-means stopping size (0: smallest admissible)");
  run->add_option("--eps-cap", run_cfg.eps_cap, "abort when the composed epsilon exceeds this");
  run->add_option("--delta-cap", run_cfg.delta_cap, "abort when the composed delta exceeds this");
  run->add_flag("--no-oracle", run_cfg.no_oracle, "skip the exhaustive oracle radius");
  run->add_option("--report", run_cfg.report, "report path (default stdout)");
  run->add_option("--transcript", run_cfg.transcript, "local transcript path (default <report>.transcript.jsonl)");
  run->add_option("--centers", run_cfg.centers, "centers CSV path (default <report>.centers.csv)");
  auto* run_seed = run->add_option("--seed", seed.value, "random seed");
  run->add_option("--config", config_path, "JSON file overriding flags");

  dpc::VerifyOptions vopt;
  std::string verify_report;
  auto* verify = app.add_subcommand("verify-dp", "analytic and empirical checks of every mechanism");
  verify->add_option("--trials", vopt.trials, "trials per empirical check")->check(CLI::PositiveNumber);
  verify->add_option("--eps", vopt.epsilon, "epsilon")->check(CLI::PositiveNumber);
  verify->add_option("--gaussian-eps", vopt.gaussian_epsilon, "epsilon for the Gaussian checks");
  verify->add_option("--delta", vopt.delta, "delta for the Gaussian checks");
  verify->add_flag("--inject-broken", vopt.inject_broken, "add a mechanism with too little noise");
  verify->add_option("--report", verify_report, "report path (default stdout)");
  auto* verify_seed = verify->add_option("--seed", vopt.seed, "random seed");
  verify->add_option("--config", config_path, "JSON file overriding flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitPrecondition;
  }

  try {
    if (*gen) {
      if (!config_path.empty()) apply_config(gen, config_path);
      resolve_seed(gen_seed, seed);
      return cmd_gen(gen_cfg, seed, gen_out);
    }
    if (*run) {
      if (!config_path.empty()) apply_config(run, config_path);
      resolve_seed(run_seed, seed);
      return cmd_run(run_cfg, seed);
    }
    if (!config_path.empty()) apply_config(verify, config_path);
    SeedSetting vs{vopt.seed, "default"};
    resolve_seed(verify_seed, vs);
    vopt.seed = vs.value;
    return cmd_verify(vopt, verify_report);
  } catch (const dpc::PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const dpc::NotFound& e) {
    std::cerr << "not found: " << e.what() << "\n";
    return kExitNotFound;
  }
}
