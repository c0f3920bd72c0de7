#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "jcas/experiment.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_convergence = 2;
constexpr int exit_io = 3;

int workers_from_env() {
  const char* v = std::getenv("JCAS_SIM_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw jcas::ConfigError("JCAS_SIM_WORKERS: expected a non-negative integer");
  if (n == 0) return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return static_cast<int>(n);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"FD-JCAS HetNet detection simulator and analytic engine"};
  std::string mode_name, config_path, sweep_arg, out_path, provenance_path;
  std::uint64_t trials = 0, seed = 0;
  bool eq20 = false, eq24 = false;

  app.add_option("mode", mode_name, "detection | false-alarm | temporal | coverage | compare")
      ->required()
      ->check(CLI::IsMember({"detection", "false-alarm", "temporal", "coverage", "compare"}));
  app.add_option("--config", config_path, "JSON configuration")->required();
  app.add_option("--sweep", sweep_arg, "key=v1,v2,... (dot path, '*' for every array element)");
  auto* trials_opt = app.add_option("--trials", trials, "Monte Carlo trials per point")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "base seed");
  app.add_option("--out", out_path, "CSV destination (stdout if omitted)");
  app.add_option("--provenance", provenance_path, "seed report destination (default <out>.provenance.json)");
  auto* f20 = app.add_flag("--compat-eq20", eq20, "serving-order sum without the nearest-retained event");
  auto* f24 = app.add_flag("--compat-eq24", eq24, "joint interference factor in its printed form");
  f20->excludes(f24);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    const jcas::Mode mode = jcas::parse_mode(mode_name);
    jcas::ExperimentSpec spec = jcas::load_config(config_path, mode);
    if (*trials_opt) spec.mc.trials = trials;
    if (*seed_opt) spec.mc.seed = seed;
    spec.mc.workers = workers_from_env();
    spec.analytic.compat_eq20 = eq20;
    spec.analytic.compat_eq24 = eq24;
    if (!sweep_arg.empty()) {
      spec.sweep = jcas::parse_sweep(sweep_arg);
      for (const auto& tok : spec.sweep->tokens) jcas::spec_from_document(
          jcas::apply_override(spec.document, spec.sweep->path, jcas::detail::token_value(tok)), mode);
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary | std::ios::trunc);
      if (!file) throw jcas::IoError("cannot open output file '" + out_path + "'");
      out = &file;
    }
    auto write = [&](const jcas::Row& row) {
      *out << jcas::csv_line(row) << '\n';
      out->flush();
      if (!*out) throw jcas::IoError("write failed");
    };
    write(jcas::csv_header(mode));
    const jcas::RunSummary summary = jcas::run_experiment(spec, write);

    std::string prov = provenance_path;
    if (prov.empty() && !out_path.empty()) prov = out_path + ".provenance.json";
    if (!prov.empty()) {
      std::ofstream p(prov, std::ios::binary | std::ios::trunc);
      if (!p) throw jcas::IoError("cannot open provenance file '" + prov + "'");
      p << jcas::seed_report(spec, &summary).dump(2) << '\n';
      if (!p) throw jcas::IoError("write failed for '" + prov + "'");
    }
    if (summary.exceeds_unit)
      std::cerr << "warning: serving-order sum exceeds one in at least one row (exceeds_unit = 1)\n";
    return exit_ok;
  } catch (const jcas::ConfigError& e) {
    for (const auto& issue : e.issues()) std::cerr << "config error: " << issue << '\n';
    return exit_config;
  } catch (const jcas::ConvergenceError& e) {
    std::cerr << "nonconvergence: " << e.what() << '\n';
    return exit_convergence;
  } catch (const jcas::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return exit_io;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_convergence;
  }
}
