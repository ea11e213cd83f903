// Command-line front end: every subcommand runs one experiment kind from a
// JSON config; `qv` recomputes the realised QV table of an exported path.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "stableqv/error.hpp"
#include "stableqv/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "JSON experiment config file");
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed, "master seed (overrides the config)");
  sub->add_option("--out", c.out, "output directory (overrides the config)");
  sub->add_option("--threads", c.threads, "worker threads; results do not depend on it")
      ->check(CLI::Range(1u, 1024u));
}

sqv::ExperimentConfig load(const Common& c, const char* kind) {
  std::ifstream in(c.config);
  if (!in) throw sqv::Error(sqv::Errc::config_error, "cannot open config file '" + c.config + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw sqv::Error(sqv::Errc::config_error, "cannot parse '" + c.config + "': " + e.what());
  }
  if (kind != nullptr && j.is_object()) j["experiment"] = kind;
  sqv::ExperimentConfig cfg = sqv::ExperimentConfig::from_json(j);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output = c.out;
  return cfg;
}

int run(const Common& c, const char* kind) {
  const sqv::ExperimentConfig cfg = load(c, kind);
  const sqv::RunManifest m = sqv::run_experiment(cfg, c.threads);
  std::cout << sqv::kind_name(cfg.kind) << ": " << cfg.replications << " replication(s), "
            << m.files.size() << " file(s) in " << cfg.output.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Realised quadratic variation of multivariate stable Levy processes"};
  app.require_subcommand(1);

  Common sim, spec, lim, sub, exp, qvc;
  add_common(app.add_subcommand("simulate", "simulate paths and their realised QV tables"), sim, true);
  add_common(app.add_subcommand("spectrum", "eigenvalues of true and realised QV"), spec, true);
  add_common(app.add_subcommand("limit-sample", "draws of the limit matrix U_t"), lim, true);
  add_common(app.add_subcommand("subsample", "subsampling confidence intervals and coverage"), sub, true);
  add_common(app.add_subcommand("experiment", "run the experiment named in the config"), exp, true);

  auto* qv = app.add_subcommand("qv", "realised QV table of an exported path file");
  add_common(qv, qvc, false);
  std::string path_file;
  std::optional<double> step;
  qv->add_option("--path", path_file, "path file written by `simulate`")->required();
  qv->add_option("--step", step, "observation step (default: finest step of --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kConfigError;
  }

  try {
    if (app.got_subcommand("simulate")) return run(sim, "simulate");
    if (app.got_subcommand("spectrum")) return run(spec, "spectrum");
    if (app.got_subcommand("limit-sample")) return run(lim, "limit-distribution");
    if (app.got_subcommand("subsample")) return run(sub, "subsample-coverage");
    if (app.got_subcommand("experiment")) return run(exp, nullptr);

    double h = 0.0;
    if (step) {
      h = *step;
    } else if (!qvc.config.empty()) {
      h = load(qvc, nullptr).finest_step();
    } else {
      throw sqv::Error(sqv::Errc::config_error, "qv needs --step or --config");
    }
    const fs::path out_dir = qvc.out.empty() ? fs::path(".") : fs::path(qvc.out);
    fs::create_directories(out_dir);
    const fs::path out = out_dir / (fs::path(path_file).stem().string() + "_qv.csv");
    sqv::write_path_qv(path_file, h, out);
    std::cout << "qv: wrote " << out.string() << "\n";
    return 0;
  } catch (const sqv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool config = e.code() == sqv::Errc::config_error || e.code() == sqv::Errc::parse_error;
    return config ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
