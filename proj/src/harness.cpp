#include "stableqv/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "stableqv/error.hpp"
#include "stableqv/limitlaw.hpp"
#include "stableqv/qv.hpp"
#include "stableqv/rng.hpp"
#include "stableqv/simulate.hpp"
#include "stableqv/spectral.hpp"

namespace sqv {
namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Rows of a delimited table; cells are preformatted.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string text() const {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
  }
};

std::vector<std::string> packed_header(const char* prefix, std::size_t d) {
  std::vector<std::string> h;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j)
      h.push_back(std::string(prefix) + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  return h;
}

std::string rep_name(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem, i, ext);
  return buf;
}

struct Output {
  std::string name;
  std::string content;
};

// Per-replication results, assembled in index order after the parallel loop.
struct RepResult {
  std::vector<std::vector<std::string>> rows;
  std::vector<Output> files;
};

std::string qv_table(const GridPath& grid) {
  std::ostringstream out;
  write_qv(out, realised_qv(grid));
  return out.str();
}

JumpPath simulate_rep(const ExperimentConfig& cfg, Rng& rng) {
  SimulationOptions opts;
  if (cfg.gaussian_residual()) opts.residual_step = cfg.finest_step();
  return simulate_levy_path(*cfg.levy, cfg.horizon, cfg.truncation(), rng, opts);
}

double grid_end(const ExperimentConfig& cfg, double step) {
  return static_cast<double>(grid_count(cfg.horizon, step)) * step;
}

}  // namespace

const char* kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::simulate:
      return "simulate";
    case ExperimentKind::qv_convergence:
      return "qv-convergence";
    case ExperimentKind::limit_distribution:
      return "limit-distribution";
    case ExperimentKind::spectrum:
      return "spectrum";
    case ExperimentKind::subsample_coverage:
      return "subsample-coverage";
  }
  return "?";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::simulate, ExperimentKind::qv_convergence,
                 ExperimentKind::limit_distribution, ExperimentKind::spectrum,
                 ExperimentKind::subsample_coverage}) {
    if (name == kind_name(k)) return k;
  }
  throw Error(Errc::config_error, "unknown experiment kind '" + name + "'");
}

double ExperimentConfig::finest_step() const {
  if (steps.empty()) throw Error(Errc::config_error, "no observation steps");
  return *std::min_element(steps.begin(), steps.end());
}

double ExperimentConfig::truncation() const {
  if (eps) return *eps;
  return grid_truncation(levy->beta, finest_step(), kappa);
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> bad = problems;
  if (!levy && std::none_of(problems.begin(), problems.end(),
                            [](const std::string& p) { return p.rfind("levy:", 0) == 0; })) {
    bad.push_back("levy: missing");
  }
  if (replications < 1) bad.push_back("replications must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) bad.push_back("horizon must be finite and > 0");
  if (output.empty()) bad.push_back("output directory is empty");
  if (levy && !span_check(levy->measure)) bad.push_back("levy.measure does not span R^d");

  const bool needs_grid = kind != ExperimentKind::limit_distribution;
  if (needs_grid) {
    if (steps.empty()) bad.push_back("steps: at least one observation step required");
    for (double s : steps) {
      if (!(s > 0.0) || !(s <= horizon)) {
        bad.push_back("steps: " + fmt17(s) + " not in (0, horizon]");
      }
    }
    if (!steps.empty() && gaussian_residual()) {
      const double f = finest_step();
      for (double s : steps) {
        const double r = s / f;
        if (f > 0.0 && std::abs(r - std::round(r)) > 1e-9 * r) {
          bad.push_back("steps: " + fmt17(s) + " is not a multiple of the finest step");
        }
      }
    }
    if (eps && !(*eps > 0.0)) bad.push_back("eps must be > 0");
    if (!eps && !(kappa > 0.0)) bad.push_back("kappa must be > 0");
  }
  if (kind == ExperimentKind::qv_convergence || kind == ExperimentKind::spectrum ||
      kind == ExperimentKind::subsample_coverage) {
    for (double s : steps)
      if (!(s < 1.0)) bad.push_back("steps: rate normalization needs steps < 1");
  }
  if (kind == ExperimentKind::limit_distribution && !(limit_jumps >= 1.0)) {
    bad.push_back("limit_jumps must be >= 1");
  }
  if (kind == ExperimentKind::subsample_coverage) {
    if (horizon != 1.0) bad.push_back("subsample-coverage needs horizon 1");
    if (!(alpha > 0.0 && alpha < 1.0)) bad.push_back("alpha must lie in (0, 1)");
    try {
      Functional::parse(functional);
    } catch (const Error& e) {
      bad.push_back(std::string("functional: ") + e.what());
    }
    if (!steps.empty() && finest_step() > 0.0 && finest_step() < 1.0) {
      SubsampleConfig sc = subsample.value_or(SubsampleConfig::defaults(finest_step()));
      sc.step = finest_step();
      try {
        sc.validate();
      } catch (const Error& e) {
        bad.push_back(std::string("subsample: ") + e.what());
      }
    }
  }
  if (levy && (kind == ExperimentKind::simulate || kind == ExperimentKind::qv_convergence ||
               kind == ExperimentKind::spectrum || kind == ExperimentKind::subsample_coverage) &&
      !steps.empty() && finest_step() > 0.0 && (eps ? *eps > 0.0 : kappa > 0.0)) {
    const double n = expected_jump_count(*levy, horizon, truncation());
    if (!(n <= 1e8)) bad.push_back("truncation yields " + fmt17(n) + " expected jumps per path (limit 1e8)");
  }
  return bad;
}

void ExperimentConfig::validate() const {
  const auto bad = violations();
  if (bad.empty()) return;
  std::string msg = "invalid experiment config:";
  for (const auto& b : bad) msg += "\n  - " + b;
  throw Error(Errc::config_error, msg);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = kind_name(kind);
  if (levy) j["levy"] = levy->to_json();
  j["horizon"] = horizon;
  j["steps"] = steps;
  if (eps) {
    j["eps"] = *eps;
  } else {
    j["kappa"] = kappa;
  }
  j["replications"] = replications;
  j["seed"] = seed;
  j["output"] = output.string();
  j["limit_jumps"] = limit_jumps;
  if (subsample) {
    nlohmann::json s = subsample->to_json();
    s.erase("step");
    j["subsample"] = s;
  }
  j["functional"] = functional;
  j["alpha"] = alpha;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw Error(Errc::config_error, "config must be a JSON object");
  // Each field is parsed independently so that every problem is reported.
  auto field = [&](const char* key, const std::function<void(const nlohmann::json&)>& read) {
    if (!j.contains(key)) return;
    try {
      read(j.at(key));
    } catch (const std::exception& e) {
      c.problems.push_back(std::string(key) + ": " + e.what());
    }
  };
  if (!j.contains("experiment")) c.problems.push_back("experiment: missing");
  field("experiment", [&](const auto& v) { c.kind = parse_kind(v.template get<std::string>()); });
  field("levy", [&](const auto& v) { c.levy = StableLevySpec::from_json(v); });
  field("horizon", [&](const auto& v) { c.horizon = v.template get<double>(); });
  field("steps", [&](const auto& v) { c.steps = v.template get<std::vector<double>>(); });
  field("kappa", [&](const auto& v) { c.kappa = v.template get<double>(); });
  field("eps", [&](const auto& v) { c.eps = v.template get<double>(); });
  field("replications", [&](const auto& v) {
    const auto n = v.template get<long long>();
    if (n < 1) throw Error(Errc::config_error, "must be >= 1");
    c.replications = static_cast<std::size_t>(n);
  });
  field("seed", [&](const auto& v) { c.seed = v.template get<std::uint64_t>(); });
  field("output", [&](const auto& v) { c.output = v.template get<std::string>(); });
  field("limit_jumps", [&](const auto& v) { c.limit_jumps = v.template get<double>(); });
  field("subsample", [&](const auto& v) { c.subsample = SubsampleConfig::from_json(v); });
  field("functional", [&](const auto& v) { c.functional = v.template get<std::string>(); });
  field("alpha", [&](const auto& v) { c.alpha = v.template get<double>(); });
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> known = {
        "experiment", "levy", "horizon", "steps", "kappa", "eps", "replications",
        "seed", "output", "limit_jumps", "subsample", "functional", "alpha"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      c.problems.push_back("unknown key '" + key + "'");
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::config_error, "cannot open config file '" + file.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, "cannot parse '" + file.string() + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunManifest::to_json() const {
  return {{"config_hash", config_hash},
          {"version", version},
          {"wall_clock_seconds", wall_clock_seconds},
          {"seeds", seeds},
          {"files", files}};
}

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io_error, "SHA-256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void write_path_qv(const fs::path& path_file, double step, const fs::path& out_file) {
  std::ifstream in(path_file);
  if (!in) throw Error(Errc::io_error, "cannot open path file '" + path_file.string() + "'");
  const JumpPath path = read_path(in);
  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write '" + out_file.string() + "'");
  out << qv_table(path_values(path, step));
  if (!out) throw Error(Errc::io_error, "write failed for '" + out_file.string() + "'");
}

RunManifest run_experiment(const ExperimentConfig& cfg, unsigned threads) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t N = cfg.replications;
  const std::size_t d = cfg.levy->dim();
  const double beta = cfg.levy->beta;

  RunManifest manifest;
  // The output location is not part of what was computed.
  nlohmann::json canonical = cfg.to_json();
  canonical.erase("output");
  manifest.config_hash = sha256_hex(canonical.dump());
  for (std::size_t i = 0; i < N; ++i) manifest.seeds.push_back(derive_seed(cfg.seed, i));

  Table table;
  std::string table_name;
  std::vector<RepResult> results(N);
  std::vector<Output> extra;

  switch (cfg.kind) {
    case ExperimentKind::simulate: {
      table_name = "simulate.csv";
      table.header = {"replication", "seed", "jumps", "eps", "path_file", "qv_file"};
      const double step = cfg.finest_step();
      parallel_for(N, threads, [&](std::size_t i) {
        Rng rng(manifest.seeds[i]);
        JumpPath path = simulate_rep(cfg, rng);
        path.seed = manifest.seeds[i];
        std::ostringstream p;
        write_path(p, path);
        const std::string pf = rep_name("path", i, ".txt");
        const std::string qf = rep_name("qv", i, ".csv");
        results[i].files = {{pf, p.str()}, {qf, qv_table(path_values(path, step))}};
        results[i].rows.push_back({std::to_string(i), std::to_string(manifest.seeds[i]),
                                   std::to_string(path.size()), fmt17(path.eps), pf, qf});
      });
      break;
    }
    case ExperimentKind::qv_convergence: {
      table_name = "qv_convergence.csv";
      table.header = {"step", "replication", "error_tr", "trace_true", "scaled_error_tr"};
      std::vector<double> steps = cfg.steps;
      std::sort(steps.begin(), steps.end(), std::greater<>());
      parallel_for(N, threads, [&](std::size_t i) {
        Rng rng(manifest.seeds[i]);
        const JumpPath path = simulate_rep(cfg, rng);
        for (double step : steps) {
          const GridPath grid = path_values(path, step);
          const SymMatrix truth = true_qv(path, grid_end(cfg, step));
          const double err = (realised_qv_total(grid) - truth).frobenius_norm();
          results[i].rows.push_back({fmt17(step), std::to_string(i), fmt17(err),
                                     fmt17(truth.trace()), fmt17(rate_delta(step, beta) * err)});
        }
      });
      // One row per (step, replication), grouped by step.
      std::vector<RepResult> regrouped(1);
      for (std::size_t s = 0; s < steps.size(); ++s)
        for (std::size_t i = 0; i < N; ++i) regrouped[0].rows.push_back(results[i].rows[s]);
      results.swap(regrouped);
      break;
    }
    case ExperimentKind::limit_distribution: {
      table_name = "limit_samples.csv";
      table.header = {"replication"};
      const auto cols = packed_header("u", d);
      table.header.insert(table.header.end(), cols.begin(), cols.end());
      const LimitSpec limit(*cfg.levy);
      const double eps = limit_truncation(limit, cfg.horizon, cfg.limit_jumps);
      parallel_for(N, threads, [&](std::size_t i) {
        Rng rng(manifest.seeds[i]);
        const SymMatrix u = sample_U(limit, cfg.horizon, eps, rng);
        std::vector<std::string> row{std::to_string(i)};
        for (double v : u.packed()) row.push_back(fmt17(v));
        results[i].rows.push_back(std::move(row));
      });
      break;
    }
    case ExperimentKind::spectrum: {
      table_name = "spectrum.csv";
      table.header = {"replication"};
      for (std::size_t k = 0; k < d; ++k) table.header.push_back("lambda_true_" + std::to_string(k + 1));
      for (std::size_t k = 0; k < d; ++k) table.header.push_back("lambda_hat_" + std::to_string(k + 1));
      table.header.insert(table.header.end(), {"gap_true", "min_eig_true", "scaled_error_lambda_max"});
      const double step = cfg.finest_step();
      parallel_for(N, threads, [&](std::size_t i) {
        Rng rng(manifest.seeds[i]);
        const JumpPath path = simulate_rep(cfg, rng);
        const EigenSystem truth = eigen_sorted(true_qv(path, grid_end(cfg, step)));
        const EigenSystem est = eigen_sorted(realised_qv_total(path_values(path, step)));
        std::vector<std::string> row{std::to_string(i)};
        for (double v : truth.values) row.push_back(fmt17(v));
        for (double v : est.values) row.push_back(fmt17(v));
        row.push_back(fmt17(d > 1 ? truth.gap : 0.0));
        row.push_back(fmt17(truth.min_eig));
        row.push_back(fmt17(rate_delta(step, beta) * (est.values[0] - truth.values[0])));
        results[i].rows.push_back(std::move(row));
      });
      break;
    }
    case ExperimentKind::subsample_coverage: {
      table_name = "subsample.csv";
      table.header = {"replication", "estimate", "lower", "upper", "truth", "covered", "beta_hat"};
      const double step = cfg.finest_step();
      SubsampleConfig sc = cfg.subsample.value_or(SubsampleConfig::defaults(step));
      sc.step = step;
      const Functional f = Functional::parse(cfg.functional);
      std::vector<int> covered(N, 0);
      parallel_for(N, threads, [&](std::size_t i) {
        Rng rng(manifest.seeds[i]);
        const JumpPath path = simulate_rep(cfg, rng);
        const ConfidenceInterval ci = confidence_interval(path_values(path, step), sc, f, cfg.alpha);
        const double truth = f(true_qv(path, grid_end(cfg, step)));
        covered[i] = ci.contains(truth) ? 1 : 0;
        results[i].rows.push_back({std::to_string(i), fmt17(ci.estimate), fmt17(ci.lower),
                                   fmt17(ci.upper), fmt17(truth), std::to_string(covered[i]),
                                   fmt17(ci.report.beta_hat_global)});
      });
      std::size_t hits = 0;
      for (int c : covered) hits += static_cast<std::size_t>(c);
      Table summary;
      summary.header = {"replications", "covered", "coverage", "nominal"};
      summary.rows.push_back({std::to_string(N), std::to_string(hits),
                              fmt17(static_cast<double>(hits) / static_cast<double>(N)),
                              fmt17(1.0 - cfg.alpha)});
      extra.push_back({"coverage.csv", summary.text()});
      break;
    }
  }

  for (auto& r : results)
    for (auto& row : r.rows) table.rows.push_back(std::move(row));

  std::vector<Output> outputs;
  for (auto& r : results)
    for (auto& f : r.files) outputs.push_back(std::move(f));
  outputs.push_back({table_name, table.text()});
  for (auto& e : extra) outputs.push_back(std::move(e));

  // Write serially; on failure remove whatever this run produced.
  std::vector<fs::path> written;
  const bool created_dir = !fs::exists(cfg.output);
  try {
    fs::create_directories(cfg.output);
    for (const auto& o : outputs) {
      const fs::path p = cfg.output / o.name;
      std::ofstream out(p, std::ios::binary);
      written.push_back(p);
      out << o.content;
      if (!out) throw Error(Errc::io_error, "write failed for '" + p.string() + "'");
      manifest.files.push_back(o.name);
    }
    manifest.files.push_back("manifest.json");
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const fs::path mp = cfg.output / "manifest.json";
    std::ofstream out(mp, std::ios::binary);
    written.push_back(mp);
    out << manifest.to_json().dump(2) << '\n';
    if (!out) throw Error(Errc::io_error, "write failed for '" + mp.string() + "'");
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (created_dir) fs::remove(cfg.output, ec);
    throw;
  }
  return manifest;
}

}  // namespace sqv
