#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stableqv/measures.hpp"
#include "stableqv/subsample.hpp"

namespace sqv {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { simulate, qv_convergence, limit_distribution, spectrum, subsample_coverage };

const char* kind_name(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);

/// One JSON document describes a run. Keys:
///   experiment, levy {beta, measure}, horizon, steps [..], kappa | eps,
///   replications, seed, output, limit_jumps, subsample {M, k, p},
///   functional, alpha.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  std::optional<StableLevySpec> levy;
  double horizon = 1.0;
  std::vector<double> steps;    // observation steps; the finest drives truncation
  double kappa = 0.5;           // eps = kappa * finest_step^{1/beta}
  std::optional<double> eps;    // explicit truncation, no Gaussian residual
  std::size_t replications = 1;
  std::uint64_t seed = 1;
  std::filesystem::path output = "out";
  double limit_jumps = 1000.0;  // expected jump budget per U draw
  std::optional<SubsampleConfig> subsample;
  std::string functional = "lambda_max";
  double alpha = 0.1;
  std::vector<std::string> problems;  // field-level parse errors

  /// Collects every violated precondition; empty when the config is usable.
  std::vector<std::string> violations() const;
  /// Throws config_error with all violations.
  void validate() const;

  /// Canonical form (keys sorted); hashed into the run manifest.
  nlohmann::json to_json() const;
  /// Parses without validating (so that all problems can be reported together).
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& file);

  double finest_step() const;
  double truncation() const;
  bool gaussian_residual() const { return !eps.has_value(); }
};

struct RunManifest {
  std::string config_hash;  // SHA-256 of the canonical config JSON
  std::string version = kVersion;
  double wall_clock_seconds = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> files;

  nlohmann::json to_json() const;
};

/// SHA-256 hex digest.
std::string sha256_hex(const std::string& text);

/// Calls body(i) for i in [0, n) on `threads` workers. The first exception
/// thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Runs the configured replications with seeds derive_seed(seed, i), writes
/// result tables and manifest.json into cfg.output. Output files written
/// before a failure are removed.
RunManifest run_experiment(const ExperimentConfig& cfg, unsigned threads = 1);

/// Realised QV table of an exported path on the given step (as written by
/// the simulate experiment next to each path file).
void write_path_qv(const std::filesystem::path& path_file, double step,
                   const std::filesystem::path& out_file);

}  // namespace sqv
