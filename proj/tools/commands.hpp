#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedecg/cost.hpp"
#include "fedecg/federation.hpp"
#include "fedecg/metrics.hpp"

namespace fedecg::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitProtocol = 4,
  kExitNumeric = 5,
};

int exit_code_for(ErrorCode code);

/// Command line that produced an artifact; serialised next to every output.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;  // full invocation, argv[0] excluded
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
};

/// Writes `<path>.manifest.json`.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& output);
RunManifest read_manifest(const std::filesystem::path& manifest_path);

struct PrepareOptions {
  std::filesystem::path in_csv;
  std::filesystem::path out_dir;
  bool balance = false;
  std::vector<double> noise;
  std::uint64_t seed = 0;
};

/// Writes beats.csv (optionally rebalanced) and one beats_noise<k>.csv per noise level.
std::vector<std::filesystem::path> cmd_prepare_data(const PrepareOptions& options, const RunManifest& manifest = {});

struct FederateOptions {
  std::filesystem::path data;  // a beat CSV or a prepare-data directory
  std::filesystem::path out_dir;
  std::size_t edges = 3;
  std::vector<double> noise = {0.2, 0.3, 0.1};
  std::uint32_t rounds = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  RoundConfig round;
};

struct FederateResult {
  WeightBundle autoencoder;
  WeightBundle classifier;
  std::vector<EdgePartition> partitions;
  std::vector<MetricsReport> per_edge;  // local models on their own noisy test split
  std::optional<MetricsReport> aggregated_clean;
  std::optional<MetricsReport> aggregated_noisy;
  CostReport cost;
  RoundTraffic measured;  // first edge, last round
  std::vector<std::filesystem::path> outputs;
};

/// Partitions the prepared beats and runs `rounds` in-process global rounds.
/// When `out_dir` is empty nothing is written.
FederateResult cmd_federate(const FederateOptions& options, const RunManifest& manifest = {});

/// Union of every edge's test split.
BeatDataset union_test_set(const std::vector<EdgePartition>& partitions, bool noisy);

struct ServeOptions {
  std::uint16_t port = 0;
  std::uint32_t rounds = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  RoundConfig round;
  int accept_timeout_ms = 200;
};

/// Accepts edges until `rounds` global rounds are aggregated. Invokes
/// `on_listening` with the bound port before accepting.
void cmd_serve(const ServeOptions& options, const RunManifest& manifest = {},
               void (*on_listening)(std::uint16_t) = nullptr);

struct EdgeOptions {
  std::string endpoint;
  std::uint32_t id = 1;
  std::filesystem::path data;  // this edge's beats: a CSV or a prepare-data directory
  double noise = 0.0;
  std::uint64_t seed = 0;
  RoundConfig round;
  int connect_timeout_ms = 10000;
};

/// Joins a server and trains on its own 80/20 split until the server answers
/// with SHUTDOWN. Returns rounds completed.
std::uint32_t cmd_edge(const EdgeOptions& options);

struct ExplainOptions {
  std::filesystem::path classifier;
  std::filesystem::path autoencoder;
  std::string beat;  // path:line, 1-based
  std::optional<std::size_t> target_class;
  std::filesystem::path out_prefix;
};

std::vector<std::filesystem::path> cmd_explain(const ExplainOptions& options, const RunManifest& manifest = {});

struct EvaluateOptions {
  std::filesystem::path classifier;
  std::filesystem::path autoencoder;  // optional
  std::filesystem::path data_csv;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path out_csv;  // optional
};

MetricsReport cmd_evaluate(const EvaluateOptions& options, const RunManifest& manifest = {});

/// Parses and runs one invocation; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace fedecg::cli
