#include "commands.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedecg/bundle.hpp"
#include "fedecg/channel.hpp"
#include "fedecg/error.hpp"
#include "fedecg/gradcam.hpp"
#include "fedecg/random.hpp"
#include "fedecg/synthetic.hpp"
#include "fedecg/training.hpp"

namespace fedecg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Sub-seeds of the single --seed.
constexpr std::uint64_t kSeedBalance = 1;
constexpr std::uint64_t kSeedNoise = 10;
constexpr std::uint64_t kSeedPartition = 1;
constexpr std::uint64_t kSeedFederation = 2;

fs::path manifest_path_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  require(out.good(), ErrorCode::kIo, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kIo, "cannot create directory " + dir.string());
}

// Records `path` as an output and writes its manifest.
class Outputs {
 public:
  Outputs(const RunManifest& manifest, std::vector<fs::path>& sink) : manifest_(manifest), sink_(sink) {}

  void add(const fs::path& path) { sink_.push_back(path); }

  void finish() {
    RunManifest m = manifest_;
    for (const auto& p : sink_) m.outputs.push_back(p.filename().string());
    for (const auto& p : sink_) write_manifest(m, p);
  }

 private:
  const RunManifest& manifest_;
  std::vector<fs::path>& sink_;
};

std::string noise_tag(double level) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", level);
  return buf;
}

std::vector<double> expand_noise(const std::vector<double>& noise, std::size_t edges) {
  require(edges >= 1, ErrorCode::kInvalidArgument, "need at least one edge");
  if (noise.size() == 1) return std::vector<double>(edges, noise.front());
  require(noise.size() == edges, ErrorCode::kInvalidArgument,
          "got " + std::to_string(noise.size()) + " noise levels for " + std::to_string(edges) + " edges");
  return noise;
}

BeatDataset load_prepared(const fs::path& data) {
  const fs::path beats = fs::is_directory(data) ? data / "beats.csv" : data;
  require(fs::exists(beats), ErrorCode::kIo, "prepared data missing: " + beats.string() + " (run prepare-data)");
  return load_csv(beats);
}

BeatRecord load_beat_ref(const std::string& ref) {
  const auto colon = ref.rfind(':');
  require(colon != std::string::npos && colon > 0, ErrorCode::kInvalidArgument,
          "beat reference '" + ref + "' is not path:line");
  const std::string path = ref.substr(0, colon);
  const std::string line_text = ref.substr(colon + 1);
  std::size_t line_no = 0;
  auto [ptr, ec] = std::from_chars(line_text.data(), line_text.data() + line_text.size(), line_no);
  require(ec == std::errc() && ptr == line_text.data() + line_text.size() && line_no >= 1,
          ErrorCode::kInvalidArgument, "bad line number in beat reference '" + ref + "'");
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot open " + path);
  std::string line;
  for (std::size_t i = 0; i < line_no; ++i) {
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::kParse,
            path + " has fewer than " + std::to_string(line_no) + " lines");
  }
  const BeatDataset one = parse_csv(line, path + ":" + std::to_string(line_no));
  require(one.size() == 1, ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": empty line");
  return one.records.front();
}

Model load_model(const fs::path& path, ModelKind expected) {
  WeightBundle bundle = load_bundle(path);
  require(bundle.kind() == expected, ErrorCode::kShapeMismatch,
          path.string() + " holds a " + std::string(to_string(bundle.kind())) + ", expected " +
              std::string(to_string(expected)));
  return Model(expected == ModelKind::kAutoencoder ? autoencoder_spec() : classifier_spec(), std::move(bundle));
}

MetricsReport evaluate_classifier(const Model& classifier, const BeatDataset& data, std::optional<double> mae) {
  const auto truth = true_labels(data);
  const auto predicted = predict_labels(classifier, data);
  return report(confusion(truth, predicted), mae);
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    case ErrorCode::kBadMagic:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kUnknownMessageType:
    case ErrorCode::kMalformed:
    case ErrorCode::kProtocol:
      return kExitProtocol;
    case ErrorCode::kNumericFailure:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

void write_manifest(const RunManifest& manifest, const fs::path& output) {
  json j;
  j["tool"] = "fedecg";
  j["version"] = kToolVersion;
  j["subcommand"] = manifest.subcommand;
  j["argv"] = manifest.argv;
  j["seed"] = manifest.seed;
  j["file"] = output.filename().string();
  j["outputs"] = manifest.outputs;
  write_text(manifest_path_for(output), j.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& manifest_path) {
  json j;
  try {
    j = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
  RunManifest m;
  try {
    m.subcommand = j.at("subcommand").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.outputs = j.value("outputs", std::vector<std::string>{});
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------

std::vector<fs::path> cmd_prepare_data(const PrepareOptions& options, const RunManifest& manifest) {
  require(!options.out_dir.empty(), ErrorCode::kInvalidArgument, "--out is required");
  BeatDataset dataset = load_csv(options.in_csv);
  require(!dataset.empty(), ErrorCode::kParse, options.in_csv.string() + " holds no beats");
  if (options.balance) dataset = rebalance_upsample(dataset, derive_seed(options.seed, kSeedBalance));
  ensure_dir(options.out_dir);

  std::vector<fs::path> written;
  Outputs outputs(manifest, written);
  const fs::path beats = options.out_dir / "beats.csv";
  save_csv(dataset, beats);
  outputs.add(beats);
  for (std::size_t i = 0; i < options.noise.size(); ++i) {
    const BeatDataset noisy = inject_noise(dataset, options.noise[i], derive_seed(options.seed, kSeedNoise + i));
    const fs::path path = options.out_dir / ("beats_noise" + noise_tag(options.noise[i]) + ".csv");
    save_csv(noisy, path);
    outputs.add(path);
  }
  outputs.finish();
  return written;
}

FederateResult cmd_federate(const FederateOptions& options, const RunManifest& manifest) {
  const std::vector<double> noise = expand_noise(options.noise, options.edges);
  const BeatDataset dataset = load_prepared(options.data);
  RoundConfig config = options.round;
  config.n_required = options.edges;
  config.validate();

  FederateResult result;
  result.partitions = partition_edges(dataset, noise, derive_seed(options.seed, kSeedPartition));
  InProcessFederation federation(config, result.partitions, derive_seed(options.seed, kSeedFederation),
                                 options.threads, options.rounds);
  for (std::uint32_t r = 0; r < options.rounds; ++r) federation.run_round();

  result.autoencoder = federation.server().global_autoencoder();
  result.classifier = federation.server().global_classifier();
  result.cost = compute_tpc(architecture_counts(), config.layer_selection);

  if (options.rounds > 0) {
    for (const auto& edge : federation.edges()) {
      const auto& part = edge.partition();
      const double mae = reconstruction_mae(*edge.last_trained(Tier::kAutoencoder), part.test_noisy, part.test_clean);
      result.per_edge.push_back(evaluate_classifier(*edge.last_trained(Tier::kClassifier), part.test_noisy, mae));
    }
    const Model ae(autoencoder_spec(), result.autoencoder);
    const Model clf(classifier_spec(), result.classifier);
    const BeatDataset clean = union_test_set(result.partitions, false);
    const BeatDataset noisy = union_test_set(result.partitions, true);
    result.aggregated_clean = evaluate_classifier(clf, clean, std::nullopt);
    result.aggregated_noisy = evaluate_classifier(clf, noisy, reconstruction_mae(ae, noisy, clean));
    result.measured = federation.edges().front().last_traffic();
  }

  if (options.out_dir.empty()) return result;
  ensure_dir(options.out_dir);
  Outputs outputs(manifest, result.outputs);
  const auto emit_text = [&](const std::string& name, const std::string& text) {
    write_text(options.out_dir / name, text);
    outputs.add(options.out_dir / name);
  };
  save_bundle(result.autoencoder, options.out_dir / "autoencoder.fwb");
  outputs.add(options.out_dir / "autoencoder.fwb");
  save_bundle(result.classifier, options.out_dir / "classifier.fwb");
  outputs.add(options.out_dir / "classifier.fwb");
  write_partition_manifest(result.partitions, options.out_dir / "partitions.txt");
  outputs.add(options.out_dir / "partitions.txt");

  if (options.rounds > 0) {
    std::string table;
    for (std::size_t e = 0; e < result.per_edge.size(); ++e) {
      const std::string name = "edge" + std::to_string(e + 1);
      table += format_report_table(result.per_edge[e], name + " (local model, own noisy test split)") + "\n";
      emit_text("metrics_" + name + ".csv", format_report_csv(result.per_edge[e]));
    }
    table += format_report_table(*result.aggregated_clean, "aggregated (clean test union)") + "\n";
    table += format_report_table(*result.aggregated_noisy, "aggregated (noisy test union)");
    emit_text("metrics_aggregated_clean.csv", format_report_csv(*result.aggregated_clean));
    emit_text("metrics_aggregated_noisy.csv", format_report_csv(*result.aggregated_noisy));
    emit_text("metrics.txt", table);
  }

  std::string cost = format_cost_report(result.cost);
  if (options.rounds > 0) {
    const auto& t = result.measured;
    cost += "measured per edge, last round: " + std::to_string(t.exchange_params()) + " parameters exchanged (" +
            std::to_string(t.upload_params) + " up, " + std::to_string(t.aggregate_params) + " down), " +
            std::to_string(t.exchange_bytes()) + " bytes; model distribution " +
            std::to_string(t.distribution_bytes) + " bytes\n";
  }
  emit_text("cost_report.txt", cost);

  std::string hashes = "autoencoder " + hash_hex(bundle_hash(result.autoencoder)) + "\nclassifier " +
                       hash_hex(bundle_hash(result.classifier)) + "\n";
  emit_text("hashes.txt", hashes);
  outputs.finish();
  return result;
}

void cmd_serve(const ServeOptions& options, const RunManifest& manifest, void (*on_listening)(std::uint16_t)) {
  options.round.validate();
  Server server(options.round, options.rounds, derive_seed(options.seed, kSeedFederation));
  TcpListener listener(options.port);
  if (on_listening) on_listening(listener.port());

  struct Session {
    std::shared_ptr<TcpChannel> channel;
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::vector<Session> sessions;
  auto reap = [&] {
    std::erase_if(sessions, [](Session& s) {
      if (!s.done->load()) return false;
      s.thread.join();
      return true;
    });
  };

  const auto accept_one = [&] {
    std::shared_ptr<TcpChannel> channel = listener.accept(options.accept_timeout_ms);
    if (!channel) return;
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::thread t([&server, channel, done] {
      serve_session(server, *channel);
      done->store(true);
    });
    sessions.push_back({channel, std::move(t), done});
  };

  while (!server.finished()) {
    accept_one();
    reap();
  }
  // Edges re-register after the last round and are told to shut down.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (!sessions.empty() && std::chrono::steady_clock::now() < deadline) {
    accept_one();
    reap();
  }
  server.stop();
  for (auto& s : sessions) s.channel->interrupt();
  for (auto& s : sessions) s.thread.join();

  if (options.out_dir.empty()) return;
  ensure_dir(options.out_dir);
  std::vector<fs::path> written;
  Outputs outputs(manifest, written);
  save_bundle(server.global_autoencoder(), options.out_dir / "autoencoder.fwb");
  outputs.add(options.out_dir / "autoencoder.fwb");
  save_bundle(server.global_classifier(), options.out_dir / "classifier.fwb");
  outputs.add(options.out_dir / "classifier.fwb");
  outputs.finish();
}

std::uint32_t cmd_edge(const EdgeOptions& options) {
  require(options.id >= 1, ErrorCode::kInvalidArgument, "--id must be at least 1");
  const BeatDataset dataset = load_prepared(options.data);
  const std::vector<double> noise = {options.noise};
  auto partitions = partition_edges(dataset, noise, derive_seed(options.seed, kSeedPartition + options.id));
  EdgePartition part = std::move(partitions.front());
  part.edge_id = options.id;
  EdgeClient edge(options.id, std::move(part), options.round, derive_seed(options.seed, kSeedFederation));
  const auto [host, port] = parse_endpoint(options.endpoint);
  auto channel = TcpChannel::connect(host, port, options.connect_timeout_ms);
  std::uint32_t round = 1;
  while (edge.run_round(*channel, round)) {
    const auto& t = edge.last_traffic();
    std::cerr << "edge " << options.id << ": round " << round << " done, " << t.exchange_params()
              << " parameters exchanged\n";
    ++round;
  }
  channel->close();
  return round - 1;
}

std::vector<fs::path> cmd_explain(const ExplainOptions& options, const RunManifest& manifest) {
  require(!options.out_prefix.empty(), ErrorCode::kInvalidArgument, "--out is required");
  const Model classifier = load_model(options.classifier, ModelKind::kClassifier);
  const Model autoencoder = load_model(options.autoencoder, ModelKind::kAutoencoder);
  const BeatRecord beat = load_beat_ref(options.beat);
  const Heatmap heatmap = explain(classifier, autoencoder, beat, options.target_class);

  if (options.out_prefix.has_parent_path()) ensure_dir(options.out_prefix.parent_path());
  fs::path csv = options.out_prefix;
  csv += ".csv";
  fs::path svg = options.out_prefix;
  svg += ".svg";
  std::vector<fs::path> written;
  Outputs outputs(manifest, written);
  export_heatmap(heatmap, csv, HeatmapFormat::kCsv);
  outputs.add(csv);
  export_heatmap(heatmap, svg, HeatmapFormat::kSvg);
  outputs.add(svg);
  outputs.finish();
  std::cout << "class " << class_label(heatmap.class_index) << " (true " << class_label(beat.label) << ")\n";
  return written;
}

MetricsReport cmd_evaluate(const EvaluateOptions& options, const RunManifest& manifest) {
  const Model classifier = load_model(options.classifier, ModelKind::kClassifier);
  const BeatDataset clean = load_csv(options.data_csv);
  require(!clean.empty(), ErrorCode::kParse, options.data_csv.string() + " holds no beats");
  const BeatDataset input = inject_noise(clean, options.noise, derive_seed(options.seed, kSeedNoise));
  std::optional<double> mae;
  if (!options.autoencoder.empty()) {
    mae = reconstruction_mae(load_model(options.autoencoder, ModelKind::kAutoencoder), input, clean);
  }
  const MetricsReport result = evaluate_classifier(classifier, input, mae);
  std::cout << format_report_table(result, options.data_csv.filename().string());
  if (!options.out_csv.empty()) {
    write_text(options.out_csv, format_report_csv(result));
    std::vector<fs::path> written;
    Outputs outputs(manifest, written);
    outputs.add(options.out_csv);
    outputs.finish();
  }
  return result;
}

BeatDataset union_test_set(const std::vector<EdgePartition>& partitions, bool noisy) {
  BeatDataset out;
  for (const auto& p : partitions) {
    const auto& split = noisy ? p.test_noisy : p.test_clean;
    out.records.insert(out.records.end(), split.records.begin(), split.records.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* text = std::getenv("FEDECG_SEED");
  if (!text || !*text) return std::nullopt;
  std::uint64_t value = 0;
  const char* end = text + std::strlen(text);
  auto [ptr, ec] = std::from_chars(text, end, value);
  require(ec == std::errc() && ptr == end, ErrorCode::kInvalidArgument,
          std::string("FEDECG_SEED is not an unsigned integer: ") + text);
  return value;
}

void add_round_flags(CLI::App* cmd, RoundConfig& round) {
  cmd->add_option("--ae-epochs", round.local_epochs_ae, "Local autoencoder epochs per round")->capture_default_str();
  cmd->add_option("--clf-epochs", round.local_epochs_clf, "Local classifier epochs per round")->capture_default_str();
  cmd->add_option("--batch-size", round.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--clf-lr", round.clf_lr, "Classifier learning rate")->capture_default_str();
  cmd->add_flag("--layer-selection", round.layer_selection, "Exchange only the shared feature layers");
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Federated denoising and arrhythmia classification of ECG beats"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::optional<std::uint64_t> seed_flag;
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "Root seed (falls back to FEDECG_SEED, then 0)");
  };

  PrepareOptions prepare;
  auto* prepare_cmd = app.add_subcommand("prepare-data", "Balance a beat CSV and write noisy copies");
  prepare_cmd->add_option("--in", prepare.in_csv, "Input beat CSV")->required()->check(CLI::ExistingFile);
  prepare_cmd->add_option("--out", prepare.out_dir, "Output directory")->required();
  prepare_cmd->add_flag("--balance", prepare.balance, "Upsample minority classes to the majority count");
  prepare_cmd->add_option("--noise", prepare.noise, "Noise levels for noisy copies")->delimiter(',');
  add_seed(prepare_cmd);

  std::filesystem::path synth_out;
  std::size_t synth_count = 1000;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic beats with MIT-BIH-like class shares");
  synth_cmd->add_option("--out", synth_out, "Output CSV")->required();
  synth_cmd->add_option("--count", synth_count, "Number of beats")->capture_default_str()->check(CLI::PositiveNumber);
  add_seed(synth_cmd);

  FederateOptions federate;
  auto* federate_cmd = app.add_subcommand("federate", "Run in-process federated rounds");
  federate_cmd->add_option("--data", federate.data, "Beat CSV or prepare-data directory")->required();
  federate_cmd->add_option("--out", federate.out_dir, "Output directory")->required();
  federate_cmd->add_option("--edges", federate.edges, "Number of edges")->capture_default_str();
  federate_cmd->add_option("--noise", federate.noise, "Per-edge noise levels")->delimiter(',')->capture_default_str();
  federate_cmd->add_option("--rounds", federate.rounds, "Global rounds")->capture_default_str();
  federate_cmd->add_option("--threads", federate.threads, "Edges training concurrently")->capture_default_str();
  add_round_flags(federate_cmd, federate.round);
  add_seed(federate_cmd);

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Aggregation server over TCP");
  serve_cmd->add_option("--port", serve.port, "Listen port (0 picks one)")->capture_default_str();
  serve_cmd->add_option("--n-required", serve.round.n_required, "Updates needed per round")->capture_default_str();
  serve_cmd->add_option("--rounds", serve.rounds, "Global rounds")->capture_default_str();
  serve_cmd->add_option("--out", serve.out_dir, "Directory for the final global bundles");
  serve_cmd->add_flag("--layer-selection", serve.round.layer_selection, "Expect layer-selected uploads");
  add_seed(serve_cmd);

  EdgeOptions edge;
  auto* edge_cmd = app.add_subcommand("edge", "Edge node connecting to a server");
  edge_cmd->add_option("--server", edge.endpoint, "Server host:port")->required();
  edge_cmd->add_option("--id", edge.id, "Edge id, 1-based")->capture_default_str();
  edge_cmd->add_option("--data", edge.data, "This edge's beat CSV or prepare-data directory")->required();
  edge_cmd->add_option("--noise", edge.noise, "Noise level of this edge")->capture_default_str();
  edge_cmd->add_option("--connect-timeout", edge.connect_timeout_ms, "Milliseconds to keep retrying the server")
      ->capture_default_str();
  add_round_flags(edge_cmd, edge.round);
  add_seed(edge_cmd);

  ExplainOptions explain_opts;
  std::string explain_class = "auto";
  auto* explain_cmd = app.add_subcommand("explain", "Grad-CAM heatmap for one beat");
  explain_cmd->add_option("--model,--classifier", explain_opts.classifier, "Classifier bundle")->required();
  explain_cmd->add_option("--ae,--autoencoder", explain_opts.autoencoder, "Autoencoder bundle")->required();
  explain_cmd->add_option("--beat", explain_opts.beat, "Beat as path:line (1-based)")->required();
  explain_cmd->add_option("--class", explain_class, "auto (predicted class) or one of N, S, V, F, Q")
      ->capture_default_str();
  explain_cmd->add_option("--out", explain_opts.out_prefix, "Output prefix; writes .csv and .svg")->required();

  EvaluateOptions evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Classification metrics on a beat CSV");
  evaluate_cmd->add_option("--model,--classifier", evaluate.classifier, "Classifier bundle")->required();
  evaluate_cmd->add_option("--ae,--autoencoder", evaluate.autoencoder, "Autoencoder bundle for reconstruction MAE");
  evaluate_cmd->add_option("--data", evaluate.data_csv, "Beat CSV")->required();
  evaluate_cmd->add_option("--noise", evaluate.noise, "Noise level injected before evaluation")->capture_default_str();
  evaluate_cmd->add_option("--out", evaluate.out_csv, "Metrics CSV");
  add_seed(evaluate_cmd);

  TpcCounts counts = kReferenceCounts;
  bool cost_selection = false;
  bool cost_architecture = false;
  auto* cost_cmd = app.add_subcommand("cost-report", "Total parameters communicated per round");
  cost_cmd->add_option("--w1", counts.w1, "Encoder parameters")->capture_default_str();
  cost_cmd->add_option("--w2", counts.w2, "Decoder parameters")->capture_default_str();
  cost_cmd->add_option("--wc1", counts.wc1, "Shared classifier conv parameters")->capture_default_str();
  cost_cmd->add_option("--wc2", counts.wc2, "Classifier dense parameters")->capture_default_str();
  cost_cmd->add_flag("--architecture", cost_architecture, "Use the counts of the models built here");
  cost_cmd->add_flag("--layer-selection", cost_selection, "Report the filtered figure as the headline");

  std::filesystem::path replay_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the invocation recorded in a manifest");
  replay_cmd->add_option("manifest", replay_path, "A .manifest.json file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::uint64_t seed = seed_flag ? *seed_flag : env_seed().value_or(0);
    RunManifest manifest;
    manifest.subcommand = app.get_subcommands().front()->get_name();
    manifest.argv.assign(argv + 1, argv + argc);
    if (!seed_flag) {
      // Pin the effective seed so the manifest replays without the environment.
      manifest.argv.push_back("--seed");
      manifest.argv.push_back(std::to_string(seed));
    }
    manifest.seed = seed;

    if (*prepare_cmd) {
      prepare.seed = seed;
      for (const auto& p : cmd_prepare_data(prepare, manifest)) std::cout << p.string() << '\n';
    } else if (*synth_cmd) {
      const BeatDataset data = synthesize_dataset(mitbih_like_counts(synth_count), seed);
      if (synth_out.has_parent_path()) ensure_dir(synth_out.parent_path());
      save_csv(data, synth_out);
      manifest.outputs = {synth_out.filename().string()};
      write_manifest(manifest, synth_out);
    } else if (*federate_cmd) {
      federate.seed = seed;
      const FederateResult result = cmd_federate(federate, manifest);
      if (result.aggregated_clean) {
        std::cout << format_report_table(*result.aggregated_clean, "aggregated (clean test union)") << '\n'
                  << format_report_table(*result.aggregated_noisy, "aggregated (noisy test union)") << '\n';
      }
      std::cout << format_cost_report(result.cost);
      std::cout << "autoencoder " << hash_hex(bundle_hash(result.autoencoder)) << "\nclassifier "
                << hash_hex(bundle_hash(result.classifier)) << '\n';
    } else if (*serve_cmd) {
      serve.seed = seed;
      cmd_serve(serve, manifest, [](std::uint16_t port) {
        std::cout << "listening on port " << port << std::endl;
      });
    } else if (*edge_cmd) {
      edge.seed = seed;
      const std::uint32_t rounds = cmd_edge(edge);
      std::cout << "edge " << edge.id << " finished after " << rounds << " round(s)\n";
    } else if (*explain_cmd) {
      if (explain_class != "auto") {
        const auto index = explain_class.size() == 1 ? class_index(explain_class[0]) : std::nullopt;
        require(index.has_value(), ErrorCode::kInvalidArgument,
                "unknown class '" + explain_class + "', expected auto or one of N S V F Q");
        explain_opts.target_class = *index;
      }
      for (const auto& p : cmd_explain(explain_opts, manifest)) std::cout << p.string() << '\n';
    } else if (*evaluate_cmd) {
      evaluate.seed = seed;
      cmd_evaluate(evaluate, manifest);
    } else if (*cost_cmd) {
      std::cout << format_cost_report(compute_tpc(cost_architecture ? architecture_counts() : counts, cost_selection));
    } else if (*replay_cmd) {
      const RunManifest recorded = read_manifest(replay_path);
      std::vector<const char*> args{argv[0]};
      for (const auto& a : recorded.argv) args.push_back(a.c_str());
      return run(static_cast<int>(args.size()), args.data());
    }
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "fedecg: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "fedecg: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace fedecg::cli
