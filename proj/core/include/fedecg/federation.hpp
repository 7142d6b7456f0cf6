#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedecg/bundle.hpp"
#include "fedecg/channel.hpp"
#include "fedecg/data.hpp"
#include "fedecg/model.hpp"
#include "fedecg/protocol.hpp"

namespace fedecg {

/// Global round tier: the autoencoder goes first, then the classifier.
using Tier = ModelKind;

struct RoundConfig {
  std::size_t n_required = 1;
  std::size_t local_epochs_ae = 50;
  std::size_t local_epochs_clf = 150;
  std::size_t batch_size = 100;
  double clf_lr = 0.001;
  bool layer_selection = false;

  void validate() const;
};

struct ClientUpdate {
  std::uint32_t client_id = 0;
  Tier tier = Tier::kAutoencoder;
  std::uint32_t round = 0;
  std::uint64_t n_samples = 0;
  WeightBundle bundle;
};

/// Sample-weighted average of the updates, accumulated in 64-bit in ascending
/// client-id order: w = (sum_k n_k w_k) / (sum_k n_k).
WeightBundle fedavg(std::span<const ClientUpdate> updates);

/// Layers an edge uploads for a tier. With layer selection: the encoder convs
/// (AE) or the trainable conv (classifier). Without: every trainable layer.
const std::vector<std::string>& exchanged_layers(Tier tier, bool layer_selection);

/// Keeps the layer-selection subset of a tier's bundle, order preserved.
WeightBundle filter_layers(const WeightBundle& bundle, Tier tier);

/// Overwrites the layers present in `aggregated`, keeps the rest of `local`.
WeightBundle merge_filtered(const WeightBundle& local, const WeightBundle& aggregated);

/// One local training session on an edge's noisy training split.
ClientUpdate train_local(Model& model, const EdgePartition& partition, Tier tier, const RoundConfig& config,
                         std::uint32_t client_id, std::uint32_t round, std::uint64_t seed);

/// Aggregation-only coordinator state shared by every client session.
class Server {
 public:
  Server(RoundConfig config, std::uint32_t total_rounds, std::uint64_t seed);

  /// Answers one request. REGISTER gets the tier's current global model (or
  /// SHUTDOWN past the last round); UPDATE blocks until n_required updates for
  /// that round and tier have arrived, then gets the aggregate. ACK gets nothing.
  std::optional<wire::Message> handle(const wire::Message& msg);

  /// Drops a client that disconnected before uploading.
  void disconnect(std::uint32_t client_id);

  /// Wakes every blocked session; subsequent waits fail.
  void stop();

  /// Waits until `rounds` global rounds have been aggregated, or the timeout expires.
  bool wait_for_rounds(std::uint32_t rounds, std::chrono::milliseconds timeout);

  const RoundConfig& config() const noexcept { return config_; }
  std::uint32_t total_rounds() const noexcept { return total_rounds_; }
  std::uint32_t rounds_completed() const;
  bool finished() const;
  std::size_t registered_clients() const;

  WeightBundle global_autoencoder() const;
  WeightBundle global_classifier() const;
  /// The aggregate of one (round, tier), if it has been computed.
  std::optional<WeightBundle> aggregate(std::uint32_t round, Tier tier) const;

 private:
  using Key = std::pair<std::uint32_t, Tier>;

  wire::Message on_register(const wire::Message& msg);
  wire::Message on_update(const wire::Message& msg);

  RoundConfig config_;
  std::uint32_t total_rounds_;
  mutable std::mutex mutex_;
  std::condition_variable changed_;
  bool stopped_ = false;
  WeightBundle global_ae_;
  WeightBundle global_clf_;
  std::set<std::uint32_t> registered_;
  std::map<Key, std::map<std::uint32_t, ClientUpdate>> pending_;
  std::map<Key, WeightBundle> completed_;
  std::uint32_t rounds_completed_ = 0;
};

/// Serves one client connection until it closes or the server stops.
void serve_session(Server& server, Channel& channel);

struct RoundTraffic {
  std::size_t distribution_bytes = 0;  // REGISTER + tier-start MODEL
  std::size_t upload_bytes = 0;        // UPDATE frames
  std::size_t aggregate_bytes = 0;     // aggregated MODEL frames
  std::size_t upload_params = 0;
  std::size_t aggregate_params = 0;

  std::size_t exchange_bytes() const { return upload_bytes + aggregate_bytes; }
  std::size_t exchange_params() const { return upload_params + aggregate_params; }
};

/// An edge node: local data, local models, and the client half of a round.
class EdgeClient {
 public:
  EdgeClient(std::uint32_t client_id, EdgePartition partition, RoundConfig config, std::uint64_t seed);

  /// Runs both tiers of `round` over `channel`. Returns false if the server
  /// answered with SHUTDOWN instead of a model.
  bool run_round(Channel& channel, std::uint32_t round);

  /// Limits how many edges train at once (in-process simulation); may be null.
  void set_training_gate(std::counting_semaphore<>* gate) noexcept { gate_ = gate; }

  std::uint32_t client_id() const noexcept { return client_id_; }
  const EdgePartition& partition() const noexcept { return partition_; }
  const std::optional<Model>& autoencoder() const noexcept { return autoencoder_; }
  const std::optional<Model>& classifier() const noexcept { return classifier_; }
  /// The locally trained model of the last session, before merging the aggregate.
  const std::optional<Model>& last_trained(Tier tier) const noexcept {
    return tier == Tier::kAutoencoder ? trained_ae_ : trained_clf_;
  }
  const RoundTraffic& last_traffic() const noexcept { return traffic_; }

 private:
  bool run_tier(Channel& channel, std::uint32_t round, Tier tier);
  void adopt_broadcast(Tier tier, const WeightBundle& bundle);

  std::uint32_t client_id_;
  EdgePartition partition_;
  RoundConfig config_;
  std::uint64_t seed_;
  std::counting_semaphore<>* gate_ = nullptr;
  std::optional<Model> autoencoder_;
  std::optional<Model> classifier_;
  std::optional<Model> trained_ae_;
  std::optional<Model> trained_clf_;
  RoundTraffic traffic_;
};

/// Server and edges wired through in-memory channels, driving the same session
/// and client code as the TCP deployment.
class InProcessFederation {
 public:
  InProcessFederation(RoundConfig config, std::vector<EdgePartition> partitions, std::uint64_t seed,
                      std::size_t threads = 1, std::uint32_t total_rounds = 1000000);

  /// Runs the next global round with every edge connected.
  void run_round();

  std::uint32_t rounds_completed() const { return server_->rounds_completed(); }
  Server& server() noexcept { return *server_; }
  const Server& server() const noexcept { return *server_; }
  std::vector<EdgeClient>& edges() noexcept { return edges_; }
  const std::vector<EdgeClient>& edges() const noexcept { return edges_; }

 private:
  std::unique_ptr<Server> server_;
  std::vector<EdgeClient> edges_;
  std::unique_ptr<std::counting_semaphore<>> gate_;
  std::uint32_t next_round_ = 1;
};

}  // namespace fedecg
