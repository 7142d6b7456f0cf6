#include "fedecg/federation.hpp"

#include <algorithm>
#include <exception>
#include <iostream>
#include <thread>

#include "fedecg/error.hpp"
#include "fedecg/random.hpp"
#include "fedecg/training.hpp"

namespace fedecg {

void RoundConfig::validate() const {
  require(n_required >= 1, ErrorCode::kInvalidArgument, "n_required must be at least 1");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch size must be at least 1");
  require(clf_lr > 0.0, ErrorCode::kInvalidArgument, "classifier learning rate must be positive");
}

WeightBundle fedavg(std::span<const ClientUpdate> updates) {
  require(!updates.empty(), ErrorCode::kInvalidArgument, "fedavg needs at least one update");
  std::vector<const ClientUpdate*> sorted;
  sorted.reserve(updates.size());
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  const ClientUpdate& ref = *sorted.front();
  double n_total = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const ClientUpdate& u = *sorted[k];
    require(k == 0 || u.client_id != sorted[k - 1]->client_id, ErrorCode::kInvalidArgument,
            "duplicate update from client " + std::to_string(u.client_id));
    require(u.n_samples >= 1, ErrorCode::kInvalidArgument, "update with zero samples");
    require(u.tier == ref.tier && u.round == ref.round, ErrorCode::kInvalidArgument,
            "updates mix tiers or rounds");
    require(u.bundle.size() == ref.bundle.size(), ErrorCode::kShapeMismatch, "updates carry different layer sets");
    for (std::size_t e = 0; e < u.bundle.size(); ++e) {
      const auto& a = u.bundle.entries()[e];
      const auto& b = ref.bundle.entries()[e];
      require(a.name == b.name && a.tensor.shape() == b.tensor.shape(), ErrorCode::kShapeMismatch,
              "updates disagree on entry '" + b.name + "'");
    }
    n_total += static_cast<double>(u.n_samples);
  }

  WeightBundle out = ref.bundle;
  std::vector<double> acc;
  for (std::size_t e = 0; e < out.size(); ++e) {
    auto values = out.entries()[e].tensor.values();
    acc.assign(values.size(), 0.0);
    for (const ClientUpdate* u : sorted) {
      const double n_k = static_cast<double>(u->n_samples);
      const auto w = u->bundle.entries()[e].tensor.values();
      for (std::size_t j = 0; j < w.size(); ++j) acc[j] += n_k * static_cast<double>(w[j]);
    }
    for (std::size_t j = 0; j < values.size(); ++j) values[j] = static_cast<float>(acc[j] / n_total);
  }
  return out;
}

const std::vector<std::string>& exchanged_layers(Tier tier, bool layer_selection) {
  static const std::vector<std::string> ae_full = [] {
    std::vector<std::string> v = encoder_layers();
    v.insert(v.end(), decoder_layers().begin(), decoder_layers().end());
    return v;
  }();
  static const std::vector<std::string> clf_full = [] {
    std::vector<std::string> v = classifier_trainable_conv_layers();
    v.insert(v.end(), classifier_dense_layers().begin(), classifier_dense_layers().end());
    return v;
  }();
  switch (tier) {
    case Tier::kAutoencoder: return layer_selection ? encoder_layers() : ae_full;
    case Tier::kClassifier: return layer_selection ? classifier_trainable_conv_layers() : clf_full;
  }
  fail(ErrorCode::kInvalidArgument, "unknown tier");
}

WeightBundle filter_layers(const WeightBundle& bundle, Tier tier) {
  require(tier == Tier::kAutoencoder || tier == Tier::kClassifier, ErrorCode::kInvalidArgument, "unknown tier");
  require(bundle.kind() == tier, ErrorCode::kInvalidArgument,
          "bundle is a " + std::string(to_string(bundle.kind())) + ", tier is " + std::string(to_string(tier)));
  const auto& keep = exchanged_layers(tier, true);
  for (const auto& layer : keep) {
    require(bundle.has_layer(layer), ErrorCode::kUnknownLayer, "bundle lacks layer '" + layer + "'");
  }
  return bundle.select(keep);
}

WeightBundle merge_filtered(const WeightBundle& local, const WeightBundle& aggregated) {
  WeightBundle out = local;
  for (const auto& entry : aggregated.entries()) {
    Tensor* dst = out.find(entry.name);
    require(dst != nullptr, ErrorCode::kUnknownLayer, "local bundle has no entry '" + entry.name + "'");
    require(dst->shape() == entry.tensor.shape(), ErrorCode::kShapeMismatch,
            "entry '" + entry.name + "' is " + shape_to_string(dst->shape()) + " locally but " +
                shape_to_string(entry.tensor.shape()) + " in the aggregate");
    *dst = entry.tensor;
  }
  return out;
}

ClientUpdate train_local(Model& model, const EdgePartition& partition, Tier tier, const RoundConfig& config,
                         std::uint32_t client_id, std::uint32_t round, std::uint64_t seed) {
  require(model.kind() == tier, ErrorCode::kInvalidArgument, "model does not match the tier");
  require(!partition.train_noisy.empty(), ErrorCode::kInvalidArgument, "edge has no training data");
  TrainConfig tc;
  tc.batch_size = config.batch_size;
  tc.seed = derive_seed(seed, (static_cast<std::uint64_t>(round) << 1) | static_cast<std::uint64_t>(tier));
  if (tier == Tier::kAutoencoder) {
    tc.epochs = config.local_epochs_ae;
    tc.use_lr_schedule = true;
    if (tc.epochs > 0) train_autoencoder(model, partition.train_noisy, partition.train_clean, tc);
  } else {
    tc.epochs = config.local_epochs_clf;
    tc.learning_rate = config.clf_lr;
    if (tc.epochs > 0) train_classifier(model, partition.train_noisy, tc);
  }
  ClientUpdate update;
  update.client_id = client_id;
  update.tier = tier;
  update.round = round;
  update.n_samples = partition.train_noisy.size();
  update.bundle = model.weights().select(exchanged_layers(tier, config.layer_selection));
  return update;
}

// ---------------------------------------------------------------------------
// Server

Server::Server(RoundConfig config, std::uint32_t total_rounds, std::uint64_t seed)
    : config_(config), total_rounds_(total_rounds) {
  config_.validate();
  global_ae_ = init_weights(autoencoder_spec(), derive_seed(seed, 1));
  global_clf_ = init_weights(classifier_spec(), derive_seed(seed, 2));
}

std::optional<wire::Message> Server::handle(const wire::Message& msg) {
  switch (msg.type) {
    case wire::MessageType::kRegister: return on_register(msg);
    case wire::MessageType::kUpdate: return on_update(msg);
    case wire::MessageType::kAck: return std::nullopt;
    case wire::MessageType::kModel:
    case wire::MessageType::kShutdown:
      break;
  }
  fail(ErrorCode::kProtocol, "server does not accept " + std::string(wire::to_string(msg.type)) + " messages");
}

wire::Message Server::on_register(const wire::Message& msg) {
  std::lock_guard lock(mutex_);
  require(!stopped_, ErrorCode::kProtocol, "server is stopping");
  if (msg.round > total_rounds_) return wire::make_shutdown(msg.round);
  require(msg.round >= 1, ErrorCode::kProtocol, "rounds are numbered from 1");
  registered_.insert(msg.client_id);
  if (msg.tier == Tier::kAutoencoder) return wire::make_model(msg.tier, msg.round, global_ae_);
  global_clf_ = transfer_encoder(global_clf_, global_ae_);
  return wire::make_model(msg.tier, msg.round, global_clf_);
}

wire::Message Server::on_update(const wire::Message& msg) {
  std::unique_lock lock(mutex_);
  require(!stopped_, ErrorCode::kProtocol, "server is stopping");
  require(msg.round >= 1 && msg.round <= total_rounds_, ErrorCode::kProtocol,
          "update for round " + std::to_string(msg.round) + " outside 1.." + std::to_string(total_rounds_));
  require(msg.n_samples >= 1, ErrorCode::kProtocol, "update reports zero samples");
  const auto& expected = exchanged_layers(msg.tier, config_.layer_selection);
  require(msg.bundle.layer_names() == expected, ErrorCode::kProtocol,
          "update layer set does not match the server's layer-selection setting");
  const WeightBundle& global = msg.tier == Tier::kAutoencoder ? global_ae_ : global_clf_;
  for (const auto& entry : msg.bundle.entries()) {
    const Tensor* g = global.find(entry.name);
    require(g != nullptr && g->shape() == entry.tensor.shape(), ErrorCode::kProtocol,
            "update entry '" + entry.name + "' does not fit the global model");
  }

  const Key key{msg.round, msg.tier};
  if (auto done = completed_.find(key); done != completed_.end()) {
    // Straggler past the barrier: not aggregated, but handed the result.
    return wire::make_model(msg.tier, msg.round, done->second);
  }
  auto& waiting = pending_[key];
  waiting[msg.client_id] = ClientUpdate{msg.client_id, msg.tier, msg.round, msg.n_samples, msg.bundle};
  if (waiting.size() >= config_.n_required) {
    std::vector<ClientUpdate> batch;
    batch.reserve(waiting.size());
    for (auto& [id, update] : waiting) batch.push_back(std::move(update));
    WeightBundle aggregated = fedavg(batch);
    aggregated.set_kind(msg.tier);
    if (msg.tier == Tier::kAutoencoder) {
      global_ae_ = merge_filtered(global_ae_, aggregated);
    } else {
      global_clf_ = merge_filtered(global_clf_, aggregated);
      rounds_completed_ = std::max(rounds_completed_, msg.round);
    }
    completed_.emplace(key, std::move(aggregated));
    pending_.erase(key);
    changed_.notify_all();
  } else {
    changed_.wait(lock, [&] { return stopped_ || completed_.count(key) > 0; });
    require(completed_.count(key) > 0, ErrorCode::kProtocol, "server stopped before aggregation");
  }
  return wire::make_model(msg.tier, msg.round, completed_.at(key));
}

void Server::disconnect(std::uint32_t client_id) {
  std::lock_guard lock(mutex_);
  registered_.erase(client_id);
  changed_.notify_all();
}

void Server::stop() {
  std::lock_guard lock(mutex_);
  stopped_ = true;
  changed_.notify_all();
}

bool Server::wait_for_rounds(std::uint32_t rounds, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return changed_.wait_for(lock, timeout, [&] { return rounds_completed_ >= rounds || stopped_; }) &&
         rounds_completed_ >= rounds;
}

std::uint32_t Server::rounds_completed() const {
  std::lock_guard lock(mutex_);
  return rounds_completed_;
}

bool Server::finished() const {
  std::lock_guard lock(mutex_);
  return rounds_completed_ >= total_rounds_;
}

std::size_t Server::registered_clients() const {
  std::lock_guard lock(mutex_);
  return registered_.size();
}

WeightBundle Server::global_autoencoder() const {
  std::lock_guard lock(mutex_);
  return global_ae_;
}

WeightBundle Server::global_classifier() const {
  std::lock_guard lock(mutex_);
  return global_clf_;
}

std::optional<WeightBundle> Server::aggregate(std::uint32_t round, Tier tier) const {
  std::lock_guard lock(mutex_);
  auto it = completed_.find({round, tier});
  if (it == completed_.end()) return std::nullopt;
  return it->second;
}

void serve_session(Server& server, Channel& channel) {
  std::optional<std::uint32_t> client;
  try {
    while (auto msg = receive_message(channel)) {
      if (msg->type == wire::MessageType::kRegister) client = msg->client_id;
      if (msg->type == wire::MessageType::kUpdate) {
        // UPDATE bodies carry no id; the session knows who registered.
        require(client.has_value(), ErrorCode::kProtocol, "UPDATE before REGISTER");
        msg->client_id = *client;
      }
      if (auto reply = server.handle(*msg)) send_message(channel, *reply);
    }
  } catch (const Error& e) {
    std::cerr << "session" << (client ? " for client " + std::to_string(*client) : std::string()) << " ended: "
              << to_string(e.code()) << ": " << e.what() << '\n';
  }
  channel.close();
  if (client) server.disconnect(*client);
}

// ---------------------------------------------------------------------------
// Edge

EdgeClient::EdgeClient(std::uint32_t client_id, EdgePartition partition, RoundConfig config, std::uint64_t seed)
    : client_id_(client_id), partition_(std::move(partition)), config_(config), seed_(seed) {
  config_.validate();
}

bool EdgeClient::run_round(Channel& channel, std::uint32_t round) {
  traffic_ = {};
  if (!run_tier(channel, round, Tier::kAutoencoder)) return false;
  return run_tier(channel, round, Tier::kClassifier);
}

void EdgeClient::adopt_broadcast(Tier tier, const WeightBundle& bundle) {
  if (tier == Tier::kAutoencoder) {
    if (!autoencoder_) {
      autoencoder_.emplace(autoencoder_spec(), bundle);
    } else if (config_.layer_selection) {
      autoencoder_->set_weights(merge_filtered(autoencoder_->weights(), bundle.select(encoder_layers())));
    } else {
      autoencoder_->set_weights(bundle);
    }
    return;
  }
  if (!classifier_) {
    classifier_.emplace(classifier_spec(), bundle);
    for (const auto& layer : classifier_frozen_layers()) classifier_->set_trainable(layer, false);
  } else if (config_.layer_selection) {
    std::vector<std::string> shared = classifier_frozen_layers();
    shared.insert(shared.end(), classifier_trainable_conv_layers().begin(), classifier_trainable_conv_layers().end());
    classifier_->set_weights(merge_filtered(classifier_->weights(), bundle.select(shared)));
  } else {
    classifier_->set_weights(bundle);
  }
}

bool EdgeClient::run_tier(Channel& channel, std::uint32_t round, Tier tier) {
  traffic_.distribution_bytes += send_message(channel, wire::make_register(tier, round, client_id_));
  std::size_t bytes = 0;
  auto reply = receive_message(channel, &bytes);
  require(reply.has_value(), ErrorCode::kProtocol, "server closed the connection");
  if (reply->type == wire::MessageType::kShutdown) {
    send_message(channel, wire::make_ack(tier, round));
    return false;
  }
  require(reply->type == wire::MessageType::kModel && reply->tier == tier && reply->round == round,
          ErrorCode::kProtocol, "expected the tier's model, got " + std::string(wire::to_string(reply->type)));
  traffic_.distribution_bytes += bytes;
  adopt_broadcast(tier, reply->bundle);

  Model& model = tier == Tier::kAutoencoder ? *autoencoder_ : *classifier_;
  ClientUpdate update;
  {
    if (gate_ != nullptr) gate_->acquire();
    try {
      update = train_local(model, partition_, tier, config_, client_id_, round, seed_);
    } catch (...) {
      if (gate_ != nullptr) gate_->release();
      throw;
    }
    if (gate_ != nullptr) gate_->release();
  }
  (tier == Tier::kAutoencoder ? trained_ae_ : trained_clf_) = model;

  traffic_.upload_params += update.bundle.parameter_count();
  traffic_.upload_bytes +=
      send_message(channel, wire::make_update(tier, round, update.n_samples, std::move(update.bundle)));
  auto aggregated = receive_message(channel, &bytes);
  require(aggregated.has_value(), ErrorCode::kProtocol, "server closed the connection before aggregating");
  require(aggregated->type == wire::MessageType::kModel && aggregated->tier == tier && aggregated->round == round,
          ErrorCode::kProtocol, "expected the aggregated model");
  traffic_.aggregate_bytes += bytes;
  traffic_.aggregate_params += aggregated->bundle.parameter_count();
  model.set_weights(merge_filtered(model.weights(), aggregated->bundle));
  return true;
}

// ---------------------------------------------------------------------------
// In-process simulation

InProcessFederation::InProcessFederation(RoundConfig config, std::vector<EdgePartition> partitions, std::uint64_t seed,
                                         std::size_t threads, std::uint32_t total_rounds) {
  require(!partitions.empty(), ErrorCode::kInvalidArgument, "federation needs at least one edge");
  require(config.n_required <= partitions.size(), ErrorCode::kInvalidArgument,
          "n_required exceeds the number of edges");
  require(threads >= 1, ErrorCode::kInvalidArgument, "threads must be at least 1");
  server_ = std::make_unique<Server>(config, total_rounds, seed);
  gate_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(threads));
  edges_.reserve(partitions.size());
  for (auto& part : partitions) {
    const std::uint32_t id = part.edge_id;
    edges_.emplace_back(id, std::move(part), config, derive_seed(seed, 1000 + id));
  }
  for (auto& edge : edges_) edge.set_training_gate(gate_.get());
}

void InProcessFederation::run_round() {
  const std::uint32_t round = next_round_++;
  std::vector<std::unique_ptr<Channel>> server_ends;
  std::vector<std::unique_ptr<Channel>> edge_ends;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    auto [server_end, edge_end] = make_memory_duplex();
    server_ends.push_back(std::move(server_end));
    edge_ends.push_back(std::move(edge_end));
  }
  std::vector<std::exception_ptr> failures(edges_.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    workers.emplace_back([&, i] { serve_session(*server_, *server_ends[i]); });
    workers.emplace_back([&, i] {
      try {
        edges_[i].run_round(*edge_ends[i], round);
      } catch (...) {
        failures[i] = std::current_exception();
        server_->stop();
      }
      edge_ends[i]->close();
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace fedecg
