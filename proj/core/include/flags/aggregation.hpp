#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "flags/mlp.hpp"

namespace flags {

enum class Link { d2d, d2e, e2c };
std::string_view to_string(Link link);

// Receives one event per transmitted model.
class MessageSink {
 public:
  virtual ~MessageSink() = default;
  virtual void record_message(Link link, int round) = 0;
};

// Non-negative weights summing to one.
class AggregationWeights {
 public:
  explicit AggregationWeights(std::vector<double> weights);

  static AggregationWeights uniform(std::size_t n);
  // Proportional to the given sizes (e.g. local dataset sizes).
  static AggregationWeights proportional(std::span<const double> sizes);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

// out[i] = sum_k w_k * models[k][i], accumulated in list order.
ModelParams weighted_average(std::span<const ModelParams* const> models,
                             const AggregationWeights& w);
ModelParams weighted_average(std::span<const ModelParams> models, const AggregationWeights& w);

// base - lr * sum_k w_k * grads[k]
ModelParams gradient_aggregate(const ModelParams& base,
                               std::span<const std::span<const double>> grads,
                               const AggregationWeights& w, double lr);

struct NoiseModel {
  double variance = 0.0;  // 0 is an ideal channel
};

enum class Tier : std::uint8_t { device, edge, cloud };

struct Endpoint {
  Tier tier = Tier::device;
  std::size_t id = 0;
};

// Identifies one transmission. `tag` separates the protocol step (phase,
// gossip step, broadcast leg) so repeated exchanges between the same pair in
// one round draw independent noise.
struct MessageContext {
  std::uint64_t run_seed = 0;
  int round = 0;
  Endpoint sender;
  Endpoint receiver;
  std::uint32_t tag = 0;
};

// m plus i.i.d. N(0, variance) per coordinate, seeded from ctx; records one
// message of the given link class with the sink.
ModelParams transmit(const ModelParams& m, const NoiseModel& noise, Link link,
                     const MessageContext& ctx, MessageSink& sink);

enum class Decision : std::uint32_t {
  d2d_send = 1,
  gossip,
  cluster_send,
  server_send,
  cserver_send,
};

struct DecisionContext {
  std::uint64_t run_seed = 0;
  int round = 0;
  std::size_t node = 0;
  Decision kind = Decision::d2d_send;
};

// Deterministic Bernoulli(prob) draw keyed by ctx.
bool participates(double prob, const DecisionContext& ctx);

}  // namespace flags
