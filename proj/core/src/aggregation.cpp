#include "flags/aggregation.hpp"

#include <cmath>
#include <random>
#include <string>

#include "flags/error.hpp"
#include "flags/rng.hpp"

namespace flags {

std::string_view to_string(Link link) {
  switch (link) {
    case Link::d2d: return "d2d";
    case Link::d2e: return "d2e";
    case Link::e2c: return "e2c";
  }
  return "unknown";
}

AggregationWeights::AggregationWeights(std::vector<double> weights) : w_(std::move(weights)) {
  if (w_.empty()) throw InvalidArgument("aggregation needs at least one weight");
  double sum = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("aggregation weights must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw InvalidArgument("aggregation weights sum to " + std::to_string(sum) + ", not 1");
}

AggregationWeights AggregationWeights::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("aggregation needs at least one weight");
  return AggregationWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

AggregationWeights AggregationWeights::proportional(std::span<const double> sizes) {
  double total = 0.0;
  for (double s : sizes) total += s;
  if (!(total > 0.0)) throw InvalidArgument("proportional weights need a positive total");
  std::vector<double> w;
  w.reserve(sizes.size());
  for (double s : sizes) w.push_back(s / total);
  return AggregationWeights(std::move(w));
}

ModelParams weighted_average(std::span<const ModelParams* const> models,
                             const AggregationWeights& w) {
  if (models.empty()) throw InvalidArgument("weighted_average of no models");
  if (models.size() != w.size()) throw InvalidArgument("one weight per model required");
  const ModelParams& first = *models.front();
  for (const ModelParams* m : models) {
    if (m->values.size() != first.values.size()) throw InvalidArgument("model length mismatch");
    if (m->arch_id != first.arch_id) throw InvalidArgument("model architecture mismatch");
  }
  ModelParams out;
  out.arch_id = first.arch_id;
  out.values.resize(first.values.size());
  const double w0 = w[0];
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = w0 * first.values[i];
  for (std::size_t k = 1; k < models.size(); ++k) {
    const double wk = w[k];
    const double* src = models[k]->values.data();
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += wk * src[i];
  }
  return out;
}

ModelParams weighted_average(std::span<const ModelParams> models, const AggregationWeights& w) {
  std::vector<const ModelParams*> ptrs;
  ptrs.reserve(models.size());
  for (const auto& m : models) ptrs.push_back(&m);
  return weighted_average(std::span<const ModelParams* const>(ptrs), w);
}

ModelParams gradient_aggregate(const ModelParams& base,
                               std::span<const std::span<const double>> grads,
                               const AggregationWeights& w, double lr) {
  if (!(lr > 0.0)) throw InvalidArgument("server learning rate must be positive");
  if (grads.empty()) throw InvalidArgument("gradient_aggregate of no gradients");
  if (grads.size() != w.size()) throw InvalidArgument("one weight per gradient required");
  std::vector<double> combined(base.values.size(), 0.0);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != base.values.size()) throw InvalidArgument("gradient length mismatch");
    for (std::size_t i = 0; i < combined.size(); ++i) combined[i] += w[k] * grads[k][i];
  }
  ModelParams out = base;
  for (std::size_t i = 0; i < combined.size(); ++i) out.values[i] -= lr * combined[i];
  return out;
}

ModelParams transmit(const ModelParams& m, const NoiseModel& noise, Link link,
                     const MessageContext& ctx, MessageSink& sink) {
  sink.record_message(link, ctx.round);
  if (!(noise.variance >= 0.0)) throw InvalidArgument("noise variance must be non-negative");
  if (noise.variance == 0.0) return m;
  Rng rng = make_rng(ctx.run_seed, Stream::noise,
                     {static_cast<std::uint64_t>(ctx.round),
                      static_cast<std::uint64_t>(ctx.sender.tier), ctx.sender.id,
                      static_cast<std::uint64_t>(ctx.receiver.tier), ctx.receiver.id,
                      static_cast<std::uint64_t>(link), ctx.tag});
  std::normal_distribution<double> eps(0.0, std::sqrt(noise.variance));
  ModelParams out = m;
  for (double& v : out.values) v += eps(rng);
  return out;
}

bool participates(double prob, const DecisionContext& ctx) {
  if (prob >= 1.0) return true;
  if (prob <= 0.0) return false;
  Rng rng = make_rng(ctx.run_seed, Stream::participation,
                     {static_cast<std::uint64_t>(ctx.round), ctx.node,
                      static_cast<std::uint64_t>(ctx.kind)});
  return uniform01(rng) < prob;
}

}  // namespace flags
