#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "flags/dataset.hpp"

namespace flags {

// Fully connected network: ReLU on hidden layers, log-softmax output.
struct Architecture {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output

  std::size_t param_count() const;
  std::uint64_t id() const;
  void validate() const;
};

// Flat parameter vector. Layer by layer, the weights are stored input-major
// (W[i * out + o] connects input i to output o) followed by the biases.
struct ModelParams {
  std::vector<double> values;
  std::uint64_t arch_id = 0;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Minibatch {
  const LabeledDataset& data;
  std::span<const std::size_t> indices;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

struct TrainOptions {
  double lr = 0.01;
  int epochs = 1;
  std::size_t batch_size = 32;
};

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

class Mlp {
 public:
  explicit Mlp(Architecture arch);

  const Architecture& architecture() const noexcept { return arch_; }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t weight_offset(std::size_t layer) const { return layers_.at(layer).w; }
  std::size_t bias_offset(std::size_t layer) const { return layers_.at(layer).b; }

  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  ModelParams init(std::uint64_t seed) const;

  // Mean negative log-likelihood over the batch and its exact gradient.
  LossAndGrad loss_and_grad(const ModelParams& p, const Minibatch& batch) const;

  // `epochs` passes of minibatch SGD over `indices`, reshuffled every epoch
  // from `seed`. The last batch of an epoch may be short.
  ModelParams local_update(const ModelParams& p, const LabeledDataset& data,
                           std::span<const std::size_t> indices, const TrainOptions& opt,
                           std::uint64_t seed) const;

  // Argmax accuracy (ties go to the lowest class index) and mean NLL.
  Evaluation evaluate(const ModelParams& p, const LabeledDataset& test) const;

  std::vector<double> log_probabilities(const ModelParams& p, std::span<const double> x) const;

 private:
  struct Layer {
    std::size_t in, out, w, b;
  };
  struct Workspace;
  struct FirstLayerTracker;

  void check(const ModelParams& p) const;
  // Forward pass into ws; returns the log-sum-exp of the logits.
  double forward(const double* theta, const double* x, Workspace& ws) const;
  // Adds scale * d(loss)/d(theta) for one sample to grad; returns the loss.
  double accumulate(const double* theta, const double* x, int label, double scale,
                    double* grad, Workspace& ws, FirstLayerTracker* first) const;

  Architecture arch_;
  std::vector<Layer> layers_;
  std::size_t param_count_ = 0;
};

void save_checkpoint(std::ostream& out, const ModelParams& p);
ModelParams load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& p);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace flags
