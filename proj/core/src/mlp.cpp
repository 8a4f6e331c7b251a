#include "flags/mlp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "flags/error.hpp"
#include "flags/hash.hpp"
#include "flags/rng.hpp"

namespace flags {

std::size_t Architecture::param_count() const {
  std::size_t m = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    m += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return m;
}

std::uint64_t Architecture::id() const {
  Fnv1a h;
  h.update(std::string_view("mlp/relu/log-softmax"));
  for (std::size_t s : layer_sizes) h.update_value(static_cast<std::uint64_t>(s));
  return h.digest();
}

void Architecture::validate() const {
  if (layer_sizes.size() < 2) throw InvalidArgument("architecture needs at least two layers");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw InvalidArgument("layer sizes must be positive");
}

struct Mlp::Workspace {
  // acts[0] is unused (the input row is read in place); acts[l] holds the
  // post-activation output of layer l-1, the last entry holds the logits.
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> deltas;
  std::vector<std::size_t> active;  // indices of non-zero inputs

  explicit Workspace(const std::vector<Layer>& layers) {
    acts.resize(layers.size() + 1);
    deltas.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      acts[l + 1].resize(layers[l].out);
      deltas[l].resize(layers[l].out);
    }
    active.reserve(layers.front().in);
  }
};

// Sparse bookkeeping for the first weight matrix during local_update. With
// a batch of one the rows are stepped in place (`step` set); otherwise the
// rows with a non-zero gradient are recorded for the batch update.
struct Mlp::FirstLayerTracker {
  std::vector<std::size_t> touched;
  std::vector<unsigned char> flag;
  double* step = nullptr;
  double lr = 0.0;
};

Mlp::Mlp(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < arch_.layer_sizes.size(); ++l) {
    Layer layer{arch_.layer_sizes[l], arch_.layer_sizes[l + 1], offset, 0};
    layer.b = offset + layer.in * layer.out;
    offset = layer.b + layer.out;
    layers_.push_back(layer);
  }
  param_count_ = offset;
}

void Mlp::check(const ModelParams& p) const {
  if (p.values.size() != param_count_)
    throw InvalidArgument("parameter vector has " + std::to_string(p.values.size()) +
                          " entries, architecture needs " + std::to_string(param_count_));
}

ModelParams Mlp::init(std::uint64_t seed) const {
  Rng rng = make_rng(seed, Stream::init);
  ModelParams p;
  p.arch_id = arch_.id();
  p.values.resize(param_count_);
  for (const Layer& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t j = layer.w; j < layer.b + layer.out; ++j)
      p.values[j] = bound * (2.0 * uniform01(rng) - 1.0);
  }
  return p;
}

double Mlp::forward(const double* theta, const double* x, Workspace& ws) const {
  const double* input = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    double* z = ws.acts[l + 1].data();
    std::copy_n(theta + layer.b, layer.out, z);
    if (l == 0) ws.active.clear();
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double a = input[i];
      if (a == 0.0) continue;
      if (l == 0) ws.active.push_back(i);
      const double* row = theta + layer.w + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) z[o] += a * row[o];
    }
    if (l + 1 < layers_.size())
      for (std::size_t o = 0; o < layer.out; ++o) z[o] = z[o] > 0.0 ? z[o] : 0.0;
    input = z;
  }
  const auto& logits = ws.acts.back();
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s);
}

double Mlp::accumulate(const double* theta, const double* x, int label, double scale,
                       double* grad, Workspace& ws, FirstLayerTracker* first) const {
  const double lse = forward(theta, x, ws);
  const auto& logits = ws.acts.back();
  const double loss = lse - logits[static_cast<std::size_t>(label)];
  if (!std::isfinite(loss)) throw NumericError("non-finite loss in forward pass");

  auto& top = ws.deltas.back();
  for (std::size_t o = 0; o < top.size(); ++o)
    top[o] = (std::exp(logits[o] - lse) - (o == static_cast<std::size_t>(label) ? 1.0 : 0.0)) * scale;

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const double* input = l == 0 ? x : ws.acts[l].data();
    const double* delta = ws.deltas[l].data();
    double* gw = grad + layer.w;
    if (l == 0) {
      for (std::size_t i : ws.active) {
        const double a = input[i];
        if (first != nullptr && first->step != nullptr) {
          // 0 + a*delta is exactly a*delta, so this equals a dense step.
          double* row = first->step + layer.w + i * layer.out;
          for (std::size_t o = 0; o < layer.out; ++o) row[o] -= first->lr * (a * delta[o]);
          continue;
        }
        if (first != nullptr && !first->flag[i]) {
          first->flag[i] = 1;
          first->touched.push_back(i);
        }
        double* row = gw + i * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) row[o] += a * delta[o];
      }
    } else {
      for (std::size_t i = 0; i < layer.in; ++i) {
        const double a = input[i];
        if (a == 0.0) continue;
        double* row = gw + i * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) row[o] += a * delta[o];
      }
    }
    double* gb = grad + layer.b;
    for (std::size_t o = 0; o < layer.out; ++o) gb[o] += delta[o];

    if (l == 0) break;
    double* below = ws.deltas[l - 1].data();
    for (std::size_t i = 0; i < layer.in; ++i) {
      if (input[i] > 0.0) {
        const double* row = theta + layer.w + i * layer.out;
        double s = 0.0;
        for (std::size_t o = 0; o < layer.out; ++o) s += row[o] * delta[o];
        below[i] = s;
      } else {
        below[i] = 0.0;
      }
    }
  }
  return loss;
}

LossAndGrad Mlp::loss_and_grad(const ModelParams& p, const Minibatch& batch) const {
  check(p);
  if (batch.indices.empty()) throw InvalidArgument("empty minibatch");
  if (batch.data.feature_dim != arch_.layer_sizes.front())
    throw InvalidArgument("feature dimension does not match the input layer");
  Workspace ws(layers_);
  LossAndGrad out;
  out.grad.assign(param_count_, 0.0);
  const double scale = 1.0 / static_cast<double>(batch.indices.size());
  double total = 0.0;
  for (std::size_t i : batch.indices) {
    const int y = batch.data.labels.at(i);
    if (y < 0 || static_cast<std::size_t>(y) >= arch_.layer_sizes.back())
      throw InvalidArgument("label outside the output layer");
    total += accumulate(p.values.data(), batch.data.row(i).data(), y, scale, out.grad.data(), ws,
                        nullptr);
  }
  out.loss = total * scale;
  return out;
}

ModelParams Mlp::local_update(const ModelParams& p, const LabeledDataset& data,
                              std::span<const std::size_t> indices, const TrainOptions& opt,
                              std::uint64_t seed) const {
  check(p);
  if (indices.empty()) throw InvalidArgument("local_update on a node without data");
  if (!(opt.lr >= 0.0) || opt.epochs < 1 || opt.batch_size < 1)
    throw InvalidArgument("invalid training options");
  if (data.feature_dim != arch_.layer_sizes.front())
    throw InvalidArgument("feature dimension does not match the input layer");

  ModelParams out = p;
  double* theta = out.values.data();
  std::vector<double> grad(param_count_, 0.0);
  std::vector<std::size_t> order(indices.begin(), indices.end());
  Workspace ws(layers_);

  // Rows of the first weight matrix whose input was zero for the whole batch
  // have an exactly-zero gradient; skipping them leaves the result bitwise
  // identical to a dense update.
  const Layer& first = layers_.front();
  FirstLayerTracker tracker;
  tracker.flag.assign(first.in, 0);
  if (opt.batch_size == 1) {
    tracker.step = theta;
    tracker.lr = opt.lr;
  }

  Rng rng = make_rng(seed, Stream::shuffle);
  const double lr = opt.lr;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t s = start; s < end; ++s) {
        const std::size_t i = order[s];
        accumulate(theta, data.row(i).data(), data.labels[i], scale, grad.data(), ws, &tracker);
      }
      for (std::size_t i : tracker.touched) {
        double* t = theta + first.w + i * first.out;
        double* g = grad.data() + first.w + i * first.out;
        for (std::size_t o = 0; o < first.out; ++o) {
          t[o] -= lr * g[o];
          g[o] = 0.0;
        }
        tracker.flag[i] = 0;
      }
      tracker.touched.clear();
      for (std::size_t j = first.b; j < param_count_; ++j) {
        theta[j] -= lr * grad[j];
        grad[j] = 0.0;
      }
    }
  }
  for (double v : out.values)
    if (!std::isfinite(v)) throw NumericError("non-finite parameter after local update");
  return out;
}

Evaluation Mlp::evaluate(const ModelParams& p, const LabeledDataset& test) const {
  check(p);
  if (test.empty()) throw InvalidArgument("evaluate on an empty dataset");
  if (test.feature_dim != arch_.layer_sizes.front())
    throw InvalidArgument("feature dimension does not match the input layer");
  Workspace ws(layers_);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double lse = forward(p.values.data(), test.row(i).data(), ws);
    const auto& logits = ws.acts.back();
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    const auto y = static_cast<std::size_t>(test.labels[i]);
    if (best == y) ++correct;
    loss += lse - logits[y];
  }
  const auto n = static_cast<double>(test.size());
  return {static_cast<double>(correct) / n, loss / n};
}

std::vector<double> Mlp::log_probabilities(const ModelParams& p, std::span<const double> x) const {
  check(p);
  if (x.size() != arch_.layer_sizes.front()) throw InvalidArgument("input has the wrong dimension");
  Workspace ws(layers_);
  const double lse = forward(p.values.data(), x.data(), ws);
  std::vector<double> out = ws.acts.back();
  for (double& v : out) v -= lse;
  return out;
}

namespace {

constexpr std::array<char, 4> kCheckpointMagic{'F', 'L', 'G', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
  auto u = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(u.begin(), u.end());
  out.write(reinterpret_cast<const char*>(u.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> u{};
  if (!in.read(reinterpret_cast<char*>(u.data()), sizeof(T)))
    throw FormatError(FormatError::Kind::truncated, "checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(u.begin(), u.end());
  return std::bit_cast<T>(u);
}

}  // namespace

// Layout: "FLGM", u32 version, u64 arch id, u64 count, count f64 values;
// all little-endian.
void save_checkpoint(std::ostream& out, const ModelParams& p) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, p.arch_id);
  put_le<std::uint64_t>(out, p.values.size());
  for (double v : p.values) put_le<double>(out, v);
  if (!out) throw FormatError(FormatError::Kind::io, "failed to write checkpoint");
}

ModelParams load_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()))
    throw FormatError(FormatError::Kind::truncated, "checkpoint is truncated");
  if (magic != kCheckpointMagic) throw FormatError(FormatError::Kind::bad_magic, "not a checkpoint file");
  if (get_le<std::uint32_t>(in) != kCheckpointVersion)
    throw FormatError(FormatError::Kind::malformed, "unsupported checkpoint version");
  ModelParams p;
  p.arch_id = get_le<std::uint64_t>(in);
  const auto count = get_le<std::uint64_t>(in);
  p.values.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) p.values.push_back(get_le<double>(in));
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  save_checkpoint(out, p);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot read " + path.string());
  return load_checkpoint(in);
}

}  // namespace flags
