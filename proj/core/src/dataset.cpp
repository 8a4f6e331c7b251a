#include "flags/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include <zlib.h>

#include "flags/error.hpp"
#include "flags/rng.hpp"

namespace flags {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

// Reads the whole file, transparently inflating gzip input.
std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr)
    throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  for (;;) {
    int got = gzread(f, buf, sizeof(buf));
    if (got < 0) {
      gzclose(f);
      throw FormatError(FormatError::Kind::io, "read error in " + path.string());
    }
    if (got == 0) break;
    out.insert(out.end(), buf, buf + got);
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void expect_magic(const std::vector<unsigned char>& b, std::uint32_t magic,
                  const std::filesystem::path& path) {
  if (b.size() < 4)
    throw FormatError(FormatError::Kind::truncated, path.string() + ": missing IDX header");
  if (be32(b, 0) != magic) {
    char got[16];
    std::snprintf(got, sizeof got, "0x%08x", be32(b, 0));
    throw FormatError(FormatError::Kind::bad_magic,
                      path.string() + ": unexpected IDX magic " + got);
  }
}

}  // namespace

void LabeledDataset::validate() const {
  if (features.size() != labels.size() * feature_dim)
    throw InvalidArgument("feature rows do not match label count");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw InvalidArgument("label out of range");
}

LabeledDataset load_idx(const std::filesystem::path& images,
                        const std::filesystem::path& labels, Split split) {
  const auto img = read_file(images);
  const auto lbl = read_file(labels);
  expect_magic(img, kImagesMagic, images);
  expect_magic(lbl, kLabelsMagic, labels);
  if (img.size() < 16)
    throw FormatError(FormatError::Kind::truncated, images.string() + ": short image header");
  if (lbl.size() < 8)
    throw FormatError(FormatError::Kind::truncated, labels.string() + ": short label header");

  const std::size_t count = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t label_count = be32(lbl, 4);
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + count * dim)
    throw FormatError(FormatError::Kind::truncated,
                      images.string() + ": expected " + std::to_string(count) + " images");
  if (lbl.size() < 8 + label_count)
    throw FormatError(FormatError::Kind::truncated,
                      labels.string() + ": expected " + std::to_string(label_count) + " labels");
  if (count != label_count)
    throw FormatError(FormatError::Kind::count_mismatch,
                      std::to_string(count) + " images but " + std::to_string(label_count) + " labels");

  LabeledDataset d;
  d.feature_dim = dim;
  d.split = split;
  d.features.resize(count * dim);
  for (std::size_t i = 0; i < count * dim; ++i) d.features[i] = img[16 + i] / 255.0;
  d.labels.resize(count);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    d.labels[i] = lbl[8 + i];
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = max_label + 1;
  return d;
}

LabeledDataset synthetic_blobs(int num_classes, int per_class, int feature_dim,
                               double spread, std::uint64_t seed, Split split) {
  if (num_classes <= 0 || per_class <= 0 || feature_dim <= 0)
    throw InvalidArgument("synthetic_blobs: counts must be positive");
  if (feature_dim < 2 && num_classes > 2)
    throw InvalidArgument("synthetic_blobs: more than two classes need feature_dim >= 2");
  if (!(spread >= 0.0)) throw InvalidArgument("synthetic_blobs: spread must be non-negative");

  Rng rng = make_rng(seed, Stream::synthetic);
  const auto dim = static_cast<std::size_t>(feature_dim);

  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim));
  for (int c = 0; c < num_classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / num_classes;
    means[c][0] = 0.5 + 0.4 * std::cos(angle);
    if (dim > 1) means[c][1] = 0.5 + 0.4 * std::sin(angle);
    for (std::size_t j = 2; j < dim; ++j) means[c][j] = 0.25 + 0.5 * uniform01(rng);
  }

  LabeledDataset d;
  d.feature_dim = dim;
  d.num_classes = num_classes;
  d.split = split;
  d.features.reserve(static_cast<std::size_t>(num_classes) * per_class * dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < per_class; ++s) {
      for (std::size_t j = 0; j < dim; ++j) d.features.push_back(means[c][j] + spread * noise(rng));
      d.labels.push_back(c);
    }
  }
  return d;
}

LabeledDataset take_first(const LabeledDataset& d, std::size_t count) {
  count = std::min(count, d.size());
  LabeledDataset out;
  out.feature_dim = d.feature_dim;
  out.num_classes = d.num_classes;
  out.split = d.split;
  out.features.assign(d.features.begin(),
                      d.features.begin() + static_cast<std::ptrdiff_t>(count * d.feature_dim));
  out.labels.assign(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

std::vector<std::size_t> class_histogram(const LabeledDataset& d,
                                         std::span<const std::size_t> indices) {
  std::vector<std::size_t> h(static_cast<std::size_t>(d.num_classes), 0);
  for (std::size_t i : indices) ++h[static_cast<std::size_t>(d.labels.at(i))];
  return h;
}

}  // namespace flags
