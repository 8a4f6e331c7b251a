#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace flags {

enum class Split { train, test };

// Dense row-major feature matrix with integer class labels.
struct LabeledDataset {
  std::vector<double> features;
  std::vector<int> labels;
  std::size_t feature_dim = 0;
  int num_classes = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }

  // Throws InvalidArgument if row count, label range or dimension disagree.
  void validate() const;
};

// Reads an IDX image/label pair (optionally gzip-compressed). Pixels are
// scaled by 1/255. Throws FormatError with kind bad_magic, truncated or
// count_mismatch.
LabeledDataset load_idx(const std::filesystem::path& images,
                        const std::filesystem::path& labels,
                        Split split = Split::train);

// Gaussian blobs around well-separated class means. Means lie on a circle in
// the first two coordinates (so every class is linearly separable at
// spread 0); the remaining coordinates carry a class-specific offset.
LabeledDataset synthetic_blobs(int num_classes, int per_class, int feature_dim,
                               double spread, std::uint64_t seed,
                               Split split = Split::train);

// First `count` samples (or all, if fewer).
LabeledDataset take_first(const LabeledDataset& d, std::size_t count);

std::vector<std::size_t> class_histogram(const LabeledDataset& d,
                                         std::span<const std::size_t> indices);

}  // namespace flags
