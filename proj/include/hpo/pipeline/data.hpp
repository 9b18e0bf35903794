#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hpo/pipeline/tensor.hpp"

namespace hpo {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImageSet {
  std::vector<FeatureMap<double>> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  ImageSet subset(const std::vector<std::size_t>& indices) const;
};

/// One CIFAR-10 binary batch: 3073-byte records (label, then R, G and B
/// 32x32 planes). Pixels are scaled to [0, 1].
ImageSet load_cifar10_batch(const std::filesystem::path& file);

/// data_batch_1..5.bin from `dir` (or its cifar-10-batches-bin subdirectory).
ImageSet load_cifar10_train(const std::filesystem::path& dir);

/// Luma conversion 0.299 R + 0.587 G + 0.114 B.
FeatureMap<double> to_grayscale(const FeatureMap<double>& rgb);
ImageSet to_grayscale(const ImageSet& rgb);

/// Disjoint stratified index sets of sizes n_first and n_second, each spread
/// as evenly over the classes as possible.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                                               std::size_t n_first,
                                                                               std::size_t n_second,
                                                                               std::uint64_t seed);

/// Grayscale oriented gratings with random phase and pixel noise; class c
/// has orientation c*pi/classes.
ImageSet make_texture_dataset(int per_class, Index side, std::uint64_t seed, int classes = 10, double noise = 0.5);

}  // namespace hpo
