#include "hpo/pipeline/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>

namespace hpo {
namespace {

constexpr Index kSide = 32;
constexpr std::size_t kPlane = kSide * kSide;
constexpr std::size_t kRecord = 1 + 3 * kPlane;

}  // namespace

ImageSet ImageSet::subset(const std::vector<std::size_t>& indices) const {
  ImageSet out;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

ImageSet load_cifar10_batch(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kRecord != 0)
    throw DataError(file.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 3073");
  ImageSet out;
  const std::size_t n = bytes.size() / kRecord;
  out.images.reserve(n);
  out.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const unsigned char* rec = bytes.data() + r * kRecord;
    if (rec[0] > 9) throw DataError(file.string() + ": record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
    FeatureMap<double> im(kSide, kSide, 3);
    for (Index c = 0; c < 3; ++c)
      for (Index i = 0; i < kSide; ++i)
        for (Index j = 0; j < kSide; ++j) im(i, j, c) = rec[1 + c * kPlane + i * kSide + j] / 255.0;
    out.images.push_back(std::move(im));
    out.labels.push_back(rec[0]);
  }
  return out;
}

ImageSet load_cifar10_train(const std::filesystem::path& dir) {
  std::filesystem::path root = dir;
  if (std::filesystem::is_directory(dir / "cifar-10-batches-bin")) root = dir / "cifar-10-batches-bin";
  ImageSet all;
  for (int b = 1; b <= 5; ++b) {
    ImageSet part = load_cifar10_batch(root / ("data_batch_" + std::to_string(b) + ".bin"));
    std::move(part.images.begin(), part.images.end(), std::back_inserter(all.images));
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  return all;
}

FeatureMap<double> to_grayscale(const FeatureMap<double>& rgb) {
  if (rgb.channels() != 3) throw DataError("grayscale conversion needs 3 channels");
  const Eigen::Vector3d luma(0.299, 0.587, 0.114);
  return {rgb.rows(), rgb.cols(), RowMatrix<double>(rgb.pixels() * luma)};
}

ImageSet to_grayscale(const ImageSet& rgb) {
  ImageSet out;
  out.labels = rgb.labels;
  out.images.reserve(rgb.size());
  for (const auto& im : rgb.images) out.images.push_back(to_grayscale(im));
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const std::vector<int>& labels,
                                                                               std::size_t n_first,
                                                                               std::size_t n_second,
                                                                               std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  if (by_class.empty()) throw DataError("stratified split of an empty label set");

  std::mt19937_64 rng(seed);
  const std::size_t nc = by_class.size();
  std::vector<std::size_t> first, second;
  std::size_t c = 0;
  for (auto& [label, idx] : by_class) {
    const std::size_t q1 = n_first / nc + (c < n_first % nc);
    const std::size_t q2 = n_second / nc + (c < n_second % nc);
    if (q1 + q2 > idx.size())
      throw DataError("class " + std::to_string(label) + " has " + std::to_string(idx.size()) + " examples, " +
                      std::to_string(q1 + q2) + " needed");
    std::shuffle(idx.begin(), idx.end(), rng);
    first.insert(first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q1));
    second.insert(second.end(), idx.begin() + static_cast<std::ptrdiff_t>(q1),
                  idx.begin() + static_cast<std::ptrdiff_t>(q1 + q2));
    ++c;
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {std::move(first), std::move(second)};
}

ImageSet make_texture_dataset(int per_class, Index side, std::uint64_t seed, int classes, double noise) {
  if (per_class < 1 || classes < 2 || side < 2 || !(noise >= 0)) throw DataError("texture dataset: bad dimensions");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double k = 2.0 * std::numbers::pi / (static_cast<double>(side) / 4.0);
  ImageSet out;
  for (int n = 0; n < per_class * classes; ++n) {
    const int label = n % classes;
    const double theta = label * std::numbers::pi / classes;
    const double ph = phase(rng);
    FeatureMap<double> im(side, side, 1);
    for (Index i = 0; i < side; ++i)
      for (Index j = 0; j < side; ++j)
        im(i, j, 0) = std::sin(k * (j * std::cos(theta) + i * std::sin(theta)) + ph) + noise * jitter(rng);
    out.images.push_back(std::move(im));
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace hpo
