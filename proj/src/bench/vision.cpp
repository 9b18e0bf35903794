#include <cmath>
#include <cstdlib>
#include <memory>

#include "hpo/bench.hpp"
#include "hpo/pipeline/data.hpp"

namespace hpo {
namespace {

constexpr std::uint64_t kSplitSeed = 1234;

class Reader {
 public:
  explicit Reader(const Assignment& a) : a_(a) {}

  bool has(const std::string& name) const { return a_.resolved.count(name) > 0; }

  double real(const std::string& name) const {
    auto it = a_.resolved.find(name);
    if (it == a_.resolved.end()) throw SpaceError("vision space: '" + name + "' is not active in this configuration");
    return it->second;
  }

  Index integer(const std::string& name) const { return static_cast<Index>(std::llround(real(name))); }

  bool flag(const std::string& name) const { return integer(name) != 0; }

  FilterSpec filters(const std::string& prefix, Index count, std::uint64_t seed) const {
    const Index s = integer(prefix + "_filters");
    if (s < 0 || s > 2) throw SpaceError("vision space: " + prefix + "_filters must pick 0, 1 or 2");
    FilterSpec f;
    f.strategy = static_cast<FilterStrategy>(s);
    f.count = count;
    f.size = integer(prefix + "_size");
    f.bandpass = has(prefix + "_bandpass") ? real(prefix + "_bandpass") : 0.0;
    f.seed = seed;
    return f;
  }

  FbnccParams<double> norm(const std::string& prefix) const {
    return {real(prefix + "_beta"), flag(prefix + "_rho"), flag(prefix + "_eps")};
  }

 private:
  const Assignment& a_;
};

LossFn vision_loss(std::shared_ptr<const ImageSet> train, std::shared_ptr<const ImageSet> val) {
  return [train, val](const Assignment& a, std::uint64_t seed) {
    return evaluate_pipeline_loss(vision_config(a, seed), *train, *val);
  };
}

const std::vector<std::string> kVisionStatements{"n_inter",   "outer_filters", "outer_size", "outer_beta", "outer_rho",
                                                 "outer_eps", "pool",          "svm_c",      "svm_var_cutoff"};

}  // namespace

PipelineConfig vision_config(const Assignment& a, std::uint64_t seed) {
  const Reader r(a);
  PipelineConfig c;
  const Index n_inter = r.integer("n_inter");
  if (n_inter < 0 || n_inter > 2) throw SpaceError("vision space: n_inter must be 0, 1 or 2");
  for (Index l = 1; l <= n_inter; ++l) {
    const std::string p = "l" + std::to_string(l);
    InterLayer layer;
    layer.filters = r.filters(p, r.integer(p + "_k"), trial_seed(seed, l));
    layer.norm = r.norm(p);
    layer.pool = {r.integer(p + "_pool_size"), r.integer(p + "_pool_stride"), r.real(p + "_pool_p")};
    c.inter.push_back(layer);
  }

  c.outer.filters = r.filters("outer", 0, trial_seed(seed, 0));
  c.outer.norm = r.norm("outer");
  c.outer.max_filters = r.has("outer_k_cap") ? r.integer("outer_k_cap") : kFeatureCap;
  switch (r.integer("pool")) {
    case 0:
      c.outer.pooling = OuterPooling::lpool_lnorm;
      c.outer.lpool = {r.integer("pool_size"), r.integer("pool_stride"), r.real("pool_p")};
      c.outer.lnorm = {r.real("lnorm_tau"), c.outer.lpool.size};
      break;
    case 1:
      c.outer.pooling = OuterPooling::dihist_grid;
      c.outer.dihist.alpha = r.real("dihist_alpha");
      c.outer.dihist.grid = r.integer("grid");
      break;
    case 2:
      c.outer.pooling = OuterPooling::dihist_box;
      c.outer.dihist.alpha = r.real("dihist_alpha");
      c.outer.dihist.subsample = r.integer("box_subsample");
      c.outer.dihist.side = r.integer("box_side");
      break;
    default:
      throw SpaceError("vision space: pool must pick 0, 1 or 2");
  }
  c.C = r.real("svm_c");
  c.var_cutoff = r.real("svm_var_cutoff");
  return c;
}

const LossRegistry& builtin_losses() {
  static const LossRegistry registry = [] {
    LossRegistry reg;
    reg.add({"quad1d", "(x - 3)^2", {"x"}, [] { return LossFn([](const Assignment& a, std::uint64_t) { return quad1d_loss(a); }); }});
    reg.add({"branch2", "branch 0: (u - 3)^2 + 1, branch 1: (u + 2)^2", {"branch"},
             [] { return LossFn([](const Assignment& a, std::uint64_t) { return branch2_loss(a); }); }});
    reg.add({"cifar10-desk", "pipeline error rate, 2000 train / 1000 validation grayscale CIFAR-10 images",
             kVisionStatements, [] {
               const char* dir = std::getenv(kDataDirEnv);
               if (!dir || !*dir)
                 throw DataError(std::string(kDataDirEnv) + " is not set (expected the CIFAR-10 binary directory)");
               const ImageSet all = to_grayscale(load_cifar10_train(dir));
               const auto [tr, va] = stratified_split(all.labels, 2000, 1000, kSplitSeed);
               return vision_loss(std::make_shared<const ImageSet>(all.subset(tr)),
                                  std::make_shared<const ImageSet>(all.subset(va)));
             }});
    reg.add({"synthetic-vision", "pipeline error rate on 32x32 oriented-grating textures, 200 train / 100 validation",
             kVisionStatements, [] {
               return vision_loss(std::make_shared<const ImageSet>(make_texture_dataset(20, 32, 101)),
                                  std::make_shared<const ImageSet>(make_texture_dataset(10, 32, 202)));
             }});
    return reg;
  }();
  return registry;
}

}  // namespace hpo
