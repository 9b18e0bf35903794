#include "hpo/pipeline/model.hpp"

#include <algorithm>

#include "hpo/pipeline/data.hpp"

namespace hpo {
namespace {

bool uses_zca(FilterStrategy s) { return s != FilterStrategy::random_uniform; }

DihistParams<double> dihist_params(const OuterLayer& outer) {
  DihistParams<double> p = outer.dihist;
  p.mode = outer.pooling == OuterPooling::dihist_box ? DihistMode::box : DihistMode::grid;
  return p;
}

Shape pooled_shape(const Shape& in, const OuterLayer& outer) {
  if (outer.pooling == OuterPooling::lpool_lnorm) return lnorm_shape(lpool_shape(in, outer.lpool), outer.lnorm);
  return dihist_shape(in, dihist_params(outer));
}

FeatureMap<double> apply_inter(const FeatureMap<double>& x, const FilterBank<double>& bank, const InterLayer& layer) {
  return lpool(fbncc(x, bank, layer.norm), layer.pool);
}

FeatureMap<double> apply_outer(const FeatureMap<double>& x, const FilterBank<double>& bank, const OuterLayer& outer) {
  FeatureMap<double> y = fbncc(x, bank, outer.norm);
  if (outer.pooling == OuterPooling::lpool_lnorm) return lnorm(lpool(y, outer.lpool), outer.lnorm);
  return dihist(y, dihist_params(outer));
}

Shape common_shape(std::span<const FeatureMap<double>> images) {
  if (images.empty()) throw PipelineError("pipeline: no images");
  const Shape s = shape_of(images.front());
  for (const auto& im : images)
    if (shape_of(im) != s) throw PipelineError("pipeline: images differ in shape");
  return s;
}

FilterBank<double> draw_bank(FilterSpec spec, std::span<const FeatureMap<double>> inputs) {
  const Index C = inputs.front().channels();
  if (!uses_zca(spec.strategy)) return generate_filters<double>(spec, C);
  const Index D = spec.size * spec.size * C;
  const Index n = std::clamp<Index>(4 * D, 1000, 10000);
  const RowMatrix<double> patches = sample_patches(inputs, spec.size, n, spec.seed ^ 0x5bd1e995u);
  return generate_filters<double>(spec, C, &patches);
}

void append_row(Eigen::MatrixXd& out, Index r, const FeatureMap<double>& y) {
  if (y.size() != out.cols()) throw PipelineError("pipeline: feature width changed between images");
  out.row(r) = y.flat().transpose();
}

}  // namespace

void PipelineConfig::validate() const {
  if (inter.size() > 2) throw PipelineError("pipeline: at most 2 inter-layers");
  if (!(C > 0) || !std::isfinite(C)) throw PipelineError("pipeline: C must be positive");
  if (!(var_cutoff >= 0)) throw PipelineError("pipeline: variance cutoff must be >= 0");
  if (outer.max_filters < 1) throw PipelineError("pipeline: outer filter cap must be >= 1");
}

Index features_per_filter(const Shape& fbncc_out, const OuterLayer& outer) {
  const Shape p = pooled_shape({fbncc_out[0], fbncc_out[1], 1}, outer);
  return p[0] * p[1] * p[2];
}

Index outer_filter_count(const Shape& outer_input, const OuterLayer& outer) {
  const Index per = features_per_filter(fbncc_shape(outer_input, outer.filters.size, 1), outer);
  if (per > kFeatureCap)
    throw PipelineError("pipeline: a single outer filter yields " + std::to_string(per) + " features (cap " +
                        std::to_string(kFeatureCap) + ")");
  return kFeatureCap / per;
}

Shape outer_input_shape(const PipelineConfig& config, const Shape& image) {
  config.validate();
  Shape s = image;
  for (const auto& l : config.inter) s = lpool_shape(fbncc_shape(s, l.filters.size, l.filters.count), l.pool);
  return s;
}

Shape feature_shape(const PipelineConfig& config, const Shape& image) {
  const Shape in = outer_input_shape(config, image);
  const Index K = std::min(config.outer.max_filters, outer_filter_count(in, config.outer));
  return pooled_shape(fbncc_shape(in, config.outer.filters.size, K), config.outer);
}

Index feature_width(const PipelineConfig& config, const Shape& image) {
  const Shape s = feature_shape(config, image);
  return s[0] * s[1] * s[2];
}

FittedPipeline fit_pipeline(const PipelineConfig& config, std::span<const FeatureMap<double>> train,
                            Eigen::MatrixXd* train_features) {
  config.validate();
  FittedPipeline fp{config, common_shape(train), {}};
  std::vector<FeatureMap<double>> cur;
  std::span<const FeatureMap<double>> inputs = train;
  for (const auto& layer : config.inter) {
    fp.banks.push_back(draw_bank(layer.filters, inputs));
    std::vector<FeatureMap<double>> next;
    next.reserve(inputs.size());
    for (const auto& x : inputs) next.push_back(apply_inter(x, fp.banks.back(), layer));
    cur = std::move(next);
    inputs = cur;
  }

  FilterSpec outer = config.outer.filters;
  outer.count = std::min(config.outer.max_filters, outer_filter_count(shape_of(inputs.front()), config.outer));
  fp.config.outer.filters.count = outer.count;
  fp.banks.push_back(draw_bank(outer, inputs));

  if (train_features) {
    train_features->resize(static_cast<Index>(inputs.size()), feature_width(fp.config, fp.input));
    for (std::size_t i = 0; i < inputs.size(); ++i)
      append_row(*train_features, static_cast<Index>(i), apply_outer(inputs[i], fp.banks.back(), fp.config.outer));
  }
  return fp;
}

Eigen::MatrixXd extract_features(const FittedPipeline& fitted, std::span<const FeatureMap<double>> images) {
  if (fitted.banks.size() != fitted.config.inter.size() + 1) throw PipelineError("pipeline: filter banks missing");
  Eigen::MatrixXd out(static_cast<Index>(images.size()), feature_width(fitted.config, fitted.input));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (shape_of(images[i]) != fitted.input) throw PipelineError("pipeline: image shape differs from training images");
    FeatureMap<double> x = images[i];
    for (std::size_t l = 0; l < fitted.config.inter.size(); ++l) x = apply_inter(x, fitted.banks[l], fitted.config.inter[l]);
    append_row(out, static_cast<Index>(i), apply_outer(x, fitted.banks.back(), fitted.config.outer));
  }
  return out;
}

Eigen::MatrixXd extract_features(std::span<const FeatureMap<double>> images, const PipelineConfig& config) {
  Eigen::MatrixXd features;
  fit_pipeline(config, images, &features);
  return features;
}

double evaluate_pipeline_loss(const PipelineConfig& config, const ImageSet& train, const ImageSet& validation) {
  if (train.labels.size() != train.images.size() || validation.labels.size() != validation.images.size())
    throw PipelineError("pipeline: one label per image required");
  if (validation.images.empty()) throw PipelineError("pipeline: empty validation set");
  Eigen::MatrixXd train_x;
  const FittedPipeline fitted = fit_pipeline(config, train.images, &train_x);
  const Eigen::MatrixXd val_x = extract_features(fitted, validation.images);

  SvmParams<double> params;
  params.C = config.C;
  params.var_cutoff = config.var_cutoff;
  const LinearModel<double> model = train_linear_svm(train_x, train.labels, params);
  const std::vector<int> predicted = model.predict(val_x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != validation.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

}  // namespace hpo
