#pragma once

// Feed-forward feature extractor (0-2 fbncc+lpool inter-layers, one outer
// layer) followed by a linear SVM.

#include <span>
#include <vector>

#include "hpo/pipeline/ops.hpp"
#include "hpo/pipeline/svm.hpp"
#include "hpo/pipeline/zca.hpp"

namespace hpo {

constexpr Index kFeatureCap = 16000;

struct InterLayer {
  FilterSpec filters;
  FbnccParams<double> norm;
  LpoolParams<double> pool;
};

enum class OuterPooling { lpool_lnorm, dihist_grid, dihist_box };

struct OuterLayer {
  FilterSpec filters;  // count is replaced by the largest count under the feature cap
  Index max_filters = kFeatureCap;
  FbnccParams<double> norm;
  OuterPooling pooling = OuterPooling::lpool_lnorm;
  LpoolParams<double> lpool;
  LnormParams<double> lnorm;
  DihistParams<double> dihist;  // mode follows `pooling`
};

struct PipelineConfig {
  std::vector<InterLayer> inter;
  OuterLayer outer;
  double C = 1.0;
  double var_cutoff = 0.0;

  /// Throws PipelineError unless 0-2 inter-layers and positive C, max_filters.
  void validate() const;
};

/// Pooled outputs per outer filter for an outer fbncc output of `fbncc_out`.
Index features_per_filter(const Shape& fbncc_out, const OuterLayer& outer);

/// Largest K >= 1 with features_per_filter * K <= 16000, for an outer layer
/// whose input has shape `outer_input`. Throws if one filter already exceeds it.
Index outer_filter_count(const Shape& outer_input, const OuterLayer& outer);

/// Shape of the outer layer's input and the extracted feature map, predicted
/// from the stage shape rules alone.
Shape outer_input_shape(const PipelineConfig& config, const Shape& image);
Shape feature_shape(const PipelineConfig& config, const Shape& image);
Index feature_width(const PipelineConfig& config, const Shape& image);

struct FittedPipeline {
  PipelineConfig config;  // outer filter count resolved
  Shape input{};
  std::vector<FilterBank<double>> banks;  // inter-layers then outer
};

/// Draws every filter bank, fitting ZCA strategies on patches of `train` as
/// seen by each layer. If `train_features` is given it receives the train
/// features, saving a second pass.
FittedPipeline fit_pipeline(const PipelineConfig& config, std::span<const FeatureMap<double>> train,
                            Eigen::MatrixXd* train_features = nullptr);

/// One flattened feature row per image.
Eigen::MatrixXd extract_features(const FittedPipeline& fitted, std::span<const FeatureMap<double>> images);

/// Fits filters on `images` themselves, then extracts.
Eigen::MatrixXd extract_features(std::span<const FeatureMap<double>> images, const PipelineConfig& config);

struct ImageSet;

/// Validation error rate in [0, 1] of the pipeline trained on `train`.
double evaluate_pipeline_loss(const PipelineConfig& config, const ImageSet& train, const ImageSet& validation);

}  // namespace hpo
