#pragma once

// Hyperparameter optimization algorithms: random search and a Tree of Parzen
// Estimators that ages old trials and uses the best ceil(sqrt(T)/4) trials of
// each hyperparameter to model l(x).

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "hpo/searchspace.hpp"
#include "hpo/trialdb.hpp"

namespace hpo {

struct HPOAConfig {
  int n_startup = 50;     // ok trials drawn from the prior before modelling starts
  int ramp_flat = 25;     // newest trials that keep full weight
  int n_candidates = 24;  // draws from l(x) scored by l(x)/g(x)
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Size of the "good" set for T observations: max(1, ceil(sqrt(T)/4)); 0 for T = 0.
std::size_t n_best(std::size_t T);

/// Age weights for T observations ordered oldest to newest.
std::vector<double> trial_weights(std::size_t T, int ramp_flat = 25);

struct BestRest {
  std::vector<Trial> best;
  std::vector<Trial> rest;
};

/// Partitions ok trials by loss rank (ties by born_order). Throws
/// std::invalid_argument on empty input or non-ok trials.
BestRest split_best_rest(std::span<const Trial> ok_trials);

/// History of one hyperparameter as TPE sees it: ok trials where the label
/// was active, age-weighted, then split by loss rank into the good set (for
/// l) and the rest (for g).
struct LabelSplit {
  std::vector<ParamValue> best_values;
  std::vector<double> best_weights;
  std::vector<ParamValue> rest_values;
  std::vector<double> rest_weights;

  std::size_t size() const { return best_values.size() + rest_values.size(); }
};

LabelSplit split_label_history(std::span<const Trial> snapshot, const ExprNode& node, int ramp_flat = 25);

enum class ParzenSpace { linear, logarithmic };

struct ParzenComponent {
  double center;
  double width;
  double weight;
};

/// Weighted Gaussian mixture over one real hyperparameter. Components live in
/// the fitting space (log of the value for lognormal priors); pdf/sample work
/// on the value itself. On bounded support each component is truncated and
/// renormalised, so the mixture integrates to one.
class ParzenDensity {
 public:
  ParzenDensity(std::vector<ParzenComponent> components, ParzenSpace space, std::optional<double> lo,
                std::optional<double> hi);

  double pdf(double x) const;
  double log_pdf(double x) const;
  double sample(std::mt19937_64& rng) const;

  std::span<const ParzenComponent> components() const { return components_; }
  ParzenSpace space() const { return space_; }
  std::optional<double> lower() const { return lo_; }
  std::optional<double> upper() const { return hi_; }

 private:
  double fit_space_pdf(double u) const;

  std::vector<ParzenComponent> components_;
  std::vector<double> mass_;  // per-component probability inside the support
  ParzenSpace space_;
  std::optional<double> lo_;
  std::optional<double> hi_;
};

/// Fits a Parzen density to observations of a normal, lognormal or uniform
/// node: one component per value plus one component taken from the prior.
ParzenDensity fit_parzen(std::span<const double> values, std::span<const double> weights, const ExprNode& prior);

/// Distribution over the integer outcomes of a choice (option index) or
/// randint node: p(k) proportional to prior(k) + weighted count of k, where
/// the prior carries one pseudo-count in total.
class CategoricalDensity {
 public:
  CategoricalDensity(std::int64_t lo, std::int64_t hi, std::map<std::int64_t, double> counts);

  double probability(std::int64_t k) const;
  std::int64_t sample(std::mt19937_64& rng) const;
  /// Dense probability vector, index 0 for `lo`.
  std::vector<double> probabilities() const;
  std::int64_t lower() const { return lo_; }
  std::int64_t upper() const { return hi_; }

 private:
  std::int64_t lo_;
  std::int64_t hi_;
  std::map<std::int64_t, double> counts_;
  double total_ = 0.0;
};

CategoricalDensity fit_categorical(std::span<const std::int64_t> values, std::span<const double> weights,
                                   const ExprNode& prior);

/// Random search: a fresh draw from the prior, independent of the history.
Assignment suggest_random(const ExprGraph& graph, std::span<const Trial> snapshot, std::uint64_t seed);

/// TPE suggestion. Falls back to suggest_random until the history holds
/// n_startup ok trials.
Assignment tpe_suggest(const ExprGraph& graph, std::span<const Trial> snapshot, const HPOAConfig& config);

}  // namespace hpo
