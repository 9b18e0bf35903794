#pragma once

// Loss registry, experiment runner and convergence report.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpo/optimizers.hpp"
#include "hpo/pipeline/model.hpp"
#include "hpo/searchspace.hpp"
#include "hpo/trialdb.hpp"

namespace hpo {

/// Environment variable naming the dataset root directory.
inline constexpr const char* kDataDirEnv = "HPO_DATA_DIR";

/// Evaluates one configuration. `seed` is the trial seed; throwing marks the
/// trial failed.
using LossFn = std::function<double(const Assignment&, std::uint64_t seed)>;

struct LossSpec {
  std::string name;
  std::string description;
  std::vector<std::string> statements;  // statement names the loss reads
  std::function<LossFn()> make;         // loads any data; may throw DataError
};

class LossRegistry {
 public:
  /// Throws std::invalid_argument on a duplicate name.
  void add(LossSpec spec);
  const LossSpec* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, LossSpec> specs_;
};

/// quad1d, branch2, cifar10-desk and synthetic-vision.
const LossRegistry& builtin_losses();

/// Empty when every statement the loss reads is defined in `graph`, otherwise
/// a message naming the first missing one.
std::optional<std::string> check_loss_space(const LossSpec& spec, const ExprGraph& graph);

double quad1d_loss(const Assignment& a);
double branch2_loss(const Assignment& a);

/// Maps a configuration from the vision spaces onto a pipeline. Filter
/// seeds derive from `seed`.
PipelineConfig vision_config(const Assignment& a, std::uint64_t seed);

/// Per-trial seed: a splitmix64 mix of the experiment seed and born_order.
std::uint64_t trial_seed(std::uint64_t experiment_seed, std::int64_t born_order);

enum class Algorithm { random, tpe };

struct ExperimentConfig {
  std::filesystem::path space;
  std::string loss;
  Algorithm algorithm = Algorithm::tpe;
  int max_trials = 100;
  int workers = 1;
  std::uint64_t seed = 0;
  std::filesystem::path store;  // empty: in memory
  HPOAConfig tpe;               // seed field ignored; per-trial seeds are used

  /// Throws std::invalid_argument on max_trials < 1, workers < 1 or bad TPE fields.
  void validate() const;
};

struct RunOptions {
  Algorithm algorithm = Algorithm::tpe;
  int max_trials = 100;
  int workers = 1;
  std::uint64_t seed = 0;
  HPOAConfig tpe;
};

/// Suggest/evaluate/append loop over `store` until it holds max_trials
/// finished trials. Existing trials count towards the total.
void run_experiment(const ExprGraph& graph, const LossFn& loss, TrialStore& store, const RunOptions& options);

/// Loads the space and loss, opens the store and runs. Returns the final
/// snapshot.
std::vector<Trial> run_experiment(const ExperimentConfig& config, const LossRegistry& registry = builtin_losses());

/// "T,best_loss" rows for T = 1..N (empty cell before the first ok trial),
/// then the best trial's id, loss and assignment.
std::string report_csv(std::span<const Trial> snapshot);

}  // namespace hpo
