#include "hpo/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace hpo {
namespace {

std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string value_text(const ParamValue& v) {
  return std::visit([](auto x) {
    if constexpr (std::is_same_v<decltype(x), double>)
      return shortest(x);
    else
      return std::to_string(x);
  }, v);
}

}  // namespace

void LossRegistry::add(LossSpec spec) {
  const std::string name = spec.name;
  if (!specs_.emplace(name, std::move(spec)).second) throw std::invalid_argument("loss '" + name + "' registered twice");
}

const LossSpec* LossRegistry::find(const std::string& name) const {
  auto it = specs_.find(name);
  return it == specs_.end() ? nullptr : &it->second;
}

std::vector<std::string> LossRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : specs_) out.push_back(name);
  return out;
}

std::optional<std::string> check_loss_space(const LossSpec& spec, const ExprGraph& graph) {
  for (const auto& s : spec.statements)
    if (!graph.find_statement(s)) return "loss '" + spec.name + "' reads '" + s + "', which the space does not define";
  return std::nullopt;
}

double quad1d_loss(const Assignment& a) {
  const double x = a.resolved.at("x");
  return (x - 3.0) * (x - 3.0);
}

double branch2_loss(const Assignment& a) {
  const auto branch = std::get<std::int64_t>(a.values.at("branch"));
  const double u = a.resolved.at("branch");
  return branch == 0 ? (u - 3.0) * (u - 3.0) + 1.0 : (u + 2.0) * (u + 2.0);
}

std::uint64_t trial_seed(std::uint64_t experiment_seed, std::int64_t born_order) {
  std::uint64_t z = experiment_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(born_order) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void ExperimentConfig::validate() const {
  if (max_trials < 1) throw std::invalid_argument("max_trials must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  tpe.validate();
}

void run_experiment(const ExprGraph& graph, const LossFn& loss, TrialStore& store, const RunOptions& options) {
  if (options.max_trials < 1 || options.workers < 1) throw std::invalid_argument("max_trials and workers must be >= 1");
  options.tpe.validate();

  std::mutex mu;
  std::int64_t next_born = store.next_born_order();
  std::int64_t remaining = options.max_trials;
  for (const Trial& t : store.snapshot()) remaining -= t.status != TrialStatus::pending;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      std::int64_t born;
      {
        std::lock_guard lock(mu);
        if (remaining <= 0 || failure) return;
        --remaining;
        born = next_born++;
      }
      const auto start = std::chrono::steady_clock::now();
      Trial t;
      t.born_order = born;
      t.seed = trial_seed(options.seed, born);
      try {
        const std::vector<Trial> history = store.snapshot();
        HPOAConfig cfg = options.tpe;
        cfg.seed = t.seed;
        const Assignment a = options.algorithm == Algorithm::random ? suggest_random(graph, history, t.seed)
                                                                    : tpe_suggest(graph, history, cfg);
        t.assignment = a.values;
        const double l = loss(a, t.seed);
        if (!std::isfinite(l)) throw std::runtime_error("loss is not finite");
        t.status = TrialStatus::ok;
        t.loss = l;
      } catch (const StoreError&) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      } catch (const std::exception& e) {
        t.status = TrialStatus::fail;
        t.loss.reset();
        t.annotations["error"] = e.what();
      }
      t.annotations["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      try {
        store.append(std::move(t));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (options.workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < options.workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<Trial> run_experiment(const ExperimentConfig& config, const LossRegistry& registry) {
  config.validate();
  const LossSpec* spec = registry.find(config.loss);
  if (!spec) throw std::invalid_argument("unknown loss '" + config.loss + "'");
  const ExprGraph graph = load_space(config.space.string());
  if (auto problem = check_loss_space(*spec, graph)) throw SpaceError(*problem);
  const LossFn loss = spec->make();

  RunOptions options{config.algorithm, config.max_trials, config.workers, config.seed, config.tpe};
  if (config.store.empty()) {
    TrialStore store;
    run_experiment(graph, loss, store, options);
    return store.snapshot();
  }
  TrialStore store(config.store);
  run_experiment(graph, loss, store, options);
  return store.snapshot();
}

std::string report_csv(std::span<const Trial> snapshot) {
  std::ostringstream out;
  out << "T,best_loss\n";
  const std::vector<double> curve = best_so_far(snapshot);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << i + 1 << ',';
    if (!std::isnan(curve[i])) out << shortest(curve[i]);
    out << '\n';
  }
  if (auto best = best_trial(snapshot)) {
    out << "\nbest_trial_id,best_loss\n" << best->trial_id << ',' << shortest(*best->loss) << '\n';
    out << "\nlabel,value\n";
    for (const auto& [label, v] : best->assignment) out << label << ',' << value_text(v) << '\n';
  }
  return out.str();
}

}  // namespace hpo
