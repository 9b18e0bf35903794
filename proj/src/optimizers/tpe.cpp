#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hpo/optimizers.hpp"

namespace hpo {

void HPOAConfig::validate() const {
  if (n_startup < 0) throw std::invalid_argument("n_startup must be >= 0");
  if (ramp_flat < 1) throw std::invalid_argument("ramp_flat must be >= 1");
  if (n_candidates < 1) throw std::invalid_argument("n_candidates must be >= 1");
}

std::size_t n_best(std::size_t T) {
  if (T == 0) return 0;
  // Smallest k with 4k >= sqrt(T), i.e. 16 k^2 >= T, computed without rounding.
  std::size_t k = 1;
  while (16 * k * k < T) ++k;
  return k;
}

std::vector<double> trial_weights(std::size_t T, int ramp_flat) {
  std::vector<double> w(T, 1.0);
  const auto flat = static_cast<std::size_t>(std::max(ramp_flat, 1));
  if (T <= flat) return w;
  const std::size_t ramp = T - flat;
  for (std::size_t i = 0; i < ramp; ++i) w[i] = static_cast<double>(i + 1) / static_cast<double>(ramp);
  return w;
}

namespace {

// Positions of the n_best(T) lowest losses, ties by born_order.
std::vector<bool> best_mask(std::span<const double> losses, std::span<const std::int64_t> born) {
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return losses[a] < losses[b] || (losses[a] == losses[b] && born[a] < born[b]);
  });
  std::vector<bool> mask(losses.size(), false);
  const std::size_t k = n_best(losses.size());
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = true;
  return mask;
}

std::vector<const Trial*> ok_trials_by_age(std::span<const Trial> snapshot) {
  std::vector<const Trial*> ok;
  for (const Trial& t : snapshot)
    if (t.status == TrialStatus::ok) ok.push_back(&t);
  std::stable_sort(ok.begin(), ok.end(), [](auto* a, auto* b) { return a->born_order < b->born_order; });
  return ok;
}

bool fits_node(const ExprNode& n, const ParamValue& v) {
  const bool discrete = n.kind == NodeKind::randint || n.kind == NodeKind::choice;
  if (discrete != std::holds_alternative<std::int64_t>(v)) return false;
  const double x = as_real(v);
  switch (n.kind) {
    case NodeKind::uniform:
    case NodeKind::randint: return x >= n.p0 && x <= n.p1;
    case NodeKind::lognormal: return x > 0.0;
    case NodeKind::choice: return x >= 0 && x < static_cast<double>(n.args.size());
    default: return std::isfinite(x);
  }
}

template <class Density, class Value>
Value pick_candidate(const Density& good, const Density& bad, int n_candidates, std::mt19937_64& rng,
                     double (*score)(const Density&, const Density&, Value)) {
  Value best{};
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_candidates; ++i) {
    Value c = good.sample(rng);
    const double s = score(good, bad, c);
    if (i == 0 || s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

double parzen_score(const ParzenDensity& l, const ParzenDensity& g, double x) { return l.log_pdf(x) - g.log_pdf(x); }

double categorical_score(const CategoricalDensity& l, const CategoricalDensity& g, std::int64_t k) {
  return std::log(l.probability(k)) - std::log(g.probability(k));
}

}  // namespace

BestRest split_best_rest(std::span<const Trial> ok_trials) {
  if (ok_trials.empty()) throw std::invalid_argument("split_best_rest: no trials");
  std::vector<double> losses;
  std::vector<std::int64_t> born;
  for (const Trial& t : ok_trials) {
    if (t.status != TrialStatus::ok || !t.loss) throw std::invalid_argument("split_best_rest: only ok trials");
    losses.push_back(*t.loss);
    born.push_back(t.born_order);
  }
  const auto mask = best_mask(losses, born);
  BestRest out;
  for (std::size_t i = 0; i < ok_trials.size(); ++i) (mask[i] ? out.best : out.rest).push_back(ok_trials[i]);
  return out;
}

Assignment suggest_random(const ExprGraph& graph, std::span<const Trial>, std::uint64_t seed) {
  return sample_prior(graph, seed);
}

LabelSplit split_label_history(std::span<const Trial> snapshot, const ExprNode& node, int ramp_flat) {
  std::vector<ParamValue> values;
  std::vector<double> losses;
  std::vector<std::int64_t> born;
  for (const Trial* t : ok_trials_by_age(snapshot)) {
    auto it = t->assignment.find(node.label);
    // Trials where the label was inactive (or recorded under another space) do not count.
    if (it == t->assignment.end() || !fits_node(node, it->second)) continue;
    values.push_back(it->second);
    losses.push_back(*t->loss);
    born.push_back(t->born_order);
  }
  const auto weights = trial_weights(values.size(), ramp_flat);
  const auto mask = best_mask(losses, born);
  LabelSplit out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    (mask[i] ? out.best_values : out.rest_values).push_back(values[i]);
    (mask[i] ? out.best_weights : out.rest_weights).push_back(weights[i]);
  }
  return out;
}

Assignment tpe_suggest(const ExprGraph& graph, std::span<const Trial> snapshot, const HPOAConfig& config) {
  config.validate();
  std::size_t n_ok = 0;
  for (const Trial& t : snapshot) n_ok += t.status == TrialStatus::ok;
  if (n_ok < static_cast<std::size_t>(config.n_startup)) return suggest_random(graph, snapshot, config.seed);

  std::mt19937_64 rng(config.seed);
  return evaluate(graph, [&](NodeId, const ExprNode& node) -> ParamValue {
    const LabelSplit h = split_label_history(snapshot, node, config.ramp_flat);
    if (h.size() == 0) return sample_node(node, rng);

    if (node.kind == NodeKind::choice || node.kind == NodeKind::randint) {
      auto ints = [](const std::vector<ParamValue>& vs) {
        std::vector<std::int64_t> out;
        for (const auto& v : vs) out.push_back(std::get<std::int64_t>(v));
        return out;
      };
      const auto l = fit_categorical(ints(h.best_values), h.best_weights, node);
      const auto g = fit_categorical(ints(h.rest_values), h.rest_weights, node);
      return pick_candidate<CategoricalDensity, std::int64_t>(l, g, config.n_candidates, rng, categorical_score);
    }

    auto reals = [](const std::vector<ParamValue>& vs) {
      std::vector<double> out;
      for (const auto& v : vs) out.push_back(std::get<double>(v));
      return out;
    };
    const auto l = fit_parzen(reals(h.best_values), h.best_weights, node);
    const auto g = fit_parzen(reals(h.rest_values), h.rest_weights, node);
    return pick_candidate<ParzenDensity, double>(l, g, config.n_candidates, rng, parzen_score);
  });
}

}  // namespace hpo
