#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "hpo/optimizers.hpp"

namespace hpo {
namespace {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double u, double mu, double sigma) {
  const double z = (u - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

ParzenDensity::ParzenDensity(std::vector<ParzenComponent> components, ParzenSpace space, std::optional<double> lo,
                             std::optional<double> hi)
    : components_(std::move(components)), space_(space), lo_(lo), hi_(hi) {
  if (components_.empty()) throw std::invalid_argument("Parzen density needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.width > 0.0) || !(c.weight > 0.0)) throw std::invalid_argument("Parzen widths and weights must be positive");
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
  mass_.reserve(components_.size());
  for (const auto& c : components_) {
    const double up = hi_ ? std_normal_cdf((*hi_ - c.center) / c.width) : 1.0;
    const double down = lo_ ? std_normal_cdf((*lo_ - c.center) / c.width) : 0.0;
    mass_.push_back(std::max(up - down, 1e-300));
  }
}

double ParzenDensity::fit_space_pdf(double u) const {
  if ((lo_ && u < *lo_) || (hi_ && u > *hi_)) return 0.0;
  double p = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i)
    p += components_[i].weight * normal_pdf(u, components_[i].center, components_[i].width) / mass_[i];
  return p;
}

double ParzenDensity::pdf(double x) const {
  if (space_ == ParzenSpace::logarithmic) {
    if (!(x > 0.0)) return 0.0;
    return fit_space_pdf(std::log(x)) / x;
  }
  return fit_space_pdf(x);
}

double ParzenDensity::log_pdf(double x) const {
  const double p = pdf(x);
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

double ParzenDensity::sample(std::mt19937_64& rng) const {
  std::vector<double> w;
  w.reserve(components_.size());
  for (const auto& c : components_) w.push_back(c.weight);
  const auto& c = components_[std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng)];
  std::normal_distribution<double> draw(c.center, c.width);
  double u = draw(rng);
  // Centres lie inside the support and widths are at most the support
  // range, so each component keeps a sizeable share of its mass inside.
  for (int tries = 0; tries < 1000 && ((lo_ && u < *lo_) || (hi_ && u > *hi_)); ++tries) u = draw(rng);
  if (lo_) u = std::max(u, *lo_);
  if (hi_) u = std::min(u, *hi_);
  return space_ == ParzenSpace::logarithmic ? std::exp(u) : u;
}

ParzenDensity fit_parzen(std::span<const double> values, std::span<const double> weights, const ExprNode& prior) {
  if (values.size() != weights.size()) throw std::invalid_argument("fit_parzen: values and weights differ in length");

  ParzenSpace space = ParzenSpace::linear;
  std::optional<double> lo, hi;
  double prior_center = 0.0, prior_width = 1.0;
  switch (prior.kind) {
    case NodeKind::uniform:
      lo = prior.p0;
      hi = prior.p1;
      prior_center = 0.5 * (prior.p0 + prior.p1);
      prior_width = prior.p1 - prior.p0;
      break;
    case NodeKind::normal:
      prior_center = prior.p0;
      prior_width = prior.p1;
      break;
    case NodeKind::lognormal:
      space = ParzenSpace::logarithmic;
      prior_center = prior.p0;
      prior_width = prior.p1;
      break;
    default:
      throw std::invalid_argument("fit_parzen: prior must be normal, lognormal or uniform");
  }

  struct Point {
    double center;
    double weight;
  };
  std::vector<Point> pts;
  pts.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = values[i];
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) throw std::invalid_argument("fit_parzen: weights must be positive");
    if (space == ParzenSpace::logarithmic) {
      if (!(v > 0.0)) throw std::invalid_argument("fit_parzen: lognormal value must be positive");
      v = std::log(v);
    }
    if (!std::isfinite(v) || (lo && v < *lo) || (hi && v > *hi))
      throw std::invalid_argument("fit_parzen: value outside the prior support");
    pts.push_back({v, weights[i]});
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.center < b.center; });

  // Neighbour-gap bandwidths; support bounds act as neighbours of the extremes.
  const double range = lo ? (*hi - *lo) : prior_width;
  const double min_width = range / 100.0;
  std::vector<ParzenComponent> comps;
  comps.reserve(pts.size() + 1);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    // -1 marks a side with neither a neighbour nor a bound.
    const double left = i > 0 ? pts[i].center - pts[i - 1].center : lo ? pts[i].center - *lo : -1.0;
    const double right = i + 1 < pts.size() ? pts[i + 1].center - pts[i].center : hi ? *hi - pts[i].center : -1.0;
    const double gap = std::max(left, right);
    const double width = gap >= 0.0 ? std::clamp(gap, min_width, range) : prior_width;
    comps.push_back({pts[i].center, width, pts[i].weight});
  }
  comps.push_back({prior_center, prior_width, 1.0});
  return ParzenDensity(std::move(comps), space, lo, hi);
}

CategoricalDensity::CategoricalDensity(std::int64_t lo, std::int64_t hi, std::map<std::int64_t, double> counts)
    : lo_(lo), hi_(hi), counts_(std::move(counts)) {
  if (lo_ > hi_) throw std::invalid_argument("categorical density needs lo <= hi");
  for (const auto& [k, c] : counts_) {
    if (k < lo_ || k > hi_) throw std::invalid_argument("categorical outcome out of range");
    if (!(c >= 0.0)) throw std::invalid_argument("categorical counts must be non-negative");
    total_ += c;
  }
}

double CategoricalDensity::probability(std::int64_t k) const {
  if (k < lo_ || k > hi_) return 0.0;
  const double n = static_cast<double>(hi_ - lo_) + 1.0;
  auto it = counts_.find(k);
  const double c = it == counts_.end() ? 0.0 : it->second;
  return (1.0 / n + c) / (1.0 + total_);
}

std::int64_t CategoricalDensity::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0 + total_);
  double r = unit(rng);
  if (r < 1.0 || counts_.empty()) return std::uniform_int_distribution<std::int64_t>(lo_, hi_)(rng);
  r -= 1.0;
  for (const auto& [k, c] : counts_) {
    if (r < c) return k;
    r -= c;
  }
  return counts_.rbegin()->first;
}

std::vector<double> CategoricalDensity::probabilities() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(hi_ - lo_ + 1));
  for (std::int64_t k = lo_; k <= hi_; ++k) out.push_back(probability(k));
  return out;
}

CategoricalDensity fit_categorical(std::span<const std::int64_t> values, std::span<const double> weights,
                                   const ExprNode& prior) {
  if (values.size() != weights.size()) throw std::invalid_argument("fit_categorical: values and weights differ in length");
  std::int64_t lo = 0, hi = 0;
  if (prior.kind == NodeKind::choice) {
    hi = static_cast<std::int64_t>(prior.args.size()) - 1;
  } else if (prior.kind == NodeKind::randint) {
    lo = static_cast<std::int64_t>(prior.p0);
    hi = static_cast<std::int64_t>(prior.p1);
  } else {
    throw std::invalid_argument("fit_categorical: prior must be choice or randint");
  }
  std::map<std::int64_t, double> counts;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < lo || values[i] > hi) throw std::invalid_argument("fit_categorical: value outside the prior support");
    if (!(weights[i] > 0.0)) throw std::invalid_argument("fit_categorical: weights must be positive");
    counts[values[i]] += weights[i];
  }
  return CategoricalDensity(lo, hi, std::move(counts));
}

}  // namespace hpo
