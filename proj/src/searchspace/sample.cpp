#include "hpo/searchspace.hpp"

#include <algorithm>
#include <cmath>

namespace hpo {
namespace {

// Walks the active part of the graph. With `arithmetic` off, deterministic
// functions are skipped so the walk only discovers structure.
class Walker {
 public:
  Walker(const ExprGraph& g, const ValueChooser& choose, bool arithmetic)
      : g_(g), choose_(choose), arithmetic_(arithmetic), memo_(g.nodes().size()) {}

  Assignment run() {
    std::set<std::string> active;
    for (const Statement& s : g_.statements()) {
      if (s.guard && !guard_holds(*s.guard, active)) continue;
      active.insert(s.name);
      out_.resolved[s.name] = eval(s.node);
    }
    return std::move(out_);
  }

 private:
  bool guard_holds(const Guard& guard, const std::set<std::string>& active) const {
    if (!active.count(guard.selector)) return false;
    const Statement* sel = g_.find_statement(guard.selector);
    auto it = out_.values.find(g_.node(sel->node).label);
    if (it == out_.values.end()) return false;
    auto idx = std::get<std::int64_t>(it->second);
    return std::find(guard.options.begin(), guard.options.end(), idx) != guard.options.end();
  }

  double eval(NodeId id) {
    if (memo_[id]) return *memo_[id];
    const ExprNode& n = g_.node(id);
    double result = 0.0;
    switch (n.kind) {
      case NodeKind::constant:
        result = n.p0;
        break;
      case NodeKind::normal:
      case NodeKind::lognormal:
      case NodeKind::uniform:
      case NodeKind::randint: {
        ParamValue v = choose_(id, n);
        result = as_real(v);
        out_.values[n.label] = v;
        break;
      }
      case NodeKind::choice: {
        ParamValue v = choose_(id, n);
        if (!std::holds_alternative<std::int64_t>(v)) throw SpaceError(n.label + ": choice value must be an integer");
        auto idx = std::get<std::int64_t>(v);
        if (idx < 0 || static_cast<std::size_t>(idx) >= n.args.size())
          throw SpaceError(n.label + ": option index " + std::to_string(idx) + " out of range");
        out_.values[n.label] = v;
        result = eval(n.args[static_cast<std::size_t>(idx)]);
        break;
      }
      case NodeKind::func: {
        double x = eval(n.args.front());
        if (!arithmetic_) break;
        switch (n.op) {
          case FuncOp::log:
            if (!(x > 0.0)) throw EvaluationError("log of non-positive value " + std::to_string(x));
            result = std::log(x);
            break;
          case FuncOp::exp:
            result = std::exp(x);
            if (!std::isfinite(result)) throw EvaluationError("exp overflow at " + std::to_string(x));
            break;
          case FuncOp::neg:
            result = -x;
            break;
        }
        break;
      }
      case NodeKind::ref:
        result = eval(n.args.front());
        break;
    }
    memo_[id] = result;
    return result;
  }

  const ExprGraph& g_;
  const ValueChooser& choose_;
  bool arithmetic_;
  std::vector<std::optional<double>> memo_;
  Assignment out_;
};

}  // namespace

Assignment evaluate(const ExprGraph& graph, const ValueChooser& choose) {
  return Walker(graph, choose, true).run();
}

Assignment resolve(const ExprGraph& graph, const std::map<HyperLabel, ParamValue>& values) {
  return evaluate(graph, [&](NodeId, const ExprNode& n) -> ParamValue {
    auto it = values.find(n.label);
    if (it == values.end()) throw SpaceError("missing value for active label '" + n.label + "'");
    return it->second;
  });
}

ParamValue sample_node(const ExprNode& node, std::mt19937_64& rng) {
  switch (node.kind) {
    case NodeKind::normal:
      return std::normal_distribution<double>(node.p0, node.p1)(rng);
    case NodeKind::lognormal:
      return std::exp(std::normal_distribution<double>(node.p0, node.p1)(rng));
    case NodeKind::uniform:
      return std::uniform_real_distribution<double>(node.p0, node.p1)(rng);
    case NodeKind::randint:
      return std::uniform_int_distribution<std::int64_t>(static_cast<std::int64_t>(node.p0),
                                                         static_cast<std::int64_t>(node.p1))(rng);
    case NodeKind::choice:
      return std::uniform_int_distribution<std::int64_t>(0, static_cast<std::int64_t>(node.args.size()) - 1)(rng);
    default:
      throw SpaceError("sample_node called on a deterministic node");
  }
}

Assignment sample_prior(const ExprGraph& graph, std::mt19937_64& rng) {
  return evaluate(graph, [&](NodeId, const ExprNode& n) { return sample_node(n, rng); });
}

Assignment sample_prior(const ExprGraph& graph, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_prior(graph, rng);
}

std::set<HyperLabel> active_labels(const ExprGraph& graph, const std::map<HyperLabel, std::int64_t>& choice_values) {
  ValueChooser choose = [&](NodeId, const ExprNode& n) -> ParamValue {
    if (n.kind != NodeKind::choice) return 0.0;
    auto it = choice_values.find(n.label);
    if (it == choice_values.end()) throw SpaceError("missing choice value for '" + n.label + "'");
    return it->second;
  };
  Assignment a = Walker(graph, choose, false).run();
  std::set<HyperLabel> out;
  for (const auto& [label, v] : a.values) out.insert(label);
  return out;
}

std::map<HyperLabel, std::int64_t> choice_selections(const ExprGraph& graph, const Assignment& a) {
  std::map<HyperLabel, std::int64_t> out;
  for (const auto& [label, v] : a.values) {
    auto id = graph.find_label(label);
    if (id && graph.node(*id).kind == NodeKind::choice && std::holds_alternative<std::int64_t>(v))
      out.emplace(label, std::get<std::int64_t>(v));
  }
  return out;
}

std::optional<std::string> check_assignment(const ExprGraph& graph, const Assignment& a) {
  for (const auto& [label, v] : a.values) {
    auto id = graph.find_label(label);
    if (!id) return "unknown label '" + label + "'";
    const ExprNode& n = graph.node(*id);
    const bool integral = n.kind == NodeKind::randint || n.kind == NodeKind::choice;
    if (integral != std::holds_alternative<std::int64_t>(v)) return "wrong value type for '" + label + "'";
    const double x = as_real(v);
    if (!std::isfinite(x)) return "non-finite value for '" + label + "'";
    switch (n.kind) {
      case NodeKind::uniform:
      case NodeKind::randint:
        if (x < n.p0 || x > n.p1) return "value of '" + label + "' outside [lo, hi]";
        break;
      case NodeKind::lognormal:
        if (!(x > 0.0)) return "lognormal value of '" + label + "' not positive";
        break;
      case NodeKind::choice:
        if (x < 0 || x >= static_cast<double>(n.args.size())) return "choice index of '" + label + "' out of range";
        break;
      default:
        break;
    }
  }
  std::set<HyperLabel> keys;
  for (const auto& [label, v] : a.values) keys.insert(label);
  try {
    if (keys != active_labels(graph, choice_selections(graph, a))) return std::string("label set is not the active scope");
  } catch (const SpaceError& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

}  // namespace hpo
