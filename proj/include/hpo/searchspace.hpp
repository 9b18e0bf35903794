#pragma once

// Search-space description language: parse, validate, print and sample the
// prior expression graph.
//
// A space is a sequence of named statements. Each statement binds a name to an
// expression built from stochastic primitives (normal, lognormal, uniform,
// randint, choice), deterministic functions (log, exp, neg), numeric constants
// and references to earlier statements. Every stochastic node carries a
// HyperLabel: the statement name followed by the option indices of the choice
// nodes on the path to it, and the primitive name when the node is not the
// statement's own node ("b.1.uniform").
//
// Statements may carry a guard, `NAME = expr if SEL in (i, j, ...)`, which makes
// the whole statement active only when the choice statement SEL is active and
// picked one of the listed option indices.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hpo {

using NodeId = std::size_t;
using HyperLabel = std::string;

enum class NodeKind { constant, normal, lognormal, uniform, randint, choice, func, ref };
enum class FuncOp { log, exp, neg };

bool is_stochastic(NodeKind kind);
std::string_view kind_name(NodeKind kind);
std::string_view func_name(FuncOp op);

struct ExprNode {
  NodeKind kind = NodeKind::constant;
  // constant: value; normal/lognormal: (mu, sigma); uniform/randint: (lo, hi)
  double p0 = 0.0;
  double p1 = 0.0;
  FuncOp op = FuncOp::log;
  // choice: options; func: single argument; ref: single target
  std::vector<NodeId> args;
  HyperLabel label;

  bool operator==(const ExprNode&) const = default;

  static ExprNode constant(double v) { return {NodeKind::constant, v, 0.0, FuncOp::log, {}, {}}; }
  static ExprNode normal(double mu, double sigma) { return {NodeKind::normal, mu, sigma, FuncOp::log, {}, {}}; }
  static ExprNode lognormal(double mu, double sigma) { return {NodeKind::lognormal, mu, sigma, FuncOp::log, {}, {}}; }
  static ExprNode uniform(double lo, double hi) { return {NodeKind::uniform, lo, hi, FuncOp::log, {}, {}}; }
  static ExprNode randint(std::int64_t lo, std::int64_t hi) {
    return {NodeKind::randint, static_cast<double>(lo), static_cast<double>(hi), FuncOp::log, {}, {}};
  }
  static ExprNode choice(std::vector<NodeId> options) { return {NodeKind::choice, 0, 0, FuncOp::log, std::move(options), {}}; }
  static ExprNode func(FuncOp op, NodeId arg) { return {NodeKind::func, 0, 0, op, {arg}, {}}; }
  static ExprNode ref(NodeId target) { return {NodeKind::ref, 0, 0, FuncOp::log, {target}, {}}; }
};

struct Guard {
  std::string selector;  // name of an earlier choice statement
  std::vector<std::int64_t> options;

  bool operator==(const Guard&) const = default;
};

struct Statement {
  std::string name;
  NodeId node = 0;
  std::optional<Guard> guard;

  bool operator==(const Statement&) const = default;
};

/// The prior G. Nodes are stored in creation order; statements in source order.
/// Immutable once built and validated, so it can be shared between threads.
class ExprGraph {
 public:
  NodeId add_node(ExprNode node);
  void add_statement(std::string name, NodeId node, std::optional<Guard> guard = std::nullopt);

  /// Recomputes every stochastic node's HyperLabel from the graph structure.
  void assign_labels();

  const ExprNode& node(NodeId id) const { return nodes_.at(id); }
  std::span<const ExprNode> nodes() const { return nodes_; }
  std::span<const Statement> statements() const { return statements_; }
  const Statement* find_statement(std::string_view name) const;
  std::optional<NodeId> find_label(std::string_view label) const;
  /// All stochastic labels in node order.
  std::vector<HyperLabel> labels() const;

  bool operator==(const ExprGraph&) const = default;

 private:
  std::vector<ExprNode> nodes_;
  std::vector<Statement> statements_;
};

/// Sampled hyperparameter. Integers for randint and choice (option index),
/// reals for the continuous primitives.
using ParamValue = std::variant<std::int64_t, double>;

double as_real(const ParamValue& v);

struct Assignment {
  std::map<HyperLabel, ParamValue> values;
  std::map<std::string, double> resolved;

  bool operator==(const Assignment&) const = default;
};

struct Diagnostic {
  std::string where;  // node label, statement name or "node#<id>"
  std::string message;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class SpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arithmetic domain fault while resolving deterministic functions.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExprGraph parse_space(std::string_view text);
ExprGraph load_space(const std::string& path);
std::string print_space(const ExprGraph& graph);
std::vector<Diagnostic> validate_graph(const ExprGraph& graph);

/// Picks the value of one active stochastic node. Called once per active node,
/// parents before children, statements in source order.
using ValueChooser = std::function<ParamValue(NodeId, const ExprNode&)>;

Assignment evaluate(const ExprGraph& graph, const ValueChooser& choose);
/// Re-resolves a stored label map; throws SpaceError if an active label is missing.
Assignment resolve(const ExprGraph& graph, const std::map<HyperLabel, ParamValue>& values);

ParamValue sample_node(const ExprNode& node, std::mt19937_64& rng);
Assignment sample_prior(const ExprGraph& graph, std::mt19937_64& rng);
Assignment sample_prior(const ExprGraph& graph, std::uint64_t seed);

std::set<HyperLabel> active_labels(const ExprGraph& graph,
                                   const std::map<HyperLabel, std::int64_t>& choice_values);

/// Choice selections recorded in an assignment, keyed by the choice label.
std::map<HyperLabel, std::int64_t> choice_selections(const ExprGraph& graph, const Assignment& a);

/// Checks value ranges and active-scope soundness; returns a description of
/// the first violation or nothing.
std::optional<std::string> check_assignment(const ExprGraph& graph, const Assignment& a);

}  // namespace hpo
