#include "hpo/searchspace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hpo {

bool is_stochastic(NodeKind kind) {
  switch (kind) {
    case NodeKind::normal:
    case NodeKind::lognormal:
    case NodeKind::uniform:
    case NodeKind::randint:
    case NodeKind::choice:
      return true;
    default:
      return false;
  }
}

std::string_view kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::constant: return "constant";
    case NodeKind::normal: return "normal";
    case NodeKind::lognormal: return "lognormal";
    case NodeKind::uniform: return "uniform";
    case NodeKind::randint: return "randint";
    case NodeKind::choice: return "choice";
    case NodeKind::func: return "func";
    case NodeKind::ref: return "ref";
  }
  return "?";
}

std::string_view func_name(FuncOp op) {
  switch (op) {
    case FuncOp::log: return "log";
    case FuncOp::exp: return "exp";
    case FuncOp::neg: return "neg";
  }
  return "?";
}

double as_real(const ParamValue& v) {
  return std::visit([](auto x) { return static_cast<double>(x); }, v);
}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

NodeId ExprGraph::add_node(ExprNode node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void ExprGraph::add_statement(std::string name, NodeId node, std::optional<Guard> guard) {
  statements_.push_back({std::move(name), node, std::move(guard)});
}

void ExprGraph::assign_labels() {
  for (auto& n : nodes_) n.label.clear();
  std::vector<bool> on_path(nodes_.size(), false);

  auto visit = [&](auto&& self, NodeId id, const std::string& path, bool own) -> void {
    if (id >= nodes_.size() || on_path[id]) return;
    ExprNode& n = nodes_[id];
    std::string here = path;
    if (is_stochastic(n.kind)) {
      if (n.label.empty()) n.label = own ? path : path + "." + std::string(kind_name(n.kind));
      here = n.label;
    }
    on_path[id] = true;
    if (n.kind == NodeKind::choice) {
      for (std::size_t i = 0; i < n.args.size(); ++i) self(self, n.args[i], here + "." + std::to_string(i), false);
    } else if (n.kind == NodeKind::func && !n.args.empty()) {
      self(self, n.args.front(), here, false);
    }
    on_path[id] = false;
  };

  for (const auto& s : statements_) visit(visit, s.node, s.name, true);
}

const Statement* ExprGraph::find_statement(std::string_view name) const {
  auto it = std::find_if(statements_.begin(), statements_.end(), [&](const Statement& s) { return s.name == name; });
  return it == statements_.end() ? nullptr : &*it;
}

std::optional<NodeId> ExprGraph::find_label(std::string_view label) const {
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (is_stochastic(nodes_[i].kind) && nodes_[i].label == label) return i;
  return std::nullopt;
}

std::vector<HyperLabel> ExprGraph::labels() const {
  std::vector<HyperLabel> out;
  for (const auto& n : nodes_)
    if (is_stochastic(n.kind)) out.push_back(n.label);
  return out;
}

namespace {

std::string where_of(const ExprGraph& g, NodeId id) {
  if (id < g.nodes().size() && !g.nodes()[id].label.empty()) return g.nodes()[id].label;
  return "node#" + std::to_string(id);
}

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

std::vector<Diagnostic> validate_graph(const ExprGraph& graph) {
  std::vector<Diagnostic> out;
  const auto nodes = graph.nodes();
  const auto stmts = graph.statements();
  const std::size_t n = nodes.size();

  bool edges_ok = true;
  for (NodeId id = 0; id < n; ++id) {
    const ExprNode& node = nodes[id];
    const std::string w = where_of(graph, id);
    for (NodeId a : node.args) {
      if (a >= n) {
        out.push_back({w, "argument refers to missing node#" + std::to_string(a)});
        edges_ok = false;
      }
    }
    switch (node.kind) {
      case NodeKind::constant:
        if (!std::isfinite(node.p0)) out.push_back({w, "constant is not finite"});
        break;
      case NodeKind::normal:
      case NodeKind::lognormal:
        if (!std::isfinite(node.p0)) out.push_back({w, "mean is not finite"});
        if (!(node.p1 > 0.0) || !std::isfinite(node.p1)) out.push_back({w, "sigma must be positive and finite"});
        break;
      case NodeKind::uniform:
        if (!std::isfinite(node.p0) || !std::isfinite(node.p1) || !(node.p0 < node.p1))
          out.push_back({w, "uniform requires finite lo < hi"});
        break;
      case NodeKind::randint:
        if (!is_integral(node.p0) || !is_integral(node.p1)) out.push_back({w, "randint bounds must be integers"});
        else if (node.p0 > node.p1) out.push_back({w, "randint requires lo <= hi"});
        break;
      case NodeKind::choice:
        if (node.args.empty()) out.push_back({w, "choice needs at least one option"});
        break;
      case NodeKind::func:
      case NodeKind::ref:
        if (node.args.size() != 1) out.push_back({w, std::string(kind_name(node.kind)) + " takes exactly one argument"});
        break;
    }
  }

  // Cycles: iterative three-colour DFS over argument edges.
  if (edges_ok) {
    std::vector<int> colour(n, 0);
    for (NodeId start = 0; start < n; ++start) {
      if (colour[start] != 0) continue;
      std::vector<std::pair<NodeId, std::size_t>> stack{{start, 0}};
      colour[start] = 1;
      while (!stack.empty()) {
        auto& [id, next] = stack.back();
        if (next < nodes[id].args.size()) {
          NodeId child = nodes[id].args[next++];
          if (colour[child] == 1) {
            out.push_back({where_of(graph, child), "cycle through node#" + std::to_string(child)});
          } else if (colour[child] == 0) {
            colour[child] = 1;
            stack.emplace_back(child, 0);
          }
        } else {
          colour[id] = 2;
          stack.pop_back();
        }
      }
    }
  }

  // Statements and guards.
  std::unordered_map<std::string, std::size_t> stmt_index;
  std::unordered_map<NodeId, std::size_t> guarded_nodes;
  for (std::size_t i = 0; i < stmts.size(); ++i) {
    const Statement& s = stmts[i];
    if (s.node >= n) {
      out.push_back({s.name, "statement refers to missing node"});
      continue;
    }
    if (stmt_index.count(s.name)) out.push_back({s.name, "duplicate statement name"});
    if (s.guard) {
      guarded_nodes.emplace(s.node, i);
      auto it = stmt_index.find(s.guard->selector);
      if (it == stmt_index.end()) {
        out.push_back({s.name, "guard selector '" + s.guard->selector + "' is not an earlier statement"});
      } else {
        const ExprNode& sel = nodes[stmts[it->second].node];
        if (sel.kind != NodeKind::choice) {
          out.push_back({s.name, "guard selector '" + s.guard->selector + "' is not a choice"});
        } else {
          if (s.guard->options.empty()) out.push_back({s.name, "guard lists no options"});
          for (auto o : s.guard->options)
            if (o < 0 || static_cast<std::size_t>(o) >= sel.args.size())
              out.push_back({s.name, "guard option " + std::to_string(o) + " out of range"});
        }
      }
    }
    stmt_index.emplace(s.name, i);
  }

  for (NodeId id = 0; id < n; ++id) {
    const ExprNode& node = nodes[id];
    if (node.kind == NodeKind::ref && node.args.size() == 1 && guarded_nodes.count(node.args.front()))
      out.push_back({where_of(graph, id),
                     "reference to guarded statement '" + stmts[guarded_nodes[node.args.front()]].name + "'"});
  }

  // Reachability (ref edges count).
  if (edges_ok) {
    std::vector<bool> seen(n, false);
    std::vector<NodeId> todo;
    for (const auto& s : stmts)
      if (s.node < n) todo.push_back(s.node);
    while (!todo.empty()) {
      NodeId id = todo.back();
      todo.pop_back();
      if (seen[id]) continue;
      seen[id] = true;
      for (NodeId a : nodes[id].args) todo.push_back(a);
    }
    for (NodeId id = 0; id < n; ++id)
      if (!seen[id]) out.push_back({where_of(graph, id), "node is not reachable from any statement"});
  }

  std::unordered_map<std::string, NodeId> labels;
  for (NodeId id = 0; id < n; ++id) {
    if (!is_stochastic(nodes[id].kind)) continue;
    if (nodes[id].label.empty()) {
      out.push_back({where_of(graph, id), "stochastic node has no label"});
    } else if (!labels.emplace(nodes[id].label, id).second) {
      out.push_back({nodes[id].label, "duplicate label"});
    }
  }
  return out;
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void print_expr(const ExprGraph& g, NodeId id, std::ostringstream& os,
                const std::unordered_map<NodeId, std::string>& stmt_of_node, bool top) {
  const ExprNode& n = g.node(id);
  if (!top) {
    if (auto it = stmt_of_node.find(id); it != stmt_of_node.end()) {
      os << it->second;
      return;
    }
  }
  switch (n.kind) {
    case NodeKind::constant:
      os << format_number(n.p0);
      break;
    case NodeKind::normal:
    case NodeKind::lognormal:
    case NodeKind::uniform:
      os << kind_name(n.kind) << '(' << format_number(n.p0) << ", " << format_number(n.p1) << ')';
      break;
    case NodeKind::randint:
      os << "randint(" << static_cast<std::int64_t>(n.p0) << ", " << static_cast<std::int64_t>(n.p1) << ')';
      break;
    case NodeKind::choice:
      os << "choice(";
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(g, n.args[i], os, stmt_of_node, false);
      }
      os << ')';
      break;
    case NodeKind::func:
      os << func_name(n.op) << '(';
      print_expr(g, n.args.front(), os, stmt_of_node, false);
      os << ')';
      break;
    case NodeKind::ref:
      print_expr(g, n.args.front(), os, stmt_of_node, false);
      break;
  }
}

}  // namespace

std::string print_space(const ExprGraph& graph) {
  std::unordered_map<NodeId, std::string> stmt_of_node;
  for (const auto& s : graph.statements()) stmt_of_node.emplace(s.node, s.name);

  std::ostringstream os;
  for (const auto& s : graph.statements()) {
    os << s.name << " = ";
    print_expr(graph, s.node, os, stmt_of_node, true);
    if (s.guard) {
      os << " if " << s.guard->selector << " in (";
      for (std::size_t i = 0; i < s.guard->options.size(); ++i) os << (i ? ", " : "") << s.guard->options[i];
      os << ')';
    }
    os << '\n';
  }
  return os.str();
}

ExprGraph load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot open space file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_space(ss.str());
}

}  // namespace hpo
