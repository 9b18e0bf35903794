#include "hpo/searchspace.hpp"

#include <cctype>
#include <charconv>
#include <unordered_map>

namespace hpo {
namespace {

enum class Tok { ident, number, lparen, rparen, comma, equals, separator, end };

struct Token {
  Tok kind;
  std::string_view text;
  std::size_t line;
  std::size_t column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    int depth = 0;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '\n' || c == ';') {
        // Newlines inside parentheses are plain whitespace.
        if (c == ';' || depth == 0) out.push_back({Tok::separator, src_.substr(pos_, 1), line_, col_});
        advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        auto [l, col, start] = mark();
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
        out.push_back({Tok::ident, src_.substr(start, pos_ - start), l, col});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
        auto [l, col, start] = mark();
        advance();
        while (pos_ < src_.size()) {
          char d = src_[pos_];
          bool exp_sign = (d == '-' || d == '+') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E');
          if (std::isdigit(static_cast<unsigned char>(d)) || d == '.' || d == 'e' || d == 'E' || exp_sign) advance();
          else break;
        }
        out.push_back({Tok::number, src_.substr(start, pos_ - start), l, col});
      } else {
        Tok kind;
        switch (c) {
          case '(': kind = Tok::lparen; ++depth; break;
          case ')': kind = Tok::rparen; --depth; break;
          case ',': kind = Tok::comma; break;
          case '=': kind = Tok::equals; break;
          default: throw ParseError(line_, col_, std::string("unexpected character '") + c + "'");
        }
        out.push_back({kind, src_.substr(pos_, 1), line_, col_});
        advance();
      }
    }
    out.push_back({Tok::end, {}, line_, col_});
    return out;
  }

 private:
  struct Mark {
    std::size_t line, column, pos;
  };
  Mark mark() const { return {line_, col_, pos_}; }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ExprGraph run() {
    skip_separators();
    if (peek().kind == Tok::end) throw error(peek(), "empty space: expected at least one statement");
    while (peek().kind != Tok::end) {
      statement();
      if (peek().kind != Tok::end && peek().kind != Tok::separator)
        throw error(peek(), "expected end of statement, found '" + std::string(peek().text) + "'");
      skip_separators();
    }
    graph_.assign_labels();
    auto diags = validate_graph(graph_);
    if (!diags.empty()) throw SpaceError(diags.front().where + ": " + diags.front().message);
    return std::move(graph_);
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_++]; }

  ParseError error(const Token& t, const std::string& msg) const { return ParseError(t.line, t.column, msg); }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) {
      std::string found = peek().kind == Tok::end ? "end of input" : "'" + std::string(peek().text) + "'";
      throw error(peek(), std::string("expected ") + what + ", found " + found);
    }
    return take();
  }

  void skip_separators() {
    while (peek().kind == Tok::separator) take();
  }

  void statement() {
    const Token& name = expect(Tok::ident, "statement name");
    if (is_reserved(name.text)) throw error(name, "'" + std::string(name.text) + "' is a reserved word");
    std::string n(name.text);
    if (names_.count(n)) throw error(name, "duplicate statement name '" + n + "'");
    expect(Tok::equals, "'='");
    NodeId node = expr();

    std::optional<Guard> guard;
    if (peek().kind == Tok::ident && peek().text == "if") {
      take();
      const Token& sel = expect(Tok::ident, "guard selector name");
      auto it = names_.find(std::string(sel.text));
      if (it == names_.end()) throw error(sel, "undefined reference '" + std::string(sel.text) + "'");
      if (graph_.node(it->second).kind != NodeKind::choice)
        throw error(sel, "guard selector '" + std::string(sel.text) + "' is not a choice");
      const Token& in = expect(Tok::ident, "'in'");
      if (in.text != "in") throw error(in, "expected 'in'");
      expect(Tok::lparen, "'('");
      Guard g{std::string(sel.text), {}};
      do {
        const Token& t = expect(Tok::number, "option index");
        g.options.push_back(parse_int(t));
      } while (peek().kind == Tok::comma && (take(), true));
      expect(Tok::rparen, "')'");
      guarded_.emplace(n);
      guard = std::move(g);
    }
    names_.emplace(n, node);
    graph_.add_statement(std::move(n), node, std::move(guard));
  }

  static bool is_reserved(std::string_view s) {
    return s == "if" || s == "in" || s == "normal" || s == "lognormal" || s == "uniform" || s == "randint" ||
           s == "choice" || s == "log" || s == "exp" || s == "neg";
  }

  double parse_real(const Token& t) const {
    double v = 0;
    auto first = t.text.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      throw error(t, "malformed number '" + std::string(t.text) + "'");
    return v;
  }

  std::int64_t parse_int(const Token& t) const {
    std::int64_t v = 0;
    auto first = t.text.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      throw error(t, "expected an integer, found '" + std::string(t.text) + "'");
    return v;
  }

  NodeId expr() {
    const Token& t = peek();
    if (t.kind == Tok::number) {
      take();
      return graph_.add_node(ExprNode::constant(parse_real(t)));
    }
    if (t.kind != Tok::ident) throw error(t, "expected an expression");
    take();
    const std::string_view w = t.text;
    if (peek().kind != Tok::lparen || !is_reserved(w) || w == "if" || w == "in") {
      auto it = names_.find(std::string(w));
      if (it == names_.end()) throw error(t, "undefined reference '" + std::string(w) + "'");
      if (guarded_.count(it->first))
        throw error(t, "cannot reference guarded statement '" + std::string(w) + "'");
      return graph_.add_node(ExprNode::ref(it->second));
    }
    expect(Tok::lparen, "'('");

    NodeId id;
    if (w == "normal" || w == "lognormal" || w == "uniform") {
      const Token& a = expect(Tok::number, "number");
      expect(Tok::comma, "','");
      const Token& b = expect(Tok::number, "number");
      double x = parse_real(a), y = parse_real(b);
      if (w == "uniform") {
        if (!(x < y)) throw error(a, "bound violation: uniform requires lo < hi");
        id = graph_.add_node(ExprNode::uniform(x, y));
      } else {
        if (!(y > 0)) throw error(b, "bound violation: sigma must be positive");
        id = graph_.add_node(w == "normal" ? ExprNode::normal(x, y) : ExprNode::lognormal(x, y));
      }
    } else if (w == "randint") {
      const Token& a = expect(Tok::number, "integer");
      expect(Tok::comma, "','");
      const Token& b = expect(Tok::number, "integer");
      auto lo = parse_int(a), hi = parse_int(b);
      if (lo > hi) throw error(a, "bound violation: randint requires lo <= hi");
      id = graph_.add_node(ExprNode::randint(lo, hi));
    } else if (w == "choice") {
      std::vector<NodeId> opts;
      opts.push_back(expr());
      while (peek().kind == Tok::comma) {
        take();
        opts.push_back(expr());
      }
      id = graph_.add_node(ExprNode::choice(std::move(opts)));
    } else {
      FuncOp op = w == "log" ? FuncOp::log : w == "exp" ? FuncOp::exp : FuncOp::neg;
      NodeId arg = expr();
      id = graph_.add_node(ExprNode::func(op, arg));
    }
    expect(Tok::rparen, "')'");
    return id;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ExprGraph graph_;
  std::unordered_map<std::string, NodeId> names_;
  std::set<std::string> guarded_;
};

}  // namespace

ExprGraph parse_space(std::string_view text) { return Parser(Lexer(text).run()).run(); }

}  // namespace hpo
