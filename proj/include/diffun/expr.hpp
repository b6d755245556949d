#pragma once

// Small expression language for diffusion coefficients and integrands.
// Grammar (loosest to tightest binding):
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | 'x' | ident '(' expr (',' expr)* ')' | '(' expr ')'
// Functions: exp, log, abs, sqrt (arity 1); min, max, indicator (arity 2).
// indicator(a,b) evaluates to 1 on the open interval (a,b), 0 elsewhere.
//
// Evaluation is IEEE-style extended arithmetic over doubles; NaN is the
// "undefined" marker (0/0, log of a nonpositive argument, sqrt of a
// negative number). Division by exact zero with a nonzero numerator
// yields a signed infinity, which is a legitimate value, not an error.

#include <cctype>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffun {

enum class NodeKind {
  Number,
  Var,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Exp,
  Log,
  Abs,
  Sqrt,
  Min,
  Max,
  Indicator,
};

struct Expr {
  NodeKind kind = NodeKind::Number;
  double value = 0.0;  // only for Number
  std::vector<Expr> args;

  bool operator==(const Expr& o) const {
    if (kind != o.kind || args.size() != o.args.size()) return false;
    if (kind == NodeKind::Number &&
        !(value == o.value || (std::isnan(value) && std::isnan(o.value))))
      return false;
    for (std::size_t i = 0; i < args.size(); ++i)
      if (!(args[i] == o.args[i])) return false;
    return true;
  }
};

struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"),
        offset(off) {}
};

inline double eval_expr(const Expr& e, double x) {
  switch (e.kind) {
    case NodeKind::Number:
      return e.value;
    case NodeKind::Var:
      return x;
    case NodeKind::Neg:
      return -eval_expr(e.args[0], x);
    case NodeKind::Add:
      return eval_expr(e.args[0], x) + eval_expr(e.args[1], x);
    case NodeKind::Sub:
      return eval_expr(e.args[0], x) - eval_expr(e.args[1], x);
    case NodeKind::Mul:
      return eval_expr(e.args[0], x) * eval_expr(e.args[1], x);
    case NodeKind::Div: {
      const double a = eval_expr(e.args[0], x);
      const double b = eval_expr(e.args[1], x);
      if (b == 0.0) {
        if (a == 0.0 || std::isnan(a)) return std::nan("");
        // denominator treated as 0+: sign comes from the numerator
        return a > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
      }
      return a / b;
    }
    case NodeKind::Pow: {
      const double a = eval_expr(e.args[0], x);
      const double b = eval_expr(e.args[1], x);
      return std::pow(a, b);  // pow(neg, non-integer) is already NaN
    }
    case NodeKind::Exp:
      return std::exp(eval_expr(e.args[0], x));
    case NodeKind::Log: {
      const double a = eval_expr(e.args[0], x);
      return a > 0 ? std::log(a) : std::nan("");
    }
    case NodeKind::Abs:
      return std::fabs(eval_expr(e.args[0], x));
    case NodeKind::Sqrt: {
      const double a = eval_expr(e.args[0], x);
      return a >= 0 ? std::sqrt(a) : std::nan("");
    }
    case NodeKind::Min: {
      const double a = eval_expr(e.args[0], x);
      const double b = eval_expr(e.args[1], x);
      if (std::isnan(a) || std::isnan(b)) return std::nan("");
      return std::min(a, b);
    }
    case NodeKind::Max: {
      const double a = eval_expr(e.args[0], x);
      const double b = eval_expr(e.args[1], x);
      if (std::isnan(a) || std::isnan(b)) return std::nan("");
      return std::max(a, b);
    }
    case NodeKind::Indicator: {
      const double a = eval_expr(e.args[0], x);
      const double b = eval_expr(e.args[1], x);
      if (std::isnan(a) || std::isnan(b)) return std::nan("");
      return (a < x && x < b) ? 1.0 : 0.0;
    }
  }
  return std::nan("");
}

namespace detail {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;

  explicit Parser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  Expr parse() {
    skip_ws();
    if (pos >= text.size()) throw ParseError("empty expression", 0);
    Expr e = parse_expr();
    skip_ws();
    if (pos < text.size()) throw ParseError("unexpected trailing input", pos);
    return e;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (eat('+')) {
        Expr rhs = parse_term();
        lhs = Expr{NodeKind::Add, 0.0, {std::move(lhs), std::move(rhs)}};
      } else if (eat('-')) {
        Expr rhs = parse_term();
        lhs = Expr{NodeKind::Sub, 0.0, {std::move(lhs), std::move(rhs)}};
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      if (eat('*')) {
        Expr rhs = parse_unary();
        lhs = Expr{NodeKind::Mul, 0.0, {std::move(lhs), std::move(rhs)}};
      } else if (eat('/')) {
        Expr rhs = parse_unary();
        lhs = Expr{NodeKind::Div, 0.0, {std::move(lhs), std::move(rhs)}};
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (eat('-')) {
      Expr inner = parse_unary();
      return Expr{NodeKind::Neg, 0.0, {std::move(inner)}};
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (eat('^')) {
      Expr exponent = parse_unary();  // right-assoc, allows x^-2
      return Expr{NodeKind::Pow, 0.0, {std::move(base), std::move(exponent)}};
    }
    return base;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos >= text.size()) throw ParseError("unexpected end of expression", pos);
    const char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    if (c == '(') {
      ++pos;
      Expr e = parse_expr();
      if (!eat(')')) throw ParseError("missing ')'", pos);
      return e;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos);
  }

  Expr parse_number() {
    const std::size_t start = pos;
    std::size_t consumed = 0;
    double v;
    try {
      v = std::stod(text.substr(start), &consumed);
    } catch (const std::exception&) {
      throw ParseError("malformed number", start);
    }
    // stod accepts a leading sign and hex floats; the tokenizer never hands
    // it a sign, and hex floats start with 0x which stops at 'x' anyway --
    // but 'x' is our variable, so re-scan to keep "2x" an error.
    pos = start;
    while (pos < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
            text[pos] == 'e' || text[pos] == 'E' ||
            ((text[pos] == '+' || text[pos] == '-') && pos > start &&
             (text[pos - 1] == 'e' || text[pos - 1] == 'E'))))
      ++pos;
    if (pos - start != consumed) throw ParseError("malformed number", start);
    return Expr{NodeKind::Number, v, {}};
  }

  Expr parse_ident() {
    const std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    const std::string name = text.substr(start, pos - start);
    if (name == "x") return Expr{NodeKind::Var, 0.0, {}};

    NodeKind kind;
    std::size_t arity;
    if (name == "exp") {
      kind = NodeKind::Exp; arity = 1;
    } else if (name == "log") {
      kind = NodeKind::Log; arity = 1;
    } else if (name == "abs") {
      kind = NodeKind::Abs; arity = 1;
    } else if (name == "sqrt") {
      kind = NodeKind::Sqrt; arity = 1;
    } else if (name == "min") {
      kind = NodeKind::Min; arity = 2;
    } else if (name == "max") {
      kind = NodeKind::Max; arity = 2;
    } else if (name == "indicator") {
      kind = NodeKind::Indicator; arity = 2;
    } else {
      throw ParseError("unknown identifier '" + name + "'", start);
    }

    if (!eat('(')) throw ParseError("expected '(' after '" + name + "'", pos);
    std::vector<Expr> args;
    args.push_back(parse_expr());
    while (eat(',')) args.push_back(parse_expr());
    if (!eat(')')) throw ParseError("missing ')' in call to '" + name + "'", pos);
    if (args.size() != arity)
      throw ParseError("'" + name + "' takes " + std::to_string(arity) +
                           " argument(s), got " + std::to_string(args.size()),
                       start);
    return Expr{kind, 0.0, std::move(args)};
  }
};

inline int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::Add:
    case NodeKind::Sub:
      return 1;
    case NodeKind::Mul:
    case NodeKind::Div:
      return 2;
    case NodeKind::Neg:
      return 3;
    case NodeKind::Pow:
      return 4;
    default:
      return 5;  // atoms and calls never need parens
  }
}

inline void print_rec(const Expr& e, std::string& out, int parent_prec, bool rhs) {
  const int prec = precedence(e.kind);
  const bool need =
      prec < parent_prec || (prec == parent_prec && rhs && prec != 4 && prec != 3);
  if (need) out += '(';
  switch (e.kind) {
    case NodeKind::Number: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", e.value);
      out += buf;
      break;
    }
    case NodeKind::Var:
      out += 'x';
      break;
    case NodeKind::Neg:
      out += '-';
      print_rec(e.args[0], out, prec, true);
      break;
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
    case NodeKind::Div:
    case NodeKind::Pow: {
      const char* op = e.kind == NodeKind::Add   ? "+"
                       : e.kind == NodeKind::Sub ? "-"
                       : e.kind == NodeKind::Mul ? "*"
                       : e.kind == NodeKind::Div ? "/"
                                                 : "^";
      // '^' is right-associative; everything else associates left
      const bool pow = e.kind == NodeKind::Pow;
      print_rec(e.args[0], out, pow ? prec + 1 : prec, false);
      out += op;
      print_rec(e.args[1], out, pow ? prec : prec + 1, true);
      break;
    }
    default: {
      const char* name = e.kind == NodeKind::Exp    ? "exp"
                         : e.kind == NodeKind::Log  ? "log"
                         : e.kind == NodeKind::Abs  ? "abs"
                         : e.kind == NodeKind::Sqrt ? "sqrt"
                         : e.kind == NodeKind::Min  ? "min"
                         : e.kind == NodeKind::Max  ? "max"
                                                    : "indicator";
      out += name;
      out += '(';
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ',';
        print_rec(e.args[i], out, 0, false);
      }
      out += ')';
      break;
    }
  }
  if (need) out += ')';
}

}  // namespace detail

inline Expr parse_expr(const std::string& text) {
  detail::Parser p(text);
  return p.parse();
}

inline std::string print_expr(const Expr& e) {
  std::string out;
  detail::print_rec(e, out, 0, false);
  return out;
}

/// Convenience: expression as a plain evaluator.
inline auto as_evaluator(const Expr& e) {
  return [e](double x) { return eval_expr(e, x); };
}

}  // namespace diffun
