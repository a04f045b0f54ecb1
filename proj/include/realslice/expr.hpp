#pragma once

// Expression trees over a single complex variable z with real constants.
//
// Grammar (see docs/grammar.md):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          exponent must not depend on z
//   primary := number | 'z' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>

#include "realslice/types.hpp"

namespace realslice {

enum class Op : std::uint8_t {
  constant,
  variable,
  pi,
  euler,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  sin,
  cos,
  tan,
  sec,
  csc,
  cot,
  sinh,
  cosh,
  tanh,
  sech,
  csch,
  coth,
  exp,
  ln,
  sqrt,
};

namespace detail {

struct FunctionName {
  std::string_view name;
  Op op;
};

inline constexpr std::array<FunctionName, 15> kFunctions{{
    {"sin", Op::sin},   {"cos", Op::cos},   {"tan", Op::tan},   {"sec", Op::sec},
    {"csc", Op::csc},   {"cot", Op::cot},   {"sinh", Op::sinh}, {"cosh", Op::cosh},
    {"tanh", Op::tanh}, {"sech", Op::sech}, {"csch", Op::csch}, {"coth", Op::coth},
    {"exp", Op::exp},   {"ln", Op::ln},     {"sqrt", Op::sqrt},
}};

inline std::optional<Op> function_op(std::string_view name) noexcept {
  for (const auto& f : kFunctions)
    if (f.name == name) return f.op;
  return std::nullopt;
}

inline std::string_view function_name(Op op) noexcept {
  for (const auto& f : kFunctions)
    if (f.op == op) return f.name;
  return {};
}

// Shortest decimal that round-trips; independent of the global locale.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf.data(), end);
}

}  // namespace detail

inline bool is_function(Op op) noexcept { return op >= Op::sin; }
inline bool is_binary(Op op) noexcept { return op >= Op::add && op <= Op::div; }

/// Immutable expression node handle. Copies share structure.
class Expr {
 public:
  struct Node {
    Op op;
    double value;  // literal for constant, exponent for pow
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  static Expr constant(double v) { return Expr(Op::constant, v, nullptr, nullptr); }
  static Expr variable() { return Expr(Op::variable, 0.0, nullptr, nullptr); }
  static Expr pi() { return Expr(Op::pi, 0.0, nullptr, nullptr); }
  static Expr euler() { return Expr(Op::euler, 0.0, nullptr, nullptr); }

  /// Negating a literal folds into the literal, so "(-2)" is a single constant.
  static Expr negate(const Expr& a) {
    if (a.op() == Op::constant) return constant(-a.value());
    return Expr(Op::neg, 0.0, a.node_, nullptr);
  }
  static Expr binary(Op op, const Expr& a, const Expr& b) {
    if (!is_binary(op)) throw std::invalid_argument("Expr::binary: not a binary operator");
    return Expr(op, 0.0, a.node_, b.node_);
  }
  static Expr power(const Expr& base, double exponent) {
    return Expr(Op::pow, exponent, base.node_, nullptr);
  }
  static Expr function(Op op, const Expr& arg) {
    if (!is_function(op)) throw std::invalid_argument("Expr::function: not a function");
    return Expr(op, 0.0, arg.node_, nullptr);
  }

  [[nodiscard]] Op op() const noexcept { return node_->op; }
  [[nodiscard]] double value() const noexcept { return node_->value; }
  [[nodiscard]] Expr lhs() const { return Expr(node_->lhs); }
  [[nodiscard]] Expr rhs() const { return Expr(node_->rhs); }
  [[nodiscard]] const Node& node() const noexcept { return *node_; }

  [[nodiscard]] bool is_constant(double v) const noexcept {
    return op() == Op::constant && value() == v;
  }

  /// True when z does not occur anywhere in the tree.
  [[nodiscard]] bool is_z_free() const noexcept { return z_free(*node_); }

  friend bool operator==(const Expr& a, const Expr& b) noexcept { return equal(*a.node_, *b.node_); }

 private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  Expr(Op op, double v, std::shared_ptr<const Node> l, std::shared_ptr<const Node> r)
      : node_(std::make_shared<const Node>(Node{op, v, std::move(l), std::move(r)})) {}

  static bool equal(const Node& a, const Node& b) noexcept {
    if (&a == &b) return true;
    if (a.op != b.op) return false;
    if ((a.op == Op::constant || a.op == Op::pow) && a.value != b.value) return false;
    if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
    if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
    if (a.lhs && !equal(*a.lhs, *b.lhs)) return false;
    if (a.rhs && !equal(*a.rhs, *b.rhs)) return false;
    return true;
  }

  static bool z_free(const Node& n) noexcept {
    if (n.op == Op::variable) return false;
    if (n.lhs && !z_free(*n.lhs)) return false;
    if (n.rhs && !z_free(*n.rhs)) return false;
    return true;
  }

  std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Printing

/// Canonical, fully parenthesized text. parse(to_string(e)) == e.
inline std::string to_string(const Expr& e) {
  switch (e.op()) {
    case Op::constant: {
      const double v = e.value();
      if (std::signbit(v)) return "(-" + detail::format_double(-v) + ")";
      return detail::format_double(v);
    }
    case Op::variable: return "z";
    case Op::pi: return "pi";
    case Op::euler: return "e";
    case Op::neg: return "(-" + to_string(e.lhs()) + ")";
    case Op::add: return "(" + to_string(e.lhs()) + " + " + to_string(e.rhs()) + ")";
    case Op::sub: return "(" + to_string(e.lhs()) + " - " + to_string(e.rhs()) + ")";
    case Op::mul: return "(" + to_string(e.lhs()) + " * " + to_string(e.rhs()) + ")";
    case Op::div: return "(" + to_string(e.lhs()) + " / " + to_string(e.rhs()) + ")";
    case Op::pow:
      return "(" + to_string(e.lhs()) + " ^ " + to_string(Expr::constant(e.value())) + ")";
    default:
      return std::string(detail::function_name(e.op())) + "(" + to_string(e.lhs()) + ")";
  }
}

// ---------------------------------------------------------------------------
// Parsing

enum class ParseErrorKind { syntax, unknown_identifier, imaginary_literal, non_constant_exponent };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string& what)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        kind_(kind),
        offset_(offset) {}

  [[nodiscard]] ParseErrorKind kind() const noexcept { return kind_; }
  /// 0-based byte offset into the input.
  [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

 private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

namespace detail {

enum class Tok { end, number, ident, plus, minus, star, slash, caret, lparen, rparen };

struct Token {
  Tok kind = Tok::end;
  std::size_t offset = 0;
  std::string_view text;
  double number = 0.0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  [[nodiscard]] const Token& peek() const noexcept { return tok_; }

  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  static bool ident_start(char c) noexcept {
    return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
  }
  static bool ident_char(char c) noexcept {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  }
  static bool digit(char c) noexcept { return c >= '0' && c <= '9'; }

  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])) != 0) ++pos_;
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) return;

    const char c = src_[pos_];
    auto single = [&](Tok k) {
      tok_.kind = k;
      tok_.text = src_.substr(pos_, 1);
      ++pos_;
    };
    switch (c) {
      case '+': return single(Tok::plus);
      case '-': return single(Tok::minus);
      case '*': return single(Tok::star);
      case '/': return single(Tok::slash);
      case '^': return single(Tok::caret);
      case '(': return single(Tok::lparen);
      case ')': return single(Tok::rparen);
      default: break;
    }

    if (digit(c) || (c == '.' && pos_ + 1 < src_.size() && digit(src_[pos_ + 1]))) {
      lex_number();
      return;
    }
    if (ident_start(c)) {
      std::size_t end = pos_;
      while (end < src_.size() && ident_char(src_[end])) ++end;
      tok_.kind = Tok::ident;
      tok_.text = src_.substr(pos_, end - pos_);
      pos_ = end;
      return;
    }
    throw ParseError(ParseErrorKind::syntax, pos_,
                     std::string("unexpected character '") + c + "'");
  }

  void lex_number() {
    const std::size_t start = pos_;
    std::size_t end = pos_;
    while (end < src_.size() && digit(src_[end])) ++end;
    if (end < src_.size() && src_[end] == '.') {
      ++end;
      while (end < src_.size() && digit(src_[end])) ++end;
    }
    // Exponent only when followed by digits, so "2e" stays number + identifier.
    if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
      std::size_t k = end + 1;
      if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
      if (k < src_.size() && digit(src_[k])) {
        while (k < src_.size() && digit(src_[k])) ++k;
        end = k;
      }
    }
    if (end < src_.size() && (src_[end] == 'i' || src_[end] == 'j') &&
        (end + 1 >= src_.size() || !ident_char(src_[end + 1]))) {
      throw ParseError(ParseErrorKind::imaginary_literal, start,
                       "imaginary literals are not supported");
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + end, v);
    if (ec != std::errc{} || ptr != src_.data() + end || !std::isfinite(v))
      throw ParseError(ParseErrorKind::syntax, start, "malformed number");
    tok_.kind = Tok::number;
    tok_.text = src_.substr(start, end - start);
    tok_.number = v;
    pos_ = end;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_;
};

inline Complex eval_const_subtree(const Expr& e);

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) {}

  Expr parse_all() {
    if (lex_.peek().kind == Tok::end) throw ParseError(ParseErrorKind::syntax, 0, "empty expression");
    Expr e = expr();
    if (lex_.peek().kind != Tok::end) unexpected(lex_.peek());
    return e;
  }

 private:
  [[noreturn]] static void unexpected(const Token& t) {
    if (t.kind == Tok::end) throw ParseError(ParseErrorKind::syntax, t.offset, "unexpected end of input");
    throw ParseError(ParseErrorKind::syntax, t.offset,
                     "unexpected token '" + std::string(t.text) + "'");
  }

  void expect(Tok k, const char* what) {
    if (lex_.peek().kind != k) {
      const Token& t = lex_.peek();
      throw ParseError(ParseErrorKind::syntax, t.offset, std::string("expected ") + what);
    }
    lex_.take();
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      const Tok k = lex_.peek().kind;
      if (k != Tok::plus && k != Tok::minus) return lhs;
      lex_.take();
      Expr rhs = term();
      lhs = Expr::binary(k == Tok::plus ? Op::add : Op::sub, lhs, rhs);
    }
  }

  Expr term() {
    Expr lhs = unary();
    for (;;) {
      const Tok k = lex_.peek().kind;
      if (k != Tok::star && k != Tok::slash) return lhs;
      lex_.take();
      Expr rhs = unary();
      lhs = Expr::binary(k == Tok::star ? Op::mul : Op::div, lhs, rhs);
    }
  }

  Expr unary() {
    const Tok k = lex_.peek().kind;
    if (k == Tok::minus) {
      lex_.take();
      return Expr::negate(unary());
    }
    if (k == Tok::plus) {
      lex_.take();
      return unary();
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (lex_.peek().kind != Tok::caret) return base;
    lex_.take();
    const std::size_t at = lex_.peek().offset;
    Expr exponent = unary();  // right-associative: z^2^3 = z^(2^3)
    if (!exponent.is_z_free())
      throw ParseError(ParseErrorKind::non_constant_exponent, at, "exponent must not depend on z");
    const Complex c = eval_const_subtree(exponent);
    if (!std::isfinite(c.real()) || c.imag() != 0.0)
      throw ParseError(ParseErrorKind::non_constant_exponent, at, "exponent must be a finite real constant");
    return Expr::power(base, c.real());
  }

  Expr primary() {
    const Token t = lex_.take();
    switch (t.kind) {
      case Tok::number: return Expr::constant(t.number);
      case Tok::lparen: {
        Expr inner = expr();
        expect(Tok::rparen, "')'");
        return inner;
      }
      case Tok::ident: return identifier(t);
      default: unexpected(t);
    }
  }

  Expr identifier(const Token& t) {
    if (t.text == "z") return Expr::variable();
    if (t.text == "pi") return Expr::pi();
    if (t.text == "e") return Expr::euler();
    if (t.text == "i" || t.text == "j")
      throw ParseError(ParseErrorKind::imaginary_literal, t.offset, "the imaginary unit is not part of the grammar");
    if (auto op = function_op(t.text)) {
      expect(Tok::lparen, "'(' after function name");
      Expr arg = expr();
      expect(Tok::rparen, "')'");
      return Expr::function(*op, arg);
    }
    throw ParseError(ParseErrorKind::unknown_identifier, t.offset,
                     "unknown identifier '" + std::string(t.text) + "'");
  }

  Lexer lex_;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse_all(); }

// ---------------------------------------------------------------------------
// Evaluation

/// Values with magnitude above this are reported as overflow.
inline constexpr double kMagnitudeCap = 1e12;

enum class EvalStatus { ok, domain_error, pole, overflow };

inline std::string_view to_string(EvalStatus s) noexcept {
  switch (s) {
    case EvalStatus::ok: return "ok";
    case EvalStatus::domain_error: return "domain error";
    case EvalStatus::pole: return "pole";
    case EvalStatus::overflow: return "overflow";
  }
  return "unknown";
}

struct EvalResult {
  Complex value{};
  EvalStatus status = EvalStatus::ok;

  [[nodiscard]] bool ok() const noexcept { return status == EvalStatus::ok; }
  explicit operator bool() const noexcept { return ok(); }
};

namespace detail {

inline EvalResult checked(Complex v) noexcept {
  if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || std::abs(v) > kMagnitudeCap)
    return {v, EvalStatus::overflow};
  return {v, EvalStatus::ok};
}

inline EvalResult reciprocal(Complex d) noexcept {
  if (d == Complex{}) return {Complex{}, EvalStatus::pole};
  return checked(Complex(1.0, 0.0) / d);
}

inline EvalResult quotient(Complex n, Complex d) noexcept {
  if (d == Complex{}) return {Complex{}, EvalStatus::pole};
  return checked(n / d);
}

inline bool is_integer_exponent(double c) noexcept {
  return std::trunc(c) == c && std::abs(c) < 2147483648.0;
}

inline EvalResult int_power(Complex base, double c) noexcept {
  auto n = static_cast<long long>(std::abs(c));
  Complex result(1.0, 0.0);
  Complex b = base;
  while (n > 0) {
    if ((n & 1) != 0) result *= b;
    n >>= 1;
    if (n > 0) b *= b;
  }
  if (c < 0) return reciprocal(result);
  return checked(result);
}

inline EvalResult real_power(Complex base, double c) noexcept {
  if (is_integer_exponent(c)) return int_power(base, c);
  if (base == Complex{}) {
    if (c > 0) return {Complex{}, EvalStatus::ok};
    return {Complex{}, EvalStatus::pole};
  }
  // Positive reals stay on the real pow path so they never pick up a branch-cut phase.
  if (base.imag() == 0.0 && base.real() > 0.0) return checked(Complex(std::pow(base.real(), c), 0.0));
  return checked(std::exp(c * std::log(base)));
}

inline EvalResult eval_node(const Expr::Node& n, Complex z) noexcept;

inline EvalResult apply_function(Op op, Complex u) noexcept {
  switch (op) {
    case Op::sin: return checked(std::sin(u));
    case Op::cos: return checked(std::cos(u));
    case Op::tan: return quotient(std::sin(u), std::cos(u));
    case Op::sec: return reciprocal(std::cos(u));
    case Op::csc: return reciprocal(std::sin(u));
    case Op::cot: return quotient(std::cos(u), std::sin(u));
    case Op::sinh: return checked(std::sinh(u));
    case Op::cosh: return checked(std::cosh(u));
    case Op::tanh: return quotient(std::sinh(u), std::cosh(u));
    case Op::sech: return reciprocal(std::cosh(u));
    case Op::csch: return reciprocal(std::sinh(u));
    case Op::coth: return quotient(std::cosh(u), std::sinh(u));
    case Op::exp: return checked(std::exp(u));
    case Op::ln:
      if (u == Complex{}) return {Complex{}, EvalStatus::domain_error};
      return checked(std::log(u));
    case Op::sqrt: return checked(std::sqrt(u));
    default: return {Complex{}, EvalStatus::domain_error};
  }
}

inline EvalResult eval_node(const Expr::Node& n, Complex z) noexcept {
  switch (n.op) {
    case Op::constant: return {Complex(n.value, 0.0), EvalStatus::ok};
    case Op::variable: return {z, EvalStatus::ok};
    case Op::pi: return {Complex(3.141592653589793238462643383279502884, 0.0), EvalStatus::ok};
    case Op::euler: return {Complex(2.718281828459045235360287471352662498, 0.0), EvalStatus::ok};
    default: break;
  }

  const EvalResult a = eval_node(*n.lhs, z);
  if (!a) return a;

  if (is_binary(n.op)) {
    const EvalResult b = eval_node(*n.rhs, z);
    if (!b) return b;
    switch (n.op) {
      case Op::add: return checked(a.value + b.value);
      case Op::sub: return checked(a.value - b.value);
      case Op::mul: return checked(a.value * b.value);
      case Op::div: return quotient(a.value, b.value);
      default: break;
    }
  }
  if (n.op == Op::neg) return {-a.value, EvalStatus::ok};
  if (n.op == Op::pow) return real_power(a.value, n.value);
  return apply_function(n.op, a.value);
}

inline Complex eval_const_subtree(const Expr& e) {
  const EvalResult r = eval_node(e.node(), Complex{});
  if (!r) return Complex(std::nan(""), 0.0);
  return r.value;
}

}  // namespace detail

/// Evaluates e at z. Poles, domain errors and magnitudes above kMagnitudeCap are
/// reported through the status rather than saturated.
inline EvalResult eval(const Expr& e, Complex z) noexcept { return detail::eval_node(e.node(), z); }

// ---------------------------------------------------------------------------
// Differentiation

namespace detail {

// Builders with constant folding, used only by the differentiator so that the
// parser keeps the exact structure of its input.
inline Expr add(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (a.op() == Op::constant && b.op() == Op::constant) return Expr::constant(a.value() + b.value());
  return Expr::binary(Op::add, a, b);
}

inline Expr sub(const Expr& a, const Expr& b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return Expr::negate(b);
  if (a.op() == Op::constant && b.op() == Op::constant) return Expr::constant(a.value() - b.value());
  return Expr::binary(Op::sub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return Expr::negate(b);
  if (b.is_constant(-1.0)) return Expr::negate(a);
  if (a.op() == Op::constant && b.op() == Op::constant) return Expr::constant(a.value() * b.value());
  return Expr::binary(Op::mul, a, b);
}

inline Expr div(const Expr& a, const Expr& b) {
  if (a.is_constant(0.0)) return Expr::constant(0.0);
  if (b.is_constant(1.0)) return a;
  return Expr::binary(Op::div, a, b);
}

inline Expr pow(const Expr& u, double c) {
  if (c == 0.0) return Expr::constant(1.0);
  if (c == 1.0) return u;
  return Expr::power(u, c);
}

inline Expr fn(Op op, const Expr& u) { return Expr::function(op, u); }

// d/du of f(u), to be multiplied by u'.
inline Expr outer_derivative(Op op, const Expr& u) {
  switch (op) {
    case Op::sin: return fn(Op::cos, u);
    case Op::cos: return Expr::negate(fn(Op::sin, u));
    case Op::tan: return pow(fn(Op::sec, u), 2.0);
    case Op::sec: return mul(fn(Op::sec, u), fn(Op::tan, u));
    case Op::csc: return Expr::negate(mul(fn(Op::csc, u), fn(Op::cot, u)));
    case Op::cot: return Expr::negate(pow(fn(Op::csc, u), 2.0));
    case Op::sinh: return fn(Op::cosh, u);
    case Op::cosh: return fn(Op::sinh, u);
    case Op::tanh: return pow(fn(Op::sech, u), 2.0);
    case Op::sech: return Expr::negate(mul(fn(Op::sech, u), fn(Op::tanh, u)));
    case Op::csch: return Expr::negate(mul(fn(Op::csch, u), fn(Op::coth, u)));
    case Op::coth: return Expr::negate(pow(fn(Op::csch, u), 2.0));
    case Op::exp: return fn(Op::exp, u);
    case Op::ln: return div(Expr::constant(1.0), u);
    case Op::sqrt: return div(Expr::constant(0.5), fn(Op::sqrt, u));
    default: throw std::logic_error("outer_derivative: not a function");
  }
}

}  // namespace detail

/// Exact symbolic d/dz. Only trivial constant folding is applied.
inline Expr differentiate(const Expr& e) {
  using namespace detail;
  switch (e.op()) {
    case Op::constant:
    case Op::pi:
    case Op::euler: return Expr::constant(0.0);
    case Op::variable: return Expr::constant(1.0);
    case Op::neg: return Expr::negate(differentiate(e.lhs()));
    case Op::add: return add(differentiate(e.lhs()), differentiate(e.rhs()));
    case Op::sub: return sub(differentiate(e.lhs()), differentiate(e.rhs()));
    case Op::mul: {
      const Expr a = e.lhs(), b = e.rhs();
      return add(mul(differentiate(a), b), mul(a, differentiate(b)));
    }
    case Op::div: {
      const Expr a = e.lhs(), b = e.rhs();
      const Expr da = differentiate(a), db = differentiate(b);
      if (db.is_constant(0.0)) return div(da, b);
      return div(sub(mul(da, b), mul(a, db)), pow(b, 2.0));
    }
    case Op::pow: {
      const Expr u = e.lhs();
      const double c = e.value();
      return mul(mul(Expr::constant(c), pow(u, c - 1.0)), differentiate(u));
    }
    default: {
      const Expr u = e.lhs();
      return mul(outer_derivative(e.op(), u), differentiate(u));
    }
  }
}

}  // namespace realslice
