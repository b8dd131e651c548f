// Closed-form scalar fields over (x, y): parsing, evaluation, symbolic
// differentiation and a compiled stack-machine tape for hot loops.
//
// Grammar (infix, precedence high to low): ^  unary-  * /  + -
// Atoms: numbers, pi, x, y, f(expr[, expr]) with
// f in {sin, cos, tan, exp, log, sqrt, tanh, atan2}.
// No implicit multiplication: "2x" is a syntax error.
#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thermoray::expr {

struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " (at offset " + std::to_string(off) + ")"),
        offset(off) {}
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Var : std::uint8_t { X = 0, Y = 1 };

enum class Fn : std::uint8_t { Sin, Cos, Tan, Exp, Log, Sqrt, Tanh, Atan2 };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

// Immutable expression handle. Copies share structure; evaluation is
// reentrant, so Expr values can be used concurrently without locking.
class Expr {
 public:
  Expr();  // constant 0
  static Expr constant(double c);
  static Expr variable(Var v);

  // Builders fold constants and strip trivial identities (x+0, 1*x, x^1, ...)
  // so that derivative trees stay small.
  friend Expr operator+(const Expr&, const Expr&);
  friend Expr operator-(const Expr&, const Expr&);
  friend Expr operator*(const Expr&, const Expr&);
  friend Expr operator/(const Expr&, const Expr&);
  friend Expr operator-(const Expr&);
  friend Expr pow(const Expr&, const Expr&);
  friend Expr call(Fn f, const Expr& a);
  friend Expr call2(Fn f, const Expr& a, const Expr& b);

  // Exact double-precision tree semantics; throws DomainError on log/sqrt of
  // negatives, division by zero and 0^negative.
  double eval(double x, double y) const;

  bool is_constant(double* value = nullptr) const;
  bool is_zero() const;
  const Node& node() const { return *node_; }
  std::size_t size() const;  // node count, for diagnostics

 private:
  explicit Expr(NodePtr n) : node_(std::move(n)) {}
  NodePtr node_;
  friend Expr make(NodePtr);
};

Expr parse(std::string_view src);          // throws ParseError
Expr differentiate(const Expr& e, Var v);  // symbolic derivative
std::string to_string(const Expr& e);      // reparseable, round-trip stable

inline Expr constant(double c) { return Expr::constant(c); }
inline Expr var_x() { return Expr::variable(Var::X); }
inline Expr var_y() { return Expr::variable(Var::Y); }

// Flat postfix program for fast repeated evaluation. Does not throw:
// domain violations propagate as NaN/Inf, callers in integrators detect
// non-finite state and abort the step.
class Tape {
 public:
  Tape();  // constant-0 tape
  explicit Tape(const Expr& e);
  double operator()(double x, double y) const noexcept;

 private:
  struct Ins {
    std::uint8_t op;
    double imm;
  };
  std::vector<Ins> prog_;
  int stack_need_ = 0;
};

}  // namespace thermoray::expr
