#include "thermoray/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>

namespace thermoray::expr {

struct Node {
  enum class K : std::uint8_t { Const, Variable, Add, Sub, Mul, Div, Pow, Neg, Call } k;
  double value = 0.0;
  Var var = Var::X;
  Fn fn = Fn::Sin;
  NodePtr a, b;
};

using K = Node::K;

Expr make(NodePtr n) { return Expr(std::move(n)); }

static NodePtr leaf_const(double c) {
  auto n = std::make_shared<Node>();
  n->k = K::Const;
  n->value = c;
  return n;
}

Expr::Expr() : node_(leaf_const(0.0)) {}

Expr Expr::constant(double c) { return make(leaf_const(c)); }

Expr Expr::variable(Var v) {
  auto n = std::make_shared<Node>();
  n->k = K::Variable;
  n->var = v;
  return make(n);
}

bool Expr::is_constant(double* value) const {
  if (node_->k != K::Const) return false;
  if (value) *value = node_->value;
  return true;
}

bool Expr::is_zero() const {
  double c;
  return is_constant(&c) && c == 0.0;
}

std::size_t Expr::size() const {
  std::size_t n = 0;
  // iterative to avoid deep recursion on long sums
  std::vector<const Node*> st{node_.get()};
  while (!st.empty()) {
    const Node* p = st.back();
    st.pop_back();
    ++n;
    if (p->a) st.push_back(p->a.get());
    if (p->b) st.push_back(p->b.get());
  }
  return n;
}

static NodePtr binary(K k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->k = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

Expr operator+(const Expr& a, const Expr& b) {
  double ca, cb;
  if (a.is_constant(&ca) && b.is_constant(&cb)) return Expr::constant(ca + cb);
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return make(binary(K::Add, a.node_, b.node_));
}

Expr operator-(const Expr& a, const Expr& b) {
  double ca, cb;
  if (a.is_constant(&ca) && b.is_constant(&cb)) return Expr::constant(ca - cb);
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  return make(binary(K::Sub, a.node_, b.node_));
}

Expr operator*(const Expr& a, const Expr& b) {
  double ca, cb;
  if (a.is_constant(&ca) && b.is_constant(&cb)) return Expr::constant(ca * cb);
  if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
  if (a.is_constant(&ca) && ca == 1.0) return b;
  if (b.is_constant(&cb) && cb == 1.0) return a;
  if (a.is_constant(&ca) && ca == -1.0) return -b;
  if (b.is_constant(&cb) && cb == -1.0) return -a;
  return make(binary(K::Mul, a.node_, b.node_));
}

Expr operator/(const Expr& a, const Expr& b) {
  double ca, cb;
  if (b.is_constant(&cb) && cb != 0.0) {
    if (a.is_constant(&ca)) return Expr::constant(ca / cb);
    if (cb == 1.0) return a;
  }
  if (a.is_zero() && !b.is_zero()) return Expr::constant(0.0);
  return make(binary(K::Div, a.node_, b.node_));
}

Expr operator-(const Expr& a) {
  double ca;
  if (a.is_constant(&ca)) return Expr::constant(-ca);
  if (a.node_->k == K::Neg) return make(a.node_->a);
  auto n = std::make_shared<Node>();
  n->k = K::Neg;
  n->a = a.node_;
  return make(n);
}

Expr pow(const Expr& a, const Expr& b) {
  double ca, cb;
  if (b.is_constant(&cb)) {
    if (cb == 1.0) return a;
    if (cb == 0.0) return Expr::constant(1.0);
    if (a.is_constant(&ca)) return Expr::constant(std::pow(ca, cb));
  }
  return make(binary(K::Pow, a.node_, b.node_));
}

Expr call(Fn f, const Expr& a) {
  double ca;
  if (a.is_constant(&ca)) {
    switch (f) {
      case Fn::Sin: return Expr::constant(std::sin(ca));
      case Fn::Cos: return Expr::constant(std::cos(ca));
      case Fn::Tan: return Expr::constant(std::tan(ca));
      case Fn::Exp: return Expr::constant(std::exp(ca));
      case Fn::Tanh: return Expr::constant(std::tanh(ca));
      default: break;  // log/sqrt keep the node so domain errors surface at eval
    }
  }
  auto n = std::make_shared<Node>();
  n->k = K::Call;
  n->fn = f;
  n->a = a.node_;
  return make(n);
}

Expr call2(Fn f, const Expr& a, const Expr& b) {
  auto n = std::make_shared<Node>();
  n->k = K::Call;
  n->fn = f;
  n->a = a.node_;
  n->b = b.node_;
  return make(n);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

static double eval_node(const Node& n, double x, double y) {
  switch (n.k) {
    case K::Const: return n.value;
    case K::Variable: return n.var == Var::X ? x : y;
    case K::Add: return eval_node(*n.a, x, y) + eval_node(*n.b, x, y);
    case K::Sub: return eval_node(*n.a, x, y) - eval_node(*n.b, x, y);
    case K::Mul: return eval_node(*n.a, x, y) * eval_node(*n.b, x, y);
    case K::Div: {
      double num = eval_node(*n.a, x, y), den = eval_node(*n.b, x, y);
      if (den == 0.0) throw DomainError("division by zero");
      return num / den;
    }
    case K::Pow: {
      double base = eval_node(*n.a, x, y), ex = eval_node(*n.b, x, y);
      if (base == 0.0 && ex < 0.0) throw DomainError("zero raised to negative power");
      double r = std::pow(base, ex);
      if (std::isnan(r)) throw DomainError("pow out of domain");
      return r;
    }
    case K::Neg: return -eval_node(*n.a, x, y);
    case K::Call: {
      double a = eval_node(*n.a, x, y);
      switch (n.fn) {
        case Fn::Sin: return std::sin(a);
        case Fn::Cos: return std::cos(a);
        case Fn::Tan: return std::tan(a);
        case Fn::Exp: return std::exp(a);
        case Fn::Log:
          if (a <= 0.0) throw DomainError("log of non-positive value");
          return std::log(a);
        case Fn::Sqrt:
          if (a < 0.0) throw DomainError("sqrt of negative value");
          return std::sqrt(a);
        case Fn::Tanh: return std::tanh(a);
        case Fn::Atan2: return std::atan2(a, eval_node(*n.b, x, y));
      }
      throw DomainError("unknown function");
    }
  }
  throw DomainError("corrupt expression node");
}

double Expr::eval(double x, double y) const { return eval_node(*node_, x, y); }

// ---------------------------------------------------------------------------
// Parser: recursive descent matching the documented precedence.
// ---------------------------------------------------------------------------

namespace {

struct Parser {
  std::string_view src;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= src.size();
  }
  char peek() {
    skip_ws();
    return pos < src.size() ? src[pos] : '\0';
  }
  bool accept(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      throw ParseError(std::string("expected '") + c + "'", pos);
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      char c = peek();
      if (c == '+') {
        ++pos;
        lhs = lhs + parse_term();
      } else if (c == '-') {
        ++pos;
        lhs = lhs - parse_term();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      char c = peek();
      if (c == '*') {
        ++pos;
        lhs = lhs * parse_unary();
      } else if (c == '/') {
        ++pos;
        lhs = lhs / parse_unary();
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (accept('^')) {
      // right associative; exponent may carry its own unary minus (x^-2)
      return pow(base, parse_unary());
    }
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos >= src.size()) throw ParseError("unexpected end of input", pos);
    char c = src[pos];
    if (c == '(') {
      ++pos;
      Expr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos);
  }

  Expr parse_number() {
    const char* begin = src.data() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("malformed number", pos);
    pos += static_cast<std::size_t>(end - begin);
    return Expr::constant(v);
  }

  Expr parse_ident() {
    std::size_t start = pos;
    while (pos < src.size() &&
           (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
      ++pos;
    std::string_view name = src.substr(start, pos - start);
    if (name == "x") return var_x();
    if (name == "y") return var_y();
    if (name == "pi") return Expr::constant(M_PI);

    static const std::map<std::string_view, Fn> fns = {
        {"sin", Fn::Sin},   {"cos", Fn::Cos},   {"tan", Fn::Tan},
        {"exp", Fn::Exp},   {"log", Fn::Log},   {"sqrt", Fn::Sqrt},
        {"tanh", Fn::Tanh}, {"atan2", Fn::Atan2}};
    auto it = fns.find(name);
    if (it == fns.end())
      throw ParseError("unknown identifier '" + std::string(name) + "'", start);
    expect('(');
    Expr a = parse_expr();
    if (it->second == Fn::Atan2) {
      expect(',');
      Expr b = parse_expr();
      expect(')');
      return call2(Fn::Atan2, a, b);
    }
    expect(')');
    return call(it->second, a);
  }
};

}  // namespace

Expr parse(std::string_view src) {
  Parser p{src};
  if (p.eof()) throw ParseError("empty expression", 0);
  Expr e = p.parse_expr();
  if (!p.eof()) throw ParseError("trailing input", p.pos);
  return e;
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

Expr differentiate(const Expr& e, Var v) {
  const Node& n = e.node();
  auto sub = [&](const NodePtr& p) { return make(p); };
  switch (n.k) {
    case K::Const: return Expr::constant(0.0);
    case K::Variable: return Expr::constant(n.var == v ? 1.0 : 0.0);
    case K::Add: return differentiate(sub(n.a), v) + differentiate(sub(n.b), v);
    case K::Sub: return differentiate(sub(n.a), v) - differentiate(sub(n.b), v);
    case K::Mul: {
      Expr a = sub(n.a), b = sub(n.b);
      return differentiate(a, v) * b + a * differentiate(b, v);
    }
    case K::Div: {
      Expr a = sub(n.a), b = sub(n.b);
      return (differentiate(a, v) * b - a * differentiate(b, v)) / (b * b);
    }
    case K::Pow: {
      Expr u = sub(n.a), w = sub(n.b);
      double c;
      if (w.is_constant(&c))
        return Expr::constant(c) * pow(u, Expr::constant(c - 1.0)) * differentiate(u, v);
      if (u.is_constant(&c))
        return pow(u, w) * call(Fn::Log, u) * differentiate(w, v);
      return pow(u, w) *
             (differentiate(w, v) * call(Fn::Log, u) + w * differentiate(u, v) / u);
    }
    case K::Neg: return -differentiate(sub(n.a), v);
    case K::Call: {
      Expr a = sub(n.a);
      Expr da = differentiate(a, v);
      switch (n.fn) {
        case Fn::Sin: return call(Fn::Cos, a) * da;
        case Fn::Cos: return -(call(Fn::Sin, a) * da);
        case Fn::Tan: {
          Expr c = call(Fn::Cos, a);
          return da / (c * c);
        }
        case Fn::Exp: return call(Fn::Exp, a) * da;
        case Fn::Log: return da / a;
        case Fn::Sqrt: return da / (Expr::constant(2.0) * call(Fn::Sqrt, a));
        case Fn::Tanh: {
          Expr t = call(Fn::Tanh, a);
          return (Expr::constant(1.0) - t * t) * da;
        }
        case Fn::Atan2: {
          // d atan2(u, w) = (w du - u dw) / (u^2 + w^2)
          Expr w = sub(n.b);
          Expr dw = differentiate(w, v);
          return (w * da - a * dw) / (a * a + w * w);
        }
      }
      break;
    }
  }
  throw DomainError("cannot differentiate expression");
}

// ---------------------------------------------------------------------------
// Printing: minimal parentheses, reparseable, stable under round trips.
// ---------------------------------------------------------------------------

namespace {

int precedence(const Node& n) {
  switch (n.k) {
    case K::Add:
    case K::Sub: return 1;
    case K::Mul:
    case K::Div: return 2;
    case K::Neg: return 3;
    case K::Pow: return 4;
    default: return 5;  // atoms
  }
}

void print_node(const Node& n, std::string& out);

void print_child(const Node& child, int parent_prec, bool force_paren, std::string& out) {
  bool paren = force_paren || precedence(child) < parent_prec;
  if (paren) out += '(';
  print_node(child, out);
  if (paren) out += ')';
}

void print_node(const Node& n, std::string& out) {
  char buf[40];
  switch (n.k) {
    case K::Const:
      if (n.value < 0) {
        std::snprintf(buf, sizeof buf, "(%.17g)", n.value);
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
      }
      out += buf;
      return;
    case K::Variable: out += (n.var == Var::X ? 'x' : 'y'); return;
    case K::Add:
      print_child(*n.a, 1, false, out);
      out += " + ";
      print_child(*n.b, 2, false, out);
      return;
    case K::Sub:
      print_child(*n.a, 1, false, out);
      out += " - ";
      print_child(*n.b, 2, false, out);
      return;
    case K::Mul:
      print_child(*n.a, 2, false, out);
      out += "*";
      print_child(*n.b, 3, false, out);
      return;
    case K::Div:
      print_child(*n.a, 2, false, out);
      out += "/";
      print_child(*n.b, 3, false, out);
      return;
    case K::Neg:
      out += '-';
      print_child(*n.a, 3, false, out);
      return;
    case K::Pow:
      print_child(*n.a, 5, false, out);
      out += '^';
      // exponent binds unary minus itself, parenthesise anything weaker
      print_child(*n.b, 4, n.b->k == K::Pow, out);
      return;
    case K::Call: {
      static const char* names[] = {"sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "atan2"};
      out += names[static_cast<int>(n.fn)];
      out += '(';
      print_node(*n.a, out);
      if (n.fn == Fn::Atan2) {
        out += ", ";
        print_node(*n.b, out);
      }
      out += ')';
      return;
    }
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print_node(e.node(), out);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled tape
// ---------------------------------------------------------------------------

namespace {
enum TapeOp : std::uint8_t {
  T_CONST, T_X, T_Y, T_ADD, T_SUB, T_MUL, T_DIV, T_POW, T_NEG,
  T_SIN, T_COS, T_TAN, T_EXP, T_LOG, T_SQRT, T_TANH, T_ATAN2,
};
}

Tape::Tape() : Tape(Expr::constant(0.0)) {}

Tape::Tape(const Expr& e) {
  // postfix emission; tracks worst-case stack depth
  struct Item {
    const Node* n;
    bool emit;
  };
  std::vector<Item> st{{&e.node(), false}};
  std::vector<const Node*> order;
  while (!st.empty()) {
    auto [n, emit] = st.back();
    st.pop_back();
    if (emit) {
      order.push_back(n);
      continue;
    }
    st.push_back({n, true});
    if (n->b) st.push_back({n->b.get(), false});
    if (n->a) st.push_back({n->a.get(), false});
  }
  int depth = 0, maxd = 0;
  for (const Node* n : order) {
    Ins ins{};
    switch (n->k) {
      case K::Const: ins.op = T_CONST; ins.imm = n->value; ++depth; break;
      case K::Variable: ins.op = (n->var == Var::X ? T_X : T_Y); ++depth; break;
      case K::Add: ins.op = T_ADD; --depth; break;
      case K::Sub: ins.op = T_SUB; --depth; break;
      case K::Mul: ins.op = T_MUL; --depth; break;
      case K::Div: ins.op = T_DIV; --depth; break;
      case K::Pow: ins.op = T_POW; --depth; break;
      case K::Neg: ins.op = T_NEG; break;
      case K::Call:
        switch (n->fn) {
          case Fn::Sin: ins.op = T_SIN; break;
          case Fn::Cos: ins.op = T_COS; break;
          case Fn::Tan: ins.op = T_TAN; break;
          case Fn::Exp: ins.op = T_EXP; break;
          case Fn::Log: ins.op = T_LOG; break;
          case Fn::Sqrt: ins.op = T_SQRT; break;
          case Fn::Tanh: ins.op = T_TANH; break;
          case Fn::Atan2: ins.op = T_ATAN2; --depth; break;
        }
        break;
    }
    maxd = std::max(maxd, depth);
    prog_.push_back(ins);
  }
  stack_need_ = maxd + 1;
}

double Tape::operator()(double x, double y) const noexcept {
  double fixed[64];
  double* stack = fixed;
  thread_local std::vector<double> big;
  if (stack_need_ > 64) {
    if (static_cast<int>(big.size()) < stack_need_) big.resize(stack_need_);
    stack = big.data();
  }
  double* sp = stack;
  for (const Ins& ins : prog_) {
    switch (ins.op) {
      case T_CONST: *sp++ = ins.imm; break;
      case T_X: *sp++ = x; break;
      case T_Y: *sp++ = y; break;
      case T_ADD: sp[-2] += sp[-1]; --sp; break;
      case T_SUB: sp[-2] -= sp[-1]; --sp; break;
      case T_MUL: sp[-2] *= sp[-1]; --sp; break;
      case T_DIV: sp[-2] /= sp[-1]; --sp; break;
      case T_POW: sp[-2] = std::pow(sp[-2], sp[-1]); --sp; break;
      case T_NEG: sp[-1] = -sp[-1]; break;
      case T_SIN: sp[-1] = std::sin(sp[-1]); break;
      case T_COS: sp[-1] = std::cos(sp[-1]); break;
      case T_TAN: sp[-1] = std::tan(sp[-1]); break;
      case T_EXP: sp[-1] = std::exp(sp[-1]); break;
      case T_LOG: sp[-1] = std::log(sp[-1]); break;
      case T_SQRT: sp[-1] = std::sqrt(sp[-1]); break;
      case T_TANH: sp[-1] = std::tanh(sp[-1]); break;
      case T_ATAN2: sp[-2] = std::atan2(sp[-2], sp[-1]); --sp; break;
    }
  }
  return sp[-1];
}

}  // namespace thermoray::expr
