#include "rdsync/expression.hpp"

#include "rdsync/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace rdsync {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  std::vector<Expression::Instr> run() {
    parse_sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return std::move(out_);
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("", "expression '" + std::string(text_) + "': " + what + " at column " +
                              std::to_string(pos_ + 1));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, int index = 0, double value = 0.0) { out_.push_back({op, index, value}); }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        emit(Op::Add);
      } else if (accept('-')) {
        parse_product();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::Neg);
    } else if (accept('+')) {
      parse_unary();
    } else {
      parse_power();
    }
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();
      emit(Op::Pow);
    }
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string rest(text_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(rest.c_str(), &end);
      if (end == rest.c_str()) fail("bad number");
      pos_ += static_cast<std::size_t>(end - rest.c_str());
      emit(Op::Const, 0, v);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string_view id = text_.substr(start, pos_ - start);
      if (id == "pi") return emit(Op::Const, 0, std::numbers::pi);
      if (id == "e") return emit(Op::Const, 0, std::numbers::e);
      if (id.size() > 1 && id[0] == 'x' && std::isdigit(static_cast<unsigned char>(id[1]))) {
        const int k = std::atoi(std::string(id.substr(1)).c_str());
        if (k < 1 || k > dim_) fail("variable " + std::string(id) + " outside x1..x" + std::to_string(dim_));
        return emit(Op::Var, k - 1);
      }
      Op fn;
      if (id == "exp") fn = Op::Exp;
      else if (id == "log") fn = Op::Log;
      else if (id == "sqrt") fn = Op::Sqrt;
      else if (id == "sin") fn = Op::Sin;
      else if (id == "cos") fn = Op::Cos;
      else if (id == "tanh") fn = Op::Tanh;
      else fail("unknown identifier '" + std::string(id) + "'");
      if (!accept('(')) fail("expected '(' after function name");
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return emit(fn);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
  std::vector<Expression::Instr> out_;
};

Expression Expression::parse(std::string_view text, int dim) {
  Expression e;
  e.source_ = std::string(text);
  e.dim_ = dim;
  e.program_ = ExpressionParser(text, dim).run();
  int depth = 0;
  for (const auto& ins : e.program_) {
    switch (ins.op) {
      case Op::Const:
      case Op::Var: ++depth; break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Pow: --depth; break;
      default: break;
    }
    e.max_stack_ = std::max(e.max_stack_, depth);
  }
  return e;
}

double Expression::operator()(const Vec& x) const {
  // Expressions are short; a small on-stack buffer avoids allocation in the hot path.
  constexpr int kInline = 64;
  double inline_stack[kInline]{};
  std::vector<double> heap;
  double* st = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(static_cast<std::size_t>(max_stack_));
    st = heap.data();
  }
  int sp = 0;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case Op::Const: st[sp++] = ins.value; break;
      case Op::Var: st[sp++] = x[ins.index]; break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: {
        --sp;
        const double ex = st[sp];
        const double r = std::nearbyint(ex);
        // Integer powers stay exact for negative bases.
        if (r == ex && std::abs(ex) <= 16) {
          double acc = 1.0;
          const double b = st[sp - 1];
          for (int i = 0; i < static_cast<int>(std::abs(ex)); ++i) acc *= b;
          st[sp - 1] = ex < 0 ? 1.0 / acc : acc;
        } else {
          st[sp - 1] = std::pow(st[sp - 1], ex);
        }
        break;
      }
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Op::Log: st[sp - 1] = std::log(st[sp - 1]); break;
      case Op::Sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
      case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Op::Tanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
    }
  }
  return st[0];
}

}  // namespace rdsync
