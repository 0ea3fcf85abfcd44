#pragma once

#include "rdsync/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace rdsync {

// Arithmetic expression over the coordinates x1..xd, compiled to a postfix
// program. Grammar: + - * / ^ (right-assoc), unary minus, parentheses,
// numeric literals, the constants pi and e, and the functions
// exp, log, sqrt, sin, cos, tanh.
class Expression {
 public:
  // Throws ConfigError (empty key path) with the offending column on a syntax error,
  // or when a variable index exceeds dim.
  static Expression parse(std::string_view text, int dim);

  double operator()(const Vec& x) const;

  const std::string& source() const { return source_; }
  int dim() const { return dim_; }

 private:
  enum class Op : unsigned char { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt, Sin, Cos, Tanh };
  struct Instr {
    Op op;
    int index = 0;
    double value = 0.0;
  };
  friend class ExpressionParser;

  std::string source_;
  int dim_ = 0;
  std::vector<Instr> program_;
  int max_stack_ = 0;
};

}  // namespace rdsync
