#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dgm/error.hpp"
#include "dgm/smath.hpp"

namespace dgm::ad {

enum class Op : uint8_t {
  Input,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Logistic,
  Softplus,
  Relu,
  Abs,
  AddC,   // x + aux
  MulC,   // x * aux
  RSubC,  // aux - x
  MinC,   // min(x, aux); gradient passes only strictly below aux
  MaxC,   // max(x, aux); gradient passes only strictly above aux
};

class Tape;

// Handle to one scalar node on a tape. Values from different tapes must never
// be mixed in one expression; one tape serves one logical computation.
class Value {
 public:
  Value() = default;
  Value(Tape* t, int32_t i) : tape_(t), id_(i) {}

  double value() const;
  Tape* tape() const { return tape_; }
  int32_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int32_t id_ = -1;
};

class Tape {
 public:
  struct Node {
    double aux;
    double val;
    int32_t a;
    int32_t b;
    Op op;
  };

  Value input(double v) { return push(Op::Input, -1, -1, 0.0, v); }

  Value push(Op op, int32_t a, int32_t b, double aux, double val) {
    nodes_.push_back(Node{aux, val, a, b, op});
    return Value(this, static_cast<int32_t>(nodes_.size()) - 1);
  }

  double value(int32_t id) const { return nodes_[static_cast<std::size_t>(id)].val; }
  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    grad_.clear();
  }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  // Reverse sweep from the given scalar output. Visits every node exactly
  // once, newest to oldest; gradients of all nodes are available afterwards.
  void backward(Value output);

  double grad(Value v) const {
    if (v.tape() != this) throw Error("Tape::grad: value from another tape");
    return grad_[static_cast<std::size_t>(v.id())];
  }
  std::span<const double> grads() const { return grad_; }

  const Node& node(int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  std::vector<Node> nodes_;
  std::vector<double> grad_;
};

inline double Value::value() const { return tape_->value(id_); }

inline Tape* common_tape(Value a, Value b) {
  if (a.tape() != b.tape()) throw Error("autodiff: values from different tapes");
  return a.tape();
}

inline Value operator+(Value a, Value b) {
  return common_tape(a, b)->push(Op::Add, a.id(), b.id(), 0.0, a.value() + b.value());
}
inline Value operator-(Value a, Value b) {
  return common_tape(a, b)->push(Op::Sub, a.id(), b.id(), 0.0, a.value() - b.value());
}
inline Value operator*(Value a, Value b) {
  return common_tape(a, b)->push(Op::Mul, a.id(), b.id(), 0.0, a.value() * b.value());
}
inline Value operator/(Value a, Value b) {
  return common_tape(a, b)->push(Op::Div, a.id(), b.id(), 0.0, a.value() / b.value());
}
inline Value operator-(Value a) { return a.tape()->push(Op::Neg, a.id(), -1, 0.0, -a.value()); }

inline Value operator+(Value a, double c) {
  return a.tape()->push(Op::AddC, a.id(), -1, c, a.value() + c);
}
inline Value operator+(double c, Value a) { return a + c; }
inline Value operator-(Value a, double c) { return a + (-c); }
inline Value operator-(double c, Value a) {
  return a.tape()->push(Op::RSubC, a.id(), -1, c, c - a.value());
}
inline Value operator*(Value a, double c) {
  return a.tape()->push(Op::MulC, a.id(), -1, c, a.value() * c);
}
inline Value operator*(double c, Value a) { return a * c; }
inline Value operator/(Value a, double c) { return a * (1.0 / c); }

inline Value exp(Value a) { return a.tape()->push(Op::Exp, a.id(), -1, 0.0, std::exp(a.value())); }
inline Value log(Value a) { return a.tape()->push(Op::Log, a.id(), -1, 0.0, std::log(a.value())); }
inline Value logistic(Value a) {
  return a.tape()->push(Op::Logistic, a.id(), -1, 0.0, dgm::sm::logistic(a.value()));
}
inline Value softplus(Value a) {
  return a.tape()->push(Op::Softplus, a.id(), -1, 0.0, dgm::sm::softplus(a.value()));
}
inline Value relu(Value a) {
  return a.tape()->push(Op::Relu, a.id(), -1, 0.0, a.value() > 0.0 ? a.value() : 0.0);
}
inline Value abs(Value a) {
  return a.tape()->push(Op::Abs, a.id(), -1, 0.0, std::fabs(a.value()));
}
inline Value vmin(Value a, double c) {
  return a.tape()->push(Op::MinC, a.id(), -1, c, a.value() < c ? a.value() : c);
}
inline Value vmax(Value a, double c) {
  return a.tape()->push(Op::MaxC, a.id(), -1, c, a.value() > c ? a.value() : c);
}
inline Value clamp(Value a, double lo, double hi) { return vmin(vmax(a, lo), hi); }

// Central finite differences of f at x with step h; relative-error reference
// for checking tape gradients.
std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double h = 1e-5);

// |a - b| / max(|a|, |b|, 1e-8)
inline double rel_err(double a, double b) {
  double scale = std::max(std::max(std::fabs(a), std::fabs(b)), 1e-8);
  return std::fabs(a - b) / scale;
}

}  // namespace dgm::ad

// Shim overloads so scalar-generic kernels run on tape values.
namespace dgm::sm {

inline double value(ad::Value v) { return v.value(); }
inline bool finite(ad::Value v) { return std::isfinite(v.value()); }
inline ad::Value exp(ad::Value v) { return ad::exp(v); }
inline ad::Value log(ad::Value v) { return ad::log(v); }
inline ad::Value abs(ad::Value v) { return ad::abs(v); }
inline ad::Value relu(ad::Value v) { return ad::relu(v); }
inline ad::Value logistic(ad::Value v) { return ad::logistic(v); }
inline ad::Value softplus(ad::Value v) { return ad::softplus(v); }
inline ad::Value clamp(ad::Value v, double lo, double hi) { return ad::clamp(v, lo, hi); }
inline ad::Value zero_like(ad::Value v) { return v.tape()->input(0.0); }

}  // namespace dgm::sm
