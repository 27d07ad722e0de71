#include "dgm/autodiff.hpp"

namespace dgm::ad {

void Tape::backward(Value output) {
  if (output.tape() != this) throw Error("Tape::backward: output from another tape");
  if (output.id() < 0 || static_cast<std::size_t>(output.id()) >= nodes_.size())
    throw Error("Tape::backward: invalid output node");
  grad_.assign(nodes_.size(), 0.0);
  grad_[static_cast<std::size_t>(output.id())] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const double g = grad_[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Add:
        grad_[n.a] += g;
        grad_[n.b] += g;
        break;
      case Op::Sub:
        grad_[n.a] += g;
        grad_[n.b] -= g;
        break;
      case Op::Mul:
        grad_[n.a] += g * nodes_[n.b].val;
        grad_[n.b] += g * nodes_[n.a].val;
        break;
      case Op::Div: {
        const double bv = nodes_[n.b].val;
        grad_[n.a] += g / bv;
        grad_[n.b] -= g * n.val / bv;
        break;
      }
      case Op::Neg:
        grad_[n.a] -= g;
        break;
      case Op::Exp:
        grad_[n.a] += g * n.val;
        break;
      case Op::Log:
        grad_[n.a] += g / nodes_[n.a].val;
        break;
      case Op::Logistic:
        grad_[n.a] += g * n.val * (1.0 - n.val);
        break;
      case Op::Softplus:
        grad_[n.a] += g * sm::logistic(nodes_[n.a].val);
        break;
      case Op::Relu:
        // Subgradient 0 at the kink.
        if (nodes_[n.a].val > 0.0) grad_[n.a] += g;
        break;
      case Op::Abs: {
        const double av = nodes_[n.a].val;
        if (av > 0.0)
          grad_[n.a] += g;
        else if (av < 0.0)
          grad_[n.a] -= g;
        break;
      }
      case Op::AddC:
        grad_[n.a] += g;
        break;
      case Op::MulC:
        grad_[n.a] += g * n.aux;
        break;
      case Op::RSubC:
        grad_[n.a] -= g;
        break;
      case Op::MinC:
        if (nodes_[n.a].val < n.aux) grad_[n.a] += g;
        break;
      case Op::MaxC:
        if (nodes_[n.a].val > n.aux) grad_[n.a] += g;
        break;
    }
  }
}

std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double dn = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(dn))
      throw NumericError("finite_difference: non-finite evaluation");
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

}  // namespace dgm::ad
