#include "eqtsp/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "eqtsp/errors.hpp"

namespace eqtsp::ad {

int Tape::check(Var v) const {
  if (v.tape_ != this || v.index_ < 0 || v.index_ >= static_cast<int>(nodes_.size())) {
    throw InvalidState("value was not recorded on this tape");
  }
  return v.index_;
}

const Matrix& Tape::val(int i) const {
  const Node& n = nodes_[static_cast<std::size_t>(i)];
  if (n.param) return n.param->value;
  return n.ext ? *n.ext : n.value;
}

const Matrix& Tape::value(Var v) const { return val(check(v)); }

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw std::invalid_argument("scalar(): value is not 1 x 1");
  return m(0, 0);
}

const Matrix& Tape::grad(Var v) const { return nodes_[static_cast<std::size_t>(check(v))].grad; }

Var Tape::push(Node node, const char* what) {
  // Leaves that read external storage are checked by their owners.
  if (!node.param && !node.ext && !node.value.allFinite()) throw InvalidState(std::string("non-finite value produced by ") + what);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

namespace {
void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::param(Parameter& p) {
  Node n;
  n.op = Op::Param;
  n.param = &p;
  n.needs_grad = p.requires_grad;
  return push(std::move(n), "param");
}

Var Tape::view(const Matrix& m) {
  Node n;
  n.op = Op::View;
  n.ext = &m;
  return push(std::move(n), "view");
}

Var Tape::matmul(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  require(val(ia).cols() == val(ib).rows(), "matmul: inner dimensions differ");
  Node n;
  n.op = Op::MatMul;
  n.a = ia;
  n.b = ib;
  n.value.noalias() = val(ia) * val(ib);
  n.needs_grad = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(n), "matmul");
}

Var Tape::add(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  require(val(ia).rows() == val(ib).rows() && val(ia).cols() == val(ib).cols(), "add: shapes differ");
  Node n;
  n.op = Op::Add;
  n.a = ia;
  n.b = ib;
  n.value = val(ia) + val(ib);
  n.needs_grad = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(n), "add");
}

Var Tape::add_row(Var a, Var row) {
  const int ia = check(a), ir = check(row);
  require(val(ir).rows() == 1 && val(ir).cols() == val(ia).cols(), "add_row: row must be 1 x cols");
  Node n;
  n.op = Op::AddRow;
  n.a = ia;
  n.b = ir;
  n.value = val(ia).rowwise() + val(ir).row(0);
  n.needs_grad = nodes_[ia].needs_grad || nodes_[ir].needs_grad;
  return push(std::move(n), "add_row");
}

Var Tape::scale(Var a, double s) {
  const int ia = check(a);
  Node n;
  n.op = Op::Scale;
  n.a = ia;
  n.scalar = s;
  n.value = s * val(ia);
  n.needs_grad = nodes_[ia].needs_grad;
  return push(std::move(n), "scale");
}

Var Tape::mix(Var lambda, Var a, Var b) {
  const int il = check(lambda), ia = check(a), ib = check(b);
  require(val(il).size() == 1, "mix: lambda must be 1 x 1");
  require(val(ia).rows() == val(ib).rows() && val(ia).cols() == val(ib).cols(), "mix: shapes differ");
  const double l = val(il)(0, 0);
  Node n;
  n.op = Op::Mix;
  n.a = ia;
  n.b = ib;
  n.c = il;
  n.value = l * val(ia) + (1.0 - l) * val(ib);
  n.needs_grad = nodes_[il].needs_grad || nodes_[ia].needs_grad || nodes_[ib].needs_grad;
  return push(std::move(n), "mix");
}

Var Tape::tanh(Var a) {
  const int ia = check(a);
  Node n;
  n.op = Op::Tanh;
  n.a = ia;
  n.value = val(ia).array().tanh().matrix();
  n.needs_grad = nodes_[ia].needs_grad;
  return push(std::move(n), "tanh");
}

Var Tape::relu(Var a) {
  const int ia = check(a);
  Node n;
  n.op = Op::Relu;
  n.a = ia;
  n.value = val(ia).cwiseMax(0.0);
  n.needs_grad = nodes_[ia].needs_grad;
  return push(std::move(n), "relu");
}

namespace {

// Column sums taken in sorted order, so the result does not depend on the
// order of the rows. This keeps row-permutation equivariance bit-exact.
Eigen::RowVectorXd order_free_column_sum(const Matrix& x) {
  Eigen::RowVectorXd out(x.cols());
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
    std::ranges::sort(col);
    double s = 0.0;
    for (double v : col) s += v;
    out(j) = s;
  }
  return out;
}

}  // namespace

Var Tape::row_mean_excluding_self(Var a) {
  const int ia = check(a);
  const Matrix& x = val(ia);
  if (x.rows() < 2) throw InvalidState("row_mean_excluding_self needs at least two rows");
  Node n;
  n.op = Op::RowMeanExcl;
  n.a = ia;
  const Eigen::RowVectorXd total = order_free_column_sum(x);
  n.value = ((-x).rowwise() + total) / static_cast<double>(x.rows() - 1);
  n.needs_grad = nodes_[ia].needs_grad;
  return push(std::move(n), "row_mean_excluding_self");
}

Var Tape::masked_softmax(Var logits, std::span<const char> mask) {
  const int il = check(logits);
  const Matrix& u = val(il);
  require(u.rows() == 1 || u.cols() == 1, "masked_softmax: logits must be a vector");
  require(static_cast<Eigen::Index>(mask.size()) == u.size(), "masked_softmax: mask size differs from logits");
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (mask[static_cast<std::size_t>(k)]) top = std::max(top, u.data()[k]);
  }
  if (top == -std::numeric_limits<double>::infinity()) throw InvalidState("masked_softmax: every entry is masked");
  Node n;
  n.op = Op::MaskedSoftmax;
  n.a = il;
  n.mask.assign(mask.begin(), mask.end());
  n.value = Matrix::Zero(u.rows(), u.cols());
  double z = 0.0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (mask[static_cast<std::size_t>(k)]) {
      n.value.data()[k] = std::exp(u.data()[k] - top);
      z += n.value.data()[k];
    }
  }
  n.value /= z;
  n.needs_grad = nodes_[il].needs_grad;
  return push(std::move(n), "masked_softmax");
}

Var Tape::log_pick(Var probs, int index) {
  const int ip = check(probs);
  const Matrix& p = val(ip);
  require(p.rows() == 1 || p.cols() == 1, "log_pick: input must be a vector");
  require(index >= 0 && index < p.size(), "log_pick: index out of range");
  Node n;
  n.op = Op::LogPick;
  n.a = ip;
  n.index = index;
  n.value = Matrix::Constant(1, 1, std::log(p.data()[index]));
  n.needs_grad = nodes_[ip].needs_grad;
  return push(std::move(n), "log_pick");
}

Var Tape::sum(Var a) {
  const int ia = check(a);
  Node n;
  n.op = Op::Sum;
  n.a = ia;
  n.value = Matrix::Constant(1, 1, val(ia).sum());
  n.needs_grad = nodes_[ia].needs_grad;
  return push(std::move(n), "sum");
}

void Tape::backward(Var loss, double seed) {
  const int root = check(loss);
  if (val(root).size() != 1) throw InvalidState("backward: loss must be a scalar");

  for (int i = 0; i <= root; ++i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad) n.grad.setZero(val(i).rows(), val(i).cols());
  }
  if (!nodes_[root].needs_grad) return;
  nodes_[root].grad(0, 0) = seed;

  auto g = [this](int i) -> Matrix& { return nodes_[static_cast<std::size_t>(i)].grad; };
  auto wants = [this](int i) { return nodes_[static_cast<std::size_t>(i)].needs_grad; };

  for (int i = root; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad) continue;
    const Matrix& dy = n.grad;
    switch (n.op) {
      case Op::Constant:
      case Op::View:
        break;
      case Op::Param:
        if (n.param->grad.rows() != dy.rows() || n.param->grad.cols() != dy.cols()) n.param->zero_grad();
        n.param->grad += dy;
        break;
      case Op::MatMul:
        if (wants(n.a)) g(n.a).noalias() += dy * val(n.b).transpose();
        if (wants(n.b)) g(n.b).noalias() += val(n.a).transpose() * dy;
        break;
      case Op::Add:
        if (wants(n.a)) g(n.a) += dy;
        if (wants(n.b)) g(n.b) += dy;
        break;
      case Op::AddRow:
        if (wants(n.a)) g(n.a) += dy;
        if (wants(n.b)) g(n.b) += dy.colwise().sum();
        break;
      case Op::Scale:
        g(n.a) += n.scalar * dy;
        break;
      case Op::Mix: {
        const double l = val(n.c)(0, 0);
        if (wants(n.a)) g(n.a) += l * dy;
        if (wants(n.b)) g(n.b) += (1.0 - l) * dy;
        if (wants(n.c)) g(n.c)(0, 0) += dy.cwiseProduct(val(n.a) - val(n.b)).sum();
        break;
      }
      case Op::Tanh:
        g(n.a) += dy.cwiseProduct((1.0 - n.value.array().square()).matrix());
        break;
      case Op::Relu:
        g(n.a) += (val(n.a).array() > 0.0).select(dy, 0.0).matrix();
        break;
      case Op::RowMeanExcl: {
        const Eigen::RowVectorXd total = order_free_column_sum(dy);
        g(n.a) += ((-dy).rowwise() + total) / static_cast<double>(dy.rows() - 1);
        break;
      }
      case Op::MaskedSoftmax: {
        const double dot = dy.cwiseProduct(n.value).sum();
        Matrix& da = g(n.a);
        for (Eigen::Index k = 0; k < dy.size(); ++k) {
          if (n.mask[static_cast<std::size_t>(k)]) da.data()[k] += n.value.data()[k] * (dy.data()[k] - dot);
        }
        break;
      }
      case Op::LogPick:
        g(n.a).data()[n.index] += dy(0, 0) / val(n.a).data()[n.index];
        break;
      case Op::Sum:
        g(n.a).array() += dy(0, 0);
        break;
    }
  }

  for (int i = 0; i <= root; ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad && !n.grad.allFinite()) throw InvalidState("non-finite gradient during backward");
  }
}

}  // namespace eqtsp::ad
