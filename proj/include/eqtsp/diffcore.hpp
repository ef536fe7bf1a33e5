#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eqtsp::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable dense array. Gradients from every tape that reads it
/// accumulate into `grad` until zero_grad() is called.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

 private:
  friend class Tape;
  Var(const Tape* tape, int index) : tape_(tape), index_(index) {}
  const Tape* tape_ = nullptr;
  int index_ = -1;
};

/// Records primitive operations in execution order (which is a topological
/// order) and replays them backwards. Every forward value is checked for
/// NaN/infinity and an InvalidState is thrown at the first non-finite entry.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Reads the parameter in place; the parameter must outlive the tape.
  Var param(Parameter& p);
  /// Reads a matrix in place as a non-differentiable leaf.
  Var view(const Matrix& m);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x cols row to every row of `a`.
  Var add_row(Var a, Var row);
  Var scale(Var a, double s);
  /// lambda * a + (1 - lambda) * b with a 1 x 1 `lambda`.
  Var mix(Var lambda, Var a, Var b);
  Var tanh(Var a);
  Var relu(Var a);
  /// Row i becomes the mean of all other rows. Needs at least two rows.
  Var row_mean_excluding_self(Var a);
  /// Softmax over entries whose mask is nonzero; masked entries get exactly
  /// zero probability and exactly zero gradient. Input is a vector (n x 1 or 1 x n).
  Var masked_softmax(Var logits, std::span<const char> mask);
  /// log of one entry of a vector, as a 1 x 1 value.
  Var log_pick(Var probs, int index);
  Var sum(Var a);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  /// Gradient of the last backward() with respect to a recorded value.
  const Matrix& grad(Var v) const;

  /// Reverse-mode sweep from a scalar. Parameter gradients accumulate
  /// (seed * d loss / d param); node gradients are reset on every call.
  /// Throws InvalidState when `loss` was not recorded on this tape.
  void backward(Var loss, double seed = 1.0);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Constant, Param, View, MatMul, Add, AddRow, Scale, Mix, Tanh, Relu, RowMeanExcl, MaskedSoftmax, LogPick, Sum
  };

  struct Node {
    Op op = Op::Constant;
    int a = -1, b = -1, c = -1;
    double scalar = 0.0;
    int index = 0;
    bool needs_grad = false;
    Matrix value;
    Parameter* param = nullptr;
    const Matrix* ext = nullptr;
    std::vector<char> mask;
    Matrix grad;
  };

  int check(Var v) const;
  const Matrix& val(int i) const;
  Var push(Node node, const char* what);

  std::vector<Node> nodes_;
};

}  // namespace eqtsp::ad
