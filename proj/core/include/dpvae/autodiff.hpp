#pragma once

// Define-by-run reverse-mode differentiation over dense matrices.
//
// Every node holds a matrix value; a scalar is a 1x1 matrix. Row-major batch
// convention throughout: a batch of B vectors of width n is a B x n matrix.
// Binary elementwise ops broadcast any dimension of extent 1.

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "dpvae/params.hpp"

namespace dpvae {

enum class OpKind {
  constant,
  param,
  add,
  sub,
  mul,
  div,
  neg,
  scale,
  shift,
  exp,
  log,
  tanh,
  leaky_relu,
  square,
  abs,
  sum,
  row_sum,
  col_sum,
  matmul,
  matmul_nt,
  transpose,
  slice_cols,
  gather_rows,
  permute_columns,
  logsumexp_rows,
  pairwise_sq_dist,
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its Tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Value of a 1x1 node.
  double scalar() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Propagates the node's adjoint into its parents' adjoints.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// Leaf bound to a stored parameter. Repeated calls return the same node.
  Var param(const ParamStore& store, ParamId id);

  /// Appends a node. Parents must already be on this tape.
  Var record(OpKind kind, std::vector<std::size_t> parents, Matrix value, Backward backward);

  /// Clears all adjoints, seeds the 1x1 root with 1 and sweeps the tape in
  /// reverse recording order.
  void backward(Var root);

  /// d root / d v from the last backward pass (zeros if v does not reach root).
  Matrix adjoint(Var v) const;
  /// Adds the adjoints of every parameter leaf bound to `store` into its
  /// gradient accumulators.
  void accumulate_gradients(ParamStore& store) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.id()).kind; }
  const std::vector<std::size_t>& parents(Var v) const { return nodes_.at(v.id()).parents; }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Adjoint of a node during a backward sweep; empty when nothing flowed in.
  const Matrix& node_adjoint(std::size_t id) const { return nodes_[id].adjoint; }
  void add_adjoint(std::size_t id, const Matrix& g);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> parents;
    Matrix value;
    Matrix adjoint;
    Backward backward;
    const ParamStore* store = nullptr;
    ParamId param{};
  };

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::size_t> param_nodes_;
};

// Elementwise (broadcasting) arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Throws DomainError when any divisor entry is zero.
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double k);
Var shift(Var a, double k);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator+(Var a, double k) { return shift(a, k); }
inline Var operator+(double k, Var a) { return shift(a, k); }
inline Var operator-(Var a, double k) { return shift(a, -k); }

// Elementwise functions.
Var exp(Var a);
/// Throws DomainError when any entry is <= 0.
Var log(Var a);
Var tanh(Var a);
/// x for x > 0, slope * x otherwise (the subgradient at 0 is `slope`).
Var leaky_relu(Var a, double slope = 0.2);
inline Var relu(Var a) { return leaky_relu(a, 0.0); }
Var square(Var a);
Var abs(Var a);

// Reductions.
Var sum(Var a);
Var mean(Var a);
/// B x n -> B x 1.
Var row_sum(Var a);
/// B x n -> 1 x n.
Var col_sum(Var a);
/// B x n -> B x 1, numerically stable log(sum(exp(row))).
Var logsumexp_rows(Var a);

// Linear algebra and reshaping.
Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var slice_cols(Var a, Index start, Index count);
/// out.row(i) = a.row(rows[i]).
Var gather_rows(Var a, std::span<const Index> rows);
/// out(i, c) = a(perms[c][i], c); one row permutation per column.
Var permute_columns(Var a, const std::vector<std::vector<Index>>& perms);
/// out(i, j) = ||a.row(i) - b.row(j)||^2.
Var pairwise_sq_dist(Var a, Var b);

/// Central finite-difference check of d f / d params.
///
/// `f` must build a 1x1 root on the supplied tape, reading parameters through
/// Tape::param, and be deterministic. Returns
///   max_i |analytic_i - fd_i| / max(1, |fd_i|).
/// Parameter values are restored on return; gradient accumulators are
/// overwritten with the analytic gradient. Throws EvaluationError if f is
/// non-finite at any perturbed point.
double grad_check(const std::function<Var(Tape&)>& f, ParamStore& params, double step = 1e-6);

}  // namespace dpvae
