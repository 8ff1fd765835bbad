#include "dpvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dpvae/errors.hpp"

namespace dpvae {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar() on a " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + " node");
  }
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return record(OpKind::constant, {}, std::move(value), nullptr); }

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::param(const ParamStore& store, ParamId id) {
  const auto key = std::make_pair(&store, id.index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  Var v = record(OpKind::param, {}, store.value(id), nullptr);
  nodes_[v.id()].store = &store;
  nodes_[v.id()].param = id;
  param_nodes_.emplace(key, v.id());
  return v;
}

Var Tape::record(OpKind kind, std::vector<std::size_t> parents, Matrix value, Backward backward) {
  nodes_.push_back(Node{kind, std::move(parents), std::move(value), Matrix(), std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

void Tape::add_adjoint(std::size_t id, const Matrix& g) {
  Matrix& adj = nodes_[id].adjoint;
  if (adj.size() == 0) {
    adj = g;
  } else {
    adj += g;
  }
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ArgumentError("backward: root is not on this tape");
  const Matrix& rv = nodes_.at(root.id()).value;
  if (rv.rows() != 1 || rv.cols() != 1) throw ShapeError("backward: root must be 1x1");
  for (auto& n : nodes_) n.adjoint.resize(0, 0);
  nodes_[root.id()].adjoint = Matrix::Ones(1, 1);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.adjoint.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Matrix Tape::adjoint(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.adjoint.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.adjoint;
}

void Tape::accumulate_gradients(ParamStore& store) const {
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::param && n.store == &store && n.adjoint.size() != 0) store.grad(n.param) += n.adjoint;
  }
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) throw ArgumentError(std::string(op) + ": operands on different tapes");
  return *a.tape();
}

Index broadcast_dim(Index a, Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ShapeError(std::string(op) + ": incompatible extents " + std::to_string(a) + " and " + std::to_string(b));
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

/// Sums a broadcast adjoint back down to the operand's shape.
Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

template <class Forward, class GradA, class GradB>
Var binary(Var a, Var b, OpKind kind, const char* name, Forward fwd, GradA ga, GradB gb) {
  Tape& t = same_tape(a, b, name);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Index rows = broadcast_dim(av.rows(), bv.rows(), name);
  const Index cols = broadcast_dim(av.cols(), bv.cols(), name);
  Matrix out;
  if (av.rows() == rows && av.cols() == cols && bv.rows() == rows && bv.cols() == cols) {
    out = fwd(av, bv);
  } else {
    out = fwd(expand(av, rows, cols), expand(bv, rows, cols));
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(kind, {ia, ib}, std::move(out), [ia, ib, ga, gb](Tape& tp, std::size_t self) {
    const Matrix& g = tp.node_adjoint(self);
    const Matrix& x = tp.value(ia);
    const Matrix& y = tp.value(ib);
    if (x.rows() == g.rows() && x.cols() == g.cols() && y.rows() == g.rows() && y.cols() == g.cols()) {
      tp.add_adjoint(ia, ga(g, x, y));
      tp.add_adjoint(ib, gb(g, x, y));
      return;
    }
    const Matrix ex = expand(x, g.rows(), g.cols());
    const Matrix ey = expand(y, g.rows(), g.cols());
    tp.add_adjoint(ia, reduce_to(ga(g, ex, ey), x.rows(), x.cols()));
    tp.add_adjoint(ib, reduce_to(gb(g, ex, ey), y.rows(), y.cols()));
  });
}

/// Elementwise map whose derivative is expressed through input and output.
template <class Forward, class Deriv>
Var unary(Var a, OpKind kind, Forward fwd, Deriv deriv) {
  Tape& t = *a.tape();
  Matrix out = fwd(a.value());
  const std::size_t ia = a.id();
  return t.record(kind, {ia}, std::move(out), [ia, deriv](Tape& tp, std::size_t self) {
    const Matrix& g = tp.node_adjoint(self);
    tp.add_adjoint(ia, (g.array() * deriv(tp.value(ia), tp.value(self)).array()).matrix());
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, OpKind::add, "add", [](const Matrix& x, const Matrix& y) -> Matrix { return x + y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, OpKind::sub, "sub", [](const Matrix& x, const Matrix& y) -> Matrix { return x - y; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return g; },
      [](const Matrix& g, const Matrix&, const Matrix&) -> Matrix { return -g; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, OpKind::mul, "mul", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseProduct(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseProduct(y); },
      [](const Matrix& g, const Matrix& x, const Matrix&) -> Matrix { return g.cwiseProduct(x); });
}

Var div(Var a, Var b) {
  const Matrix& bv = b.value();
  for (Index i = 0; i < bv.size(); ++i) {
    if (bv.data()[i] == 0.0) throw DomainError("div", bv.data()[i]);
  }
  return binary(
      a, b, OpKind::div, "div", [](const Matrix& x, const Matrix& y) -> Matrix { return x.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix&, const Matrix& y) -> Matrix { return g.cwiseQuotient(y); },
      [](const Matrix& g, const Matrix& x, const Matrix& y) -> Matrix {
        return -(g.array() * x.array() / y.array().square()).matrix();
      });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double k) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::scale, {ia}, a.value() * k,
                  [ia, k](Tape& tp, std::size_t self) { tp.add_adjoint(ia, tp.node_adjoint(self) * k); });
}

Var shift(Var a, double k) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::shift, {ia}, (a.value().array() + k).matrix(),
                  [ia](Tape& tp, std::size_t self) { tp.add_adjoint(ia, tp.node_adjoint(self)); });
}

Var exp(Var a) {
  return unary(
      a, OpKind::exp, [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix&, const Matrix& y) -> Matrix { return y; });
}

Var log(Var a) {
  const Matrix& v = a.value();
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v.data()[i] > 0.0)) throw DomainError("log", v.data()[i]);
  }
  return unary(
      a, OpKind::log, [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& x, const Matrix&) -> Matrix { return x.array().inverse().matrix(); });
}

Var tanh(Var a) {
  return unary(
      a, OpKind::tanh, [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix&, const Matrix& y) -> Matrix { return (1.0 - y.array().square()).matrix(); });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, OpKind::leaky_relu,
      [slope](const Matrix& x) -> Matrix { return (x.array() > 0.0).select(x, slope * x); },
      [slope](const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() > 0.0).select(Matrix::Ones(x.rows(), x.cols()), Matrix::Constant(x.rows(), x.cols(), slope));
      });
}

Var square(Var a) {
  return unary(
      a, OpKind::square, [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& x, const Matrix&) -> Matrix { return 2.0 * x; });
}

Var abs(Var a) {
  return unary(
      a, OpKind::abs, [](const Matrix& x) -> Matrix { return x.cwiseAbs(); },
      [](const Matrix& x, const Matrix&) -> Matrix { return x.array().sign().matrix(); });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::sum, {ia}, Matrix::Constant(1, 1, a.value().sum()), [ia](Tape& tp, std::size_t self) {
    const Matrix& x = tp.value(ia);
    tp.add_adjoint(ia, Matrix::Constant(x.rows(), x.cols(), tp.node_adjoint(self)(0, 0)));
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::row_sum, {ia}, a.value().rowwise().sum(), [ia](Tape& tp, std::size_t self) {
    tp.add_adjoint(ia, tp.node_adjoint(self).replicate(1, tp.value(ia).cols()));
  });
}

Var col_sum(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::col_sum, {ia}, a.value().colwise().sum(), [ia](Tape& tp, std::size_t self) {
    tp.add_adjoint(ia, tp.node_adjoint(self).replicate(tp.value(ia).rows(), 1));
  });
}

Var logsumexp_rows(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  const Eigen::VectorXd m = x.rowwise().maxCoeff();
  Matrix out(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) out(i, 0) = m(i) + std::log((x.row(i).array() - m(i)).exp().sum());
  const std::size_t ia = a.id();
  return t.record(OpKind::logsumexp_rows, {ia}, std::move(out), [ia](Tape& tp, std::size_t self) {
    const Matrix& xv = tp.value(ia);
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.node_adjoint(self);
    Matrix soft = (xv.colwise() - y.col(0)).array().exp().matrix();
    tp.add_adjoint(ia, (soft.array().colwise() * g.col(0).array()).matrix());
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " times " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(OpKind::matmul, {ia, ib}, a.value() * b.value(), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.node_adjoint(self);
    tp.add_adjoint(ia, g * tp.value(ib).transpose());
    tp.add_adjoint(ib, tp.value(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner extents " + std::to_string(a.cols()) + " and " + std::to_string(b.cols()));
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(OpKind::matmul_nt, {ia, ib}, a.value() * b.value().transpose(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.node_adjoint(self);
                    tp.add_adjoint(ia, g * tp.value(ib));
                    tp.add_adjoint(ib, g.transpose() * tp.value(ia));
                  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::transpose, {ia}, a.value().transpose(),
                  [ia](Tape& tp, std::size_t self) { tp.add_adjoint(ia, tp.node_adjoint(self).transpose()); });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: range out of bounds");
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::slice_cols, {ia}, a.value().middleCols(start, count),
                  [ia, start, count](Tape& tp, std::size_t self) {
                    const Matrix& x = tp.value(ia);
                    Matrix g = Matrix::Zero(x.rows(), x.cols());
                    g.middleCols(start, count) = tp.node_adjoint(self);
                    tp.add_adjoint(ia, g);
                  });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::gather_rows, {ia}, std::move(out), [ia, idx](Tape& tp, std::size_t self) {
    const Matrix& g = tp.node_adjoint(self);
    const Matrix& xv = tp.value(ia);
    Matrix ga = Matrix::Zero(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Index>(i));
    tp.add_adjoint(ia, ga);
  });
}

Var permute_columns(Var a, const std::vector<std::vector<Index>>& perms) {
  const Matrix& x = a.value();
  if (static_cast<Index>(perms.size()) != x.cols()) throw ShapeError("permute_columns: one permutation per column");
  Matrix out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const auto& p = perms[static_cast<std::size_t>(c)];
    if (static_cast<Index>(p.size()) != x.rows()) throw ShapeError("permute_columns: permutation length");
    for (Index i = 0; i < x.rows(); ++i) {
      const Index src = p[static_cast<std::size_t>(i)];
      if (src < 0 || src >= x.rows()) throw ShapeError("permute_columns: index out of range");
      out(i, c) = x(src, c);
    }
  }
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(OpKind::permute_columns, {ia}, std::move(out), [ia, perms](Tape& tp, std::size_t self) {
    const Matrix& g = tp.node_adjoint(self);
    Matrix ga = Matrix::Zero(g.rows(), g.cols());
    for (Index c = 0; c < g.cols(); ++c) {
      const auto& p = perms[static_cast<std::size_t>(c)];
      for (Index i = 0; i < g.rows(); ++i) ga(p[static_cast<std::size_t>(i)], c) += g(i, c);
    }
    tp.add_adjoint(ia, ga);
  });
}

Var pairwise_sq_dist(Var a, Var b) {
  Tape& t = same_tape(a, b, "pairwise_sq_dist");
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.cols() != y.cols()) throw ShapeError("pairwise_sq_dist: dimension mismatch");
  Matrix out(x.rows(), y.rows());
  for (Index j = 0; j < y.rows(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) out(i, j) = (x.row(i) - y.row(j)).squaredNorm();
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return t.record(OpKind::pairwise_sq_dist, {ia, ib}, std::move(out), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.node_adjoint(self);
    const Matrix& xv = tp.value(ia);
    const Matrix& yv = tp.value(ib);
    const Eigen::VectorXd row_g = g.rowwise().sum();
    const Eigen::VectorXd col_g = g.colwise().sum().transpose();
    tp.add_adjoint(ia, 2.0 * (xv.array().colwise() * row_g.array()).matrix() - 2.0 * g * yv);
    tp.add_adjoint(ib, 2.0 * (yv.array().colwise() * col_g.array()).matrix() - 2.0 * g.transpose() * xv);
  });
}

double grad_check(const std::function<Var(Tape&)>& f, ParamStore& params, double step) {
  {
    Tape tape;
    Var root = f(tape);
    tape.backward(root);
    params.zero_grad();
    tape.accumulate_gradients(params);
  }
  auto eval = [&]() {
    Tape tape;
    const double v = f(tape).scalar();
    if (!std::isfinite(v)) throw EvaluationError("grad_check: non-finite function value");
    return v;
  };
  double worst = 0.0;
  const std::size_t n = params.total_size();
  for (std::size_t i = 0; i < n; ++i) {
    const double orig = params.flat_value(i);
    params.set_flat_value(i, orig + step);
    double up = 0.0;
    double down = 0.0;
    try {
      up = eval();
      params.set_flat_value(i, orig - step);
      down = eval();
    } catch (...) {
      params.set_flat_value(i, orig);
      throw;
    }
    params.set_flat_value(i, orig);
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(params.flat_grad(i) - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace dpvae
