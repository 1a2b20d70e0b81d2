#include "disamgnn/autograd.hpp"

#include <cmath>

namespace disamgnn::ad {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
}

void require_shape(bool ok, const char* op) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(index_); }
const Matrix& Var::grad() const { return tape_->grad(index_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("scalar(): node is not 1x1");
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn, const char* op) {
  if (!value.allFinite()) throw NumericError(std::string("non-finite output from ") + op);
  Node n;
  n.value = std::move(value);
  for (Var p : parents) {
    if (p.tape() != this) throw std::invalid_argument(std::string(op) + ": operand from another tape");
    n.requires_grad = n.requires_grad || nodes_[p.index()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

void Tape::accumulate(Var target, const Matrix& g) {
  Node& n = nodes_[target.index()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

const Matrix& Tape::grad(std::size_t index) const {
  const Node& n = nodes_[index];
  if (n.grad.size() == 0) {
    empty_grad_ = Matrix::Zero(n.value.rows(), n.value.cols());
    return empty_grad_;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss from another tape");
  Node& root = nodes_[loss.index()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar");
  }
  if (backward_done_) throw std::logic_error("backward: tape already consumed");
  backward_done_ = true;
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->grad = n.grad;
      } else {
        n.param->grad += n.grad;
      }
    }
  }
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  require_shape(a.cols() == b.rows(), "matmul");
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  }, "matmul");
}

Var spmm(std::shared_ptr<const SparseMatrix> s, Var x) {
  require_shape(s->cols() == static_cast<std::size_t>(x.rows()), "spmm");
  Matrix out = s->multiply(x.value());
  return x.tape()->record(std::move(out), {x}, [s, x](Tape& t, const Matrix& g) {
    t.accumulate(x, s->transpose_multiply(g));
  }, "spmm");
}

Var relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    Matrix mask = (x.value().array() > 0.0).cast<double>().matrix();
    t.accumulate(x, g.cwiseProduct(mask));
  }, "relu");
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Matrix out = a.value() + b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  }, "add");
}

Var add_row(Var x, Var bias) {
  require_same_tape(x, bias, "add_row");
  require_shape(bias.rows() == 1 && bias.cols() == x.cols(), "add_row");
  Matrix out = x.value().rowwise() + bias.value().row(0);
  return x.tape()->record(std::move(out), {x, bias}, [x, bias](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
  }, "add_row");
}

Var scale(Var x, double factor) {
  Matrix out = x.value() * factor;
  return x.tape()->record(std::move(out), {x}, [x, factor](Tape& t, const Matrix& g) {
    t.accumulate(x, g * factor);
  }, "scale");
}

Var scale_by(Var x, Var factor) {
  require_same_tape(x, factor, "scale_by");
  require_shape(factor.rows() == 1 && factor.cols() == 1, "scale_by");
  Matrix out = x.value() * factor.scalar();
  return x.tape()->record(std::move(out), {x, factor}, [x, factor](Tape& t, const Matrix& g) {
    if (t.requires_grad(x)) t.accumulate(x, g * factor.scalar());
    if (t.requires_grad(factor)) {
      Matrix gf(1, 1);
      gf(0, 0) = g.cwiseProduct(x.value()).sum();
      t.accumulate(factor, gf);
    }
  }, "scale_by");
}

Var row_l2_normalize(Var x) {
  const Matrix& v = x.value();
  Eigen::VectorXd norms = v.rowwise().norm();
  Matrix out = Matrix::Zero(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (norms(r) > 0.0) out.row(r) = v.row(r) / norms(r);
  }
  Matrix unit = out;
  return x.tape()->record(std::move(out), {x},
      [x, norms = std::move(norms), unit = std::move(unit)](Tape& t, const Matrix& g) {
        Matrix gx = Matrix::Zero(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          if (norms(r) <= 0.0) continue;
          const double proj = unit.row(r).dot(g.row(r));
          gx.row(r) = (g.row(r) - proj * unit.row(r)) / norms(r);
        }
        t.accumulate(x, gx);
      }, "row_l2_normalize");
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b, "concat_cols");
  require_shape(a.rows() == b.rows(), "concat_cols");
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.leftCols(ca));
    if (t.requires_grad(b)) t.accumulate(b, g.rightCols(cb));
  }, "concat_cols");
}

Var dropout(Var x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  Matrix out = x.value().cwiseProduct(mask);
  return x.tape()->record(std::move(out), {x}, [x, mask](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(mask));
  }, "dropout");
}

Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const Eigen::Index r = x.rows();
  const Eigen::Index c = x.cols();
  return x.tape()->record(std::move(out), {x}, [x, r, c](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(r, c, g(0, 0)));
  }, "sum");
}

Var masked_cross_entropy(Var logits, std::span<const ClassId> labels, std::span<const NodeId> mask) {
  if (mask.empty()) throw std::invalid_argument("cross entropy: empty mask");
  require_shape(static_cast<std::size_t>(logits.rows()) == labels.size(), "masked_cross_entropy");
  const Matrix& z = logits.value();
  std::vector<NodeId> nodes(mask.begin(), mask.end());
  std::vector<ClassId> targets;
  targets.reserve(nodes.size());
  double total = 0.0;
  for (NodeId v : nodes) {
    if (v >= labels.size()) throw std::out_of_range("cross entropy: mask node out of range");
    const ClassId y = labels[v];
    if (static_cast<Eigen::Index>(y) >= z.cols()) throw std::out_of_range("cross entropy: label out of range");
    auto row = z.row(static_cast<Eigen::Index>(v));
    const double peak = row.maxCoeff();
    const double lse = peak + std::log((row.array() - peak).exp().sum());
    total += lse - row(static_cast<Eigen::Index>(y));
    targets.push_back(y);
  }
  const double inv_n = 1.0 / static_cast<double>(nodes.size());
  Matrix out(1, 1);
  out(0, 0) = total * inv_n;
  return logits.tape()->record(std::move(out), {logits},
      [logits, nodes = std::move(nodes), targets = std::move(targets), inv_n](Tape& t, const Matrix& g) {
        const Matrix& zv = logits.value();
        Matrix gz = Matrix::Zero(zv.rows(), zv.cols());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          const auto r = static_cast<Eigen::Index>(nodes[i]);
          auto row = zv.row(r);
          const double peak = row.maxCoeff();
          RowVector p = (row.array() - peak).exp().matrix();
          p /= p.sum();
          p(static_cast<Eigen::Index>(targets[i])) -= 1.0;
          gz.row(r) += p * (g(0, 0) * inv_n);
        }
        t.accumulate(logits, gz);
      }, "masked_cross_entropy");
}

Var pair_softplus(Var z, std::vector<SignedPair> pairs) {
  const Matrix& zv = z.value();
  double total = 0.0;
  for (const auto& p : pairs) {
    if (p.a >= static_cast<std::size_t>(zv.rows()) || p.b >= static_cast<std::size_t>(zv.rows())) {
      throw std::out_of_range("pair_softplus: node index out of range");
    }
    const double dot = zv.row(static_cast<Eigen::Index>(p.a)).dot(zv.row(static_cast<Eigen::Index>(p.b)));
    total += p.weight * softplus(p.sign * dot);
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  return z.tape()->record(std::move(out), {z}, [z, pairs = std::move(pairs)](Tape& t, const Matrix& g) {
    const Matrix& zv = z.value();
    Matrix gz = Matrix::Zero(zv.rows(), zv.cols());
    for (const auto& p : pairs) {
      const auto a = static_cast<Eigen::Index>(p.a);
      const auto b = static_cast<Eigen::Index>(p.b);
      const double dot = zv.row(a).dot(zv.row(b));
      const double coef = g(0, 0) * p.weight * p.sign * sigmoid(p.sign * dot);
      gz.row(a) += coef * zv.row(b);
      gz.row(b) += coef * zv.row(a);
    }
    t.accumulate(z, gz);
  }, "pair_softplus");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double peak = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double peak = x.row(r).maxCoeff();
    const double lse = peak + std::log((x.row(r).array() - peak).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return out;
}

}  // namespace disamgnn::ad
