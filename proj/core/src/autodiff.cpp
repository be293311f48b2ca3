#include "agdc/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "agdc/error.hpp"

namespace agdc::ad {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw StateError("autodiff: operands recorded on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw StateError("autodiff: invalid variable");
  return *a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows()
        << "x" << b.cols();
    throw ConfigError(msg.str());
  }
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) throw StateError("autodiff: invalid variable");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& m = value();
  if (m.rows() != 1 || m.cols() != 1) throw StateError("autodiff: scalar() on non-1x1 node");
  return m(0, 0);
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.ref ? *n.ref : n.owned;
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) {
    const Matrix& val = n.ref ? *n.ref : n.owned;
    n.grad = Matrix::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

Var Tape::push(Matrix value, bool requires_grad, Backward back) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix m) { return push(std::move(m), false); }

Var Tape::param(Parameter& p) {
  Node n;
  n.ref = &p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::frozen(const Parameter& p) {
  Node n;
  n.ref = &p.value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward: nothing recorded on the tape");
  if (loss.tape() != this) throw StateError("backward: loss not recorded on this tape");
  if (consumed_) throw StateError("backward: tape already consumed");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) throw StateError("backward: loss must be 1x1");
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss)(0, 0) += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.back) n.back(n.grad);
    if (n.param) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->grad = Matrix::Zero(n.grad.rows(), n.grad.cols());
      }
      n.param->grad += n.grad;
    }
  }
}

// --- linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "matmul: inner dimension mismatch " << a.rows() << "x" << a.cols() << " * "
        << b.rows() << "x" << b.cols();
    throw ConfigError(msg.str());
  }
  Matrix out = a.value() * b.value();
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b),
                [&t, a, b](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a).noalias() += g * b.value().transpose();
                  if (t.requires_grad(b)) t.grad(b).noalias() += a.value().transpose() * g;
                });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return t.push(a.value() + b.value(), t.requires_grad(a) || t.requires_grad(b),
                [&t, a, b](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a) += g;
                  if (t.requires_grad(b)) t.grad(b) += g;
                });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  return t.push(a.value() - b.value(), t.requires_grad(a) || t.requires_grad(b),
                [&t, a, b](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a) += g;
                  if (t.requires_grad(b)) t.grad(b) -= g;
                });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return t.push(a.value().cwiseProduct(b.value()), t.requires_grad(a) || t.requires_grad(b),
                [&t, a, b](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(b.value());
                  if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(a.value());
                });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.push(a.value() * s, t.requires_grad(a),
                [&t, a, s](const Matrix& g) { t.grad(a) += g * s; });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array() + s;
  return t.push(std::move(out), t.requires_grad(a), [&t, a](const Matrix& g) { t.grad(a) += g; });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ConfigError("add_row: row must be 1 x " + std::to_string(a.cols()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(row),
                [&t, a, row](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a) += g;
                  if (t.requires_grad(row)) t.grad(row) += g.colwise().sum();
                });
}

Var mul_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ConfigError("mul_row: row must be 1 x " + std::to_string(a.cols()));
  }
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(row),
                [&t, a, row](const Matrix& g) {
                  if (t.requires_grad(a)) {
                    t.grad(a).array() += g.array().rowwise() * row.value().row(0).array();
                  }
                  if (t.requires_grad(row)) t.grad(row) += g.cwiseProduct(a.value()).colwise().sum();
                });
}

// --- nonlinearities -------------------------------------------------------

Var gelu(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
  return t.push(std::move(out), t.requires_grad(a), [&t, a](const Matrix& g) {
    const Matrix d = a.value().unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + v * pdf;
    });
    t.grad(a) += g.cwiseProduct(d);
  });
}

Var silu(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
  return t.push(std::move(out), t.requires_grad(a), [&t, a](const Matrix& g) {
    const Matrix d = a.value().unaryExpr([](double v) {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 + v * (1.0 - s));
    });
    t.grad(a) += g.cwiseProduct(d);
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().exp();
  auto result = std::make_shared<Matrix>(out);
  return t.push(std::move(out), t.requires_grad(a),
                [&t, a, result](const Matrix& g) { t.grad(a) += g.cwiseProduct(*result); });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  return t.push(a.value().cwiseAbs2(), t.requires_grad(a),
                [&t, a](const Matrix& g) { t.grad(a) += 2.0 * g.cwiseProduct(a.value()); });
}

Var dropout(Var a, double rate) {
  Tape& t = tape_of(a);
  if (t.dropout_rng() == nullptr || rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<Matrix>(a.rows(), a.cols());
  const double inv = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask->size(); ++i) mask->data()[i] = keep(*t.dropout_rng()) ? inv : 0.0;
  return t.push(a.value().cwiseProduct(*mask), t.requires_grad(a),
                [&t, a, mask](const Matrix& g) { t.grad(a) += g.cwiseProduct(*mask); });
}

Var layer_norm(Var a, double eps) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const Index n = x.cols();
  auto y = std::make_shared<Matrix>(x.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)(r) = is;
    y->row(r) = (x.row(r).array() - mean) * is;
  }
  return t.push(*y, t.requires_grad(a), [&t, a, y, inv_std, n](const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (Index r = 0; r < g.rows(); ++r) {
      const double mg = g.row(r).mean();
      const double mgy = g.row(r).dot(y->row(r)) / static_cast<double>(n);
      ga.row(r).array() += (*inv_std)(r) * (g.row(r).array() - mg - y->row(r).array() * mgy);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  auto probs = std::make_shared<Matrix>(out.array().exp());
  return t.push(std::move(out), t.requires_grad(a), [&t, a, probs](const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (Index r = 0; r < g.rows(); ++r) {
      ga.row(r) += g.row(r) - probs->row(r) * g.row(r).sum();
    }
  });
}

// --- shape ----------------------------------------------------------------

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows()) throw ConfigError("concat_cols: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(b),
                [&t, a, b](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a) += g.leftCols(a.cols());
                  if (t.requires_grad(b)) t.grad(b) += g.rightCols(b.cols());
                });
}

Var slice_cols(Var a, Index start, Index count) {
  Tape& t = tape_of(a);
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw IndexError("slice_cols: column range out of bounds");
  }
  Matrix out = a.value().middleCols(start, count);
  return t.push(std::move(out), t.requires_grad(a), [&t, a, start, count](const Matrix& g) {
    t.grad(a).middleCols(start, count) += g;
  });
}

Var gather_rows(Var a, std::span<const Index> idx) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= x.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(idx[r]) + " outside table of " +
                       std::to_string(x.rows()) + " rows");
    }
    out.row(static_cast<Index>(r)) = x.row(idx[r]);
  }
  auto rows = std::make_shared<std::vector<Index>>(idx.begin(), idx.end());
  return t.push(std::move(out), t.requires_grad(a), [&t, a, rows](const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t r = 0; r < rows->size(); ++r) ga.row((*rows)[r]) += g.row(static_cast<Index>(r));
  });
}

Var column(Var a, Index col) { return slice_cols(a, col, 1); }

Var add_to_column(Var a, Index col, Var v) {
  Tape& t = same_tape(a, v);
  if (col < 0 || col >= a.cols()) throw IndexError("add_to_column: column out of range");
  if (v.rows() != a.rows() || v.cols() != 1) throw ConfigError("add_to_column: v must be rows x 1");
  Matrix out = a.value();
  out.col(col) += v.value().col(0);
  return t.push(std::move(out), t.requires_grad(a) || t.requires_grad(v),
                [&t, a, v, col](const Matrix& g) {
                  if (t.requires_grad(a)) t.grad(a) += g;
                  if (t.requires_grad(v)) t.grad(v).col(0) += g.col(col);
                });
}

// --- reductions -----------------------------------------------------------

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), t.requires_grad(a),
                [&t, a](const Matrix& g) { t.grad(a).array() += g(0, 0); });
}

Var pick_sum(Var a, std::span<const Index> idx, std::span<const double> weight) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (static_cast<Index>(idx.size()) != x.rows() || weight.size() != idx.size()) {
    throw ConfigError("pick_sum: need one index and one weight per row");
  }
  double total = 0.0;
  for (Index r = 0; r < x.rows(); ++r) {
    const auto c = idx[static_cast<std::size_t>(r)];
    if (c < 0 || c >= x.cols()) throw IndexError("pick_sum: column index out of range");
    if (weight[static_cast<std::size_t>(r)] != 0.0) total += weight[static_cast<std::size_t>(r)] * x(r, c);
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  auto cols = std::make_shared<std::vector<Index>>(idx.begin(), idx.end());
  auto w = std::make_shared<std::vector<double>>(weight.begin(), weight.end());
  return t.push(std::move(out), t.requires_grad(a), [&t, a, cols, w](const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t r = 0; r < cols->size(); ++r) {
      ga(static_cast<Index>(r), (*cols)[r]) += g(0, 0) * (*w)[r];
    }
  });
}

Var weighted_sum_squares(Var a, std::span<const double> weight) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (static_cast<Index>(weight.size()) != x.rows()) {
    throw ConfigError("weighted_sum_squares: need one weight per row");
  }
  double total = 0.0;
  for (Index r = 0; r < x.rows(); ++r) {
    const double w = weight[static_cast<std::size_t>(r)];
    if (w != 0.0) total += w * x.row(r).squaredNorm();
  }
  Matrix out(1, 1);
  out(0, 0) = total;
  auto w = std::make_shared<std::vector<double>>(weight.begin(), weight.end());
  return t.push(std::move(out), t.requires_grad(a), [&t, a, w](const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t r = 0; r < w->size(); ++r) {
      const auto ri = static_cast<Index>(r);
      ga.row(ri) += (2.0 * g(0, 0) * (*w)[r]) * a.value().row(ri);
    }
  });
}

// --- fused model ops ------------------------------------------------------

Var causal_attention(Var q, Var k, Var v, std::span<const Segment> segments, int heads) {
  Tape& t = same_tape(q, k);
  same_tape(q, v);
  require_same_shape(q.value(), k.value(), "causal_attention");
  require_same_shape(q.value(), v.value(), "causal_attention");
  const Index width = q.cols();
  if (heads < 1 || width % heads != 0) throw ConfigError("causal_attention: width not divisible by heads");
  const Index dh = width / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(Q.rows(), width);
  // One probability matrix per (segment, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const Segment& s : segments) {
    if (s.start < 0 || s.length < 0 || s.start + s.length > Q.rows()) {
      throw IndexError("causal_attention: segment outside the packed rows");
    }
    for (int h = 0; h < heads; ++h) {
      const auto qh = Q.block(s.start, h * dh, s.length, dh);
      const auto kh = K.block(s.start, h * dh, s.length, dh);
      const auto vh = V.block(s.start, h * dh, s.length, dh);
      Matrix scores = (qh * kh.transpose()) * inv;
      for (Index i = 0; i < s.length; ++i) {
        const double mx = scores.row(i).head(i + 1).maxCoeff();
        double z = 0.0;
        for (Index j = 0; j <= i; ++j) {
          scores(i, j) = std::exp(scores(i, j) - mx);
          z += scores(i, j);
        }
        for (Index j = 0; j <= i; ++j) scores(i, j) /= z;
        for (Index j = i + 1; j < s.length; ++j) scores(i, j) = 0.0;
      }
      out.block(s.start, h * dh, s.length, dh).noalias() = scores * vh;
      probs->push_back(std::move(scores));
    }
  }
  auto segs = std::make_shared<std::vector<Segment>>(segments.begin(), segments.end());
  const bool rg = t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v);
  return t.push(std::move(out), rg, [&t, q, k, v, segs, probs, heads, dh, inv](const Matrix& g) {
    const Matrix& Q = q.value();
    const Matrix& K = k.value();
    const Matrix& V = v.value();
    const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
    std::size_t pi = 0;
    for (const Segment& s : *segs) {
      for (int h = 0; h < heads; ++h, ++pi) {
        const Matrix& P = (*probs)[pi];
        const auto go = g.block(s.start, h * dh, s.length, dh);
        if (gv) t.grad(v).block(s.start, h * dh, s.length, dh).noalias() += P.transpose() * go;
        if (!gq && !gk) continue;
        const Matrix dp = go * V.block(s.start, h * dh, s.length, dh).transpose();
        Matrix ds = P.cwiseProduct(dp);
        const Eigen::VectorXd rowdot = ds.rowwise().sum();
        ds -= P.cwiseProduct(rowdot.replicate(1, s.length));
        ds *= inv;
        if (gq) t.grad(q).block(s.start, h * dh, s.length, dh).noalias() += ds * K.block(s.start, h * dh, s.length, dh);
        if (gk) t.grad(k).block(s.start, h * dh, s.length, dh).noalias() += ds.transpose() * Q.block(s.start, h * dh, s.length, dh);
      }
    }
  });
}

Var expected_length(Var p, std::span<const Segment> segments) {
  Tape& t = tape_of(p);
  const Matrix& pv = p.value();
  if (pv.cols() != 1) throw ConfigError("expected_length: p must be a column vector");
  Matrix out(static_cast<Index>(segments.size()), 1);
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const Segment& s = segments[si];
    if (s.start < 0 || s.length < 0 || s.start + s.length > pv.rows()) {
      throw IndexError("expected_length: segment outside p");
    }
    double survive = 1.0;
    double e = 0.0;
    for (Index i = 0; i < s.length; ++i) {
      const double pt = pv(s.start + i, 0);
      e += static_cast<double>(i + 1) * pt * survive;
      survive *= 1.0 - pt;
    }
    out(static_cast<Index>(si), 0) = e;
  }
  auto segs = std::make_shared<std::vector<Segment>>(segments.begin(), segments.end());
  return t.push(std::move(out), t.requires_grad(p), [&t, p, segs](const Matrix& g) {
    const Matrix& pv = p.value();
    Matrix& gp = t.grad(p);
    for (std::size_t si = 0; si < segs->size(); ++si) {
      const Segment& s = (*segs)[si];
      const Index n = s.length;
      if (n == 0) continue;
      // prefix[k] = prod_{i<k} (1 - p_i), 0-based.
      std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 1.0);
      for (Index i = 0; i < n; ++i) {
        prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] * (1.0 - pv(s.start + i, 0));
      }
      // tail = sum_{t>k} t * p_t * prod_{k<i<t} (1 - p_i), steps 1-based.
      double tail = 0.0;
      const double go = g(static_cast<Index>(si), 0);
      for (Index k = n; k >= 1; --k) {
        gp(s.start + k - 1, 0) += go * prefix[static_cast<std::size_t>(k) - 1] * (static_cast<double>(k) - tail);
        const double pk = pv(s.start + k - 1, 0);
        tail = static_cast<double>(k) * pk + (1.0 - pk) * tail;
      }
    }
  });
}

}  // namespace agdc::ad
