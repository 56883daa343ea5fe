#include "hairedit/ad/ops.hpp"

#include <cmath>

#include "hairedit/error.hpp"

namespace hairedit::ad {

namespace {

bool any_grad(Var a) { return a.requires_grad(); }
bool any_grad(Var a, Var b) { return a.requires_grad() || b.requires_grad(); }

void check_same_tape(Var a, Var b) {
  require(a.tape() == b.tape(), ErrorKind::kInvalidArgument, "operands live on different tapes");
}

// Shared machinery for unary elementwise ops given f and f'(x, y).
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const int ia = a.id();
  return t.push(std::move(y), any_grad(a), [ia, df](Tape& t, int self) {
    if (!t.requires_grad(ia)) return;
    const auto& x = t.node_value(ia);
    const auto& y = t.node_value(self);
    const auto& g = t.node_grad(self);
    auto& ga = t.accum(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

Var binary(Var a, Var b, BinOp op) {
  check_same_tape(a, b);
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  const auto& z = t.node_value(b.id());
  const std::size_t n = std::max(x.size(), z.size());
  require(x.size() == z.size() || x.size() == 1 || z.size() == 1, ErrorKind::kShapeMismatch,
          "elementwise op on sizes " + std::to_string(x.size()) + " and " + std::to_string(z.size()));
  const bool xs = x.size() == 1 && n > 1;
  const bool zs = z.size() == 1 && n > 1;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[xs ? 0 : i];
    const double v = z[zs ? 0 : i];
    switch (op) {
      case BinOp::kAdd: y[i] = u + v; break;
      case BinOp::kSub: y[i] = u - v; break;
      case BinOp::kMul: y[i] = u * v; break;
      case BinOp::kDiv: y[i] = u / v; break;
    }
  }
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(y), any_grad(a, b), [ia, ib, op, xs, zs, n](Tape& t, int self) {
    const auto& x = t.node_value(ia);
    const auto& z = t.node_value(ib);
    const auto& g = t.node_grad(self);
    if (t.requires_grad(ia)) {
      auto& ga = t.accum(ia);
      for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        switch (op) {
          case BinOp::kAdd: case BinOp::kSub: d = g[i]; break;
          case BinOp::kMul: d = g[i] * z[zs ? 0 : i]; break;
          case BinOp::kDiv: d = g[i] / z[zs ? 0 : i]; break;
        }
        ga[xs ? 0 : i] += d;
      }
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.accum(ib);
      for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        const double u = x[xs ? 0 : i];
        const double v = z[zs ? 0 : i];
        switch (op) {
          case BinOp::kAdd: d = g[i]; break;
          case BinOp::kSub: d = -g[i]; break;
          case BinOp::kMul: d = g[i] * u; break;
          case BinOp::kDiv: d = -g[i] * u / (v * v); break;
        }
        gb[zs ? 0 : i] += d;
      }
    }
  });
}

}  // namespace

SparseMap::Builder::Builder(int out_size, int in_size) : map_(std::make_shared<SparseMap>()) {
  map_->out_size = out_size;
  map_->in_size = in_size;
  map_->row_start.reserve(static_cast<std::size_t>(out_size) + 1);
  map_->row_start.push_back(0);
}

void SparseMap::Builder::add(int in_index, double w) {
  map_->col.push_back(in_index);
  map_->weight.push_back(w);
}

void SparseMap::Builder::next_row() { map_->row_start.push_back(static_cast<int>(map_->col.size())); }

std::shared_ptr<const SparseMap> SparseMap::Builder::finish() {
  require(static_cast<int>(map_->row_start.size()) == map_->out_size + 1, ErrorKind::kInvalidArgument,
          "sparse map built with wrong number of rows");
  return map_;
}

std::vector<double> SparseMap::apply(std::span<const double> x) const {
  std::vector<double> y(out_size, 0.0);
  for (int r = 0; r < out_size; ++r) {
    double acc = 0.0;
    for (int k = row_start[r]; k < row_start[r + 1]; ++k) acc += weight[k] * x[col[k]];
    y[r] = acc;
  }
  return y;
}

Var add(Var a, Var b) { return binary(a, b, BinOp::kAdd); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::kSub); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::kMul); }
Var div(Var a, Var b) { return binary(a, b, BinOp::kDiv); }

Var add(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var mul(Var a, double c) {
  return unary(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Var neg(Var a) { return mul(a, -1.0); }

Var add_const(Var a, std::vector<double> c) {
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  require(c.size() == x.size(), ErrorKind::kShapeMismatch, "add_const size mismatch");
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + c[i];
  const int ia = a.id();
  return t.push(std::move(y), any_grad(a), [ia](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& ga = t.accum(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var mul_const(Var a, std::vector<double> c) {
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  require(c.size() == x.size(), ErrorKind::kShapeMismatch, "mul_const size mismatch");
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * c[i];
  const int ia = a.id();
  return t.push(std::move(y), any_grad(a), [ia, c = std::move(c)](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& ga = t.accum(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c[i];
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs_smooth(Var a, double eps) {
  return unary(
      a, [eps](double x) { return std::sqrt(x * x + eps); },
      [](double x, double y) { return x / y; });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double acc = 0.0;
  for (double v : t.node_value(a.id())) acc += v;
  const int ia = a.id();
  return t.push({acc}, any_grad(a), [ia](Tape& t, int self) {
    const double g = t.node_grad(self)[0];
    for (double& v : t.accum(ia)) v += g;
  });
}

Var mean(Var a) { return mul(sum(a), 1.0 / static_cast<double>(a.size())); }

Var dot(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  const auto& z = t.node_value(b.id());
  require(x.size() == z.size(), ErrorKind::kShapeMismatch, "dot size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * z[i];
  const int ia = a.id(), ib = b.id();
  return t.push({acc}, any_grad(a, b), [ia, ib](Tape& t, int self) {
    const double g = t.node_grad(self)[0];
    const auto& x = t.node_value(ia);
    const auto& z = t.node_value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.accum(ia);
      for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g * z[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.accum(ib);
      for (std::size_t i = 0; i < x.size(); ++i) gb[i] += g * x[i];
    }
  });
}

Var sum_squares(Var a) {
  Tape& t = *a.tape();
  double acc = 0.0;
  for (double v : t.node_value(a.id())) acc += v * v;
  const int ia = a.id();
  return t.push({acc}, any_grad(a), [ia](Tape& t, int self) {
    const double g = t.node_grad(self)[0];
    const auto& x = t.node_value(ia);
    auto& ga = t.accum(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * g * x[i];
  });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  require(offset + length <= x.size(), ErrorKind::kShapeMismatch, "slice out of range");
  std::vector<double> y(x.begin() + static_cast<std::ptrdiff_t>(offset),
                        x.begin() + static_cast<std::ptrdiff_t>(offset + length));
  const int ia = a.id();
  return t.push(std::move(y), any_grad(a), [ia, offset](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& ga = t.accum(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::kInvalidArgument, "concat of nothing");
  Tape& t = *parts.front().tape();
  std::vector<double> y;
  std::vector<int> ids;
  bool grad = false;
  for (Var p : parts) {
    check_same_tape(parts.front(), p);
    const auto& v = t.node_value(p.id());
    y.insert(y.end(), v.begin(), v.end());
    ids.push_back(p.id());
    grad = grad || p.requires_grad();
  }
  return t.push(std::move(y), grad, [ids](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t n = t.node_value(id).size();
      if (t.requires_grad(id)) {
        auto& ga = t.accum(id);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var gather(Var a, std::shared_ptr<const std::vector<int>> index) {
  Tape& t = *a.tape();
  const auto& x = t.node_value(a.id());
  std::vector<double> y(index->size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[(*index)[i]];
  const int ia = a.id();
  return t.push(std::move(y), any_grad(a), [ia, index](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& ga = t.accum(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[(*index)[i]] += g[i];
  });
}

Var linear(std::shared_ptr<const SparseMap> map, Var x) {
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  require(static_cast<int>(xv.size()) == map->in_size, ErrorKind::kShapeMismatch,
          "sparse map expects " + std::to_string(map->in_size) + " inputs, got " +
              std::to_string(xv.size()));
  const int ix = x.id();
  return t.push(map->apply(xv), any_grad(x), [ix, map](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& gx = t.accum(ix);
    for (int r = 0; r < map->out_size; ++r) {
      for (int k = map->row_start[r]; k < map->row_start[r + 1]; ++k) {
        gx[map->col[k]] += map->weight[k] * g[r];
      }
    }
  });
}

Var matvec(const Matrix& m, Var x) {
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  require(static_cast<int>(xv.size()) == m.cols, ErrorKind::kShapeMismatch, "matvec size mismatch");
  std::vector<double> y(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * xv[c];
    y[r] = acc;
  }
  const int ix = x.id();
  const Matrix* mp = &m;
  return t.push(std::move(y), any_grad(x), [ix, mp](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& gx = t.accum(ix);
    for (int r = 0; r < mp->rows; ++r) {
      const double* row = mp->data.data() + static_cast<std::size_t>(r) * mp->cols;
      for (int c = 0; c < mp->cols; ++c) gx[c] += row[c] * g[r];
    }
  });
}

Var matvec_param(Var m, int rows, int cols, std::vector<double> x) {
  Tape& t = *m.tape();
  const auto& mv = t.node_value(m.id());
  require(mv.size() == static_cast<std::size_t>(rows) * cols && static_cast<int>(x.size()) == cols,
          ErrorKind::kShapeMismatch, "matvec_param size mismatch");
  std::vector<double> y(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = mv.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  const int im = m.id();
  return t.push(std::move(y), any_grad(m), [im, rows, cols, x = std::move(x)](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& gm = t.accum(im);
    for (int r = 0; r < rows; ++r) {
      if (g[r] == 0.0) continue;
      double* row = gm.data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) row[c] += g[r] * x[c];
    }
  });
}

Var pixel_mix(Var x, const Matrix& w, const std::vector<double>& bias) {
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  const int cin = w.cols, cout = w.rows;
  require(xv.size() % cin == 0, ErrorKind::kShapeMismatch, "pixel_mix channel mismatch");
  require(bias.empty() || static_cast<int>(bias.size()) == cout, ErrorKind::kShapeMismatch,
          "pixel_mix bias mismatch");
  const std::size_t pixels = xv.size() / cin;
  std::vector<double> y(pixels * cout);
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* xp = xv.data() + p * cin;
    for (int o = 0; o < cout; ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      const double* row = w.data.data() + static_cast<std::size_t>(o) * cin;
      for (int c = 0; c < cin; ++c) acc += row[c] * xp[c];
      y[p * cout + o] = acc;
    }
  }
  const int ix = x.id();
  const Matrix* wp = &w;
  return t.push(std::move(y), any_grad(x), [ix, wp, pixels](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    auto& gx = t.accum(ix);
    const int cin = wp->cols, cout = wp->rows;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (int o = 0; o < cout; ++o) {
        const double go = g[p * cout + o];
        if (go == 0.0) continue;
        const double* row = wp->data.data() + static_cast<std::size_t>(o) * cin;
        for (int c = 0; c < cin; ++c) gx[p * cin + c] += row[c] * go;
      }
    }
  });
}

Var scale_channels(Var x, Var s) {
  check_same_tape(x, s);
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  const auto& sv = t.node_value(s.id());
  const std::size_t c = sv.size();
  require(c > 0 && xv.size() % c == 0, ErrorKind::kShapeMismatch, "scale_channels mismatch");
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] * sv[i % c];
  const int ix = x.id(), is = s.id();
  return t.push(std::move(y), any_grad(x, s), [ix, is, c](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    const auto& xv = t.node_value(ix);
    const auto& sv = t.node_value(is);
    if (t.requires_grad(ix)) {
      auto& gx = t.accum(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv[i % c];
    }
    if (t.requires_grad(is)) {
      auto& gs = t.accum(is);
      for (std::size_t i = 0; i < g.size(); ++i) gs[i % c] += g[i] * xv[i];
    }
  });
}

Var shift_channels(Var x, Var b) {
  check_same_tape(x, b);
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  const auto& bv = t.node_value(b.id());
  const std::size_t c = bv.size();
  require(c > 0 && xv.size() % c == 0, ErrorKind::kShapeMismatch, "shift_channels mismatch");
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] + bv[i % c];
  const int ix = x.id(), ib = b.id();
  return t.push(std::move(y), any_grad(x, b), [ix, ib, c](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    if (t.requires_grad(ix)) {
      auto& gx = t.accum(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.accum(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
    }
  });
}

Var scale_pixels(Var x, Var f) {
  check_same_tape(x, f);
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  const auto& fv = t.node_value(f.id());
  require(!fv.empty() && xv.size() % fv.size() == 0, ErrorKind::kShapeMismatch, "scale_pixels mismatch");
  const std::size_t c = xv.size() / fv.size();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] * fv[i / c];
  const int ix = x.id(), iff = f.id();
  return t.push(std::move(y), any_grad(x, f), [ix, iff, c](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    const auto& xv = t.node_value(ix);
    const auto& fv = t.node_value(iff);
    if (t.requires_grad(ix)) {
      auto& gx = t.accum(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * fv[i / c];
    }
    if (t.requires_grad(iff)) {
      auto& gf = t.accum(iff);
      for (std::size_t i = 0; i < g.size(); ++i) gf[i / c] += g[i] * xv[i];
    }
  });
}

Var gram(Var x, int channels) {
  Tape& t = *x.tape();
  const auto& xv = t.node_value(x.id());
  require(channels > 0 && xv.size() % channels == 0 && !xv.empty(), ErrorKind::kShapeMismatch,
          "gram channel mismatch");
  const std::size_t pixels = xv.size() / channels;
  const double inv = 1.0 / static_cast<double>(pixels);
  std::vector<double> y(static_cast<std::size_t>(channels) * channels, 0.0);
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* xp = xv.data() + p * channels;
    for (int i = 0; i < channels; ++i) {
      for (int j = 0; j < channels; ++j) y[i * channels + j] += xp[i] * xp[j];
    }
  }
  for (double& v : y) v *= inv;
  const int ix = x.id();
  return t.push(std::move(y), any_grad(x), [ix, channels, pixels, inv](Tape& t, int self) {
    const auto& g = t.node_grad(self);
    const auto& xv = t.node_value(ix);
    auto& gx = t.accum(ix);
    // dG_ij/dx_pk = inv * (delta_ik x_pj + delta_jk x_pi)
    for (std::size_t p = 0; p < pixels; ++p) {
      const double* xp = xv.data() + p * channels;
      for (int k = 0; k < channels; ++k) {
        double acc = 0.0;
        for (int j = 0; j < channels; ++j) acc += (g[k * channels + j] + g[j * channels + k]) * xp[j];
        gx[p * channels + k] += inv * acc;
      }
    }
  });
}

Var normalize(Var x, double eps) {
  Var norm = sqrt(add(sum_squares(x), eps));
  return div(x, norm);
}

Var cosine(Var a, Var b, double eps) {
  Var na = sqrt(add(sum_squares(a), eps));
  Var nb = sqrt(add(sum_squares(b), eps));
  return div(dot(a, b), mul(na, nb));
}

}  // namespace hairedit::ad
