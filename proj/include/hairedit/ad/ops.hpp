#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hairedit/ad/tape.hpp"

namespace hairedit::ad {

// Dense row-major matrix used as a fixed (non-trained) operator.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Fixed sparse linear operator y = S x in CSR form. Resampling, pooling and
// warps are all expressed this way.
struct SparseMap {
  int out_size = 0;
  int in_size = 0;
  std::vector<int> row_start;  // out_size + 1
  std::vector<int> col;
  std::vector<double> weight;

  class Builder {
   public:
    Builder(int out_size, int in_size);
    void add(int in_index, double w);  // into the current row
    void next_row();
    std::shared_ptr<const SparseMap> finish();

   private:
    std::shared_ptr<SparseMap> map_;
  };

  std::vector<double> apply(std::span<const double> x) const;
};

// Elementwise arithmetic. Operands have equal size, or one of them is a
// scalar (size 1) that broadcasts.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var add(Var a, double c);
Var mul(Var a, double c);
Var neg(Var a);
Var add_const(Var a, std::vector<double> c);
Var mul_const(Var a, std::vector<double> c);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var abs_smooth(Var a, double eps);

Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var sum_squares(Var a);

Var slice(Var a, std::size_t offset, std::size_t length);
Var concat(const std::vector<Var>& parts);
// y[i] = x[index[i]]; backward scatter-adds.
Var gather(Var a, std::shared_ptr<const std::vector<int>> index);
Var linear(std::shared_ptr<const SparseMap> map, Var x);
// y = M x with M fixed. M must outlive the backward pass.
Var matvec(const Matrix& m, Var x);
// y = M x where M (rows x cols, row-major) is the variable and x is fixed.
Var matvec_param(Var m, int rows, int cols, std::vector<double> x);
// x is P x Cin (pixel-major); y[p] = W x[p] + bias, W is Cout x Cin.
Var pixel_mix(Var x, const Matrix& w, const std::vector<double>& bias);
// x is P x C, s has C entries: y[p,c] = x[p,c] * s[c].
Var scale_channels(Var x, Var s);
// x is P x C, b has C entries: y[p,c] = x[p,c] + b[c].
Var shift_channels(Var x, Var b);
// x is P x C, f has P entries: y[p,c] = x[p,c] * f[p].
Var scale_pixels(Var x, Var f);
// x is P x C: G = (1/P) x^T x, C x C.
Var gram(Var x, int channels);
// Unit vector x / sqrt(|x|^2 + eps).
Var normalize(Var x, double eps = 1e-12);
// Cosine similarity of two vectors.
Var cosine(Var a, Var b, double eps = 1e-12);

}  // namespace hairedit::ad
