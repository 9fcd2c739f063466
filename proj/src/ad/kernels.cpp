// Copyright 2026 The DEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "ad/kernels.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Core>

namespace demc::ad::kernels {

  namespace {

    enum class Op
    {
      N,
      T,
    };

    template<typename T>
    using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    template<typename T>
    using ConstView = Eigen::Map<const RowMajor<T>, 0, Eigen::OuterStride<>>;

    // Row-major C = op(A) * op(B) + beta * C, with op(A) m x k and op(B) k x n.
    template<typename T>
    void gemm(Op ta, Op tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc)
    {
      Eigen::Map<RowMajor<T>, 0, Eigen::OuterStride<>> cm(c, m, n, Eigen::OuterStride<>(ldc));
      if (beta == T(0))
        cm.setZero();
      else if (beta != T(1))
        cm *= beta;
      auto run = [&](const auto& lhs) {
        if (tb == Op::N)
          cm.noalias() += lhs * ConstView<T>(b, k, n, Eigen::OuterStride<>(ldb));
        else
          cm.noalias() += lhs * ConstView<T>(b, n, k, Eigen::OuterStride<>(ldb)).transpose();
      };
      if (ta == Op::N)
        run(ConstView<T>(a, m, k, Eigen::OuterStride<>(lda)));
      else
        run(ConstView<T>(a, k, m, Eigen::OuterStride<>(lda)).transpose());
    }

    struct ConvGeometry
    {
      int ci, h, w;     // input plane
      int kh, kw;
      int stride, pad;
      int ho, wo;       // output plane

      std::size_t colRows() const { return std::size_t(ci) * kh * kw; }
      std::size_t colCols() const { return std::size_t(ho) * wo; }
      bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
    };

    ConvGeometry geometry(const Shape& x, const Shape& w, int stride, int pad)
    {
      const Shape y = convOutputShape(x, w, stride, pad);
      return {x.c, x.h, x.w, w.h, w.w, stride, pad, y.h, y.w};
    }

    // Upper bound on the elements of one unfolded column matrix.
    constexpr std::size_t kColumnBudget = std::size_t(1) << 22;

    // Output columns processed by one GEMM: `count` whole batch items from n0,
    // or output rows [oy0, oy0 + rows) of a single item.
    struct ColumnBlock
    {
      int n0, count;
      int oy0, rows;
    };

    std::vector<ColumnBlock> columnBlocks(int batch, const ConvGeometry& g)
    {
      const std::size_t perRow = std::max<std::size_t>(g.colRows() * std::size_t(g.wo), 1);
      const std::size_t perItem = perRow * std::size_t(g.ho);
      std::vector<ColumnBlock> blocks;
      if (perItem <= kColumnBudget)
      {
        const int items = int(std::max<std::size_t>(kColumnBudget / std::max<std::size_t>(perItem, 1), 1));
        for (int n = 0; n < batch; n += items)
          blocks.push_back({n, std::min(items, batch - n), 0, g.ho});
      }
      else
      {
        const int rows = int(std::max<std::size_t>(kColumnBudget / perRow, 1));
        for (int n = 0; n < batch; ++n)
          for (int oy = 0; oy < g.ho; oy += rows)
            blocks.push_back({n, 1, oy, std::min(rows, g.ho - oy)});
      }
      return blocks;
    }

    // Unfolds output rows [oy0, oy0 + rows) of one batch item into a
    // [ci*kh*kw, rows*wo] block of a column matrix with leading dimension ld.
    template<typename T>
    void im2col(const T* x, const ConvGeometry& g, int oy0, int rows, T* col, std::size_t ld)
    {
      for (int c = 0; c < g.ci; ++c)
        for (int i = 0; i < g.kh; ++i)
          for (int j = 0; j < g.kw; ++j)
          {
            T* row = col + ((std::size_t(c) * g.kh + i) * g.kw + j) * ld;
            for (int r = 0; r < rows; ++r)
            {
              T* dst = row + std::size_t(r) * g.wo;
              const int iy = (oy0 + r) * g.stride - g.pad + i;
              if (iy < 0 || iy >= g.h)
              {
                std::fill_n(dst, g.wo, T(0));
                continue;
              }
              const T* src = x + (std::size_t(c) * g.h + iy) * g.w;
              if (g.stride == 1)
              {
                const int lo = std::clamp(g.pad - j, 0, g.wo);
                const int hi = std::clamp(g.w + g.pad - j, lo, g.wo);
                std::fill(dst, dst + lo, T(0));
                std::copy(src + lo - g.pad + j, src + hi - g.pad + j, dst + lo);
                std::fill(dst + hi, dst + g.wo, T(0));
              }
              else
              {
                for (int ox = 0; ox < g.wo; ++ox)
                {
                  const int ix = ox * g.stride - g.pad + j;
                  dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
                }
              }
            }
          }
    }

    // Adjoint of im2col: accumulates a column block into one batch item.
    template<typename T>
    void col2im(const T* col, const ConvGeometry& g, int oy0, int rows, std::size_t ld, T* x)
    {
      for (int c = 0; c < g.ci; ++c)
        for (int i = 0; i < g.kh; ++i)
          for (int j = 0; j < g.kw; ++j)
          {
            const T* row = col + ((std::size_t(c) * g.kh + i) * g.kw + j) * ld;
            for (int r = 0; r < rows; ++r)
            {
              const int iy = (oy0 + r) * g.stride - g.pad + i;
              if (iy < 0 || iy >= g.h)
                continue;
              const T* src = row + std::size_t(r) * g.wo;
              T* dst = x + (std::size_t(c) * g.h + iy) * g.w;
              if (g.stride == 1)
              {
                const int lo = std::clamp(g.pad - j, 0, g.wo);
                const int hi = std::clamp(g.w + g.pad - j, lo, g.wo);
                T* d = dst - g.pad + j;
                for (int ox = lo; ox < hi; ++ox)
                  d[ox] += src[ox];
              }
              else
              {
                for (int ox = 0; ox < g.wo; ++ox)
                {
                  const int ix = ox * g.stride - g.pad + j;
                  if (ix >= 0 && ix < g.w)
                    dst[ix] += src[ox];
                }
              }
            }
          }
    }

    template<typename T>
    void unfoldBlock(const Tensor<T>& x, const ConvGeometry& g, const ColumnBlock& b, std::vector<T>& col)
    {
      const std::size_t span = std::size_t(b.rows) * g.wo;
      const std::size_t cols = span * b.count;
      col.resize(g.colRows() * cols);
      for (int m = 0; m < b.count; ++m)
        im2col(x.plane(b.n0 + m, 0), g, b.oy0, b.rows, col.data() + m * span, cols);
    }

    // Pointer and leading dimension of the [channels, cols] view of y over a
    // block; multi-item blocks are gathered into buf.
    template<typename T>
    const T* gatherBlock(const Tensor<T>& y, const ColumnBlock& b, std::vector<T>& buf, int& ld)
    {
      const Shape& s = y.shape();
      const std::size_t plane = s.planeSize();
      if (b.count == 1)
      {
        ld = int(plane);
        return y.plane(b.n0, 0) + std::size_t(b.oy0) * s.w;
      }
      const std::size_t cols = plane * b.count;
      buf.resize(std::size_t(s.c) * cols);
      for (int m = 0; m < b.count; ++m)
        for (int c = 0; c < s.c; ++c)
          std::copy_n(y.plane(b.n0 + m, c), plane, buf.data() + c * cols + m * plane);
      ld = int(cols);
      return buf.data();
    }

  } // namespace

  Shape convOutputShape(const Shape& x, const Shape& w, int stride, int pad)
  {
    if (w.c != x.c)
      throw ShapeError("conv2d: input has " + std::to_string(x.c) + " channels but weight " + w.str() +
                       " expects " + std::to_string(w.c));
    const bool oddKernel = (w.h % 2 == 1) && (w.w % 2 == 1);
    const bool fourKernel = w.h == 4 && w.w == 4;
    if (!oddKernel && !fourKernel)
      throw ShapeError("conv2d: kernel " + std::to_string(w.h) + "x" + std::to_string(w.w) +
                       " must be odd-sized or 4x4");
    if (stride < 1 || pad < 0)
      throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
    const int spanH = x.h + 2 * pad - w.h;
    const int spanW = x.w + 2 * pad - w.w;
    if (spanH < 0 || spanW < 0)
      throw ShapeError("conv2d: kernel " + w.str() + " larger than padded input " + x.str());
    if (spanH % stride != 0 || spanW % stride != 0)
      throw ShapeError("conv2d: output size is not exact for input " + x.str() + ", kernel " +
                       std::to_string(w.h) + "x" + std::to_string(w.w) + ", stride " +
                       std::to_string(stride) + ", pad " + std::to_string(pad));
    return {x.n, w.n, spanH / stride + 1, spanW / stride + 1};
  }

  template<typename T>
  Tensor<T> conv2dForward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int stride, int pad)
  {
    const Shape ys = convOutputShape(x.shape(), w.shape(), stride, pad);
    if (bias && bias->size() != std::size_t(ys.c))
      throw ShapeError("conv2d: bias has " + std::to_string(bias->size()) + " entries, expected " +
                       std::to_string(ys.c));
    const ConvGeometry g = geometry(x.shape(), w.shape(), stride, pad);
    Tensor<T> y(ys);
    const int co = ys.c;
    const int k = int(g.colRows());
    const int p = int(g.colCols());

    if (g.pointwise())
    {
      // Accumulates strictly in input-channel order so that identity-like
      // weights reproduce plain sums bit-exactly.
      for (int n = 0; n < ys.n; ++n)
        for (int o = 0; o < co; ++o)
        {
          T* out = y.plane(n, o);
          std::fill_n(out, p, bias ? (*bias)[o] : T(0));
          const T* wrow = w.ptr() + std::size_t(o) * k;
          for (int c = 0; c < k; ++c)
          {
            const T wv = wrow[c];
            const T* in = x.plane(n, c);
            for (int i = 0; i < p; ++i)
              out[i] += wv * in[i];
          }
        }
      return y;
    }

    std::vector<T> col, out;
    for (const ColumnBlock& b : columnBlocks(ys.n, g))
    {
      unfoldBlock(x, g, b, col);
      const int cols = b.count * b.rows * g.wo;
      if (b.count == 1)
      {
        gemm(Op::N, Op::N, co, cols, k, w.ptr(), k, col.data(), cols, T(0),
             y.plane(b.n0, 0) + std::size_t(b.oy0) * g.wo, p);
        continue;
      }
      out.resize(std::size_t(co) * cols);
      gemm(Op::N, Op::N, co, cols, k, w.ptr(), k, col.data(), cols, T(0), out.data(), cols);
      for (int m = 0; m < b.count; ++m)
        for (int o = 0; o < co; ++o)
          std::copy_n(out.data() + std::size_t(o) * cols + std::size_t(m) * p, p, y.plane(b.n0 + m, o));
    }
    if (bias)
      addChannelBias(y, *bias);
    return y;
  }

  template<typename T>
  Tensor<T> conv2dBackwardData(const Tensor<T>& dy, const Tensor<T>& w, const Shape& xShape, int stride, int pad)
  {
    const Shape ys = convOutputShape(xShape, w.shape(), stride, pad);
    if (dy.shape() != ys)
      throw ShapeError("conv2d backward: gradient " + dy.shape().str() + " does not match output " + ys.str());
    const ConvGeometry g = geometry(xShape, w.shape(), stride, pad);
    Tensor<T> dx(xShape);
    const int co = ys.c;
    const int k = int(g.colRows());
    const int p = int(g.colCols());

    if (g.pointwise())
    {
      for (int n = 0; n < ys.n; ++n)
        gemm(Op::T, Op::N, k, p, co, w.ptr(), k, dy.plane(n, 0), p, T(0), dx.plane(n, 0), p);
      return dx;
    }

    std::vector<T> col, buf;
    for (const ColumnBlock& b : columnBlocks(ys.n, g))
    {
      int ld = 0;
      const T* dyBlock = gatherBlock(dy, b, buf, ld);
      const std::size_t span = std::size_t(b.rows) * g.wo;
      const int cols = int(span) * b.count;
      col.resize(std::size_t(k) * cols);
      gemm(Op::T, Op::N, k, cols, co, w.ptr(), k, dyBlock, ld, T(0), col.data(), cols);
      for (int m = 0; m < b.count; ++m)
        col2im(col.data() + m * span, g, b.oy0, b.rows, std::size_t(cols), dx.plane(b.n0 + m, 0));
    }
    return dx;
  }

  template<typename T>
  Tensor<T> conv2dBackwardWeight(const Tensor<T>& dy, const Tensor<T>& x, const Shape& wShape, int stride, int pad)
  {
    const Shape ys = convOutputShape(x.shape(), wShape, stride, pad);
    if (dy.shape() != ys)
      throw ShapeError("conv2d backward: gradient " + dy.shape().str() + " does not match output " + ys.str());
    const ConvGeometry g = geometry(x.shape(), wShape, stride, pad);
    Tensor<T> dw(wShape);
    const int co = ys.c;
    const int k = int(g.colRows());
    const int p = int(g.colCols());

    if (g.pointwise())
    {
      for (int n = 0; n < ys.n; ++n)
        gemm(Op::N, Op::T, co, k, p, dy.plane(n, 0), p, x.plane(n, 0), p, T(1), dw.ptr(), k);
      return dw;
    }

    std::vector<T> col, buf;
    for (const ColumnBlock& b : columnBlocks(ys.n, g))
    {
      unfoldBlock(x, g, b, col);
      int ld = 0;
      const T* dyBlock = gatherBlock(dy, b, buf, ld);
      const int cols = b.count * b.rows * g.wo;
      gemm(Op::N, Op::T, co, k, cols, dyBlock, ld, col.data(), cols, T(1), dw.ptr(), k);
    }
    return dw;
  }

  template<typename T>
  Tensor<T> channelSum(const Tensor<T>& x)
  {
    const Shape& s = x.shape();
    Tensor<T> out({s.c, 1, 1, 1});
    const std::size_t plane = s.planeSize();
    for (int c = 0; c < s.c; ++c)
    {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n)
      {
        const T* p = x.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i)
          acc += p[i];
      }
      out[c] = T(acc);
    }
    return out;
  }

  template<typename T>
  void addChannelBias(Tensor<T>& y, const Tensor<T>& bias)
  {
    const Shape& s = y.shape();
    if (bias.size() != std::size_t(s.c))
      throw ShapeError("bias has " + std::to_string(bias.size()) + " entries, expected " + std::to_string(s.c));
    const std::size_t plane = s.planeSize();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
      {
        T* p = y.plane(n, c);
        const T b = bias[c];
        for (std::size_t i = 0; i < plane; ++i)
          p[i] += b;
      }
  }

  template<typename T>
  Tensor<T> maxPool2Forward(const Tensor<T>& x, std::vector<std::uint32_t>& argmax)
  {
    const Shape& s = x.shape();
    if (s.h % 2 != 0 || s.w % 2 != 0)
      throw ShapeError("maxpool2: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                       " must be even");
    const int oh = s.h / 2;
    const int ow = s.w / 2;
    Tensor<T> y({s.n, s.c, oh, ow});
    argmax.resize(y.size());
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
      {
        const T* p = x.plane(n, c);
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++o)
          {
            // Row-major window order; strict comparison keeps the first maximum.
            std::uint32_t best = std::uint32_t(2 * oy * s.w + 2 * ox);
            T bestValue = p[best];
            const std::uint32_t candidates[3] = {best + 1, best + std::uint32_t(s.w), best + std::uint32_t(s.w) + 1};
            for (std::uint32_t cand : candidates)
              if (p[cand] > bestValue)
              {
                bestValue = p[cand];
                best = cand;
              }
            y[o] = bestValue;
            argmax[o] = best;
          }
      }
    return y;
  }

  template<typename T>
  Tensor<T> maxPool2Backward(const Tensor<T>& dy, const Shape& xShape, std::span<const std::uint32_t> argmax)
  {
    Tensor<T> dx(xShape);
    const Shape& s = dy.shape();
    const std::size_t plane = s.planeSize();
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
      {
        T* p = dx.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i, ++o)
          p[argmax[o]] += dy[o];
      }
    return dx;
  }

#define DEMC_INSTANTIATE(T)                                                                              \
  template Tensor<T> conv2dForward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, int, int);   \
  template Tensor<T> conv2dBackwardData<T>(const Tensor<T>&, const Tensor<T>&, const Shape&, int, int);   \
  template Tensor<T> conv2dBackwardWeight<T>(const Tensor<T>&, const Tensor<T>&, const Shape&, int, int); \
  template Tensor<T> channelSum<T>(const Tensor<T>&);                                                    \
  template void addChannelBias<T>(Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> maxPool2Forward<T>(const Tensor<T>&, std::vector<std::uint32_t>&);                  \
  template Tensor<T> maxPool2Backward<T>(const Tensor<T>&, const Shape&, std::span<const std::uint32_t>);

  DEMC_INSTANTIATE(float)
  DEMC_INSTANTIATE(double)

#undef DEMC_INSTANTIATE

} // namespace demc::ad::kernels
