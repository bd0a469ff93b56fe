#pragma once

#include <cblas.h>

#include "arppg/ops.hpp"

namespace arppg {

namespace detail {

// im2col over one image: out is (Cin*kh*kw) x (Ho*Wo), row-major.
inline void im2col2d(const double* img, int Cin, int H, int W, int kh, int kw, int sh, int sw,
                     int ph, int pw, int Ho, int Wo, double* col) {
    for (int c = 0; c < Cin; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                double* row = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) *
                                        (static_cast<int64_t>(Ho) * Wo);
                for (int oi = 0; oi < Ho; ++oi) {
                    int ii = oi * sh + ki - ph;
                    if (ii < 0 || ii >= H) {
                        std::fill(row + static_cast<int64_t>(oi) * Wo,
                                  row + static_cast<int64_t>(oi + 1) * Wo, 0.0);
                        continue;
                    }
                    const double* src = img + (static_cast<int64_t>(c) * H + ii) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        int jj = oj * sw + kj - pw;
                        row[static_cast<int64_t>(oi) * Wo + oj] =
                            (jj >= 0 && jj < W) ? src[jj] : 0.0;
                    }
                }
            }
}

inline void col2im2d(const double* col, int Cin, int H, int W, int kh, int kw, int sh, int sw,
                     int ph, int pw, int Ho, int Wo, double* img_grad) {
    for (int c = 0; c < Cin; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const double* row = col + ((static_cast<int64_t>(c) * kh + ki) * kw + kj) *
                                              (static_cast<int64_t>(Ho) * Wo);
                for (int oi = 0; oi < Ho; ++oi) {
                    int ii = oi * sh + ki - ph;
                    if (ii < 0 || ii >= H) continue;
                    double* dst = img_grad + (static_cast<int64_t>(c) * H + ii) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        int jj = oj * sw + kj - pw;
                        if (jj >= 0 && jj < W) dst[jj] += row[static_cast<int64_t>(oi) * Wo + oj];
                    }
                }
            }
}

inline void dgemm(bool ta, bool tb, int M, int N, int K, double alpha, const double* A, int lda,
                  const double* B, int ldb, double beta, double* C, int ldc) {
    // Single-threaded BLAS keeps reductions in a fixed order so repeated runs
    // are bit-identical.
    [[maybe_unused]] static const bool pinned = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, M,
                N, K, alpha, A, lda, B, ldb, beta, C, ldc);
}

}  // namespace detail

// 2-D cross-correlation. input: N x Cin x H x W (or Cin x H x W), kernel:
// Cout x Cin x kh x kw, zero padding.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1, int pad = 0) {
    Shape in_shape = input.shape();
    bool batched = in_shape.size() == 4;
    if (!batched && in_shape.size() != 3)
        throw ShapeError("conv2d: input rank must be 3 or 4, got " + shape_str(in_shape));
    int N = batched ? in_shape[0] : 1;
    int Cin = in_shape[batched ? 1 : 0];
    int H = in_shape[batched ? 2 : 1];
    int W = in_shape[batched ? 3 : 2];
    const Shape& ks = kernel.shape();
    if (ks.size() != 4 || ks[1] != Cin)
        throw ShapeError("conv2d: kernel " + shape_str(ks) + " does not match input channels " +
                         std::to_string(Cin));
    int Cout = ks[0], kh = ks[2], kw = ks[3];
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1) throw ShapeError("conv2d: output would be empty");

    int64_t krows = static_cast<int64_t>(Cin) * kh * kw;
    int64_t cols = static_cast<int64_t>(Ho) * Wo;
    std::vector<double> col(krows * cols);
    std::vector<double> out(static_cast<int64_t>(N) * Cout * cols);
    for (int b = 0; b < N; ++b) {
        detail::im2col2d(input.data().data() + static_cast<int64_t>(b) * Cin * H * W, Cin, H, W,
                         kh, kw, stride, stride, pad, pad, Ho, Wo, col.data());
        detail::dgemm(false, false, Cout, static_cast<int>(cols), static_cast<int>(krows), 1.0,
                      kernel.data().data(), static_cast<int>(krows), col.data(),
                      static_cast<int>(cols), 0.0,
                      out.data() + static_cast<int64_t>(b) * Cout * cols, static_cast<int>(cols));
    }

    Shape out_shape = batched ? Shape{N, Cout, Ho, Wo} : Shape{Cout, Ho, Wo};
    auto in_n = input.node();
    auto k_n = kernel.node();
    auto backfn = [in_n, k_n, N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo, krows,
                   cols](TensorNode& self) {
        std::vector<double> col(krows * cols);
        std::vector<double> dcol(krows * cols);
        for (int b = 0; b < N; ++b) {
            const double* dout = self.grad.data() + static_cast<int64_t>(b) * Cout * cols;
            if (k_n->requires_grad || in_n->requires_grad)
                detail::im2col2d(in_n->data.data() + static_cast<int64_t>(b) * Cin * H * W, Cin,
                                 H, W, kh, kw, stride, stride, pad, pad, Ho, Wo, col.data());
            if (k_n->requires_grad)
                detail::dgemm(false, true, Cout, static_cast<int>(krows), static_cast<int>(cols),
                              1.0, dout, static_cast<int>(cols), col.data(),
                              static_cast<int>(cols), 1.0, k_n->grad.data(),
                              static_cast<int>(krows));
            if (in_n->requires_grad) {
                detail::dgemm(true, false, static_cast<int>(krows), static_cast<int>(cols), Cout,
                              1.0, k_n->data.data(), static_cast<int>(krows), dout,
                              static_cast<int>(cols), 0.0, dcol.data(), static_cast<int>(cols));
                detail::col2im2d(dcol.data(), Cin, H, W, kh, kw, stride, stride, pad, pad, Ho, Wo,
                                 in_n->grad.data() + static_cast<int64_t>(b) * Cin * H * W);
            }
        }
    };
    return make_op_node(out_shape, std::move(out), {in_n, k_n}, std::move(backfn));
}

// 3-D cross-correlation, stride 1. input: N x Cin x D x H x W, kernel:
// Cout x Cin x kd x kh x kw. im2col is built one output depth slice at a
// time to bound the scratch buffer.
inline Tensor conv3d(const Tensor& input, const Tensor& kernel, int pad = 1) {
    const Shape& is = input.shape();
    if (is.size() != 5) throw ShapeError("conv3d: input rank must be 5, got " + shape_str(is));
    int N = is[0], Cin = is[1], D = is[2], H = is[3], W = is[4];
    const Shape& ks = kernel.shape();
    if (ks.size() != 5 || ks[1] != Cin)
        throw ShapeError("conv3d: kernel " + shape_str(ks) + " does not match input channels " +
                         std::to_string(Cin));
    int Cout = ks[0], kd = ks[2], kh = ks[3], kw = ks[4];
    int Do = D + 2 * pad - kd + 1;
    int Ho = H + 2 * pad - kh + 1;
    int Wo = W + 2 * pad - kw + 1;
    if (Do < 1 || Ho < 1 || Wo < 1) throw ShapeError("conv3d: output would be empty");

    int64_t krows = static_cast<int64_t>(Cin) * kd * kh * kw;
    int64_t cols = static_cast<int64_t>(Ho) * Wo;
    int64_t rows2d = static_cast<int64_t>(Cin) * kh * kw;
    int64_t img = static_cast<int64_t>(H) * W;

    // Builds columns for output depth od into col (krows x cols): the kd
    // depth taps are kd stacked 2-D im2col blocks, zero where out of range.
    auto build_cols = [Cin, D, H, W, kd, kh, kw, pad, Ho, Wo, rows2d, cols,
                       img](const double* in, int od, double* colbuf) {
        for (int t = 0; t < kd; ++t) {
            int d = od + t - pad;
            double* block = colbuf + static_cast<int64_t>(t) * rows2d * cols;
            if (d < 0 || d >= D) {
                std::fill(block, block + rows2d * cols, 0.0);
                continue;
            }
            // gather the depth-d frame: channels are strided by D*img
            for (int c = 0; c < Cin; ++c)
                detail::im2col2d(in + (static_cast<int64_t>(c) * D + d) * img, 1, H, W, kh, kw, 1,
                                 1, pad, pad, Ho, Wo,
                                 block + static_cast<int64_t>(c) * kh * kw * cols);
        }
    };
    // Kernel layout is Cout x Cin x kd x kh x kw but build_cols orders rows as
    // (kd, Cin, kh, kw); permute the kernel to match.
    auto permute_kernel = [&](const double* k, double* out_k) {
        for (int co = 0; co < Cout; ++co)
            for (int c = 0; c < Cin; ++c)
                for (int t = 0; t < kd; ++t)
                    std::memcpy(out_k + ((static_cast<int64_t>(co) * kd + t) * Cin + c) * kh * kw,
                                k + ((static_cast<int64_t>(co) * Cin + c) * kd + t) * kh * kw,
                                sizeof(double) * kh * kw);
    };

    std::vector<double> kperm(static_cast<int64_t>(Cout) * krows);
    permute_kernel(kernel.data().data(), kperm.data());
    std::vector<double> col(krows * cols);
    std::vector<double> out(static_cast<int64_t>(N) * Cout * Do * cols);
    for (int b = 0; b < N; ++b) {
        const double* in = input.data().data() + static_cast<int64_t>(b) * Cin * D * img;
        for (int od = 0; od < Do; ++od) {
            build_cols(in, od, col.data());
            // out slice for depth od, strided by Do*cols per output channel
            for (int co = 0; co < Cout; ++co)
                detail::dgemm(false, false, 1, static_cast<int>(cols), static_cast<int>(krows),
                              1.0, kperm.data() + static_cast<int64_t>(co) * krows,
                              static_cast<int>(krows), col.data(), static_cast<int>(cols), 0.0,
                              out.data() +
                                  ((static_cast<int64_t>(b) * Cout + co) * Do + od) * cols,
                              static_cast<int>(cols));
        }
    }

    auto in_n = input.node();
    auto k_n = kernel.node();
    auto backfn = [in_n, k_n, N, Cin, D, H, W, Cout, kd, kh, kw, pad, Do, Ho, Wo, krows, cols,
                   rows2d, img, build_cols](TensorNode& self) {
        std::vector<double> col(krows * cols);
        std::vector<double> dcol(krows * cols);
        std::vector<double> dkperm(static_cast<int64_t>(Cout) * krows, 0.0);
        std::vector<double> kperm(static_cast<int64_t>(Cout) * krows);
        for (int co = 0; co < Cout; ++co)
            for (int c = 0; c < Cin; ++c)
                for (int t = 0; t < kd; ++t)
                    std::memcpy(
                        kperm.data() + ((static_cast<int64_t>(co) * kd + t) * Cin + c) * kh * kw,
                        k_n->data.data() + ((static_cast<int64_t>(co) * Cin + c) * kd + t) * kh * kw,
                        sizeof(double) * kh * kw);
        for (int b = 0; b < N; ++b) {
            const double* in = in_n->data.data() + static_cast<int64_t>(b) * Cin * D * img;
            for (int od = 0; od < Do; ++od) {
                std::vector<double> dout(static_cast<int64_t>(Cout) * cols);
                for (int co = 0; co < Cout; ++co)
                    std::memcpy(dout.data() + static_cast<int64_t>(co) * cols,
                                self.grad.data() +
                                    ((static_cast<int64_t>(b) * Cout + co) * Do + od) * cols,
                                sizeof(double) * cols);
                build_cols(in, od, col.data());
                if (k_n->requires_grad)
                    detail::dgemm(false, true, Cout, static_cast<int>(krows),
                                  static_cast<int>(cols), 1.0, dout.data(),
                                  static_cast<int>(cols), col.data(), static_cast<int>(cols), 1.0,
                                  dkperm.data(), static_cast<int>(krows));
                if (in_n->requires_grad) {
                    detail::dgemm(true, false, static_cast<int>(krows), static_cast<int>(cols),
                                  Cout, 1.0, kperm.data(), static_cast<int>(krows), dout.data(),
                                  static_cast<int>(cols), 0.0, dcol.data(),
                                  static_cast<int>(cols));
                    double* din = in_n->grad.data() + static_cast<int64_t>(b) * Cin * D * img;
                    for (int t = 0; t < kd; ++t) {
                        int d = od + t - pad;
                        if (d < 0 || d >= D) continue;
                        const double* block = dcol.data() + static_cast<int64_t>(t) * rows2d * cols;
                        for (int c = 0; c < Cin; ++c)
                            detail::col2im2d(block + static_cast<int64_t>(c) * kh * kw * cols, 1,
                                             H, W, kh, kw, 1, 1, pad, pad, Ho, Wo,
                                             din + (static_cast<int64_t>(c) * D + d) * img);
                    }
                }
            }
        }
        if (k_n->requires_grad)
            for (int co = 0; co < Cout; ++co)
                for (int c = 0; c < Cin; ++c)
                    for (int t = 0; t < kd; ++t) {
                        const double* src =
                            dkperm.data() + ((static_cast<int64_t>(co) * kd + t) * Cin + c) * kh * kw;
                        double* dst = k_n->grad.data() +
                                      ((static_cast<int64_t>(co) * Cin + c) * kd + t) * kh * kw;
                        for (int i = 0; i < kh * kw; ++i) dst[i] += src[i];
                    }
    };
    return make_op_node({N, Cout, Do, Ho, Wo}, std::move(out), {in_n, k_n}, std::move(backfn));
}

// Pad-free max pooling on C x H x W; gradient goes to the first occurrence of
// the window maximum.
inline Tensor max_pool2d(const Tensor& input, int window = 2) {
    const Shape& s = input.shape();
    if (s.size() != 3) throw ShapeError("max_pool2d: input rank must be 3, got " + shape_str(s));
    int C = s[0], H = s[1], W = s[2];
    if (H % window || W % window)
        throw ShapeError("max_pool2d: extents " + shape_str(s) + " not divisible by window " +
                         std::to_string(window));
    int Ho = H / window, Wo = W / window;
    std::vector<double> out(static_cast<int64_t>(C) * Ho * Wo);
    auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
    const auto& in = input.data();
    for (int c = 0; c < C; ++c)
        for (int oi = 0; oi < Ho; ++oi)
            for (int oj = 0; oj < Wo; ++oj) {
                double best = -1e300;
                int64_t best_idx = -1;
                for (int di = 0; di < window; ++di)
                    for (int dj = 0; dj < window; ++dj) {
                        int64_t idx = (static_cast<int64_t>(c) * H + oi * window + di) * W +
                                      oj * window + dj;
                        // best_idx < 0 guard keeps NaN windows from producing
                        // an out-of-range gradient index
                        if (best_idx < 0 || in[idx] > best) {
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                int64_t o = (static_cast<int64_t>(c) * Ho + oi) * Wo + oj;
                out[o] = best;
                (*argmax)[o] = best_idx;
            }
    auto in_n = input.node();
    return make_op_node({C, Ho, Wo}, std::move(out), {in_n}, [in_n, argmax](TensorNode& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) in_n->grad[(*argmax)[i]] += self.grad[i];
    });
}

// Max pooling on N x C x D x H x W with per-axis windows (spatial-only when wd=1).
inline Tensor max_pool3d(const Tensor& input, int wd, int wh, int ww) {
    const Shape& s = input.shape();
    if (s.size() != 5) throw ShapeError("max_pool3d: input rank must be 5, got " + shape_str(s));
    int N = s[0], C = s[1], D = s[2], H = s[3], W = s[4];
    if (D % wd || H % wh || W % ww)
        throw ShapeError("max_pool3d: extents " + shape_str(s) + " not divisible by window");
    int Do = D / wd, Ho = H / wh, Wo = W / ww;
    std::vector<double> out(static_cast<int64_t>(N) * C * Do * Ho * Wo);
    auto argmax = std::make_shared<std::vector<int64_t>>(out.size());
    const auto& in = input.data();
    int64_t o = 0;
    for (int b = 0; b < N; ++b)
        for (int c = 0; c < C; ++c)
            for (int od = 0; od < Do; ++od)
                for (int oi = 0; oi < Ho; ++oi)
                    for (int oj = 0; oj < Wo; ++oj, ++o) {
                        double best = -1e300;
                        int64_t best_idx = -1;
                        for (int dd = 0; dd < wd; ++dd)
                            for (int di = 0; di < wh; ++di)
                                for (int dj = 0; dj < ww; ++dj) {
                                    int64_t idx =
                                        (((static_cast<int64_t>(b) * C + c) * D + od * wd + dd) *
                                             H +
                                         oi * wh + di) *
                                            W +
                                        oj * ww + dj;
                                    // best_idx < 0 guard keeps NaN windows from
                                    // producing an out-of-range gradient index
                                    if (best_idx < 0 || in[idx] > best) {
                                        best = in[idx];
                                        best_idx = idx;
                                    }
                                }
                        out[o] = best;
                        (*argmax)[o] = best_idx;
                    }
    auto in_n = input.node();
    return make_op_node({N, C, Do, Ho, Wo}, std::move(out), {in_n},
                        [in_n, argmax](TensorNode& self) {
                            for (size_t i = 0; i < self.grad.size(); ++i)
                                in_n->grad[(*argmax)[i]] += self.grad[i];
                        });
}

// Shared affine map applied independently at every spatial position; the 1x1
// convolution reading of a per-position MLP layer. x: Cin x H x W,
// weights: Cout x Cin, bias: Cout.
inline Tensor linear_per_position(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    const Shape& xs = x.shape();
    if (xs.size() != 3) throw ShapeError("linear_per_position: input rank must be 3");
    int Cin = xs[0], H = xs[1], W = xs[2];
    const Shape& ws = weights.shape();
    if (ws.size() != 2 || ws[1] != Cin)
        throw ShapeError("linear_per_position: weights " + shape_str(ws) +
                         " do not match input channels " + std::to_string(Cin));
    int Cout = ws[0];
    if (bias.numel() != Cout) throw ShapeError("linear_per_position: bias length mismatch");
    int64_t P = static_cast<int64_t>(H) * W;
    std::vector<double> out(static_cast<int64_t>(Cout) * P);
    detail::dgemm(false, false, Cout, static_cast<int>(P), Cin, 1.0, weights.data().data(), Cin,
                  x.data().data(), static_cast<int>(P), 0.0, out.data(), static_cast<int>(P));
    const auto& bd = bias.data();
    for (int c = 0; c < Cout; ++c)
        for (int64_t i = 0; i < P; ++i) out[c * P + i] += bd[c];
    auto xn = x.node(), wn = weights.node(), bn = bias.node();
    return make_op_node({Cout, H, W}, std::move(out), {xn, wn, bn},
                        [xn, wn, bn, Cin, Cout, P](TensorNode& self) {
                            if (xn->requires_grad)
                                detail::dgemm(true, false, Cin, static_cast<int>(P), Cout, 1.0,
                                              wn->data.data(), Cin, self.grad.data(),
                                              static_cast<int>(P), 1.0, xn->grad.data(),
                                              static_cast<int>(P));
                            if (wn->requires_grad)
                                detail::dgemm(false, true, Cout, Cin, static_cast<int>(P), 1.0,
                                              self.grad.data(), static_cast<int>(P),
                                              xn->data.data(), static_cast<int>(P), 1.0,
                                              wn->grad.data(), Cin);
                            if (bn->requires_grad)
                                for (int c = 0; c < Cout; ++c) {
                                    double g = 0.0;
                                    for (int64_t i = 0; i < P; ++i) g += self.grad[c * P + i];
                                    bn->grad[c] += g;
                                }
                        });
}

}  // namespace arppg
