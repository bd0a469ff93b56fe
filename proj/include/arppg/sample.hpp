#pragma once

#include "arppg/ops.hpp"

namespace arppg {

namespace detail {

// Half-pixel-center source coordinate with border clamp, split into the lower
// index and the fractional weight of the upper neighbor.
inline void resize_axis_weights(int src, int dst, std::vector<int>& lo, std::vector<double>& frac) {
    lo.resize(dst);
    frac.resize(dst);
    double r = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
        double c = (i + 0.5) * r - 0.5;
        if (c < 0.0) c = 0.0;
        if (c > src - 1) c = src - 1;
        int l = static_cast<int>(std::floor(c));
        if (l > src - 2) l = src - 2;
        if (l < 0) l = 0;
        lo[i] = l;
        frac[i] = src == 1 ? 0.0 : c - l;
    }
}

}  // namespace detail

// Bilinear resize C x h x w -> C x H x W (half-pixel centers, border clamp).
inline Tensor bilinear_resize(const Tensor& input, int H, int W) {
    const Shape& s = input.shape();
    if (s.size() != 3) throw ShapeError("bilinear_resize: input rank must be 3, got " + shape_str(s));
    if (H < 1 || W < 1) throw ArgumentError("bilinear_resize: target extents must be positive");
    int C = s[0], h = s[1], w = s[2];
    if (h == H && w == W) {
        // identity resize is exact
        auto in_n = input.node();
        return make_op_node(s, input.data(), {in_n}, [in_n](TensorNode& self) {
            for (size_t i = 0; i < self.grad.size(); ++i) in_n->grad[i] += self.grad[i];
        });
    }
    std::vector<int> i0, j0;
    std::vector<double> fi, fj;
    detail::resize_axis_weights(h, H, i0, fi);
    detail::resize_axis_weights(w, W, j0, fj);
    if (h == 1) std::fill(fi.begin(), fi.end(), 0.0);
    if (w == 1) std::fill(fj.begin(), fj.end(), 0.0);

    std::vector<double> out(static_cast<int64_t>(C) * H * W);
    const auto& in = input.data();
    for (int c = 0; c < C; ++c) {
        const double* src = in.data() + static_cast<int64_t>(c) * h * w;
        double* dst = out.data() + static_cast<int64_t>(c) * H * W;
        for (int i = 0; i < H; ++i) {
            int r0 = i0[i], r1 = std::min(r0 + 1, h - 1);
            double a = fi[i];
            for (int j = 0; j < W; ++j) {
                int c0 = j0[j], c1 = std::min(c0 + 1, w - 1);
                double b = fj[j];
                dst[static_cast<int64_t>(i) * W + j] =
                    (1 - a) * ((1 - b) * src[r0 * w + c0] + b * src[r0 * w + c1]) +
                    a * ((1 - b) * src[r1 * w + c0] + b * src[r1 * w + c1]);
            }
        }
    }
    auto in_n = input.node();
    auto backfn = [in_n, C, h, w, H, W, i0, j0, fi, fj](TensorNode& self) {
        for (int c = 0; c < C; ++c) {
            double* g = in_n->grad.data() + static_cast<int64_t>(c) * h * w;
            const double* dg = self.grad.data() + static_cast<int64_t>(c) * H * W;
            for (int i = 0; i < H; ++i) {
                int r0 = i0[i], r1 = std::min(r0 + 1, h - 1);
                double a = fi[i];
                for (int j = 0; j < W; ++j) {
                    int c0 = j0[j], c1 = std::min(c0 + 1, w - 1);
                    double b = fj[j];
                    double v = dg[static_cast<int64_t>(i) * W + j];
                    g[r0 * w + c0] += (1 - a) * (1 - b) * v;
                    g[r0 * w + c1] += (1 - a) * b * v;
                    g[r1 * w + c0] += a * (1 - b) * v;
                    g[r1 * w + c1] += a * b * v;
                }
            }
        }
    };
    return make_op_node({C, H, W}, std::move(out), {in_n}, std::move(backfn));
}

// Receptive-field expansion: stacks the n x n shifted copies of the input on
// channels. Block k (row-major offset order) holds input shifted by
// (di_k, dj_k), out-of-bounds reads as zero. C x H x W -> (n^2 C) x H x W.
inline Tensor unfold_neighbors(const Tensor& input, int n) {
    if (n < 1 || n % 2 == 0)
        throw ArgumentError("unfold_neighbors: n must be odd and positive, got " + std::to_string(n));
    const Shape& s = input.shape();
    if (s.size() != 3) throw ShapeError("unfold_neighbors: input rank must be 3, got " + shape_str(s));
    int C = s[0], H = s[1], W = s[2];
    int r = (n - 1) / 2;
    std::vector<double> out(static_cast<int64_t>(n) * n * C * H * W, 0.0);
    const auto& in = input.data();
    int64_t plane = static_cast<int64_t>(H) * W;
    for (int k = 0; k < n * n; ++k) {
        int di = k / n - r, dj = k % n - r;
        for (int c = 0; c < C; ++c) {
            double* dst = out.data() + (static_cast<int64_t>(k) * C + c) * plane;
            const double* src = in.data() + static_cast<int64_t>(c) * plane;
            for (int i = 0; i < H; ++i) {
                int si = i + di;
                if (si < 0 || si >= H) continue;
                for (int j = 0; j < W; ++j) {
                    int sj = j + dj;
                    if (sj >= 0 && sj < W) dst[static_cast<int64_t>(i) * W + j] = src[static_cast<int64_t>(si) * W + sj];
                }
            }
        }
    }
    auto in_n = input.node();
    auto backfn = [in_n, C, H, W, n, r, plane](TensorNode& self) {
        for (int k = 0; k < n * n; ++k) {
            int di = k / n - r, dj = k % n - r;
            for (int c = 0; c < C; ++c) {
                const double* dg = self.grad.data() + (static_cast<int64_t>(k) * C + c) * plane;
                double* g = in_n->grad.data() + static_cast<int64_t>(c) * plane;
                for (int i = 0; i < H; ++i) {
                    int si = i + di;
                    if (si < 0 || si >= H) continue;
                    for (int j = 0; j < W; ++j) {
                        int sj = j + dj;
                        if (sj >= 0 && sj < W)
                            g[static_cast<int64_t>(si) * W + sj] += dg[static_cast<int64_t>(i) * W + j];
                    }
                }
            }
        }
    };
    return make_op_node({n * n * C, H, W}, std::move(out), {in_n}, std::move(backfn));
}

// Backward warp: output(i,j) samples input at (i + v(i,j), j + u(i,j)),
// bilinear with border clamp. flow is 2 x H x W with channel 0 = u
// (horizontal) and channel 1 = v (vertical), treated as a constant.
inline Tensor grid_sample(const Tensor& input, const Tensor& flow) {
    const Shape& s = input.shape();
    if (s.size() != 3) throw ShapeError("grid_sample: input rank must be 3, got " + shape_str(s));
    int C = s[0], H = s[1], W = s[2];
    const Shape& fs = flow.shape();
    if (fs.size() != 3 || fs[0] != 2 || fs[1] != H || fs[2] != W)
        throw ShapeError("grid_sample: flow " + shape_str(fs) + " does not match input " + shape_str(s));
    int64_t plane = static_cast<int64_t>(H) * W;
    const double* u = flow.data().data();
    const double* v = flow.data().data() + plane;

    // Per-pixel source corners and weights, shared by forward and backward.
    auto lo_i = std::make_shared<std::vector<int>>(plane);
    auto lo_j = std::make_shared<std::vector<int>>(plane);
    auto fr_i = std::make_shared<std::vector<double>>(plane);
    auto fr_j = std::make_shared<std::vector<double>>(plane);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            int64_t p = static_cast<int64_t>(i) * W + j;
            double si = i + v[p], sj = j + u[p];
            si = std::min(std::max(si, 0.0), static_cast<double>(H - 1));
            sj = std::min(std::max(sj, 0.0), static_cast<double>(W - 1));
            int li = std::min(static_cast<int>(std::floor(si)), H - 2 < 0 ? 0 : H - 2);
            int lj = std::min(static_cast<int>(std::floor(sj)), W - 2 < 0 ? 0 : W - 2);
            (*lo_i)[p] = li;
            (*lo_j)[p] = lj;
            (*fr_i)[p] = H == 1 ? 0.0 : si - li;
            (*fr_j)[p] = W == 1 ? 0.0 : sj - lj;
        }

    std::vector<double> out(static_cast<int64_t>(C) * plane);
    const auto& in = input.data();
    for (int c = 0; c < C; ++c) {
        const double* src = in.data() + static_cast<int64_t>(c) * plane;
        double* dst = out.data() + static_cast<int64_t>(c) * plane;
        for (int64_t p = 0; p < plane; ++p) {
            int li = (*lo_i)[p], lj = (*lo_j)[p];
            int hi = std::min(li + 1, H - 1), hj = std::min(lj + 1, W - 1);
            double a = (*fr_i)[p], b = (*fr_j)[p];
            dst[p] = (1 - a) * ((1 - b) * src[static_cast<int64_t>(li) * W + lj] + b * src[static_cast<int64_t>(li) * W + hj]) +
                     a * ((1 - b) * src[static_cast<int64_t>(hi) * W + lj] + b * src[static_cast<int64_t>(hi) * W + hj]);
        }
    }
    auto in_n = input.node();
    auto backfn = [in_n, C, H, W, plane, lo_i, lo_j, fr_i, fr_j](TensorNode& self) {
        for (int c = 0; c < C; ++c) {
            double* g = in_n->grad.data() + static_cast<int64_t>(c) * plane;
            const double* dg = self.grad.data() + static_cast<int64_t>(c) * plane;
            for (int64_t p = 0; p < plane; ++p) {
                int li = (*lo_i)[p], lj = (*lo_j)[p];
                int hi = std::min(li + 1, H - 1), hj = std::min(lj + 1, W - 1);
                double a = (*fr_i)[p], b = (*fr_j)[p];
                double x = dg[p];
                g[static_cast<int64_t>(li) * W + lj] += (1 - a) * (1 - b) * x;
                g[static_cast<int64_t>(li) * W + hj] += (1 - a) * b * x;
                g[static_cast<int64_t>(hi) * W + lj] += a * (1 - b) * x;
                g[static_cast<int64_t>(hi) * W + hj] += a * b * x;
            }
        }
    };
    return make_op_node({C, H, W}, std::move(out), {in_n}, std::move(backfn));
}

}  // namespace arppg
