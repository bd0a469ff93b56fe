#pragma once

#include "arppg/ops.hpp"

namespace arppg {

// Per-channel normalization over every other axis of the tensor, followed by
// learned scale and shift. channel_axis selects the channel dimension, so the
// same op covers C x H x W feature maps (axis 0) and N x C x D x H x W
// backbone activations (axis 1). Statistics always come from the current
// input, which keeps training and inference deterministic.
inline Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                           int channel_axis = 0, double eps = 1e-5) {
    const Shape& s = x.shape();
    if (channel_axis < 0 || channel_axis >= static_cast<int>(s.size()))
        throw ArgumentError("channel_norm: bad channel axis");
    int C = s[channel_axis];
    if (gamma.numel() != C || beta.numel() != C)
        throw ShapeError("channel_norm: scale/shift length must equal channel count " +
                         std::to_string(C));
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < channel_axis; ++i) outer *= s[i];
    for (size_t i = channel_axis + 1; i < s.size(); ++i) inner *= s[i];
    int64_t M = outer * inner;
    if (M <= 1)
        throw ArgumentError("channel_norm: degenerate stats scope of " + std::to_string(M) +
                            " element(s)");

    const auto& in = x.data();
    auto mu = std::make_shared<std::vector<double>>(C);
    auto inv_sigma = std::make_shared<std::vector<double>>(C);
    auto xhat = std::make_shared<std::vector<double>>(in.size());
    std::vector<double> out(in.size());
    const auto& gd = gamma.data();
    const auto& bd = beta.data();
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int64_t o = 0; o < outer; ++o) {
            const double* p = in.data() + (o * C + c) * inner;
            for (int64_t i = 0; i < inner; ++i) {
                sum += p[i];
                sq += p[i] * p[i];
            }
        }
        double m = sum / M;
        double var = sq / M - m * m;
        if (var < 0.0) var = 0.0;
        (*mu)[c] = m;
        (*inv_sigma)[c] = 1.0 / std::sqrt(var + eps);
        for (int64_t o = 0; o < outer; ++o) {
            const double* p = in.data() + (o * C + c) * inner;
            double* xh = xhat->data() + (o * C + c) * inner;
            double* q = out.data() + (o * C + c) * inner;
            for (int64_t i = 0; i < inner; ++i) {
                xh[i] = (p[i] - m) * (*inv_sigma)[c];
                q[i] = gd[c] * xh[i] + bd[c];
            }
        }
    }

    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    auto backfn = [xn, gn, bn, C, outer, inner, M, mu, inv_sigma, xhat](TensorNode& self) {
        for (int c = 0; c < C; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t o = 0; o < outer; ++o) {
                const double* dy = self.grad.data() + (o * C + c) * inner;
                const double* xh = xhat->data() + (o * C + c) * inner;
                for (int64_t i = 0; i < inner; ++i) {
                    sum_dy += dy[i];
                    sum_dy_xhat += dy[i] * xh[i];
                }
            }
            if (gn->requires_grad) gn->grad[c] += sum_dy_xhat;
            if (bn->requires_grad) bn->grad[c] += sum_dy;
            if (xn->requires_grad) {
                double g = gn->data[c] * (*inv_sigma)[c];
                double mean_dy = sum_dy / M;
                double mean_dy_xhat = sum_dy_xhat / M;
                for (int64_t o = 0; o < outer; ++o) {
                    const double* dy = self.grad.data() + (o * C + c) * inner;
                    const double* xh = xhat->data() + (o * C + c) * inner;
                    double* dx = xn->grad.data() + (o * C + c) * inner;
                    for (int64_t i = 0; i < inner; ++i)
                        dx[i] += g * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
                }
            }
        }
    };
    return make_op_node(s, std::move(out), {xn, gn, bn}, std::move(backfn));
}

}  // namespace arppg
