#pragma once

#include "arppg/conv.hpp"
#include "arppg/norm.hpp"
#include "arppg/ops.hpp"
#include "arppg/optim.hpp"
#include "arppg/sample.hpp"

namespace arppg {

// Crop to the top-left H2 x W2 region (drops trailing rows/columns).
inline Tensor crop2d(const Tensor& x, int H2, int W2) {
    const Shape& s = x.shape();
    if (s.size() != 3) throw ShapeError("crop2d: input rank must be 3");
    int C = s[0], H = s[1], W = s[2];
    if (H2 > H || W2 > W) throw ArgumentError("crop2d: crop larger than input");
    if (H2 == H && W2 == W) return x;
    std::vector<double> out(static_cast<int64_t>(C) * H2 * W2);
    const auto& in = x.data();
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H2; ++i)
            for (int j = 0; j < W2; ++j)
                out[(static_cast<int64_t>(c) * H2 + i) * W2 + j] =
                    in[(static_cast<int64_t>(c) * H + i) * W + j];
    auto xn = x.node();
    return make_op_node({C, H2, W2}, std::move(out), {xn}, [xn, C, H, W, H2, W2](TensorNode& self) {
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H2; ++i)
                for (int j = 0; j < W2; ++j)
                    xn->grad[(static_cast<int64_t>(c) * H + i) * W + j] +=
                        self.grad[(static_cast<int64_t>(c) * H2 + i) * W2 + j];
    });
}

struct PfeConfig {
    int C = 16;
    int H = 64;
    int W = 64;
    int n = 3;
    int mlp_hidden = 128;
    bool use_rae = true;

    int mlp_in() const { return n * n * C + (use_rae ? 2 : 0); }

    void validate() const {
        if (n < 1 || n % 2 == 0) throw ArgumentError("PfeConfig: n must be odd, got " + std::to_string(n));
        if (C < 1 || H < 1 || W < 1) throw ArgumentError("PfeConfig: C, H, W must be positive");
    }
};

// ConvBlock weights plus the two per-position MLP layers of the facial
// feature encoder.
struct PfeParams {
    Tensor conv_w;      // C x 3 x 5 x 5
    Tensor norm_gamma;  // C
    Tensor norm_beta;   // C
    Tensor mlp_w1;      // hidden x (n^2 C + 2)
    Tensor mlp_b1;      // hidden
    Tensor mlp_w2;      // C x hidden
    Tensor mlp_b2;      // C

    static PfeParams init(const PfeConfig& cfg, Rng& rng) {
        cfg.validate();
        PfeParams p;
        auto he = [&](const Shape& s, int fan_in) {
            std::vector<double> v(shape_numel(s));
            double std = std::sqrt(2.0 / fan_in);
            for (auto& x : v) x = rng.normal(0.0, std);
            return Tensor::param(s, std::move(v));
        };
        p.conv_w = he({cfg.C, 3, 5, 5}, 3 * 25);
        p.norm_gamma = Tensor::param({cfg.C}, std::vector<double>(cfg.C, 1.0));
        p.norm_beta = Tensor::param({cfg.C}, std::vector<double>(cfg.C, 0.0));
        int in = cfg.mlp_in();
        p.mlp_w1 = he({cfg.mlp_hidden, in}, in);
        p.mlp_b1 = Tensor::param({cfg.mlp_hidden}, std::vector<double>(cfg.mlp_hidden, 0.0));
        p.mlp_w2 = he({cfg.C, cfg.mlp_hidden}, cfg.mlp_hidden);
        p.mlp_b2 = Tensor::param({cfg.C}, std::vector<double>(cfg.C, 0.0));
        return p;
    }

    void collect(ParamSet& out, const std::string& prefix) const {
        out.push_back({prefix + ".conv_w", conv_w});
        out.push_back({prefix + ".norm_gamma", norm_gamma});
        out.push_back({prefix + ".norm_beta", norm_beta});
        out.push_back({prefix + ".mlp_w1", mlp_w1});
        out.push_back({prefix + ".mlp_b1", mlp_b1});
        out.push_back({prefix + ".mlp_w2", mlp_w2});
        out.push_back({prefix + ".mlp_b2", mlp_b2});
    }
};

// ConvBlock: 5x5 conv (pad 2), per-channel norm, relu, 2x2 max pool. An odd
// trailing row/column is dropped before pooling.
inline Tensor conv_block(const Tensor& frame, const PfeParams& params) {
    const Shape& s = frame.shape();
    if (s.size() != 3 || s[0] != 3)
        throw ShapeError("conv_block: frame must be 3 x h x w, got " + shape_str(s));
    int h = s[1], w = s[2];
    if (h < 2 || w < 2)
        throw ArgumentError("conv_block: frame " + shape_str(s) + " smaller than 2x2");
    Tensor y = conv2d(frame, params.conv_w, 1, 2);
    y = channel_norm(y, params.norm_gamma, params.norm_beta);
    y = relu(y);
    y = crop2d(y, h - h % 2, w - w % 2);
    return max_pool2d(y, 2);
}

// Scaling-ratio channels [sigma_H, sigma_W] = [h/H, w/W], constant over
// positions. Plain data, not part of the differentiation chain.
inline Tensor rae_encode(int h, int w, int H, int W) {
    if (h < 1 || w < 1 || H < 1 || W < 1) throw ArgumentError("rae_encode: extents must be positive");
    std::vector<double> v(static_cast<int64_t>(2) * H * W);
    double sh = static_cast<double>(h) / H;
    double sw = static_cast<double>(w) / W;
    int64_t plane = static_cast<int64_t>(H) * W;
    std::fill(v.begin(), v.begin() + plane, sh);
    std::fill(v.begin() + plane, v.end(), sw);
    return Tensor::from({2, H, W}, std::move(v));
}

// Arbitrary-resolution features -> fixed-size facial structure features:
// resize, neighborhood expansion, RAE concat, per-position MLP.
inline Tensor pfe_forward(const Tensor& x_ar, const PfeParams& params, const PfeConfig& cfg) {
    const Shape& s = x_ar.shape();
    if (s.size() != 3 || s[0] != cfg.C)
        throw ShapeError("pfe_forward: expected " + std::to_string(cfg.C) + " x h x w input, got " +
                         shape_str(s));
    Tensor x_cr = bilinear_resize(x_ar, cfg.H, cfg.W);
    Tensor expanded = unfold_neighbors(x_cr, cfg.n);
    Tensor mlp_in = cfg.use_rae
                        ? concat0({expanded, rae_encode(s[1], s[2], cfg.H, cfg.W)})
                        : expanded;
    Tensor hidden = relu(linear_per_position(mlp_in, params.mlp_w1, params.mlp_b1));
    return linear_per_position(hidden, params.mlp_w2, params.mlp_b2);
}

// Stack of per-frame PFE outputs: T x C x H x W.
inline Tensor pfe_sequence(const std::vector<Tensor>& frame_features, const PfeParams& params,
                           const PfeConfig& cfg) {
    if (frame_features.empty()) throw ArgumentError("pfe_sequence: empty clip");
    std::vector<Tensor> outs;
    outs.reserve(frame_features.size());
    for (const auto& f : frame_features) outs.push_back(pfe_forward(f, params, cfg));
    return stack0(outs);
}

}  // namespace arppg
