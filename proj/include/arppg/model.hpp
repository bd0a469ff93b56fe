#pragma once

#include "arppg/pfe.hpp"
#include "arppg/tfa.hpp"

namespace arppg {

enum class TfaMode { Off, Single, Bidirectional };

inline std::string tfa_mode_str(TfaMode m) {
    switch (m) {
        case TfaMode::Off: return "off";
        case TfaMode::Single: return "single";
        default: return "bi";
    }
}

inline TfaMode tfa_mode_from_str(const std::string& s) {
    if (s == "off") return TfaMode::Off;
    if (s == "single") return TfaMode::Single;
    if (s == "bi") return TfaMode::Bidirectional;
    throw ArgumentError("unknown tfa mode '" + s + "' (expected off|single|bi)");
}

struct ModelConfig {
    int C = 16;
    int H = 64;
    int W = 64;
    int n = 3;
    int mlp_hidden = 128;
    int num_resblocks = 5;
    int backbone_channels = 32;
    bool use_pfe = true;
    bool use_rae = true;
    bool resblock_norm = true;
    TfaMode tfa_mode = TfaMode::Bidirectional;
    FlowConfig flow;

    // PFE's conv block halves extents, so with PFE disabled the feature
    // stream (and TFA alongside it) runs at half resolution.
    int stream_h() const { return use_pfe ? H : H / 2; }
    int stream_w() const { return use_pfe ? W : W / 2; }

    PfeConfig pfe_config() const {
        PfeConfig c;
        c.C = C;
        c.H = H;
        c.W = W;
        c.n = n;
        c.mlp_hidden = mlp_hidden;
        c.use_rae = use_rae;
        return c;
    }

    TfaConfig tfa_config() const {
        TfaConfig c;
        c.C = C;
        c.H = stream_h();
        c.W = stream_w();
        c.num_resblocks = num_resblocks;
        c.bidirectional = tfa_mode == TfaMode::Bidirectional;
        c.resblock_norm = resblock_norm;
        c.flow = flow;
        return c;
    }

    void validate() const {
        pfe_config().validate();
        if (tfa_mode != TfaMode::Off) tfa_config().validate();
        if (backbone_channels < 1) throw ArgumentError("ModelConfig: backbone_channels must be >= 1");
        if (stream_h() % 4 != 0 || stream_w() % 4 != 0)
            throw ShapeError("ModelConfig: feature extents " + std::to_string(stream_h()) + "x" +
                             std::to_string(stream_w()) + " must be divisible by 4 for backbone pooling");
    }
};

struct BackboneStage {
    Tensor w, b, gamma, beta;
};

struct BackboneParams {
    std::vector<BackboneStage> stages;  // 4 stages, 3x3x3 convs
    Tensor head_w, head_b;              // 1x1x1 conv to one channel

    static BackboneParams init(const ModelConfig& cfg, Rng& rng) {
        auto he = [&](const Shape& s, int fan_in) {
            std::vector<double> v(shape_numel(s));
            double std = std::sqrt(2.0 / fan_in);
            for (auto& x : v) x = rng.normal(0.0, std);
            return Tensor::param(s, std::move(v));
        };
        BackboneParams p;
        int ch = cfg.backbone_channels;
        int in = cfg.C;
        for (int s = 0; s < 4; ++s) {
            BackboneStage st;
            st.w = he({ch, in, 3, 3, 3}, in * 27);
            st.b = Tensor::param({ch}, std::vector<double>(ch, 0.0));
            st.gamma = Tensor::param({ch}, std::vector<double>(ch, 1.0));
            st.beta = Tensor::param({ch}, std::vector<double>(ch, 0.0));
            p.stages.push_back(st);
            in = ch;
        }
        p.head_w = he({1, ch, 1, 1, 1}, ch);
        p.head_b = Tensor::param({1}, {0.0});
        return p;
    }

    void collect(ParamSet& out, const std::string& prefix) const {
        for (size_t i = 0; i < stages.size(); ++i) {
            std::string base = prefix + ".stage" + std::to_string(i);
            out.push_back({base + ".w", stages[i].w});
            out.push_back({base + ".b", stages[i].b});
            out.push_back({base + ".gamma", stages[i].gamma});
            out.push_back({base + ".beta", stages[i].beta});
        }
        out.push_back({prefix + ".head_w", head_w});
        out.push_back({prefix + ".head_b", head_b});
    }
};

struct ModelParams {
    PfeParams pfe;    // view-1 instance; the only one used at inference
    PfeParams pfe2;   // independent second view for dual-view training
    TfaParams tfa;
    BackboneParams backbone;

    static ModelParams init(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        ModelParams p;
        p.pfe = PfeParams::init(cfg.pfe_config(), rng);
        p.pfe2 = PfeParams::init(cfg.pfe_config(), rng);
        if (cfg.tfa_mode != TfaMode::Off) p.tfa = TfaParams::init(cfg.tfa_config(), rng);
        p.backbone = BackboneParams::init(cfg, rng);
        return p;
    }

    ParamSet collect(const ModelConfig& cfg) const {
        ParamSet out;
        pfe.collect(out, "pfe");
        pfe2.collect(out, "pfe2");
        if (cfg.tfa_mode != TfaMode::Off) tfa.collect(out, "tfa");
        backbone.collect(out, "backbone");
        return out;
    }
};

// Elementwise sum of the structure (PFE) and motion (TFA) streams.
inline Tensor fuse(const Tensor& x_st, const Tensor& x_mo) {
    if (x_st.shape() != x_mo.shape())
        throw ShapeError("fuse: extent mismatch " + shape_str(x_st.shape()) + " vs " +
                         shape_str(x_mo.shape()));
    return add(x_st, x_mo);
}

namespace detail {

inline Tensor bias5(const Tensor& x, const Tensor& bias) {
    const Shape& s = x.shape();  // 1 x C x D x H x W
    Tensor flat = reshape(x, {s[1], s[2], s[3], s[4]});
    return reshape(add_channel_bias(flat, bias), s);
}

}  // namespace detail

// Compact spatio-temporal regressor: four 3x3x3 conv stages with per-channel
// norm + relu, spatial-only 1x2x2 pooling after stages 1 and 2, then global
// spatial averaging and a 1x1x1 head. Temporal extent is preserved.
inline Tensor backbone_forward(const Tensor& x_st_mo, const BackboneParams& params) {
    const Shape& s = x_st_mo.shape();
    if (s.size() != 4) throw ShapeError("backbone_forward: input must be T x C x H x W, got " + shape_str(s));
    int T = s[0], C = s[1], H = s[2], W = s[3];
    if (H % 4 != 0 || W % 4 != 0)
        throw ShapeError("backbone_forward: spatial extents " + std::to_string(H) + "x" +
                         std::to_string(W) + " not divisible by the pooling plan");
    // T x C x H x W -> 1 x C x T x H x W via transpose of the leading axes.
    std::vector<double> perm(x_st_mo.numel());
    {
        const auto& in = x_st_mo.data();
        int64_t hw = static_cast<int64_t>(H) * W;
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < C; ++c)
                std::copy_n(&in[(static_cast<int64_t>(t) * C + c) * hw], hw,
                            &perm[(static_cast<int64_t>(c) * T + t) * hw]);
    }
    auto xn = x_st_mo.node();
    Tensor x = make_op_node({1, C, T, H, W}, std::move(perm), {xn},
                            [xn, T, C, H, W](TensorNode& self) {
                                if (!xn->requires_grad) return;
                                int64_t hw = static_cast<int64_t>(H) * W;
                                for (int t = 0; t < T; ++t)
                                    for (int c = 0; c < C; ++c) {
                                        const double* g = &self.grad[(static_cast<int64_t>(c) * T + t) * hw];
                                        double* dst = &xn->grad[(static_cast<int64_t>(t) * C + c) * hw];
                                        for (int64_t i = 0; i < hw; ++i) dst[i] += g[i];
                                    }
                            });
    for (size_t i = 0; i < params.stages.size(); ++i) {
        const auto& st = params.stages[i];
        x = detail::bias5(conv3d(x, st.w, 1), st.b);
        x = channel_norm(x, st.gamma, st.beta, /*channel_axis=*/1);
        x = relu(x);
        if (i == 0 || i == 1) x = max_pool3d(x, 1, 2, 2);
    }
    // Global spatial average: mean over H, W per (channel, t).
    const Shape& xs = x.shape();
    int ch = xs[1], ph = xs[3], pw = xs[4];
    int64_t hw = static_cast<int64_t>(ph) * pw;
    std::vector<double> pooled(static_cast<int64_t>(ch) * T);
    {
        const auto& in = x.data();
        for (int64_t j = 0; j < static_cast<int64_t>(ch) * T; ++j) {
            double acc = 0.0;
            for (int64_t i = 0; i < hw; ++i) acc += in[j * hw + i];
            pooled[j] = acc / static_cast<double>(hw);
        }
    }
    auto pn = x.node();
    Tensor avg = make_op_node({1, ch, T, 1, 1}, std::move(pooled), {pn}, [pn, ch, T, hw](TensorNode& self) {
        if (!pn->requires_grad) return;
        for (int64_t j = 0; j < static_cast<int64_t>(ch) * T; ++j) {
            double g = self.grad[j] / static_cast<double>(hw);
            for (int64_t i = 0; i < hw; ++i) pn->grad[j * hw + i] += g;
        }
    });
    Tensor y = detail::bias5(conv3d(avg, params.head_w, 0), params.head_b);
    return reshape(y, {T});
}

// Full pipeline for one view: PFE structure stream + TFA motion stream,
// fused and regressed to a length-T signal. `view2` selects the second
// (unshared) PFE instance during dual-view training.
inline Tensor model_forward(const VideoClip& clip, const ModelParams& params,
                            const ModelConfig& cfg, bool view2 = false,
                            const TfaFlows* flows = nullptr) {
    cfg.validate();
    if (clip.empty()) throw ArgumentError("model_forward: empty clip");
    const PfeParams& pfe_params = view2 ? params.pfe2 : params.pfe;
    Tensor x_st;
    if (cfg.use_pfe) {
        std::vector<Tensor> feats;
        feats.reserve(clip.size());
        for (const auto& f : clip) feats.push_back(conv_block(f, pfe_params));
        x_st = pfe_sequence(feats, pfe_params, cfg.pfe_config());
    } else {
        // Ablation baseline: fixed-resolution conv features, no per-position MLP.
        std::vector<Tensor> feats;
        feats.reserve(clip.size());
        for (const auto& f : clip)
            feats.push_back(conv_block(bilinear_resize(f, cfg.H, cfg.W), pfe_params));
        x_st = stack0(feats);
    }
    if (cfg.tfa_mode == TfaMode::Off) return backbone_forward(x_st, params.backbone);
    Tensor x_mo = tfa_forward(clip, params.tfa, cfg.tfa_config(), flows);
    return backbone_forward(fuse(x_st, x_mo), params.backbone);
}

}  // namespace arppg
