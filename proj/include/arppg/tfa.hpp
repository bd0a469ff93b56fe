#pragma once

#include "arppg/conv.hpp"
#include "arppg/flow.hpp"
#include "arppg/norm.hpp"
#include "arppg/ops.hpp"
#include "arppg/optim.hpp"
#include "arppg/sample.hpp"

namespace arppg {

// Ordered frame sequence; each frame is 3 x h_i x w_i with its own extents.
using VideoClip = std::vector<Tensor>;

struct TfaConfig {
    int C = 16;
    int H = 64;
    int W = 64;
    int num_resblocks = 15;  // paper depth; training configs use a shallower stack
    bool bidirectional = true;
    bool resblock_norm = true;
    FlowConfig flow;

    void validate() const {
        if (num_resblocks < 1) throw ArgumentError("TfaConfig: num_resblocks must be >= 1");
    }
};

struct ResBlockParams {
    Tensor w1, b1;        // C x C x 3 x 3
    Tensor gamma, beta;   // C (unused when norm disabled)
    Tensor w2, b2;
};

struct TfaDirectionParams {
    Tensor entry_w, entry_b;  // C x (3+C) x 3 x 3
    std::vector<ResBlockParams> blocks;
};

struct TfaParams {
    TfaDirectionParams forward_dir, backward_dir;
    Tensor agg_w;  // C x 2C (C x C in single-direction mode)
    Tensor agg_b;

    static TfaParams init(const TfaConfig& cfg, Rng& rng) {
        cfg.validate();
        auto gauss = [&](const Shape& s, double std) {
            std::vector<double> v(shape_numel(s));
            for (auto& x : v) x = rng.normal(0.0, std);
            return Tensor::param(s, std::move(v));
        };
        auto he = [&](const Shape& s, int fan_in) { return gauss(s, std::sqrt(2.0 / fan_in)); };
        auto zeros = [&](int n) { return Tensor::param({n}, std::vector<double>(n, 0.0)); };
        auto ones = [&](int n) { return Tensor::param({n}, std::vector<double>(n, 1.0)); };
        auto make_dir = [&]() {
            TfaDirectionParams d;
            // The entry conv closes the recurrence h_i = f(frame_i, warp(h_{i-1})),
            // so its init gain on the state must stay below 1 or long clips blow
            // up exponentially; He init (gain sqrt(2) per step) overflows within
            // ~40 frames. Target gain 0.5 wrt the full concat input.
            d.entry_w = gauss({cfg.C, 3 + cfg.C, 3, 3}, 0.5 / std::sqrt((3 + cfg.C) * 9.0));
            d.entry_b = zeros(cfg.C);
            for (int i = 0; i < cfg.num_resblocks; ++i) {
                ResBlockParams rb;
                rb.w1 = he({cfg.C, cfg.C, 3, 3}, cfg.C * 9);
                rb.b1 = zeros(cfg.C);
                rb.gamma = ones(cfg.C);
                rb.beta = zeros(cfg.C);
                // small branch init keeps the resblock near identity so the
                // recurrence stays contractive without depending on the norm
                rb.w2 = gauss({cfg.C, cfg.C, 3, 3}, 0.1 * std::sqrt(2.0 / (cfg.C * 9)));
                rb.b2 = zeros(cfg.C);
                d.blocks.push_back(rb);
            }
            return d;
        };
        TfaParams p;
        p.forward_dir = make_dir();
        if (cfg.bidirectional) p.backward_dir = make_dir();
        int agg_in = cfg.bidirectional ? 2 * cfg.C : cfg.C;
        // modest scale so the motion stream starts comparable to the
        // structure stream it is summed with
        p.agg_w = gauss({cfg.C, agg_in}, 0.5 / std::sqrt((double)agg_in));
        p.agg_b = zeros(cfg.C);
        return p;
    }

    void collect(ParamSet& out, const std::string& prefix) const {
        auto dir = [&](const TfaDirectionParams& d, const std::string& name) {
            out.push_back({prefix + "." + name + ".entry_w", d.entry_w});
            out.push_back({prefix + "." + name + ".entry_b", d.entry_b});
            for (size_t i = 0; i < d.blocks.size(); ++i) {
                const auto& rb = d.blocks[i];
                std::string base = prefix + "." + name + ".rb" + std::to_string(i);
                out.push_back({base + ".w1", rb.w1});
                out.push_back({base + ".b1", rb.b1});
                out.push_back({base + ".gamma", rb.gamma});
                out.push_back({base + ".beta", rb.beta});
                out.push_back({base + ".w2", rb.w2});
                out.push_back({base + ".b2", rb.b2});
            }
        };
        dir(forward_dir, "fwd");
        if (backward_dir.entry_w.defined()) dir(backward_dir, "bwd");
        out.push_back({prefix + ".agg_w", agg_w});
        out.push_back({prefix + ".agg_b", agg_b});
    }
};

// Per-frame bilinear interpolation of an arbitrary-resolution clip to (H, W).
inline std::vector<Tensor> interp_sequence(const VideoClip& clip, int H, int W) {
    if (clip.empty()) throw ArgumentError("interp_sequence: empty clip");
    std::vector<Tensor> out;
    out.reserve(clip.size());
    for (const auto& f : clip) {
        if (f.shape().size() != 3 || f.shape()[0] != 3)
            throw ShapeError("interp_sequence: frame must be 3 x h x w, got " + shape_str(f.shape()));
        out.push_back(bilinear_resize(f, H, W));
    }
    return out;
}

inline Tensor interp_sequence_stacked(const VideoClip& clip, int H, int W) {
    return stack0(interp_sequence(clip, H, W));
}

namespace detail {

inline Tensor resblock(const Tensor& x, const ResBlockParams& p, bool use_norm) {
    Tensor y = add_channel_bias(conv2d(x, p.w1, 1, 1), p.b1);
    if (use_norm) y = channel_norm(y, p.gamma, p.beta);
    y = relu(y);
    y = add_channel_bias(conv2d(y, p.w2, 1, 1), p.b2);
    return add(x, y);
}

inline Tensor refine_state(const Tensor& frame, const Tensor& warped_state,
                           const TfaDirectionParams& dir, const TfaConfig& cfg) {
    Tensor x = concat0({frame, warped_state});
    Tensor h = add_channel_bias(conv2d(x, dir.entry_w, 1, 1), dir.entry_b);
    for (const auto& rb : dir.blocks) h = detail::resblock(h, rb, cfg.resblock_norm);
    return h;
}

}  // namespace detail

enum class Direction { Forward, Backward };

// Flow fields for one direction: entry i aligns the previous state onto
// frame i (undefined/unused at the starting frame).
inline std::vector<FlowField> compute_direction_flows(const std::vector<Tensor>& frames,
                                                      Direction dir, const FlowConfig& cfg) {
    int T = static_cast<int>(frames.size());
    std::vector<FlowField> flows(T);
    if (dir == Direction::Forward) {
        for (int i = 1; i < T; ++i) flows[i] = estimate_flow(frames[i], frames[i - 1], cfg);
    } else {
        for (int i = T - 2; i >= 0; --i) flows[i] = estimate_flow(frames[i], frames[i + 1], cfg);
    }
    return flows;
}

// Recurrent propagation along one direction: the neighboring hidden state is
// flow-warped onto the current frame, concatenated with it, and refined by
// the residual stack. The initial state is all zeros.
inline std::vector<Tensor> propagate(const std::vector<Tensor>& frames, Direction dir,
                                     const TfaParams& params, const TfaConfig& cfg,
                                     const std::vector<FlowField>* flows = nullptr) {
    int T = static_cast<int>(frames.size());
    if (T == 0) throw ArgumentError("propagate: empty sequence");
    const TfaDirectionParams& dp =
        dir == Direction::Forward ? params.forward_dir : params.backward_dir;
    std::vector<FlowField> local;
    if (!flows) {
        local = compute_direction_flows(frames, dir, cfg.flow);
        flows = &local;
    }
    std::vector<Tensor> states(T);
    Tensor h = Tensor::zeros({cfg.C, cfg.H, cfg.W});
    if (dir == Direction::Forward) {
        for (int i = 0; i < T; ++i) {
            Tensor hbar = i == 0 ? h : warp(h, (*flows)[i]);
            h = detail::refine_state(frames[i], hbar, dp, cfg);
            states[i] = h;
        }
    } else {
        for (int i = T - 1; i >= 0; --i) {
            Tensor hbar = i == T - 1 ? h : warp(h, (*flows)[i]);
            h = detail::refine_state(frames[i], hbar, dp, cfg);
            states[i] = h;
        }
    }
    return states;
}

// Channel-concat of backward and forward states per frame followed by the
// 1x1 aggregation conv: T x C x H x W.
inline Tensor aggregate(const std::vector<Tensor>& h_backward, const std::vector<Tensor>& h_forward,
                        const TfaParams& params) {
    if (h_backward.size() != h_forward.size())
        throw ShapeError("aggregate: direction length mismatch " +
                         std::to_string(h_backward.size()) + " vs " +
                         std::to_string(h_forward.size()));
    std::vector<Tensor> out;
    out.reserve(h_forward.size());
    for (size_t i = 0; i < h_forward.size(); ++i)
        out.push_back(linear_per_position(concat0({h_backward[i], h_forward[i]}), params.agg_w,
                                          params.agg_b));
    return stack0(out);
}

inline Tensor aggregate_single(const std::vector<Tensor>& h_forward, const TfaParams& params) {
    std::vector<Tensor> out;
    out.reserve(h_forward.size());
    for (const auto& h : h_forward)
        out.push_back(linear_per_position(h, params.agg_w, params.agg_b));
    return stack0(out);
}

struct TfaFlows {
    std::vector<FlowField> forward;
    std::vector<FlowField> backward;
};

inline TfaFlows compute_tfa_flows(const std::vector<Tensor>& frames, const TfaConfig& cfg) {
    TfaFlows f;
    f.forward = compute_direction_flows(frames, Direction::Forward, cfg.flow);
    if (cfg.bidirectional)
        f.backward = compute_direction_flows(frames, Direction::Backward, cfg.flow);
    return f;
}

// Full TFA block: interpolate, propagate (both directions unless single-
// direction mode), aggregate. Output is T x C x H x W.
inline Tensor tfa_forward(const VideoClip& clip, const TfaParams& params, const TfaConfig& cfg,
                          const TfaFlows* flows = nullptr) {
    std::vector<Tensor> frames = interp_sequence(clip, cfg.H, cfg.W);
    TfaFlows local;
    if (!flows) {
        local = compute_tfa_flows(frames, cfg);
        flows = &local;
    }
    std::vector<Tensor> h_f = propagate(frames, Direction::Forward, params, cfg, &flows->forward);
    if (!cfg.bidirectional) return aggregate_single(h_f, params);
    std::vector<Tensor> h_b = propagate(frames, Direction::Backward, params, cfg, &flows->backward);
    return aggregate(h_b, h_f, params);
}

}  // namespace arppg
