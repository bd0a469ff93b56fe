#pragma once

#include <ostream>

#include "arppg/sample.hpp"

namespace arppg {

// Dense per-pixel displacement in pixel units. u is horizontal, v vertical;
// warping the source frame by (u, v) approximates the target frame.
struct FlowField {
    int H = 0;
    int W = 0;
    std::vector<double> u;
    std::vector<double> v;
    std::vector<std::string> warnings;

    // 2 x H x W constant tensor (channel 0 = u, channel 1 = v) for grid_sample.
    Tensor to_tensor() const {
        std::vector<double> d;
        d.reserve(u.size() * 2);
        d.insert(d.end(), u.begin(), u.end());
        d.insert(d.end(), v.begin(), v.end());
        return Tensor::from({2, H, W}, std::move(d));
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : u) m = std::max(m, std::abs(x));
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
};

struct FlowConfig {
    int pyramid_levels = 3;
    int iterations_per_level = 60;
    double smoothness = 15.0;  // Horn-Schunck regularization weight (alpha^2)

    void validate() const {
        if (pyramid_levels < 1 || iterations_per_level < 1 || smoothness <= 0.0)
            throw ArgumentError("FlowConfig: levels/iterations must be >= 1, smoothness > 0");
    }
};

// Rec.601 luma of an RGB frame in [0, 1].
inline Tensor to_luminance(const Tensor& frame) {
    const Shape& s = frame.shape();
    if (s.size() != 3 || s[0] != 3)
        throw ShapeError("to_luminance: frame must be 3 x H x W, got " + shape_str(s));
    int64_t plane = static_cast<int64_t>(s[1]) * s[2];
    std::vector<double> out(plane);
    const auto& d = frame.data();
    for (int64_t i = 0; i < plane; ++i)
        out[i] = 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i];
    return Tensor::from({s[1], s[2]}, std::move(out));
}

namespace detail {

// Plain bilinear resize on a raw H x W buffer (same sampling convention as
// the tensor op, kept separate so flow stays off the tape).
inline std::vector<double> plain_resize(const std::vector<double>& in, int h, int w, int H, int W) {
    std::vector<double> out(static_cast<int64_t>(H) * W);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            double si = (i + 0.5) * h / H - 0.5;
            double sj = (j + 0.5) * w / W - 0.5;
            si = std::min(std::max(si, 0.0), static_cast<double>(h - 1));
            sj = std::min(std::max(sj, 0.0), static_cast<double>(w - 1));
            int i0 = std::min(static_cast<int>(si), h - 1), j0 = std::min(static_cast<int>(sj), w - 1);
            int i1 = std::min(i0 + 1, h - 1), j1 = std::min(j0 + 1, w - 1);
            double a = si - i0, b = sj - j0;
            out[static_cast<int64_t>(i) * W + j] =
                (1 - a) * ((1 - b) * in[static_cast<int64_t>(i0) * w + j0] + b * in[static_cast<int64_t>(i0) * w + j1]) +
                a * ((1 - b) * in[static_cast<int64_t>(i1) * w + j0] + b * in[static_cast<int64_t>(i1) * w + j1]);
        }
    return out;
}

inline double sample_clamped(const std::vector<double>& img, int H, int W, double i, double j) {
    i = std::min(std::max(i, 0.0), static_cast<double>(H - 1));
    j = std::min(std::max(j, 0.0), static_cast<double>(W - 1));
    int i0 = std::min(static_cast<int>(i), H - 1), j0 = std::min(static_cast<int>(j), W - 1);
    int i1 = std::min(i0 + 1, H - 1), j1 = std::min(j0 + 1, W - 1);
    double a = i - i0, b = j - j0;
    return (1 - a) * ((1 - b) * img[static_cast<int64_t>(i0) * W + j0] + b * img[static_cast<int64_t>(i0) * W + j1]) +
           a * ((1 - b) * img[static_cast<int64_t>(i1) * W + j0] + b * img[static_cast<int64_t>(i1) * W + j1]);
}

// Weighted 8-neighborhood average from the classical Horn-Schunck kernel.
inline double hs_average(const std::vector<double>& f, int H, int W, int i, int j) {
    auto at = [&](int ii, int jj) {
        ii = std::min(std::max(ii, 0), H - 1);
        jj = std::min(std::max(jj, 0), W - 1);
        return f[static_cast<int64_t>(ii) * W + jj];
    };
    return (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1)) / 6.0 +
           (at(i - 1, j - 1) + at(i - 1, j + 1) + at(i + 1, j - 1) + at(i + 1, j + 1)) / 12.0;
}

// One pyramid level: warp source by the current flow, then Jacobi iterations
// on the residual displacement. Re-warps a few times so displacements beyond
// the linearization range still converge.
inline void hs_refine(const std::vector<double>& target, const std::vector<double>& source, int H,
                      int W, std::vector<double>& u, std::vector<double>& v, int iterations,
                      double alpha) {
    int64_t plane = static_cast<int64_t>(H) * W;
    double alpha2 = alpha;
    const int rewarps = 5;
    int per_round = iterations;
    std::vector<double> warped(plane), Ix(plane), Iy(plane), It(plane);
    std::vector<double> du(plane), dv(plane), du_new(plane), dv_new(plane);
    for (int round = 0; round < rewarps; ++round) {
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                int64_t p = static_cast<int64_t>(i) * W + j;
                warped[p] = sample_clamped(source, H, W, i + v[p], j + u[p]);
            }
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                int64_t p = static_cast<int64_t>(i) * W + j;
                auto cd = [&](const std::vector<double>& f, int di, int dj) {
                    int i0 = std::min(std::max(i - di, 0), H - 1), j0 = std::min(std::max(j - dj, 0), W - 1);
                    int i1 = std::min(std::max(i + di, 0), H - 1), j1 = std::min(std::max(j + dj, 0), W - 1);
                    return 0.5 * (f[static_cast<int64_t>(i1) * W + j1] - f[static_cast<int64_t>(i0) * W + j0]);
                };
                Ix[p] = 0.5 * (cd(target, 0, 1) + cd(warped, 0, 1));
                Iy[p] = 0.5 * (cd(target, 1, 0) + cd(warped, 1, 0));
                It[p] = warped[p] - target[p];
            }
        std::fill(du.begin(), du.end(), 0.0);
        std::fill(dv.begin(), dv.end(), 0.0);
        for (int it = 0; it < per_round; ++it) {
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    int64_t p = static_cast<int64_t>(i) * W + j;
                    double ubar = hs_average(du, H, W, i, j);
                    double vbar = hs_average(dv, H, W, i, j);
                    double num = Ix[p] * ubar + Iy[p] * vbar + It[p];
                    double den = alpha2 + Ix[p] * Ix[p] + Iy[p] * Iy[p];
                    du_new[p] = ubar - Ix[p] * num / den;
                    dv_new[p] = vbar - Iy[p] * num / den;
                }
            du.swap(du_new);
            dv.swap(dv_new);
        }
        for (int64_t p = 0; p < plane; ++p) {
            u[p] += du[p];
            v[p] += dv[p];
        }
    }
}

}  // namespace detail

// Coarse-to-fine Horn-Schunck flow between two RGB frames. The result maps
// frame_b toward frame_a: grid_sample(frame_b, flow) approximates frame_a.
inline FlowField estimate_flow(const Tensor& frame_a, const Tensor& frame_b,
                               const FlowConfig& config) {
    config.validate();
    if (frame_a.shape() != frame_b.shape())
        throw ShapeError("estimate_flow: frame extents differ: " + shape_str(frame_a.shape()) +
                         " vs " + shape_str(frame_b.shape()));
    Tensor la = to_luminance(frame_a);
    Tensor lb = to_luminance(frame_b);
    int H = la.shape()[0], W = la.shape()[1];

    FlowField flow;
    flow.H = H;
    flow.W = W;

    int levels = config.pyramid_levels;
    while (levels > 1 && (std::min(H, W) >> (levels - 1)) < 8) {
        --levels;
        flow.warnings.push_back("estimate_flow: extents " + std::to_string(H) + "x" +
                                std::to_string(W) + " too small, reduced pyramid to " +
                                std::to_string(levels) + " level(s)");
    }

    // luminance scaled to [0, 255]; the smoothness default is calibrated for
    // 8-bit-range intensities
    std::vector<std::vector<double>> pyr_a(levels), pyr_b(levels);
    std::vector<int> ph(levels), pw(levels);
    pyr_a[0] = la.data();
    pyr_b[0] = lb.data();
    for (auto& x : pyr_a[0]) x *= 255.0;
    for (auto& x : pyr_b[0]) x *= 255.0;
    ph[0] = H;
    pw[0] = W;
    for (int l = 1; l < levels; ++l) {
        ph[l] = ph[l - 1] / 2;
        pw[l] = pw[l - 1] / 2;
        pyr_a[l] = detail::plain_resize(pyr_a[l - 1], ph[l - 1], pw[l - 1], ph[l], pw[l]);
        pyr_b[l] = detail::plain_resize(pyr_b[l - 1], ph[l - 1], pw[l - 1], ph[l], pw[l]);
    }

    std::vector<double> u(static_cast<int64_t>(ph[levels - 1]) * pw[levels - 1], 0.0);
    std::vector<double> v(u.size(), 0.0);
    for (int l = levels - 1; l >= 0; --l) {
        if (l != levels - 1) {
            // upsample flow from the coarser level and scale displacements
            u = detail::plain_resize(u, ph[l + 1], pw[l + 1], ph[l], pw[l]);
            v = detail::plain_resize(v, ph[l + 1], pw[l + 1], ph[l], pw[l]);
            for (auto& x : u) x *= 2.0;
            for (auto& x : v) x *= 2.0;
        }
        detail::hs_refine(pyr_a[l], pyr_b[l], ph[l], pw[l], u, v,
                          config.iterations_per_level, config.smoothness);
    }
    flow.u = std::move(u);
    flow.v = std::move(v);
    return flow;
}

// Backward warp of differentiable features by a constant flow field.
inline Tensor warp(const Tensor& features, const FlowField& flow) {
    const Shape& s = features.shape();
    if (s.size() != 3 || s[1] != flow.H || s[2] != flow.W)
        throw ShapeError("warp: features " + shape_str(s) + " do not match flow " +
                         std::to_string(flow.H) + "x" + std::to_string(flow.W));
    return grid_sample(features, flow.to_tensor());
}

// Debug dump: one "row,col,u,v" line per pixel.
inline void dump_flow_csv(const FlowField& flow, std::ostream& os) {
    os << "row,col,u,v\n";
    for (int i = 0; i < flow.H; ++i)
        for (int j = 0; j < flow.W; ++j) {
            int64_t p = static_cast<int64_t>(i) * flow.W + j;
            os << i << "," << j << "," << flow.u[p] << "," << flow.v[p] << "\n";
        }
}

}  // namespace arppg
