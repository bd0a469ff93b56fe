#pragma once

#include "arppg/ops.hpp"
#include "arppg/spectral.hpp"

namespace arppg {

struct LossConfig {
    double alpha = 0.1;
    double fps = 30.0;
    double band_min_bpm = 40.0;
    double band_max_bpm = 180.0;
    int psd_pad = 2048;

    void validate() const {
        if (alpha < 0) throw ArgumentError("LossConfig: alpha must be >= 0");
        if (!(band_min_bpm < band_max_bpm)) throw ArgumentError("LossConfig: band_min must be < band_max");
        if (!(fps > 0)) throw ArgumentError("LossConfig: fps must be > 0");
    }
};

// Negative-Pearson loss 1 - rho, in [0, 2].
inline Tensor pearson_loss(const Tensor& y, const Tensor& y_gt) {
    if (y.shape() != y_gt.shape())
        throw ShapeError("pearson_loss: length mismatch " + shape_str(y.shape()) + " vs " +
                         shape_str(y_gt.shape()));
    if (y.numel() < 3) throw ArgumentError("pearson_loss: need at least 3 samples");
    {
        const auto& g = y_gt.data();
        auto [lo, hi] = std::minmax_element(g.begin(), g.end());
        if (*lo == *hi) throw ArgumentError("pearson_loss: constant ground-truth signal");
    }
    Tensor yc = sub_bcast(y, mean(y));
    Tensor gc = sub_bcast(y_gt, mean(y_gt));
    Tensor cov = sum(mul(yc, gc));
    // guard epsilon small enough that positive-affine pairs still score ~0
    Tensor denom = add_const(mul(sqrt_scalar(sum(mul(yc, yc))), sqrt_scalar(sum(mul(gc, gc)))), 1e-12);
    return add_const(scale(div_scalar(cov, denom), -1.0), 1.0);
}

namespace detail {

struct BandBins {
    std::vector<int> bins;  // in-band PSD bin indices, ascending
    int target = -1;        // position within `bins` of the bin nearest hr_gt
};

inline BandBins band_bins(double hr_gt_bpm, int T_pad, const LossConfig& cfg) {
    BandBins out;
    double best = 1e300;
    for (int k = 0; k <= T_pad / 2; ++k) {
        double bpm = 60.0 * k * cfg.fps / T_pad;
        if (bpm < cfg.band_min_bpm || bpm > cfg.band_max_bpm) continue;
        double d = std::abs(bpm - hr_gt_bpm);
        if (d < best) {
            best = d;
            out.target = static_cast<int>(out.bins.size());
        }
        out.bins.push_back(k);
    }
    if (out.bins.empty()) throw ArgumentError("freq_ce_loss: no PSD bins inside the HR band");
    return out;
}

}  // namespace detail

// Softmax cross-entropy over in-band PSD values treated as logits, against
// the one-hot bin nearest the ground-truth rate.
inline Tensor freq_ce_loss(const Tensor& y, double hr_gt_bpm, const LossConfig& cfg) {
    cfg.validate();
    if (hr_gt_bpm < cfg.band_min_bpm || hr_gt_bpm > cfg.band_max_bpm)
        throw ArgumentError("freq_ce_loss: hr_gt " + std::to_string(hr_gt_bpm) +
                            " bpm outside band [" + std::to_string(cfg.band_min_bpm) + ", " +
                            std::to_string(cfg.band_max_bpm) + "]");
    Tensor p = dft_power(y, cfg.psd_pad);
    auto bb = detail::band_bins(hr_gt_bpm, cfg.psd_pad, cfg);
    int K = static_cast<int>(bb.bins.size());
    const auto& pd = p.data();
    double zmax = -1e300;
    for (int i = 0; i < K; ++i) zmax = std::max(zmax, pd[bb.bins[i]]);
    double sum_exp = 0.0;
    std::vector<double> soft(K);
    for (int i = 0; i < K; ++i) {
        soft[i] = std::exp(pd[bb.bins[i]] - zmax);
        sum_exp += soft[i];
    }
    for (auto& s : soft) s /= sum_exp;
    double loss = std::log(sum_exp) + zmax - pd[bb.bins[bb.target]];
    auto pn = p.node();
    auto bins = std::make_shared<detail::BandBins>(std::move(bb));
    auto sm = std::make_shared<std::vector<double>>(std::move(soft));
    return make_op_node({1}, {loss}, {pn}, [pn, bins, sm](TensorNode& self) {
        if (!pn->requires_grad) return;
        double g = self.grad[0];
        for (size_t i = 0; i < bins->bins.size(); ++i) {
            double delta = (static_cast<int>(i) == bins->target) ? 1.0 : 0.0;
            pn->grad[bins->bins[i]] += g * ((*sm)[i] - delta);
        }
    });
}

// Mean absolute difference between the two views' signals; subgradient 0 at ties.
inline Tensor crc_loss(const Tensor& y1, const Tensor& y2) {
    if (y1.shape() != y2.shape())
        throw ShapeError("crc_loss: length mismatch " + shape_str(y1.shape()) + " vs " +
                         shape_str(y2.shape()));
    int64_t n = y1.numel();
    const auto& a = y1.data();
    const auto& b = y2.data();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
    auto an = y1.node(), bn = y2.node();
    return make_op_node({1}, {acc / static_cast<double>(n)}, {an, bn}, [an, bn, n](TensorNode& self) {
        double g = self.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i) {
            double d = an->data[i] - bn->data[i];
            double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
            if (an->requires_grad) an->grad[i] += g * s;
            if (bn->requires_grad) bn->grad[i] -= g * s;
        }
    });
}

struct LossBreakdown {
    Tensor l_time, l_fre, l_crc, total;
};

// Dual-view objective: supervised terms averaged over the two views plus the
// cross-resolution consistency term.
inline LossBreakdown overall_loss(const Tensor& y1, const Tensor& y2, const Tensor& bvp_gt,
                                  double hr_gt_bpm, const LossConfig& cfg) {
    cfg.validate();
    LossBreakdown out;
    out.l_time = scale(add(pearson_loss(y1, bvp_gt), pearson_loss(y2, bvp_gt)), 0.5);
    out.l_fre = scale(add(freq_ce_loss(y1, hr_gt_bpm, cfg), freq_ce_loss(y2, hr_gt_bpm, cfg)), 0.5);
    out.l_crc = crc_loss(y1, y2);
    out.total = add(add(out.l_time, out.l_fre), scale(out.l_crc, cfg.alpha));
    return out;
}

}  // namespace arppg
