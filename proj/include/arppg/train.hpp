#pragma once

#include <cmath>
#include <iostream>
#include <numeric>

#include "arppg/checkpoint.hpp"
#include "arppg/dataset.hpp"

namespace arppg {

namespace detail {

inline Tensor hflip_frame(const Tensor& f) {
    const Shape& s = f.shape();
    int C = s[0], H = s[1], W = s[2];
    std::vector<double> out(f.data().size());
    const auto& in = f.data();
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j)
                out[((int64_t)c * H + i) * W + j] = in[((int64_t)c * H + i) * W + (W - 1 - j)];
    return Tensor::from(s, std::move(out));
}

inline VideoClip make_view(const std::vector<Tensor>& frames, int t0, int len, int size,
                           bool flip) {
    NoGradGuard ng;
    VideoClip out;
    out.reserve(len);
    for (int t = 0; t < len; ++t) {
        Tensor f = frames[t0 + t];
        if (flip) f = hflip_frame(f);
        const Shape& s = f.shape();
        if (s[1] != size || s[2] != size) f = bilinear_resize(f, size, size);
        out.push_back(f);
    }
    return out;
}

}  // namespace detail

struct EpochStats {
    int epoch = 0;
    double l_time = 0, l_fre = 0, l_crc = 0, total = 0, val_mae_bpm = 0;
};

inline std::string format_epoch_line(const EpochStats& e) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %d, l_time %.6f, l_fre %.6f, l_crc %.6f, total %.6f, val_mae_bpm %.4f",
                  e.epoch, e.l_time, e.l_fre, e.l_crc, e.total, e.val_mae_bpm);
    return buf;
}

// Clip-level inference with the view-1 feature stream; frames may be any
// resolution the feature extractor accepts.
inline Tensor infer_signal(const VideoClip& clip, const ModelParams& params,
                           const ModelConfig& cfg) {
    NoGradGuard ng;
    return model_forward(clip, params, cfg);
}

inline MetricsReport validate_model(const std::vector<SyntheticClip>& val,
                                    const ModelParams& params, const RunConfig& cfg,
                                    int eval_size) {
    const ModelConfig mc = cfg.model_config();
    auto model = [&](const VideoClip& clip) {
        NoGradGuard ng;
        VideoClip sized;
        sized.reserve(clip.size());
        for (const auto& f : clip) sized.push_back(bilinear_resize(f, eval_size, eval_size));
        return model_forward(sized, params, mc);
    };
    std::vector<MetricsReport> reports;
    for (const auto& v : val) reports.push_back(eval_video(model, v, cfg.eval).report);
    return merge_reports(reports);
}

struct TrainResult {
    std::vector<EpochStats> log;
    int best_epoch = 0;
    double best_val_mae = std::numeric_limits<double>::infinity();
};

// Dual-resolution-view training. Each step samples one video window, renders
// it at two random scales with a shared flip, and runs two sequential
// forward/backward passes (the other view's prediction held constant in the
// consistency term) so gradients match the joint objective while only one
// view's graph is live at a time.
inline TrainResult train_model(const Dataset& data, Checkpoint& ck,
                               const std::filesystem::path& out_dir,
                               std::ostream& log_stream = std::cout) {
    const RunConfig& cfg = ck.config;
    cfg.validate();
    if (data.train.empty()) throw ArgumentError("train: dataset has no training videos");
    std::filesystem::create_directories(out_dir);
    const ModelConfig mc = cfg.model_config();
    const LossConfig lc = cfg.loss_config();
    const TfaConfig tc = mc.tfa_config();
    AdamConfig opt;
    opt.lr = cfg.train.lr;
    opt.weight_decay = cfg.train.weight_decay;

    ParamSet params = ck.params.collect(mc);
    if (ck.adam.m.empty()) ck.adam.init(params);
    // The flow-warped recurrence is sensitive to full-rate Adam updates (they
    // either blow up the hidden state or keep the motion stream a moving
    // target), so its parameters train at a tenth of the base lr.
    std::vector<double> lr_scales(params.size(), 1.0);
    for (size_t k = 0; k < params.size(); ++k)
        if (params[k].name.rfind("tfa", 0) == 0) lr_scales[k] = 0.1;
    Rng rng(cfg.seed);
    Rng train_rng = rng.child(100);
    if (!ck.rng_state.empty()) train_rng.set_state(ck.rng_state);

    TrainResult result;
    result.best_val_mae = ck.best_val_mae;
    const int clip_len = cfg.train.clip_frames;
    const int master = 128;

    for (int epoch = ck.epoch + 1; epoch <= cfg.train.epochs; ++epoch) {
        std::vector<int> order(data.train.size());
        std::iota(order.begin(), order.end(), 0);
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[train_rng.uniform_int(0, (int64_t)i - 1)]);

        double sum_t = 0, sum_f = 0, sum_c = 0, sum_total = 0;
        int steps = 0;
        for (int vi : order) {
            const SyntheticClip& video = data.train[vi];
            int max_t0 = (int)video.frames.size() - clip_len;
            int t0 = max_t0 > 0 ? (int)train_rng.uniform_int(0, max_t0) : 0;
            double u1 = train_rng.uniform(cfg.train.scale_min, cfg.train.scale_max);
            double u2 = train_rng.uniform(cfg.train.scale_min, cfg.train.scale_max);
            int s1 = std::max(16, (int)std::lround(master / u1));
            int s2 = std::max(16, (int)std::lround(master / u2));
            bool flip = cfg.train.horizontal_flip && train_rng.bernoulli(0.5);

            VideoClip v1 = detail::make_view(video.frames, t0, clip_len, s1, flip);
            VideoClip v2 = detail::make_view(video.frames, t0, clip_len, s2, flip);
            std::vector<double> bvp(video.gt_signal.begin() + t0,
                                    video.gt_signal.begin() + t0 + clip_len);
            Tensor gt = Tensor::from({clip_len}, std::move(bvp));

            // flow fields are shared between the no-grad and grad passes
            TfaFlows flows1, flows2;
            if (mc.tfa_mode != TfaMode::Off) {
                NoGradGuard ng;
                flows1 = compute_tfa_flows(interp_sequence(v1, tc.H, tc.W), tc);
                flows2 = compute_tfa_flows(interp_sequence(v2, tc.H, tc.W), tc);
            }
            Tensor y2c;
            {
                NoGradGuard ng;
                y2c = model_forward(v2, ck.params, mc, /*view2=*/true, &flows2);
            }
            zero_grads(params);
            Tensor y1 = model_forward(v1, ck.params, mc, false, &flows1);
            Tensor p1 = pearson_loss(y1, gt);
            Tensor f1 = freq_ce_loss(y1, video.gt_hr_bpm, lc);
            Tensor c12 = crc_loss(y1, y2c);
            double l_crc = c12.value();
            double p1v = p1.value(), f1v = f1.value();
            Tensor y1c = y1.detached_copy();
            Tensor loss_a = add(scale(add(p1, f1), 0.5), scale(c12, lc.alpha));
            backward(loss_a, /*release_graph=*/true);

            Tensor y2 = model_forward(v2, ck.params, mc, true, &flows2);
            Tensor p2 = pearson_loss(y2, gt);
            Tensor f2 = freq_ce_loss(y2, video.gt_hr_bpm, lc);
            double p2v = p2.value(), f2v = f2.value();
            Tensor loss_b = add(scale(add(p2, f2), 0.5), scale(crc_loss(y1c, y2), lc.alpha));
            backward(loss_b, true);

            double l_time = 0.5 * (p1v + p2v);
            double l_fre = 0.5 * (f1v + f2v);
            double total = l_time + l_fre + lc.alpha * l_crc;
            if (!std::isfinite(total))
                throw ArgumentError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                    " step " + std::to_string(steps + 1));
            adam_step(params, ck.adam, opt, &lr_scales);
            sum_t += l_time;
            sum_f += l_fre;
            sum_c += l_crc;
            sum_total += total;
            ++steps;
        }

        EpochStats st;
        st.epoch = epoch;
        st.l_time = sum_t / steps;
        st.l_fre = sum_f / steps;
        st.l_crc = sum_c / steps;
        st.total = sum_total / steps;
        // Validate across the resolution range the model is meant to cover;
        // selecting on a single size lets harmonic outliers at the other
        // sizes survive into the "best" checkpoint.
        if (data.val.empty()) {
            st.val_mae_bpm = std::numeric_limits<double>::quiet_NaN();
        } else {
            double acc = 0.0;
            for (int size : {128, 64, 32})
                acc += validate_model(data.val, ck.params, cfg, size).mae_bpm;
            st.val_mae_bpm = acc / 3.0;
        }
        result.log.push_back(st);
        log_stream << format_epoch_line(st) << '\n' << std::flush;

        ck.epoch = epoch;
        ck.rng_state = train_rng.state();
        if (!data.val.empty() && st.val_mae_bpm < result.best_val_mae) {
            result.best_val_mae = st.val_mae_bpm;
            result.best_epoch = epoch;
            ck.best_val_mae = st.val_mae_bpm;
            save_checkpoint(ck, out_dir / "best.ckpt");
        }
        save_checkpoint(ck, out_dir / "last.ckpt");
    }
    return result;
}

}  // namespace arppg
