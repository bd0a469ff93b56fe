#pragma once

#include <functional>

#include <json.hpp>

#include "arppg/spectral.hpp"
#include "arppg/synth.hpp"

namespace arppg {

struct EvalProtocol {
    int clip_len = 160;
    double fps = 30.0;
    double band_min_bpm = 40.0;
    double band_max_bpm = 180.0;
    int psd_pad = 8192;

    void validate() const {
        if (clip_len < 32) throw ArgumentError("EvalProtocol: clip_len must be >= 32");
        if (psd_pad < clip_len) throw ArgumentError("EvalProtocol: psd_pad must be >= clip_len");
        if (!(band_min_bpm < band_max_bpm)) throw ArgumentError("EvalProtocol: empty HR band");
        if (!(fps > 0)) throw ArgumentError("EvalProtocol: fps must be > 0");
    }
};

// Zero-padded periodogram peak restricted to the HR band.
inline double estimate_hr(const Tensor& y, const EvalProtocol& proto) {
    proto.validate();
    NoGradGuard ng;
    Tensor p = dft_power(y, proto.psd_pad);
    int best = -1;
    double best_pow = 0.0;
    for (int k = 0; k <= proto.psd_pad / 2; ++k) {
        double bpm = 60.0 * k * proto.fps / proto.psd_pad;
        if (bpm < proto.band_min_bpm || bpm > proto.band_max_bpm) continue;
        if (best < 0 || p.data()[k] > best_pow) {
            best = k;
            best_pow = p.data()[k];
        }
    }
    if (best < 0) throw ArgumentError("estimate_hr: no PSD bins inside the HR band");
    if (best_pow <= 0.0) throw ArgumentError("estimate_hr: signal has no in-band spectral peak");
    return 60.0 * best * proto.fps / proto.psd_pad;
}

struct MetricsReport {
    std::vector<std::pair<double, double>> pairs;  // (predicted bpm, ground-truth bpm)
    double mae_bpm = 0.0;
    double rmse_bpm = 0.0;
};

inline MetricsReport compute_metrics(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw ArgumentError("compute_metrics: empty pair list");
    MetricsReport r;
    r.pairs = pairs;
    double abs_acc = 0.0, sq_acc = 0.0;
    for (auto [p, g] : pairs) {
        double d = p - g;
        abs_acc += std::abs(d);
        sq_acc += d * d;
    }
    r.mae_bpm = abs_acc / pairs.size();
    r.rmse_bpm = std::sqrt(sq_acc / pairs.size());
    return r;
}

struct EvalResult {
    std::vector<double> clip_hrs;
    double video_hr = 0.0;
    MetricsReport report;
};

// Paper protocol: consecutive non-overlapping clip_len windows (trailing
// remainder dropped), per-clip HR from the model's signal, video HR as the
// arithmetic mean.
inline EvalResult eval_video(const std::function<Tensor(const VideoClip&)>& model,
                             const SyntheticClip& video, const EvalProtocol& proto) {
    proto.validate();
    int T = static_cast<int>(video.frames.size());
    if (T < proto.clip_len)
        throw ArgumentError("eval_video: video length " + std::to_string(T) +
                            " shorter than clip_len " + std::to_string(proto.clip_len));
    EvalResult res;
    std::vector<std::pair<double, double>> pairs;
    for (int start = 0; start + proto.clip_len <= T; start += proto.clip_len) {
        VideoClip window(video.frames.begin() + start,
                         video.frames.begin() + start + proto.clip_len);
        Tensor y = model(window);
        double hr = estimate_hr(y, proto);
        res.clip_hrs.push_back(hr);
        pairs.push_back({hr, video.gt_hr_bpm});
    }
    double acc = 0.0;
    for (double h : res.clip_hrs) acc += h;
    res.video_hr = acc / res.clip_hrs.size();
    res.report = compute_metrics(pairs);
    return res;
}

inline MetricsReport merge_reports(const std::vector<MetricsReport>& reports) {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& r : reports) pairs.insert(pairs.end(), r.pairs.begin(), r.pairs.end());
    return compute_metrics(pairs);
}

inline nlohmann::json report_to_json(const MetricsReport& r, const EvalProtocol& proto) {
    nlohmann::json j;
    j["protocol"] = {{"clip_len", proto.clip_len},
                     {"fps", proto.fps},
                     {"band_bpm", {proto.band_min_bpm, proto.band_max_bpm}},
                     {"psd_pad", proto.psd_pad}};
    j["per_clip"] = nlohmann::json::array();
    for (auto [p, g] : r.pairs)
        j["per_clip"].push_back({{"pred_bpm", p}, {"gt_bpm", g}});
    j["mae_bpm"] = r.mae_bpm;
    j["rmse_bpm"] = r.rmse_bpm;
    return j;
}

}  // namespace arppg
