#pragma once

#include <fstream>

#include <json.hpp>

#include "arppg/evalhr.hpp"
#include "arppg/losses.hpp"
#include "arppg/model.hpp"
#include "arppg/synth.hpp"

namespace arppg {

struct TrainConfig {
    double lr = 1e-4;
    double weight_decay = 5e-5;
    int batch = 2;  // the two resolution views of each sampled clip
    int epochs = 10;
    double alpha = 0.1;
    double scale_min = 1.0;
    double scale_max = 4.0;
    bool horizontal_flip = true;
    int psd_pad = 2048;
    int clip_frames = 160;  // training window length T
};

struct DataConfig {
    int num_train_videos = 20;
    int num_val_videos = 4;
    int video_frames = 160;
    double hr_min = 48.0;
    double hr_max = 120.0;
    double noise_sigma = 0.01;
    double amplitude = 0.02;
    std::string waveform = "sinusoid";  // sinusoid | ppg_like
    std::string motion = "static";      // static | translate | rotate
    double max_translate_px = 0.0;
    double max_rotation_deg = 0.0;
    // global multiplicative flicker; an in-band period makes low-resolution
    // skin/background separation actually matter
    double illum_amp = 0.0;
    double illum_period_s = 8.0;
};

struct RunConfig {
    uint64_t seed = 2024;
    double fps = 30.0;
    int T = 160;  // inference clip length
    ModelConfig model;
    FlowConfig flow;
    TrainConfig train;
    DataConfig data;
    EvalProtocol eval;

    void validate() const {
        ModelConfig m = model;
        m.flow = flow;
        m.validate();
        eval.validate();
        if (train.scale_min < 1.0)
            throw ArgumentError("RunConfig: train.scale_range min must be >= 1");
        if (train.scale_max < train.scale_min)
            throw ArgumentError("RunConfig: train.scale_range must be ordered");
        if (train.epochs < 1) throw ArgumentError("RunConfig: train.epochs must be >= 1");
        if (data.hr_min < 40.0 || data.hr_max > 180.0 || data.hr_min > data.hr_max)
            throw ArgumentError("RunConfig: data HR range must lie inside [40, 180]");
        if (data.waveform != "sinusoid" && data.waveform != "ppg_like")
            throw ArgumentError("RunConfig: data.waveform must be sinusoid|ppg_like");
        if (data.motion != "static" && data.motion != "translate" && data.motion != "rotate")
            throw ArgumentError("RunConfig: data.motion must be static|translate|rotate");
        if (train.clip_frames > data.video_frames)
            throw ArgumentError("RunConfig: train.clip_frames exceeds data.video_frames");
    }

    ModelConfig model_config() const {
        ModelConfig m = model;
        m.flow = flow;
        return m;
    }

    LossConfig loss_config() const {
        LossConfig c;
        c.alpha = train.alpha;
        c.fps = fps;
        c.band_min_bpm = eval.band_min_bpm;
        c.band_max_bpm = eval.band_max_bpm;
        c.psd_pad = train.psd_pad;
        return c;
    }

    PulseParams pulse_params(double hr) const {
        PulseParams p;
        p.hr_bpm = hr;
        p.fps = fps;
        p.amplitude = data.amplitude;
        p.waveform = data.waveform == "ppg_like" ? PulseParams::Waveform::PpgLike
                                                 : PulseParams::Waveform::Sinusoid;
        return p;
    }

    MotionSchedule motion_schedule() const {
        MotionSchedule m;
        if (data.motion == "translate") m.kind = MotionSchedule::Kind::Translate;
        if (data.motion == "rotate") m.kind = MotionSchedule::Kind::Rotate;
        m.max_translate_px = data.max_translate_px;
        m.max_rotation_deg = data.max_rotation_deg;
        return m;
    }
};

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["fps"] = c.fps;
    j["T"] = c.T;
    j["model"] = {{"C", c.model.C},
                  {"H", c.model.H},
                  {"W", c.model.W},
                  {"n", c.model.n},
                  {"mlp_hidden", c.model.mlp_hidden},
                  {"num_resblocks", c.model.num_resblocks},
                  {"backbone_channels", c.model.backbone_channels},
                  {"use_pfe", c.model.use_pfe},
                  {"use_rae", c.model.use_rae},
                  {"resblock_norm", c.model.resblock_norm},
                  {"tfa_mode", tfa_mode_str(c.model.tfa_mode)}};
    j["flow"] = {{"pyramid_levels", c.flow.pyramid_levels},
                 {"iterations_per_level", c.flow.iterations_per_level},
                 {"smoothness", c.flow.smoothness}};
    j["train"] = {{"lr", c.train.lr},
                  {"weight_decay", c.train.weight_decay},
                  {"batch", c.train.batch},
                  {"epochs", c.train.epochs},
                  {"alpha", c.train.alpha},
                  {"scale_range", {c.train.scale_min, c.train.scale_max}},
                  {"horizontal_flip", c.train.horizontal_flip},
                  {"psd_pad", c.train.psd_pad},
                  {"clip_frames", c.train.clip_frames}};
    j["data"] = {{"num_train_videos", c.data.num_train_videos},
                 {"num_val_videos", c.data.num_val_videos},
                 {"video_frames", c.data.video_frames},
                 {"hr_min", c.data.hr_min},
                 {"hr_max", c.data.hr_max},
                 {"noise_sigma", c.data.noise_sigma},
                 {"amplitude", c.data.amplitude},
                 {"waveform", c.data.waveform},
                 {"motion", c.data.motion},
                 {"max_translate_px", c.data.max_translate_px},
                 {"max_rotation_deg", c.data.max_rotation_deg},
                 {"illum_amp", c.data.illum_amp},
                 {"illum_period_s", c.data.illum_period_s}};
    j["eval"] = {{"clip_len", c.eval.clip_len},
                 {"band_bpm", {c.eval.band_min_bpm, c.eval.band_max_bpm}},
                 {"psd_pad", c.eval.psd_pad}};
    return j;
}

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).template get<T>();
}

}  // namespace detail

// Parse a config document; absent keys keep their defaults, unknown keys are
// rejected so typos do not silently fall back to defaults.
inline RunConfig config_from_json(const nlohmann::json& j) {
    auto check_keys = [](const nlohmann::json& obj, std::vector<std::string> allowed,
                         const std::string& scope) {
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
                throw ArgumentError("config: unknown key '" + scope + it.key() + "'");
    };
    check_keys(j, {"seed", "fps", "T", "model", "flow", "train", "data", "eval"}, "");
    RunConfig c;
    detail::maybe(j, "seed", c.seed);
    detail::maybe(j, "fps", c.fps);
    detail::maybe(j, "T", c.T);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m,
                   {"C", "H", "W", "n", "mlp_hidden", "num_resblocks", "backbone_channels",
                    "use_pfe", "use_rae", "resblock_norm", "tfa_mode"},
                   "model.");
        detail::maybe(m, "C", c.model.C);
        detail::maybe(m, "H", c.model.H);
        detail::maybe(m, "W", c.model.W);
        detail::maybe(m, "n", c.model.n);
        detail::maybe(m, "mlp_hidden", c.model.mlp_hidden);
        detail::maybe(m, "num_resblocks", c.model.num_resblocks);
        detail::maybe(m, "backbone_channels", c.model.backbone_channels);
        detail::maybe(m, "use_pfe", c.model.use_pfe);
        detail::maybe(m, "use_rae", c.model.use_rae);
        detail::maybe(m, "resblock_norm", c.model.resblock_norm);
        if (m.contains("tfa_mode"))
            c.model.tfa_mode = tfa_mode_from_str(m.at("tfa_mode").get<std::string>());
    }
    if (j.contains("flow")) {
        const auto& f = j.at("flow");
        check_keys(f, {"pyramid_levels", "iterations_per_level", "smoothness"}, "flow.");
        detail::maybe(f, "pyramid_levels", c.flow.pyramid_levels);
        detail::maybe(f, "iterations_per_level", c.flow.iterations_per_level);
        detail::maybe(f, "smoothness", c.flow.smoothness);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t,
                   {"lr", "weight_decay", "batch", "epochs", "alpha", "scale_range",
                    "horizontal_flip", "psd_pad", "clip_frames"},
                   "train.");
        detail::maybe(t, "lr", c.train.lr);
        detail::maybe(t, "weight_decay", c.train.weight_decay);
        detail::maybe(t, "batch", c.train.batch);
        detail::maybe(t, "epochs", c.train.epochs);
        detail::maybe(t, "alpha", c.train.alpha);
        if (t.contains("scale_range")) {
            auto r = t.at("scale_range");
            if (!r.is_array() || r.size() != 2)
                throw ArgumentError("config: train.scale_range must be [min, max]");
            c.train.scale_min = r[0].get<double>();
            c.train.scale_max = r[1].get<double>();
        }
        detail::maybe(t, "horizontal_flip", c.train.horizontal_flip);
        detail::maybe(t, "psd_pad", c.train.psd_pad);
        detail::maybe(t, "clip_frames", c.train.clip_frames);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d,
                   {"num_train_videos", "num_val_videos", "video_frames", "hr_min", "hr_max",
                    "noise_sigma", "amplitude", "waveform", "motion", "max_translate_px",
                    "max_rotation_deg", "illum_amp", "illum_period_s"},
                   "data.");
        detail::maybe(d, "num_train_videos", c.data.num_train_videos);
        detail::maybe(d, "num_val_videos", c.data.num_val_videos);
        detail::maybe(d, "video_frames", c.data.video_frames);
        detail::maybe(d, "hr_min", c.data.hr_min);
        detail::maybe(d, "hr_max", c.data.hr_max);
        detail::maybe(d, "noise_sigma", c.data.noise_sigma);
        detail::maybe(d, "amplitude", c.data.amplitude);
        detail::maybe(d, "waveform", c.data.waveform);
        detail::maybe(d, "motion", c.data.motion);
        detail::maybe(d, "max_translate_px", c.data.max_translate_px);
        detail::maybe(d, "max_rotation_deg", c.data.max_rotation_deg);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"clip_len", "band_bpm", "psd_pad"}, "eval.");
        detail::maybe(e, "clip_len", c.eval.clip_len);
        if (e.contains("band_bpm")) {
            auto r = e.at("band_bpm");
            if (!r.is_array() || r.size() != 2)
                throw ArgumentError("config: eval.band_bpm must be [min, max]");
            c.eval.band_min_bpm = r[0].get<double>();
            c.eval.band_max_bpm = r[1].get<double>();
        }
        detail::maybe(e, "psd_pad", c.eval.psd_pad);
    }
    c.eval.fps = c.fps;
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ArgumentError("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError("config: parse failure in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const RunConfig& c, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw ArgumentError("config: cannot write " + path.string());
    f << config_to_json(c).dump(2) << '\n';
}

}  // namespace arppg
