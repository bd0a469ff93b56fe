#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "arppg/sample.hpp"
#include "arppg/tfa.hpp"

namespace arppg {

struct PulseParams {
    double hr_bpm = 75.0;
    double fps = 30.0;
    double amplitude = 0.02;  // fraction of dynamic range
    enum class Waveform { Sinusoid, PpgLike } waveform = Waveform::Sinusoid;

    void validate() const {
        if (hr_bpm < 40.0 || hr_bpm > 180.0)
            throw ArgumentError("PulseParams: hr_bpm " + std::to_string(hr_bpm) +
                                " outside [40, 180]");
        if (!(amplitude > 0)) throw ArgumentError("PulseParams: amplitude must be > 0");
        if (!(fps > 0)) throw ArgumentError("PulseParams: fps must be > 0");
    }
};

// Zero-mean, unit-peak waveform sampled at fps; amplitude scaling happens at
// render time. The ppg_like shape is a per-cycle sum of a systolic Gaussian
// (phase 0.2, width 0.08) and a dicrotic one (phase 0.55, width 0.12, height 0.45).
inline std::vector<double> gen_pulse(int T, const PulseParams& p) {
    p.validate();
    if (T < 1) throw ArgumentError("gen_pulse: T must be >= 1");
    double f = p.hr_bpm / 60.0;
    std::vector<double> s(T);
    if (p.waveform == PulseParams::Waveform::Sinusoid) {
        for (int t = 0; t < T; ++t) s[t] = std::sin(2.0 * M_PI * f * t / p.fps);
    } else {
        auto bump = [](double ph, double c, double w) {
            double d = ph - c;
            return std::exp(-d * d / (2.0 * w * w));
        };
        for (int t = 0; t < T; ++t) {
            double ph = std::fmod(f * t / p.fps, 1.0);
            s[t] = bump(ph, 0.2, 0.08) + 0.45 * bump(ph, 0.55, 0.12);
        }
    }
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= T;
    double peak = 0.0;
    for (auto& v : s) {
        v -= mean;
        peak = std::max(peak, std::abs(v));
    }
    if (peak > 0)
        for (auto& v : s) v /= peak;
    return s;
}

struct ResolutionSchedule {
    enum class Kind { Fixed, RampDown, RampDownUp } kind = Kind::Fixed;
    int start_size = 128;
    int end_size = 128;

    void validate() const {
        for (int s : {start_size, end_size})
            if (s < 16 || s > 128)
                throw ArgumentError("ResolutionSchedule: size " + std::to_string(s) +
                                    " outside [16, 128]");
    }
};

inline std::vector<std::pair<int, int>> schedule_resolution(const ResolutionSchedule& sched, int T) {
    sched.validate();
    if (T < 1) throw ArgumentError("schedule_resolution: T must be >= 1");
    std::vector<std::pair<int, int>> out(T);
    auto lerp_size = [](int a, int b, double u) {
        return static_cast<int>(std::llround(a + (b - a) * u));
    };
    switch (sched.kind) {
        case ResolutionSchedule::Kind::Fixed:
            for (auto& e : out) e = {sched.start_size, sched.start_size};
            break;
        case ResolutionSchedule::Kind::RampDown: {
            if (T < 2) throw ArgumentError("schedule_resolution: ramps need T >= 2");
            for (int t = 0; t < T; ++t) {
                int s = lerp_size(sched.start_size, sched.end_size,
                                  static_cast<double>(t) / (T - 1));
                out[t] = {s, s};
            }
            break;
        }
        case ResolutionSchedule::Kind::RampDownUp: {
            if (T < 2) throw ArgumentError("schedule_resolution: ramps need T >= 2");
            int mid = T / 2;
            for (int t = 0; t < T; ++t) {
                double u = t <= mid ? static_cast<double>(t) / mid
                                    : static_cast<double>(T - 1 - t) / (T - 1 - mid);
                int s = lerp_size(sched.start_size, sched.end_size, u);
                out[t] = {s, s};
            }
            break;
        }
    }
    return out;
}

struct SceneParams {
    int base_size = 128;
    double ellipse_cx = 64.0, ellipse_cy = 62.0;
    double ellipse_ax = 34.0, ellipse_ay = 44.0;
    double skin_r = 0.78, skin_g = 0.60, skin_b = 0.50;
    double bg_r = 0.18, bg_g = 0.22, bg_b = 0.28;
    double noise_sigma = 0.01;
    double illum_amp = 0.0;
    double illum_period_s = 8.0;
};

struct MotionSchedule {
    enum class Kind { Static, Translate, Rotate } kind = Kind::Static;
    double max_translate_px = 0.0;
    double max_rotation_deg = 0.0;
    enum class Profile { Linear, Sinusoidal } profile = Profile::Sinusoidal;
};

struct SyntheticClip {
    VideoClip frames;               // 3 x h_t x w_t, values in [0, 1]
    std::vector<double> gt_signal;  // unit-peak BVP, one sample per frame
    double gt_hr_bpm = 0.0;
    double fps = 30.0;
    uint64_t seed = 0;
};

namespace detail {

// Motion magnitude profile in [-1, 1].
inline double motion_profile(const MotionSchedule& m, int t, int T) {
    if (m.profile == MotionSchedule::Profile::Linear)
        return T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
    return std::sin(2.0 * M_PI * t / std::max(1, T));
}

inline void validate_motion(const SceneParams& sc, const MotionSchedule& m) {
    double reach = std::max(sc.ellipse_ax, sc.ellipse_ay);
    double shift = m.kind == MotionSchedule::Kind::Translate ? std::abs(m.max_translate_px) : 0.0;
    double lo_x = sc.ellipse_cx - reach - shift, hi_x = sc.ellipse_cx + reach + shift;
    double lo_y = sc.ellipse_cy - reach - shift, hi_y = sc.ellipse_cy + reach + shift;
    if (lo_x < 0 || lo_y < 0 || hi_x > sc.base_size - 1 || hi_y > sc.base_size - 1)
        throw ArgumentError("render_clip: ellipse leaves the frame under the motion schedule");
}

}  // namespace detail

// Analytic renderer: each master pixel is classified against the rigidly
// transformed ellipse (inverse transform, ~1px soft edge), the pulse
// modulates the skin's green and red channels at 1.0 : 0.7, seeded Gaussian
// noise and multiplicative illumination drift are applied, and the 128x128
// master is resized to the scheduled extents.
inline SyntheticClip render_clip(int T, const PulseParams& pulse, const SceneParams& scene,
                                 const MotionSchedule& motion, const ResolutionSchedule& sched,
                                 uint64_t seed) {
    detail::validate_motion(scene, motion);
    if (scene.noise_sigma < 0) throw ArgumentError("render_clip: noise sigma must be >= 0");
    SyntheticClip clip;
    clip.gt_signal = gen_pulse(T, pulse);
    clip.gt_hr_bpm = pulse.hr_bpm;
    clip.fps = pulse.fps;
    clip.seed = seed;
    auto sizes = schedule_resolution(sched, T);
    Rng rng(seed);
    int B = scene.base_size;
    NoGradGuard ng;
    for (int t = 0; t < T; ++t) {
        double mod = pulse.amplitude * clip.gt_signal[t];
        double prof = detail::motion_profile(motion, t, T);
        double dx = 0.0, dy = 0.0, theta = 0.0;
        if (motion.kind == MotionSchedule::Kind::Translate) dx = motion.max_translate_px * prof;
        if (motion.kind == MotionSchedule::Kind::Rotate)
            theta = motion.max_rotation_deg * M_PI / 180.0 * prof;
        double ct = std::cos(theta), st = std::sin(theta);
        double illum = 1.0 + scene.illum_amp *
                                 std::sin(2.0 * M_PI * t / (pulse.fps * scene.illum_period_s));
        std::vector<double> master(3ull * B * B);
        double soft = std::min(scene.ellipse_ax, scene.ellipse_ay);
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < B; ++j) {
                // Inverse rigid transform into the ellipse's rest frame.
                double x = j - scene.ellipse_cx - dx, y = i - scene.ellipse_cy - dy;
                double xr = ct * x + st * y, yr = -st * x + ct * y;
                double rho = std::sqrt((xr / scene.ellipse_ax) * (xr / scene.ellipse_ax) +
                                       (yr / scene.ellipse_ay) * (yr / scene.ellipse_ay));
                double cov = std::clamp(0.5 - (rho - 1.0) * soft, 0.0, 1.0);
                double r = scene.bg_r + cov * (scene.skin_r + 0.7 * mod - scene.bg_r);
                double g = scene.bg_g + cov * (scene.skin_g + 1.0 * mod - scene.bg_g);
                double b = scene.bg_b + cov * (scene.skin_b - scene.bg_b);
                master[0ull * B * B + i * B + j] = r;
                master[1ull * B * B + i * B + j] = g;
                master[2ull * B * B + i * B + j] = b;
            }
        for (auto& v : master)
            v = std::clamp((v + rng.normal(0.0, scene.noise_sigma)) * illum, 0.0, 1.0);
        Tensor frame = Tensor::from({3, B, B}, std::move(master));
        clip.frames.push_back(bilinear_resize(frame, sizes[t].first, sizes[t].second));
    }
    return clip;
}

// ---- clip export / load (bit-exact round trip) ----
//
// Layout: <dir>/frame_%05d.bin holding uint32 h, uint32 w then 3*h*w float64
// in channel-major order, plus <dir>/gt.csv with "index,time_s,bvp,hr_bpm".

inline void export_clip(const SyntheticClip& clip, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (size_t t = 0; t < clip.frames.size(); ++t) {
        std::snprintf(name, sizeof(name), "frame_%05zu.bin", t);
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw ArgumentError("export_clip: cannot write " + (dir / name).string());
        const Shape& s = clip.frames[t].shape();
        uint32_t h = s[1], w = s[2];
        f.write(reinterpret_cast<const char*>(&h), 4);
        f.write(reinterpret_cast<const char*>(&w), 4);
        const auto& d = clip.frames[t].data();
        f.write(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    }
    std::ofstream csv(dir / "gt.csv");
    if (!csv) throw ArgumentError("export_clip: cannot write gt.csv under " + dir.string());
    csv << "index,time_s,bvp,hr_bpm\n";
    csv.precision(17);
    for (size_t t = 0; t < clip.gt_signal.size(); ++t)
        csv << t << ',' << (t / clip.fps) << ',' << clip.gt_signal[t] << ',' << clip.gt_hr_bpm
            << '\n';
}

inline SyntheticClip load_clip(const std::filesystem::path& dir) {
    SyntheticClip clip;
    char name[32];
    for (size_t t = 0;; ++t) {
        std::snprintf(name, sizeof(name), "frame_%05zu.bin", t);
        std::ifstream f(dir / name, std::ios::binary);
        if (!f) break;
        uint32_t h = 0, w = 0;
        f.read(reinterpret_cast<char*>(&h), 4);
        f.read(reinterpret_cast<char*>(&w), 4);
        std::vector<double> d(3ull * h * w);
        f.read(reinterpret_cast<char*>(d.data()), d.size() * sizeof(double));
        if (!f) throw ArgumentError("load_clip: truncated frame file " + (dir / name).string());
        clip.frames.push_back(Tensor::from({3, static_cast<int>(h), static_cast<int>(w)},
                                           std::move(d)));
    }
    std::ifstream csv(dir / "gt.csv");
    if (!csv) throw ArgumentError("load_clip: missing gt.csv under " + dir.string());
    std::string line;
    std::getline(csv, line);
    if (line != "index,time_s,bvp,hr_bpm")
        throw ArgumentError("load_clip: unexpected gt.csv header '" + line + "'");
    double t1 = 0.0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        size_t p1 = line.find(','), p2 = line.find(',', p1 + 1), p3 = line.find(',', p2 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos || p3 == std::string::npos)
            throw ArgumentError("load_clip: malformed gt.csv row '" + line + "'");
        double ts = std::stod(line.substr(p1 + 1, p2 - p1 - 1));
        clip.gt_signal.push_back(std::stod(line.substr(p2 + 1, p3 - p2 - 1)));
        clip.gt_hr_bpm = std::stod(line.substr(p3 + 1));
        if (clip.gt_signal.size() == 2) clip.fps = 1.0 / (ts - t1);
        t1 = ts;
    }
    if (clip.gt_signal.size() != clip.frames.size())
        throw ArgumentError("load_clip: gt.csv rows do not match frame count under " + dir.string());
    return clip;
}

}  // namespace arppg
