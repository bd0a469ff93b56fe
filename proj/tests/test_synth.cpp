#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "arppg/spectral.hpp"
#include "arppg/synth.hpp"
#include "oracles.hpp"

using namespace arppg;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

// Mean of the green channel over the full frame; linear in the embedded pulse.
double green_mean(const Tensor& frame) {
    const Shape& s = frame.shape();
    int64_t hw = static_cast<int64_t>(s[1]) * s[2];
    double acc = 0;
    for (int64_t i = 0; i < hw; ++i) acc += frame.data()[hw + i];
    return acc / static_cast<double>(hw);
}

int count_local_maxima(const std::vector<double>& s, double min_height) {
    int n = 0;
    for (size_t i = 1; i + 1 < s.size(); ++i)
        if (s[i] > s[i - 1] && s[i] > s[i + 1] && s[i] > min_height) ++n;
    return n;
}

SceneParams quiet_scene() {
    SceneParams sc;
    sc.noise_sigma = 0.0;
    return sc;
}

}  // namespace

TEST_CASE("gen_pulse: sinusoid PSD peaks at the target rate") {
    PulseParams p;
    p.hr_bpm = 72;
    auto s = gen_pulse(900, p);
    Tensor psd = dft_power(Tensor::from({900}, std::vector<double>(s)), 4096);
    int best = 0;
    for (int k = 1; k <= 2048; ++k)
        if (psd.data()[k] > psd.data()[best]) best = k;
    double hz = best * 30.0 / 4096.0;
    CHECK(hz == doctest::Approx(1.2).epsilon(0.01));
}

TEST_CASE("gen_pulse: zero mean and unit peak") {
    PulseParams p;
    p.hr_bpm = 72;
    for (auto wf : {PulseParams::Waveform::Sinusoid, PulseParams::Waveform::PpgLike}) {
        p.waveform = wf;
        auto s = gen_pulse(900, p);
        double mean = 0, peak = 0;
        for (double v : s) {
            mean += v;
            peak = std::max(peak, std::abs(v));
        }
        CHECK(std::abs(mean / 900) < 1e-9);
        CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gen_pulse: ppg_like produces one systolic peak per cycle") {
    PulseParams p;
    p.hr_bpm = 60;
    p.waveform = PulseParams::Waveform::PpgLike;
    auto s = gen_pulse(900, p);
    // Dicrotic bumps sit well below the unit systolic peak; count tall maxima.
    CHECK(count_local_maxima(s, 0.5) == 900 / 30);
}

TEST_CASE("gen_pulse: out-of-range heart rate rejected") {
    PulseParams p;
    p.hr_bpm = 35;
    CHECK_THROWS_AS(gen_pulse(100, p), ArgumentError);
    p.hr_bpm = 190;
    CHECK_THROWS_AS(gen_pulse(100, p), ArgumentError);
}

TEST_CASE("schedule_resolution: fixed repeats one size") {
    ResolutionSchedule sched;
    sched.start_size = sched.end_size = 64;
    auto sizes = schedule_resolution(sched, 10);
    REQUIRE(sizes.size() == 10);
    for (auto [h, w] : sizes) {
        CHECK(h == 64);
        CHECK(w == 64);
    }
}

TEST_CASE("schedule_resolution: ramp down hits both endpoints monotonically") {
    ResolutionSchedule sched;
    sched.kind = ResolutionSchedule::Kind::RampDown;
    sched.start_size = 128;
    sched.end_size = 64;
    auto sizes = schedule_resolution(sched, 160);
    CHECK(sizes.front().first == 128);
    CHECK(sizes.back().first == 64);
    for (size_t t = 1; t < sizes.size(); ++t) CHECK(sizes[t].first <= sizes[t - 1].first);
}

TEST_CASE("schedule_resolution: ramp down-up is symmetric with the trough at T/2") {
    ResolutionSchedule sched;
    sched.kind = ResolutionSchedule::Kind::RampDownUp;
    sched.start_size = 128;
    sched.end_size = 64;
    auto sizes = schedule_resolution(sched, 161);
    CHECK(sizes.front().first == 128);
    CHECK(sizes.back().first == 128);
    CHECK(sizes[80].first == 64);
    for (int t = 0; t < 161; ++t)
        CHECK(std::abs(sizes[t].first - sizes[160 - t].first) <= 1);
}

TEST_CASE("schedule_resolution: ramps require at least two frames, sizes bounded") {
    ResolutionSchedule sched;
    sched.kind = ResolutionSchedule::Kind::RampDown;
    CHECK_THROWS_AS(schedule_resolution(sched, 1), ArgumentError);
    sched.start_size = 8;
    CHECK_THROWS_AS(schedule_resolution(sched, 10), ArgumentError);
}

TEST_CASE("render_clip: region mean tracks the ground-truth pulse") {
    PulseParams p;
    p.hr_bpm = 75;
    auto clip = render_clip(160, p, quiet_scene(), MotionSchedule{}, ResolutionSchedule{}, 5);
    REQUIRE(clip.frames.size() == 160);
    CHECK(clip.frames[0].shape() == Shape{3, 128, 128});
    std::vector<double> trace;
    for (const auto& f : clip.frames) trace.push_back(green_mean(f));
    CHECK(pearson(trace, clip.gt_signal) > 0.99);
}

TEST_CASE("render_clip: signal survives every resolution schedule") {
    PulseParams p;
    p.hr_bpm = 90;
    for (auto kind : {ResolutionSchedule::Kind::Fixed, ResolutionSchedule::Kind::RampDown,
                      ResolutionSchedule::Kind::RampDownUp}) {
        ResolutionSchedule sched;
        sched.kind = kind;
        sched.start_size = kind == ResolutionSchedule::Kind::Fixed ? 32 : 128;
        sched.end_size = 32;
        auto clip = render_clip(120, p, quiet_scene(), MotionSchedule{}, sched, 6);
        std::vector<double> trace;
        for (const auto& f : clip.frames) trace.push_back(green_mean(f));
        CHECK(pearson(trace, clip.gt_signal) > 0.99);
    }
}

TEST_CASE("render_clip: same seed bit-identical, different seed differs") {
    PulseParams p;
    auto a = render_clip(8, p, SceneParams{}, MotionSchedule{}, ResolutionSchedule{}, 42);
    auto b = render_clip(8, p, SceneParams{}, MotionSchedule{}, ResolutionSchedule{}, 42);
    auto c = render_clip(8, p, SceneParams{}, MotionSchedule{}, ResolutionSchedule{}, 43);
    bool differs = false;
    for (int t = 0; t < 8; ++t)
        for (int64_t i = 0; i < a.frames[t].numel(); ++i) {
            CHECK(a.frames[t].data()[i] == b.frames[t].data()[i]);
            differs |= a.frames[t].data()[i] != c.frames[t].data()[i];
        }
    CHECK(differs);
}

TEST_CASE("render_clip: zero noise and tiny amplitude give near-static frames") {
    PulseParams p;
    p.amplitude = 1e-12;
    auto clip = render_clip(6, p, quiet_scene(), MotionSchedule{}, ResolutionSchedule{}, 7);
    for (int t = 1; t < 6; ++t)
        for (int64_t i = 0; i < clip.frames[0].numel(); ++i)
            CHECK(clip.frames[t].data()[i] ==
                  doctest::Approx(clip.frames[0].data()[i]).epsilon(1e-9));
}

TEST_CASE("render_clip: motion keeping the ellipse in frame is enforced") {
    PulseParams p;
    MotionSchedule m;
    m.kind = MotionSchedule::Kind::Translate;
    m.max_translate_px = 60.0;
    CHECK_THROWS_AS(render_clip(4, p, SceneParams{}, m, ResolutionSchedule{}, 1), ArgumentError);
}

TEST_CASE("render_clip: rotation moves pixels but preserves the pulse") {
    PulseParams p;
    p.hr_bpm = 80;
    MotionSchedule m;
    m.kind = MotionSchedule::Kind::Rotate;
    m.max_rotation_deg = 35.0;
    auto moving = render_clip(90, p, quiet_scene(), m, ResolutionSchedule{}, 9);
    auto still = render_clip(90, p, quiet_scene(), MotionSchedule{}, ResolutionSchedule{}, 9);
    double max_diff = 0;
    for (int64_t i = 0; i < moving.frames[30].numel(); ++i)
        max_diff = std::max(max_diff,
                            std::abs(moving.frames[30].data()[i] - still.frames[30].data()[i]));
    CHECK(max_diff > 0.05);  // the ellipse visibly rotated
    std::vector<double> trace;
    for (const auto& f : moving.frames) trace.push_back(green_mean(f));
    CHECK(pearson(trace, moving.gt_signal) > 0.95);
}

TEST_CASE("clip export and load round-trip bit-exactly") {
    PulseParams p;
    p.hr_bpm = 100;
    ResolutionSchedule sched;
    sched.kind = ResolutionSchedule::Kind::RampDown;
    sched.start_size = 64;
    sched.end_size = 32;
    auto clip = render_clip(12, p, SceneParams{}, MotionSchedule{}, sched, 11);
    auto dir = std::filesystem::temp_directory_path() / "arppg_synth_rt";
    std::filesystem::remove_all(dir);
    export_clip(clip, dir);
    auto loaded = load_clip(dir);
    REQUIRE(loaded.frames.size() == clip.frames.size());
    for (size_t t = 0; t < clip.frames.size(); ++t) {
        REQUIRE(loaded.frames[t].shape() == clip.frames[t].shape());
        for (int64_t i = 0; i < clip.frames[t].numel(); ++i)
            CHECK(loaded.frames[t].data()[i] == clip.frames[t].data()[i]);
    }
    for (size_t t = 0; t < clip.gt_signal.size(); ++t)
        CHECK(loaded.gt_signal[t] == clip.gt_signal[t]);
    CHECK(loaded.gt_hr_bpm == clip.gt_hr_bpm);
    std::filesystem::remove_all(dir);
}

TEST_CASE("load_clip: missing or malformed inputs rejected") {
    auto dir = std::filesystem::temp_directory_path() / "arppg_synth_bad";
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_clip(dir), ArgumentError);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "gt.csv") << "wrong,header\n";
    CHECK_THROWS_AS(load_clip(dir), ArgumentError);
    std::filesystem::remove_all(dir);
}
