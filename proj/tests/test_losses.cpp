#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "arppg/losses.hpp"
#include "arppg/optim.hpp"
#include "oracles.hpp"

using namespace arppg;

namespace {

Tensor sinusoid(double hr_bpm, double fps, int T, double amp = 1.0, double phase = 0.0) {
    std::vector<double> v(T);
    for (int t = 0; t < T; ++t)
        v[t] = amp * std::sin(2.0 * M_PI * (hr_bpm / 60.0) * t / fps + phase);
    return Tensor::from({T}, std::move(v));
}

LossConfig small_loss_cfg() {
    LossConfig cfg;
    cfg.psd_pad = 64;
    return cfg;
}

}  // namespace

TEST_CASE("pearson_loss: perfectly correlated signals score zero") {
    Tensor y = sinusoid(75, 30, 64);
    CHECK(pearson_loss(y, y).value() == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("pearson_loss: anti-correlated signals score two") {
    Tensor y = sinusoid(75, 30, 64);
    Tensor neg = scale(y, -1.0);
    CHECK(pearson_loss(neg, y).value() == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("pearson_loss: invariant under positive affine maps of the target") {
    Tensor y = sinusoid(90, 30, 64);
    Tensor aff = add_const(scale(y, 3.0), 5.0);
    CHECK(pearson_loss(aff, y).value() == doctest::Approx(0.0).epsilon(1e-7));

    Rng rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor r = Tensor::randn({32}, rng);
        double a = rng.uniform(0.1, 5.0), b = rng.uniform(-3.0, 3.0);
        Tensor aff2 = add_const(scale(r, a), b);
        CHECK(pearson_loss(aff2, r).value() == doctest::Approx(0.0).epsilon(1e-6));
    }
}

TEST_CASE("pearson_loss: bounded in [0, 2] on random pairs") {
    Rng rng(72);
    for (int trial = 0; trial < 10; ++trial) {
        double v = pearson_loss(Tensor::randn({24}, rng), Tensor::randn({24}, rng)).value();
        CHECK(v >= 0.0);
        CHECK(v <= 2.0);
    }
}

TEST_CASE("pearson_loss: degenerate target and short signals rejected") {
    Tensor y = sinusoid(75, 30, 16);
    CHECK_THROWS_AS(pearson_loss(y, Tensor::full({16}, 0.7)), ArgumentError);
    CHECK_THROWS_AS(pearson_loss(Tensor::zeros({2}), Tensor::zeros({2})), ArgumentError);
}

TEST_CASE("pearson_loss: gradient check away from constant signals") {
    Rng rng(73);
    Tensor y = Tensor::randn({16}, rng);
    Tensor gt = sinusoid(80, 30, 16);
    auto fn = [&](const std::vector<Tensor>& in) { return pearson_loss(in[0], gt); };
    CHECK(grad_check(fn, {y}) < 1e-6);
}

TEST_CASE("freq_ce_loss: pure tone concentrates the in-band spectrum at the truth bin") {
    LossConfig cfg;  // psd_pad 2048
    double hr = 75.0;
    Tensor y = sinusoid(hr, cfg.fps, 160, 10.0);
    Tensor p = dft_power(y, cfg.psd_pad);
    auto bb = detail::band_bins(hr, cfg.psd_pad, cfg);
    int best = 0;
    for (size_t i = 1; i < bb.bins.size(); ++i)
        if (p.data()[bb.bins[i]] > p.data()[bb.bins[best]]) best = static_cast<int>(i);
    CHECK(best == bb.target);
    // And the loss is far below the uniform-spectrum value.
    CHECK(freq_ce_loss(y, hr, cfg).value() < 0.1);
}

TEST_CASE("freq_ce_loss: flat spectrum costs ln(K)") {
    LossConfig cfg = small_loss_cfg();
    auto bb = detail::band_bins(100.0, cfg.psd_pad, cfg);
    double lnK = std::log(static_cast<double>(bb.bins.size()));
    // All-zero signal -> zero power everywhere -> uniform softmax.
    CHECK(freq_ce_loss(Tensor::zeros({32}), 100.0, cfg).value() == doctest::Approx(lnK).epsilon(1e-12));
}

TEST_CASE("freq_ce_loss: softmax over power is scale-sensitive") {
    LossConfig cfg;
    Tensor y = sinusoid(75, cfg.fps, 160, 0.3);
    double base = freq_ce_loss(y, 75, cfg).value();
    double scaled = freq_ce_loss(scale(y, 10.0), 75, cfg).value();
    CHECK(base != scaled);
    CHECK(scaled < base);  // more power at the true bin sharpens the softmax
}

TEST_CASE("freq_ce_loss: loss falls as truth-bin power grows") {
    LossConfig cfg;
    // A rate sitting exactly on a PSD bin (k=80: 60*80*30/2048 bpm) keeps the
    // truth bin the strict spectral max, so sharpening must lower the loss.
    double hr = 60.0 * 80.0 * cfg.fps / cfg.psd_pad;
    double prev = 1e300;
    for (double amp : {0.005, 0.01, 0.02, 0.04, 0.08}) {
        double v = freq_ce_loss(sinusoid(hr, cfg.fps, 160, amp), hr, cfg).value();
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("freq_ce_loss: out-of-band ground truth rejected") {
    LossConfig cfg;
    Tensor y = sinusoid(75, cfg.fps, 64);
    CHECK_THROWS_AS(freq_ce_loss(y, 30.0, cfg), ArgumentError);
    CHECK_THROWS_AS(freq_ce_loss(y, 200.0, cfg), ArgumentError);
}

TEST_CASE("freq_ce_loss: gradient check") {
    Rng rng(74);
    LossConfig cfg = small_loss_cfg();
    Tensor y = Tensor::randn({16}, rng);
    auto fn = [&](const std::vector<Tensor>& in) { return freq_ce_loss(in[0], 90.0, cfg); };
    CHECK(grad_check(fn, {y}) < 1e-6);
}

TEST_CASE("crc_loss: hand computation and identity") {
    CHECK(crc_loss(Tensor::from({2}, {1.0, 2.0}), Tensor::zeros({2})).value() == 1.5);
    Rng rng(75);
    Tensor a = Tensor::randn({20}, rng);
    CHECK(crc_loss(a, a).value() == 0.0);
}

TEST_CASE("crc_loss: metric axioms on random triples") {
    Rng rng(76);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = Tensor::randn({12}, rng);
        Tensor b = Tensor::randn({12}, rng);
        Tensor c = Tensor::randn({12}, rng);
        double ab = crc_loss(a, b).value();
        double ba = crc_loss(b, a).value();
        double bc = crc_loss(b, c).value();
        double ac = crc_loss(a, c).value();
        CHECK(ab >= 0.0);
        CHECK(ab == ba);
        CHECK(ac <= ab + bc + 1e-12);
    }
}

TEST_CASE("crc_loss: length mismatch rejected") {
    CHECK_THROWS_AS(crc_loss(Tensor::zeros({4}), Tensor::zeros({5})), ShapeError);
}

TEST_CASE("crc_loss: gradient check away from ties") {
    Rng rng(77);
    Tensor a = Tensor::randn({16}, rng);
    Tensor b = Tensor::randn({16}, rng);
    auto fn = [&](const std::vector<Tensor>& in) { return crc_loss(in[0], in[1]); };
    CHECK(grad_check(fn, {a, b}) < 1e-6);
}

TEST_CASE("overall_loss: consistency term vanishes for identical views") {
    LossConfig cfg;
    Tensor y = sinusoid(75, cfg.fps, 160);
    auto lb = overall_loss(y, y, y, 75.0, cfg);
    CHECK(lb.l_crc.value() == 0.0);
    CHECK(lb.l_time.value() == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("overall_loss: alpha zero leaves only the averaged supervised terms") {
    Rng rng(78);
    LossConfig cfg = small_loss_cfg();
    cfg.alpha = 0.0;
    Tensor gt = sinusoid(100, cfg.fps, 32);
    Tensor y1 = add(gt, Tensor::randn({32}, rng, 0.3));
    Tensor y2 = add(gt, Tensor::randn({32}, rng, 0.3));
    auto lb = overall_loss(y1, y2, gt, 100.0, cfg);
    CHECK(lb.total.value() == doctest::Approx(lb.l_time.value() + lb.l_fre.value()).epsilon(1e-12));
}

TEST_CASE("overall_loss: matches the hand-composed sum of the three terms") {
    Rng rng(79);
    LossConfig cfg = small_loss_cfg();
    Tensor gt = sinusoid(120, cfg.fps, 32);
    Tensor y1 = Tensor::randn({32}, rng);
    Tensor y2 = Tensor::randn({32}, rng);
    auto lb = overall_loss(y1, y2, gt, 120.0, cfg);
    double lt = 0.5 * (pearson_loss(y1, gt).value() + pearson_loss(y2, gt).value());
    double lf = 0.5 * (freq_ce_loss(y1, 120.0, cfg).value() + freq_ce_loss(y2, 120.0, cfg).value());
    double lc = crc_loss(y1, y2).value();
    CHECK(lb.l_time.value() == doctest::Approx(lt).epsilon(1e-12));
    CHECK(lb.l_fre.value() == doctest::Approx(lf).epsilon(1e-12));
    CHECK(lb.l_crc.value() == doctest::Approx(lc).epsilon(1e-12));
    CHECK(lb.total.value() == doctest::Approx(lt + lf + cfg.alpha * lc).epsilon(1e-12));
}

TEST_CASE("overall_loss: gradient flows into both views") {
    Rng rng(80);
    LossConfig cfg = small_loss_cfg();
    Tensor gt = sinusoid(90, cfg.fps, 32);
    Tensor y1 = Tensor::randn({32}, rng);
    Tensor y2 = Tensor::randn({32}, rng);
    auto fn = [&](const std::vector<Tensor>& in) {
        return overall_loss(in[0], in[1], gt, 90.0, cfg).total;
    };
    CHECK(grad_check(fn, {y1, y2}) < 1e-6);
}
