#pragma once

#include "arppg/ops.hpp"

namespace arppg {

// Squared-magnitude spectrum of a real signal: the mean is removed, the
// signal zero-padded to pad_to, and bins 0..pad_to/2 of the DFT are returned
// as |X_k|^2. Bin k corresponds to frequency k*fps/pad_to for the caller's
// sample rate. Differentiable (the DFT is linear in the input).
inline Tensor dft_power(const Tensor& signal, int pad_to) {
    const Shape& s = signal.shape();
    int64_t T = signal.numel();
    if (s.size() != 1) throw ShapeError("dft_power: signal must be rank 1, got " + shape_str(s));
    if (pad_to < T)
        throw ArgumentError("dft_power: pad length " + std::to_string(pad_to) +
                            " shorter than signal length " + std::to_string(T));
    int K = pad_to / 2 + 1;
    const auto& x = signal.data();
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(T);

    // cos/sin lookup over one period; angles are (2*pi/N) * ((k*t) mod N)
    auto cos_tab = std::make_shared<std::vector<double>>(pad_to);
    auto sin_tab = std::make_shared<std::vector<double>>(pad_to);
    for (int i = 0; i < pad_to; ++i) {
        double th = 2.0 * M_PI * i / pad_to;
        (*cos_tab)[i] = std::cos(th);
        (*sin_tab)[i] = std::sin(th);
    }

    auto re = std::make_shared<std::vector<double>>(K);
    auto im = std::make_shared<std::vector<double>>(K);
    std::vector<double> power(K);
    for (int k = 0; k < K; ++k) {
        double rr = 0.0, ii = 0.0;
        int64_t idx = 0;
        for (int64_t t = 0; t < T; ++t) {
            double v = x[t] - m;
            rr += v * (*cos_tab)[idx];
            ii += v * (*sin_tab)[idx];
            idx += k;
            if (idx >= pad_to) idx -= pad_to;
        }
        (*re)[k] = rr;
        (*im)[k] = ii;
        power[k] = rr * rr + ii * ii;
    }

    auto xn = signal.node();
    auto backfn = [xn, T, pad_to, K, re, im, cos_tab, sin_tab](TensorNode& self) {
        std::vector<double> dx(T, 0.0);
        for (int k = 0; k < K; ++k) {
            double g = self.grad[k];
            if (g == 0.0) continue;
            double gr = 2.0 * g * (*re)[k];
            double gi = 2.0 * g * (*im)[k];
            int64_t idx = 0;
            for (int64_t t = 0; t < T; ++t) {
                dx[t] += gr * (*cos_tab)[idx] + gi * (*sin_tab)[idx];
                idx += k;
                if (idx >= pad_to) idx -= pad_to;
            }
        }
        // mean removal: project out the constant component
        double dm = 0.0;
        for (double v : dx) dm += v;
        dm /= static_cast<double>(T);
        for (int64_t t = 0; t < T; ++t) xn->grad[t] += dx[t] - dm;
    };
    return make_op_node({K}, std::move(power), {xn}, std::move(backfn));
}

}  // namespace arppg
