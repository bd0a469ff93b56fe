#pragma once

#include <string>

#include "arppg/tensor.hpp"

namespace arppg {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

using ParamSet = std::vector<NamedParam>;

inline void zero_grads(ParamSet& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

inline int64_t param_count(const ParamSet& params) {
    int64_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// First/second moment buffers, one pair per parameter, in ParamSet order.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t step = 0;

    void init(const ParamSet& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.tensor.numel(), 0.0);
            v.emplace_back(p.tensor.numel(), 0.0);
        }
        step = 0;
    }
};

// Adam with decoupled weight decay (applied to the parameter before the
// moment update) and bias-corrected moments. Parameters with empty grad
// buffers are treated as zero-gradient.
// lr_scales, when given, multiplies cfg.lr per parameter tensor (e.g. to slow
// down a recurrent block whose full-rate Adam updates destabilize training).
inline void adam_step(ParamSet& params, AdamState& state, const AdamConfig& cfg,
                      const std::vector<double>* lr_scales = nullptr) {
    if (state.m.size() != params.size()) state.init(params);
    if (lr_scales && lr_scales->size() != params.size())
        throw ShapeError("adam_step: lr_scales size mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k].tensor;
        auto& data = p.data();
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (m.size() != data.size())
            throw ShapeError("adam_step: state/parameter size mismatch for " + params[k].name);
        const auto& grad = p.grad();
        bool has_grad = grad.size() == data.size();
        double lr = cfg.lr * (lr_scales ? (*lr_scales)[k] : 1.0);
        for (size_t i = 0; i < data.size(); ++i) {
            double g = has_grad ? grad[i] : 0.0;
            if (cfg.weight_decay != 0.0) data[i] -= lr * cfg.weight_decay * data[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

// Central-finite-difference check of a scalar-valued function of the given
// inputs. Returns the max over coordinates of
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                         std::vector<Tensor> inputs, double eps = 1e-5) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    Tensor loss = fn(inputs);
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) {
        if (t.grad().size() != t.data().size())
            analytic.emplace_back(t.numel(), 0.0);
        else
            analytic.push_back(t.grad());
    }

    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        auto& data = inputs[k].data();
        for (size_t i = 0; i < data.size(); ++i) {
            double saved = data[i];
            double fp, fm;
            {
                NoGradGuard ng;
                data[i] = saved + eps;
                fp = fn(inputs).value();
                data[i] = saved - eps;
                fm = fn(inputs).value();
                data[i] = saved;
            }
            double numeric = (fp - fm) / (2.0 * eps);
            if (!std::isfinite(numeric))
                throw ArgumentError("grad_check: non-finite numeric derivative at input " +
                                    std::to_string(k) + " coordinate " + std::to_string(i));
            double a = analytic[k][i];
            double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace arppg
