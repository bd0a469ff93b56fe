#pragma once

#include <cmath>
#include <cstring>

#include "arppg/tensor.hpp"

namespace arppg {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* opname) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(opname) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    auto an = a.node(), bn = b.node();
    return make_op_node(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
    auto an = a.node(), bn = b.node();
    return make_op_node(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    auto an = a.node(), bn = b.node();
    return make_op_node(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->data[i];
        if (bn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->data[i];
    });
}

inline Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (auto& v : out) v *= c;
    auto an = a.node();
    return make_op_node(a.shape(), std::move(out), {an}, [an, c](TensorNode& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += c * self.grad[i];
    });
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> out(a.data());
    for (auto& v : out)
        if (v < 0.0) v = 0.0;
    auto an = a.node();
    return make_op_node(a.shape(), std::move(out), {an}, [an](TensorNode& self) {
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (self.data[i] > 0.0) an->grad[i] += self.grad[i];
    });
}

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    auto an = a.node();
    return make_op_node({1}, {s}, {an}, [an](TensorNode& self) {
        double g = self.grad[0];
        for (auto& v : an->grad) v += g;
    });
}

inline Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    double inv = 1.0 / static_cast<double>(a.numel());
    auto an = a.node();
    return make_op_node({1}, {s * inv}, {an}, [an, inv](TensorNode& self) {
        double g = self.grad[0] * inv;
        for (auto& v : an->grad) v += g;
    });
}

// Square root of a positive scalar.
inline Tensor sqrt_scalar(const Tensor& a) {
    double r = std::sqrt(a.value());
    auto an = a.node();
    return make_op_node({1}, {r}, {an}, [an, r](TensorNode& self) {
        an->grad[0] += self.grad[0] * 0.5 / r;
    });
}

// Scalar arithmetic for loss composition.
inline Tensor add_scalars(const Tensor& a, const Tensor& b) { return add(a, b); }

inline Tensor div_scalar(const Tensor& num, const Tensor& den) {
    double d = den.value();
    double q = num.value() / d;
    auto nn = num.node(), dn = den.node();
    return make_op_node({1}, {q}, {nn, dn}, [nn, dn, d, q](TensorNode& self) {
        double g = self.grad[0];
        if (nn->requires_grad) nn->grad[0] += g / d;
        if (dn->requires_grad) dn->grad[0] -= g * q / d;
    });
}

inline Tensor add_const(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (auto& v : out) v += c;
    auto an = a.node();
    return make_op_node(a.shape(), std::move(out), {an}, [an](TensorNode& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

// Subtract a scalar tensor from every element.
inline Tensor sub_bcast(const Tensor& a, const Tensor& s) {
    double c = s.value();
    std::vector<double> out(a.data());
    for (auto& v : out) v -= c;
    auto an = a.node(), sn = s.node();
    return make_op_node(a.shape(), std::move(out), {an, sn}, [an, sn](TensorNode& self) {
        if (an->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        if (sn->requires_grad) {
            double g = 0.0;
            for (double v : self.grad) g += v;
            sn->grad[0] -= g;
        }
    });
}

// Per-channel bias over layout C x (spatial...).
inline Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    const Shape& s = x.shape();
    int C = s[0];
    if (bias.numel() != C)
        throw ShapeError("add_channel_bias: bias length " + std::to_string(bias.numel()) +
                         " vs channels " + std::to_string(C));
    int64_t spatial = x.numel() / C;
    std::vector<double> out(x.data());
    const auto& bd = bias.data();
    for (int c = 0; c < C; ++c) {
        double b = bd[c];
        for (int64_t i = 0; i < spatial; ++i) out[c * spatial + i] += b;
    }
    auto xn = x.node(), bn = bias.node();
    return make_op_node(s, std::move(out), {xn, bn}, [xn, bn, C, spatial](TensorNode& self) {
        if (xn->requires_grad)
            for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        if (bn->requires_grad) {
            for (int c = 0; c < C; ++c) {
                double g = 0.0;
                for (int64_t i = 0; i < spatial; ++i) g += self.grad[c * spatial + i];
                bn->grad[c] += g;
            }
        }
    });
}

// Concatenate along axis 0 (channels for CxHxW operands).
inline Tensor concat0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat0: empty input list");
    Shape rest(parts[0].shape().begin() + 1, parts[0].shape().end());
    int total = 0;
    for (const auto& p : parts) {
        Shape r(p.shape().begin() + 1, p.shape().end());
        if (r != rest) throw ShapeError("concat0: trailing shape mismatch");
        total += p.shape()[0];
    }
    Shape out_shape = parts[0].shape();
    out_shape[0] = total;
    std::vector<double> out;
    out.reserve(shape_numel(out_shape));
    std::vector<NodePtr> nodes;
    std::vector<int64_t> sizes;
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
        nodes.push_back(p.node());
        sizes.push_back(p.numel());
    }
    auto parents = nodes;
    return make_op_node(out_shape, std::move(out), std::move(parents),
                        [nodes, sizes](TensorNode& self) {
                            int64_t off = 0;
                            for (size_t k = 0; k < nodes.size(); ++k) {
                                if (nodes[k]->requires_grad)
                                    for (int64_t i = 0; i < sizes[k]; ++i)
                                        nodes[k]->grad[i] += self.grad[off + i];
                                off += sizes[k];
                            }
                        });
}

// Stack equal-shape tensors along a new leading axis.
inline Tensor stack0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("stack0: empty input list");
    for (const auto& p : parts) check_same_shape(parts[0], p, "stack0");
    Shape out_shape = parts[0].shape();
    out_shape.insert(out_shape.begin(), static_cast<int>(parts.size()));
    std::vector<double> out;
    out.reserve(shape_numel(out_shape));
    std::vector<NodePtr> nodes;
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
        nodes.push_back(p.node());
    }
    int64_t chunk = parts[0].numel();
    auto parents = nodes;
    return make_op_node(out_shape, std::move(out), std::move(parents),
                        [nodes, chunk](TensorNode& self) {
                            for (size_t k = 0; k < nodes.size(); ++k)
                                if (nodes[k]->requires_grad)
                                    for (int64_t i = 0; i < chunk; ++i)
                                        nodes[k]->grad[i] += self.grad[k * chunk + i];
                        });
}

inline Tensor reshape(const Tensor& a, const Shape& s) {
    if (shape_numel(s) != a.numel())
        throw ShapeError("reshape: numel mismatch " + shape_str(a.shape()) + " -> " + shape_str(s));
    auto an = a.node();
    return make_op_node(s, a.data(), {an}, [an](TensorNode& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

// Slice along axis 0: rows [begin, begin+count).
inline Tensor slice0(const Tensor& a, int begin, int count) {
    const Shape& s = a.shape();
    if (begin < 0 || begin + count > s[0]) throw ArgumentError("slice0: range out of bounds");
    int64_t chunk = a.numel() / s[0];
    Shape out_shape = s;
    out_shape[0] = count;
    std::vector<double> out(a.data().begin() + begin * chunk,
                            a.data().begin() + (begin + count) * chunk);
    auto an = a.node();
    return make_op_node(out_shape, std::move(out), {an}, [an, begin, chunk](TensorNode& self) {
        for (size_t i = 0; i < self.grad.size(); ++i) an->grad[begin * chunk + i] += self.grad[i];
    });
}

}  // namespace arppg
