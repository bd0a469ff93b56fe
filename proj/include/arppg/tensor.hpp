#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "arppg/rng.hpp"

namespace arppg {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One recorded operation output. Parents plus backfn form the tape; walking
// nodes in reverse topological order replays the graph backward.
struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;  // participates in the differentiation chain
    bool is_leaf = false;        // user-created parameter or input
    std::vector<NodePtr> parents;
    std::function<void(TensorNode&)> backfn;  // adds into parents' grads

    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Thread-local recording switch; ops built while disabled have no parents,
// so intermediates free themselves as handles go out of scope.
inline bool& grad_recording_flag() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_recording_flag()) { grad_recording_flag() = false; }
    ~NoGradGuard() { grad_recording_flag() = prev; }
};

// Value-semantic handle onto a graph node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& s) { return full(s, 0.0); }

    static Tensor full(const Shape& s, double v) {
        auto n = std::make_shared<TensorNode>();
        n->shape = s;
        n->data.assign(shape_numel(s), v);
        n->is_leaf = true;
        return Tensor(n);
    }

    static Tensor from(const Shape& s, std::vector<double> values) {
        if (static_cast<int64_t>(values.size()) != shape_numel(s))
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(s));
        auto n = std::make_shared<TensorNode>();
        n->shape = s;
        n->data = std::move(values);
        n->is_leaf = true;
        return Tensor(n);
    }

    static Tensor scalar(double v) { return full({1}, v); }

    // Trainable parameter.
    static Tensor param(const Shape& s, std::vector<double> values) {
        Tensor t = from(s, std::move(values));
        t.node_->requires_grad = true;
        return t;
    }

    static Tensor randn(const Shape& s, Rng& rng, double stddev = 1.0) {
        std::vector<double> v(shape_numel(s));
        for (auto& x : v) x = rng.normal(0.0, stddev);
        return from(s, std::move(v));
    }

    bool defined() const { return node_ != nullptr; }
    NodePtr node() const { return node_; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }

    double value() const {
        if (numel() != 1) throw ArgumentError("value() on non-scalar tensor " + shape_str(shape()));
        return node_->data[0];
    }

    double operator[](int64_t i) const { return node_->data[static_cast<size_t>(i)]; }

    void zero_grad() { node_->grad.clear(); }

    Tensor detached_copy() const {
        return from(shape(), data());
    }

private:
    NodePtr node_;
};

// Creates the output node of an op, wiring parents only while recording.
inline Tensor make_op_node(const Shape& shape, std::vector<double> data,
                           std::vector<NodePtr> parents,
                           std::function<void(TensorNode&)> backfn) {
    auto n = std::make_shared<TensorNode>();
    n->shape = shape;
    n->data = std::move(data);
    if (grad_recording_flag()) {
        bool needs = false;
        for (const auto& p : parents)
            if (p->requires_grad) needs = true;
        if (needs) {
            n->requires_grad = true;
            n->parents = std::move(parents);
            n->backfn = std::move(backfn);
        }
    }
    return Tensor(n);
}

// Reverse-mode sweep from a scalar loss. With release_graph the data and grad
// buffers of consumed interior nodes are dropped as the sweep passes them,
// which bounds peak memory on large training graphs.
inline void backward(const Tensor& loss, bool release_graph = false) {
    if (loss.numel() != 1) throw ArgumentError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    NodePtr root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS: topo has parents before children. Strong refs
    // keep nodes alive even when release_graph severs parent links mid-sweep.
    std::vector<NodePtr> topo;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<NodePtr, size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodePtr p = node->parents[idx++];
            if (p->requires_grad && !visited.count(p.get())) {
                visited.insert(p.get());
                stack.emplace_back(std::move(p), 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        TensorNode* n = it->get();
        if (n->backfn) {
            for (auto& p : n->parents)
                if (p->requires_grad) p->ensure_grad();
            n->backfn(*n);
        }
        if (release_graph && !n->is_leaf) {
            std::vector<double>().swap(n->data);
            std::vector<double>().swap(n->grad);
            n->backfn = nullptr;
            n->parents.clear();
        }
    }
}

}  // namespace arppg
