#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hmr/tensor.hpp"

namespace hmr {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid for the tape that
// created it.
struct Value {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape, define-by-run: forward values are computed eagerly as
// nodes are recorded, backward replays the records in reverse creation order
// (which is a reverse topological order by construction). A tape and its
// tensors are confined to one thread; independent tapes may run in parallel.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value leaf(Tensor t) {
        bool rg = t.requires_grad;
        return push(std::move(t), rg, nullptr);
    }
    Value leaf(Tensor t, bool requires_grad) {
        t.requires_grad = requires_grad;
        return push(std::move(t), requires_grad, nullptr);
    }
    Value constant(Tensor t) {
        t.requires_grad = false;
        return push(std::move(t), false, nullptr);
    }

    const Tensor& val(Value v) const { return nodes_[check(v)].value; }

    // Records a custom node. `needs_grad` is derived from the inputs; the
    // backward fn receives the accumulated output gradient and must add its
    // contributions into the inputs' buffers via grad_data()/accumulate().
    Value record(const char* op, Tensor value, std::span<const Value> inputs, BackwardFn fn);

    // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. `loss` must be
    // scalar-shaped. A second call without reset() is rejected.
    void backward(Value loss);

    bool backward_done() const { return backward_done_; }

    // Gradient of a node after backward(); zero tensor if it never received
    // a contribution.
    const Tensor& grad(Value v);

    // Raw gradient buffer for accumulation inside backward fns; nullptr when
    // the node does not need a gradient.
    double* grad_data(Value v);
    void accumulate(Value v, const Tensor& g);

    bool needs_grad(Value v) const { return nodes_[check(v)].needs_grad; }

    // Drops gradient state so another backward() may run on the same graph.
    void reset_grads();

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        bool grad_live = false;
        const char* op = "";
        BackwardFn backward;
    };

    Value push(Tensor t, bool needs, BackwardFn fn, const char* op = "leaf") {
        Node n;
        n.value = std::move(t);
        n.needs_grad = needs;
        n.op = op;
        n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return Value{this, static_cast<int>(nodes_.size()) - 1};
    }

    int check(Value v) const {
        if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
            throw ContractError("value handle does not belong to this tape");
        return v.id;
    }

    // deque: recording new nodes never invalidates val() references held by
    // composites built op-by-op
    std::deque<Node> nodes_;
    bool backward_done_ = false;

    friend class TapeAccess;
};

// ---- primitives -----------------------------------------------------------
// Elementwise ops broadcast the second operand when its shape is a trailing
// suffix of the first's (the leading-batch rule); anything else is a shape
// error naming the op.

Value add(Value a, Value b);
Value mul(Value a, Value b);
Value div_(Value a, Value b);
Value sub(Value a, Value b);
Value scale(Value a, double c);

Value vexp(Value a);
Value vsqrt(Value a);
Value vabs(Value a);
Value silu(Value a);
Value vsigmoid(Value a);
Value vsoftplus(Value a);

Value matmul(Value a, Value b);
Value transpose2d(Value a);
Value softmax_lastdim(Value a);

// Depthwise causal Conv1D over rows of x [L, C] with kernel w [K, C]; each
// segment [seg[i], seg[i+1]) is padded and convolved independently.
Value conv1d_depthwise(Value x, Value w, const std::vector<int>& segments = {});

Value gather_rows(Value x, std::vector<int> idx);
// Scatter-add rows of x [m, d] to positions idx in an [n, d] output.
Value scatter_rows(Value x, std::vector<int> idx, int out_rows);

// grid [H, W, C], coords [n, 2] normalized to [-1, 1]^2 (x = width axis),
// border-clamped. Gradients flow to both grid values and coords.
Value bilinear_sample_2d(Value grid, Value coords);

Value reduce_sum(Value a);
Value reduce_mean(Value a);

Value concat(std::span<const Value> parts, int dim);
Value slice(Value a, int dim, int begin, int end);
Value reshape(Value a, std::vector<int> new_shape);

// x [rows, cols] scaled per-row by s [rows, 1].
Value scale_rows(Value x, Value s);

// ---- composites ------------------------------------------------------------

inline Value linear(Value x, Value w, Value b) { return add(matmul(x, w), b); }

// Row-wise L2 norms of an [n, d] matrix -> [n, 1].
Value row_l2_norm(Value x);

}  // namespace hmr
