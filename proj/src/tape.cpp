#include "hmr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace hmr {

Value Tape::record(const char* op, Tensor value, std::span<const Value> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Value& in : inputs) {
        check(in);
        needs = needs || nodes_[in.id].needs_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr, op);
}

void Tape::backward(Value loss) {
    int id = check(loss);
    if (backward_done_)
        throw ContractError("backward already ran on this tape; reset_grads() first");
    if (nodes_[id].value.numel() != 1)
        throw ContractError("backward: loss must be scalar-shaped, got " +
                            Tensor::shape_str(nodes_[id].value.shape));
    backward_done_ = true;
    if (!nodes_[id].needs_grad) return;  // nothing differentiable upstream

    nodes_[id].grad = Tensor(nodes_[id].value.shape, 1.0);
    nodes_[id].grad_live = true;
    for (int i = id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.needs_grad || !n.grad_live || !n.backward) continue;
        n.backward(*this, n.grad);
    }
}

const Tensor& Tape::grad(Value v) {
    int id = check(v);
    Node& n = nodes_[id];
    if (!n.grad_live) {
        n.grad = Tensor(n.value.shape, 0.0);
        n.grad_live = true;
    }
    return n.grad;
}

double* Tape::grad_data(Value v) {
    int id = check(v);
    Node& n = nodes_[id];
    if (!n.needs_grad) return nullptr;
    if (!n.grad_live) {
        n.grad = Tensor(n.value.shape, 0.0);
        n.grad_live = true;
    }
    return n.grad.data.data();
}

void Tape::accumulate(Value v, const Tensor& g) {
    double* dst = grad_data(v);
    if (!dst) return;
    const Tensor& t = nodes_[v.id].value;
    if (g.shape != t.shape)
        throw ShapeError("accumulate: grad shape " + Tensor::shape_str(g.shape) +
                         " vs value shape " + Tensor::shape_str(t.shape));
    for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g.data[i];
}

void Tape::reset_grads() {
    for (Node& n : nodes_) {
        n.grad = Tensor();
        n.grad_live = false;
    }
    backward_done_ = false;
}

// ---- helpers ----------------------------------------------------------------

namespace {

// Trailing-suffix broadcast: returns the number of leading repeats of b over
// a, or throws naming `op`.
int64_t broadcast_repeats(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape == b.shape) return 1;
    if (b.ndim() <= a.ndim()) {
        bool suffix = true;
        for (int i = 0; i < b.ndim(); ++i)
            if (b.shape[b.ndim() - 1 - i] != a.shape[a.ndim() - 1 - i]) suffix = false;
        if (suffix) return a.numel() / b.numel();
    }
    throw ShapeError(std::string(op) + ": cannot broadcast " + Tensor::shape_str(b.shape) +
                     " over " + Tensor::shape_str(a.shape));
}

Tape& same_tape(Value a, Value b) {
    if (a.tape == nullptr || a.tape != b.tape)
        throw ContractError("operands live on different tapes");
    return *a.tape;
}

struct Elementwise {
    const char* name;
    double (*f)(double);
    double (*df)(double);  // derivative as a function of the input value
};

Value unary_op(const Elementwise& e, Value a) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    Tensor out(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) out.data[i] = e.f(x.data[i]);
    Value in[] = {a};
    auto dfn = e.df;
    return tape.record(e.name, std::move(out), in, [a, dfn](Tape& t, const Tensor& gy) {
        double* da = t.grad_data(a);
        if (!da) return;
        const Tensor& x = t.val(a);
        for (int64_t i = 0; i < x.numel(); ++i) da[i] += gy.data[i] * dfn(x.data[i]);
    });
}

// axis split of a shape into [outer, axis, inner] for concat/slice
void axis_blocks(const Tensor& t, int dim, int64_t& outer, int64_t& axis, int64_t& inner) {
    outer = 1;
    for (int i = 0; i < dim; ++i) outer *= t.shape[i];
    axis = t.shape[dim];
    inner = 1;
    for (int i = dim + 1; i < t.ndim(); ++i) inner *= t.shape[i];
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Value add(Value a, Value b) {
    Tape& tape = same_tape(a, b);
    const Tensor& x = tape.val(a);
    const Tensor& y = tape.val(b);
    int64_t reps = broadcast_repeats("add", x, y);
    int64_t m = y.numel();
    Tensor out(x.shape);
    for (int64_t r = 0; r < reps; ++r)
        for (int64_t i = 0; i < m; ++i) out.data[r * m + i] = x.data[r * m + i] + y.data[i];
    Value in[] = {a, b};
    return tape.record("add", std::move(out), in, [a, b, reps, m](Tape& t, const Tensor& gy) {
        if (double* da = t.grad_data(a))
            for (int64_t i = 0; i < gy.numel(); ++i) da[i] += gy.data[i];
        if (double* db = t.grad_data(b))
            for (int64_t r = 0; r < reps; ++r)
                for (int64_t i = 0; i < m; ++i) db[i] += gy.data[r * m + i];
    });
}

Value mul(Value a, Value b) {
    Tape& tape = same_tape(a, b);
    const Tensor& x = tape.val(a);
    const Tensor& y = tape.val(b);
    int64_t reps = broadcast_repeats("mul", x, y);
    int64_t m = y.numel();
    Tensor out(x.shape);
    for (int64_t r = 0; r < reps; ++r)
        for (int64_t i = 0; i < m; ++i) out.data[r * m + i] = x.data[r * m + i] * y.data[i];
    Value in[] = {a, b};
    return tape.record("mul", std::move(out), in, [a, b, reps, m](Tape& t, const Tensor& gy) {
        const Tensor& x = t.val(a);
        const Tensor& y = t.val(b);
        if (double* da = t.grad_data(a))
            for (int64_t r = 0; r < reps; ++r)
                for (int64_t i = 0; i < m; ++i) da[r * m + i] += gy.data[r * m + i] * y.data[i];
        if (double* db = t.grad_data(b))
            for (int64_t r = 0; r < reps; ++r)
                for (int64_t i = 0; i < m; ++i) db[i] += gy.data[r * m + i] * x.data[r * m + i];
    });
}

Value div_(Value a, Value b) {
    Tape& tape = same_tape(a, b);
    const Tensor& x = tape.val(a);
    const Tensor& y = tape.val(b);
    int64_t reps = broadcast_repeats("div", x, y);
    int64_t m = y.numel();
    Tensor out(x.shape);
    for (int64_t r = 0; r < reps; ++r)
        for (int64_t i = 0; i < m; ++i) out.data[r * m + i] = x.data[r * m + i] / y.data[i];
    Value in[] = {a, b};
    return tape.record("div", std::move(out), in, [a, b, reps, m](Tape& t, const Tensor& gy) {
        const Tensor& x = t.val(a);
        const Tensor& y = t.val(b);
        if (double* da = t.grad_data(a))
            for (int64_t r = 0; r < reps; ++r)
                for (int64_t i = 0; i < m; ++i) da[r * m + i] += gy.data[r * m + i] / y.data[i];
        if (double* db = t.grad_data(b))
            for (int64_t r = 0; r < reps; ++r)
                for (int64_t i = 0; i < m; ++i)
                    db[i] -= gy.data[r * m + i] * x.data[r * m + i] / (y.data[i] * y.data[i]);
    });
}

Value sub(Value a, Value b) { return add(a, scale(b, -1.0)); }

Value scale(Value a, double c) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    Tensor out(x.shape);
    for (int64_t i = 0; i < x.numel(); ++i) out.data[i] = c * x.data[i];
    Value in[] = {a};
    return tape.record("scale", std::move(out), in, [a, c](Tape& t, const Tensor& gy) {
        if (double* da = t.grad_data(a))
            for (int64_t i = 0; i < gy.numel(); ++i) da[i] += c * gy.data[i];
    });
}

Value vexp(Value a) {
    static const Elementwise e{"exp", [](double x) { return std::exp(x); },
                               [](double x) { return std::exp(x); }};
    return unary_op(e, a);
}

Value vsqrt(Value a) {
    static const Elementwise e{"sqrt", [](double x) { return std::sqrt(x); },
                               [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; }};
    return unary_op(e, a);
}

Value vabs(Value a) {
    static const Elementwise e{"abs", [](double x) { return std::abs(x); },
                               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }};
    return unary_op(e, a);
}

Value silu(Value a) {
    static const Elementwise e{
        "silu", [](double x) { return x * sigmoid(x); },
        [](double x) {
            double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        }};
    return unary_op(e, a);
}

Value vsigmoid(Value a) {
    static const Elementwise e{"sigmoid", [](double x) { return sigmoid(x); },
                               [](double x) {
                                   double s = sigmoid(x);
                                   return s * (1.0 - s);
                               }};
    return unary_op(e, a);
}

Value vsoftplus(Value a) {
    static const Elementwise e{"softplus", [](double x) { return softplus(x); },
                               [](double x) { return sigmoid(x); }};
    return unary_op(e, a);
}

// ---- linear algebra ----------------------------------------------------------

namespace {
// out[m,n] += A[m,k] * B[k,n], plain ikj order
void mm_acc(const double* A, const double* B, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = A + static_cast<int64_t>(i) * k;
        double* orow = out + static_cast<int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = B + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}
// out[m,k] += G[m,n] * B^T[n,k]   (i.e. dA = dY * B^T)
void mm_nt_acc(const double* G, const double* B, double* out, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* grow = G + static_cast<int64_t>(i) * n;
        double* orow = out + static_cast<int64_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            double gv = grow[j];
            if (gv == 0.0) continue;
            for (int p = 0; p < k; ++p) orow[p] += gv * B[static_cast<int64_t>(p) * n + j];
        }
    }
}
// out[k,n] += A^T[k,m] * G[m,n]   (i.e. dB = A^T * dY)
void mm_tn_acc(const double* A, const double* G, double* out, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = A + static_cast<int64_t>(i) * k;
        const double* grow = G + static_cast<int64_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double av = arow[p];
            if (av == 0.0) continue;
            double* orow = out + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * grow[j];
        }
    }
}
}  // namespace

Value matmul(Value a, Value b) {
    Tape& tape = same_tape(a, b);
    const Tensor& x = tape.val(a);
    const Tensor& y = tape.val(b);
    if (x.ndim() != 2 || y.ndim() != 2)
        throw ShapeError("matmul: expects 2-D operands, got " + Tensor::shape_str(x.shape) +
                         " and " + Tensor::shape_str(y.shape));
    if (x.cols() != y.rows())
        throw ShapeError("matmul: inner dims " + std::to_string(x.cols()) + " vs " +
                         std::to_string(y.rows()));
    int m = x.rows(), k = x.cols(), n = y.cols();
    Tensor out({m, n});
    mm_acc(x.data.data(), y.data.data(), out.data.data(), m, k, n);
    Value in[] = {a, b};
    return tape.record("matmul", std::move(out), in, [a, b, m, k, n](Tape& t, const Tensor& gy) {
        const Tensor& x = t.val(a);
        const Tensor& y = t.val(b);
        if (double* da = t.grad_data(a)) mm_nt_acc(gy.data.data(), y.data.data(), da, m, n, k);
        if (double* db = t.grad_data(b)) mm_tn_acc(x.data.data(), gy.data.data(), db, m, k, n);
    });
}

Value transpose2d(Value a) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    if (x.ndim() != 2) throw ShapeError("transpose: expects 2-D, got " + Tensor::shape_str(x.shape));
    int m = x.rows(), n = x.cols();
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = x.at(i, j);
    Value in[] = {a};
    return tape.record("transpose", std::move(out), in, [a, m, n](Tape& t, const Tensor& gy) {
        if (double* da = t.grad_data(a))
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    da[static_cast<int64_t>(i) * n + j] += gy.data[static_cast<int64_t>(j) * m + i];
    });
}

Value softmax_lastdim(Value a) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    int64_t d = x.shape.back();
    int64_t rows = x.numel() / d;
    Tensor out(x.shape);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data.data() + r * d;
        double* yr = out.data.data() + r * d;
        double mx = xr[0];
        for (int64_t i = 1; i < d; ++i) mx = std::max(mx, xr[i]);
        double z = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            z += yr[i];
        }
        for (int64_t i = 0; i < d; ++i) yr[i] /= z;
    }
    auto y = std::make_shared<Tensor>(out);
    Value in[] = {a};
    return tape.record("softmax_lastdim", std::move(out), in,
                       [a, y, rows, d](Tape& t, const Tensor& gy) {
                           double* da = t.grad_data(a);
                           if (!da) return;
                           for (int64_t r = 0; r < rows; ++r) {
                               const double* yr = y->data.data() + r * d;
                               const double* gr = gy.data.data() + r * d;
                               double dot = 0.0;
                               for (int64_t i = 0; i < d; ++i) dot += gr[i] * yr[i];
                               for (int64_t i = 0; i < d; ++i)
                                   da[r * d + i] += (gr[i] - dot) * yr[i];
                           }
                       });
}

// ---- conv / gather / scatter --------------------------------------------------

Value conv1d_depthwise(Value x, Value w, const std::vector<int>& segments) {
    Tape& tape = same_tape(x, w);
    const Tensor& xv = tape.val(x);
    const Tensor& wv = tape.val(w);
    if (xv.ndim() != 2 || wv.ndim() != 2)
        throw ShapeError("conv1d_depthwise: expects 2-D x and w");
    if (xv.cols() != wv.cols())
        throw ShapeError("conv1d_depthwise: channel mismatch " + std::to_string(xv.cols()) +
                         " vs " + std::to_string(wv.cols()));
    int L = xv.rows(), C = xv.cols(), K = wv.rows();
    std::vector<int> seg = segments.empty() ? std::vector<int>{0, L} : segments;
    if (seg.front() != 0 || seg.back() != L)
        throw ContractError("conv1d_depthwise: segment offsets must span [0, rows]");
    Tensor out({L, C});
    for (size_t s = 0; s + 1 < seg.size(); ++s) {
        int lo = seg[s], hi = seg[s + 1];
        for (int t = lo; t < hi; ++t)
            for (int i = 0; i < K; ++i) {
                int src = t - (K - 1) + i;  // causal: taps reach back K-1 rows
                if (src < lo) continue;
                for (int c = 0; c < C; ++c) out.at(t, c) += wv.at(i, c) * xv.at(src, c);
            }
    }
    Value in[] = {x, w};
    return tape.record("conv1d_depthwise", std::move(out), in,
                       [x, w, L, C, K, seg](Tape& t, const Tensor& gy) {
                           const Tensor& xv = t.val(x);
                           const Tensor& wv = t.val(w);
                           double* dx = t.grad_data(x);
                           double* dw = t.grad_data(w);
                           for (size_t s = 0; s + 1 < seg.size(); ++s) {
                               int lo = seg[s], hi = seg[s + 1];
                               for (int tt = lo; tt < hi; ++tt)
                                   for (int i = 0; i < K; ++i) {
                                       int src = tt - (K - 1) + i;
                                       if (src < lo) continue;
                                       for (int c = 0; c < C; ++c) {
                                           double g = gy.data[static_cast<int64_t>(tt) * C + c];
                                           if (dw) dw[static_cast<int64_t>(i) * C + c] +=
                                                   g * xv.at(src, c);
                                           if (dx) dx[static_cast<int64_t>(src) * C + c] +=
                                                   g * wv.at(i, c);
                                       }
                                   }
                           }
                       });
}

Value gather_rows(Value x, std::vector<int> idx) {
    Tape& tape = *x.tape;
    const Tensor& xv = tape.val(x);
    if (xv.ndim() != 2) throw ShapeError("gather_rows: expects 2-D input");
    int n = xv.rows(), d = xv.cols();
    for (int i : idx)
        if (i < 0 || i >= n)
            throw ContractError("gather_rows: index " + std::to_string(i) + " out of [0," +
                                std::to_string(n) + ")");
    int m = static_cast<int>(idx.size());
    Tensor out({m, d});
    for (int r = 0; r < m; ++r)
        std::memcpy(out.data.data() + static_cast<int64_t>(r) * d,
                    xv.data.data() + static_cast<int64_t>(idx[r]) * d, sizeof(double) * d);
    Value in[] = {x};
    return tape.record("gather_rows", std::move(out), in,
                       [x, idx = std::move(idx), d](Tape& t, const Tensor& gy) {
                           double* dx = t.grad_data(x);
                           if (!dx) return;
                           for (size_t r = 0; r < idx.size(); ++r)
                               for (int c = 0; c < d; ++c)
                                   dx[static_cast<int64_t>(idx[r]) * d + c] +=
                                       gy.data[r * d + c];
                       });
}

Value scatter_rows(Value x, std::vector<int> idx, int out_rows) {
    Tape& tape = *x.tape;
    const Tensor& xv = tape.val(x);
    if (xv.ndim() != 2) throw ShapeError("scatter_rows: expects 2-D input");
    int m = xv.rows(), d = xv.cols();
    if (static_cast<int>(idx.size()) != m)
        throw ShapeError("scatter_rows: index count " + std::to_string(idx.size()) +
                         " vs rows " + std::to_string(m));
    for (int i : idx)
        if (i < 0 || i >= out_rows)
            throw ContractError("scatter_rows: index " + std::to_string(i) + " out of [0," +
                                std::to_string(out_rows) + ")");
    Tensor out({out_rows, d});
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < d; ++c) out.at(idx[r], c) += xv.at(r, c);
    Value in[] = {x};
    return tape.record("scatter_rows", std::move(out), in,
                       [x, idx = std::move(idx), d](Tape& t, const Tensor& gy) {
                           double* dx = t.grad_data(x);
                           if (!dx) return;
                           for (size_t r = 0; r < idx.size(); ++r)
                               for (int c = 0; c < d; ++c)
                                   dx[r * d + c] += gy.data[static_cast<int64_t>(idx[r]) * d + c];
                       });
}

Value bilinear_sample_2d(Value grid, Value coords) {
    Tape& tape = same_tape(grid, coords);
    const Tensor& g = tape.val(grid);
    const Tensor& q = tape.val(coords);
    if (g.ndim() != 3) throw ShapeError("bilinear_sample_2d: grid must be [H,W,C]");
    if (q.ndim() != 2 || q.cols() != 2) throw ShapeError("bilinear_sample_2d: coords must be [n,2]");
    int H = g.shape[0], W = g.shape[1], C = g.shape[2], n = q.rows();
    if (H < 2 || W < 2) throw ShapeError("bilinear_sample_2d: grid dims must be >= 2");
    Tensor out({n, C});

    auto cell = [H, W](double xn, double yn, int& u0, int& v0, double& fu, double& fv, bool& cx,
                       bool& cy) {
        cx = xn <= -1.0 || xn >= 1.0;
        cy = yn <= -1.0 || yn >= 1.0;
        double x = std::clamp(xn, -1.0, 1.0);
        double y = std::clamp(yn, -1.0, 1.0);
        double u = (x + 1.0) * 0.5 * (W - 1);
        double v = (y + 1.0) * 0.5 * (H - 1);
        u0 = std::min(static_cast<int>(std::floor(u)), W - 2);
        v0 = std::min(static_cast<int>(std::floor(v)), H - 2);
        fu = u - u0;
        fv = v - v0;
    };

    for (int i = 0; i < n; ++i) {
        int u0, v0;
        double fu, fv;
        bool cx, cy;
        cell(q.at(i, 0), q.at(i, 1), u0, v0, fu, fv, cx, cy);
        const double* g00 = &g.data[(static_cast<int64_t>(v0) * W + u0) * C];
        const double* g01 = g00 + C;
        const double* g10 = g00 + static_cast<int64_t>(W) * C;
        const double* g11 = g10 + C;
        for (int c = 0; c < C; ++c)
            out.at(i, c) = (1 - fv) * ((1 - fu) * g00[c] + fu * g01[c]) +
                           fv * ((1 - fu) * g10[c] + fu * g11[c]);
    }
    Value in[] = {grid, coords};
    return tape.record(
        "bilinear_sample_2d", std::move(out), in,
        [grid, coords, H, W, C, n, cell](Tape& t, const Tensor& gy) {
            const Tensor& g = t.val(grid);
            const Tensor& q = t.val(coords);
            double* dg = t.grad_data(grid);
            double* dq = t.grad_data(coords);
            for (int i = 0; i < n; ++i) {
                int u0, v0;
                double fu, fv;
                bool cx, cy;
                cell(q.at(i, 0), q.at(i, 1), u0, v0, fu, fv, cx, cy);
                int64_t o00 = (static_cast<int64_t>(v0) * W + u0) * C;
                int64_t o01 = o00 + C;
                int64_t o10 = o00 + static_cast<int64_t>(W) * C;
                int64_t o11 = o10 + C;
                double dx = 0.0, dy = 0.0;
                for (int c = 0; c < C; ++c) {
                    double gv = gy.data[static_cast<int64_t>(i) * C + c];
                    if (dg) {
                        dg[o00 + c] += gv * (1 - fv) * (1 - fu);
                        dg[o01 + c] += gv * (1 - fv) * fu;
                        dg[o10 + c] += gv * fv * (1 - fu);
                        dg[o11 + c] += gv * fv * fu;
                    }
                    double dfu = (1 - fv) * (g.data[o01 + c] - g.data[o00 + c]) +
                                 fv * (g.data[o11 + c] - g.data[o10 + c]);
                    double dfv = (1 - fu) * (g.data[o10 + c] - g.data[o00 + c]) +
                                 fu * (g.data[o11 + c] - g.data[o01 + c]);
                    dx += gv * dfu;
                    dy += gv * dfv;
                }
                if (dq) {
                    if (!cx) dq[static_cast<int64_t>(i) * 2 + 0] += dx * 0.5 * (W - 1);
                    if (!cy) dq[static_cast<int64_t>(i) * 2 + 1] += dy * 0.5 * (H - 1);
                }
            }
        });
}

// ---- reductions / layout -------------------------------------------------------

Value reduce_sum(Value a) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    double s = 0.0;
    for (double v : x.data) s += v;
    Value in[] = {a};
    return tape.record("reduce_sum", Tensor::scalar(s), in, [a](Tape& t, const Tensor& gy) {
        if (double* da = t.grad_data(a)) {
            double g = gy.data[0];
            const Tensor& x = t.val(a);
            for (int64_t i = 0; i < x.numel(); ++i) da[i] += g;
        }
    });
}

Value reduce_mean(Value a) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    double s = 0.0;
    for (double v : x.data) s += v;
    double inv = 1.0 / static_cast<double>(x.numel());
    Value in[] = {a};
    return tape.record("reduce_mean", Tensor::scalar(s * inv), in,
                       [a, inv](Tape& t, const Tensor& gy) {
                           if (double* da = t.grad_data(a)) {
                               double g = gy.data[0] * inv;
                               const Tensor& x = t.val(a);
                               for (int64_t i = 0; i < x.numel(); ++i) da[i] += g;
                           }
                       });
}

Value concat(std::span<const Value> parts, int dim) {
    if (parts.empty()) throw ContractError("concat: no operands");
    Tape& tape = *parts[0].tape;
    const Tensor& first = tape.val(parts[0]);
    int nd = first.ndim();
    if (dim < 0 || dim >= nd) throw ShapeError("concat: bad dim");
    std::vector<int> oshape = first.shape;
    int64_t outer, axis0, inner;
    axis_blocks(first, dim, outer, axis0, inner);
    int64_t axis_total = 0;
    for (const Value& p : parts) {
        const Tensor& t = tape.val(p);
        if (t.ndim() != nd) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < nd; ++i)
            if (i != dim && t.shape[i] != first.shape[i])
                throw ShapeError("concat: shape mismatch at dim " + std::to_string(i));
        axis_total += t.shape[dim];
    }
    oshape[dim] = static_cast<int>(axis_total);
    Tensor out(oshape);
    int64_t axis_off = 0;
    for (const Value& p : parts) {
        const Tensor& t = tape.val(p);
        int64_t paxis = t.shape[dim];
        for (int64_t o = 0; o < outer; ++o)
            std::memcpy(out.data.data() + (o * axis_total + axis_off) * inner,
                        t.data.data() + o * paxis * inner, sizeof(double) * paxis * inner);
        axis_off += paxis;
    }
    std::vector<Value> inputs(parts.begin(), parts.end());
    std::vector<int64_t> sizes;
    for (const Value& p : parts) sizes.push_back(tape.val(p).shape[dim]);
    return tape.record(
        "concat", std::move(out), inputs,
        [inputs, sizes, outer, inner, axis_total](Tape& t, const Tensor& gy) {
            int64_t axis_off = 0;
            for (size_t p = 0; p < inputs.size(); ++p) {
                int64_t paxis = sizes[p];
                if (double* dp = t.grad_data(inputs[p]))
                    for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < paxis * inner; ++i)
                            dp[o * paxis * inner + i] +=
                                gy.data[(o * axis_total + axis_off) * inner + i];
                axis_off += paxis;
            }
        });
}

Value slice(Value a, int dim, int begin, int end) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    if (dim < 0 || dim >= x.ndim()) throw ShapeError("slice: bad dim");
    if (begin < 0 || end > x.shape[dim] || begin >= end)
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of dim " + std::to_string(x.shape[dim]));
    int64_t outer, axis, inner;
    axis_blocks(x, dim, outer, axis, inner);
    std::vector<int> oshape = x.shape;
    oshape[dim] = end - begin;
    int64_t oaxis = end - begin;
    Tensor out(oshape);
    for (int64_t o = 0; o < outer; ++o)
        std::memcpy(out.data.data() + o * oaxis * inner,
                    x.data.data() + (o * axis + begin) * inner, sizeof(double) * oaxis * inner);
    Value in[] = {a};
    return tape.record("slice", std::move(out), in,
                       [a, outer, axis, inner, begin, oaxis](Tape& t, const Tensor& gy) {
                           if (double* da = t.grad_data(a))
                               for (int64_t o = 0; o < outer; ++o)
                                   for (int64_t i = 0; i < oaxis * inner; ++i)
                                       da[(o * axis + begin) * inner + i] +=
                                           gy.data[o * oaxis * inner + i];
                       });
}

Value reshape(Value a, std::vector<int> new_shape) {
    Tape& tape = *a.tape;
    const Tensor& x = tape.val(a);
    if (Tensor::check_shape(new_shape) != x.numel())
        throw ShapeError("reshape: numel mismatch " + Tensor::shape_str(x.shape) + " -> " +
                         Tensor::shape_str(new_shape));
    Tensor out;
    out.shape = std::move(new_shape);
    out.data = x.data;
    Value in[] = {a};
    return tape.record("reshape", std::move(out), in, [a](Tape& t, const Tensor& gy) {
        if (double* da = t.grad_data(a))
            for (int64_t i = 0; i < gy.numel(); ++i) da[i] += gy.data[i];
    });
}

Value scale_rows(Value x, Value s) {
    Tape& tape = same_tape(x, s);
    const Tensor& xv = tape.val(x);
    const Tensor& sv = tape.val(s);
    if (xv.ndim() != 2 || sv.ndim() != 2 || sv.cols() != 1 || sv.rows() != xv.rows())
        throw ShapeError("scale_rows: x [n,d] and s [n,1] required, got " +
                         Tensor::shape_str(xv.shape) + " and " + Tensor::shape_str(sv.shape));
    int n = xv.rows(), d = xv.cols();
    Tensor out({n, d});
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) out.at(r, c) = xv.at(r, c) * sv.data[r];
    Value in[] = {x, s};
    return tape.record("scale_rows", std::move(out), in, [x, s, n, d](Tape& t, const Tensor& gy) {
        const Tensor& xv = t.val(x);
        const Tensor& sv = t.val(s);
        if (double* dx = t.grad_data(x))
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < d; ++c)
                    dx[static_cast<int64_t>(r) * d + c] +=
                        gy.data[static_cast<int64_t>(r) * d + c] * sv.data[r];
        if (double* ds = t.grad_data(s))
            for (int r = 0; r < n; ++r) {
                double acc = 0.0;
                for (int c = 0; c < d; ++c)
                    acc += gy.data[static_cast<int64_t>(r) * d + c] * xv.at(r, c);
                ds[r] += acc;
            }
    });
}

Value row_l2_norm(Value x) {
    Tape& tape = *x.tape;
    if (tape.val(x).ndim() != 2) throw ShapeError("row_l2_norm: expects 2-D");
    int d = tape.val(x).cols();
    Value sq = mul(x, x);
    Value ones = tape.constant(Tensor({d, 1}, 1.0));
    return vsqrt(matmul(sq, ones));
}

}  // namespace hmr
