#include "hmr/ssm.hpp"

#include <cmath>
#include <memory>

namespace hmr {

DiscreteSsm discretize_zoh(const SsmParams& p) {
    if (!(p.delta > 0.0)) throw ContractError("discretize_zoh: delta must be > 0");
    if (p.A.size() != p.B.size())
        throw ShapeError("discretize_zoh: A size " + std::to_string(p.A.size()) + " vs B size " +
                         std::to_string(p.B.size()));
    DiscreteSsm d;
    d.A_bar.resize(p.A.size());
    d.B_bar.resize(p.A.size());
    for (size_t i = 0; i < p.A.size(); ++i) {
        if (!std::isfinite(p.A[i])) throw NumericError("discretize_zoh: non-finite A entry");
        double z = p.delta * p.A[i];
        d.A_bar[i] = std::exp(z);
        d.B_bar[i] = p.delta * expm1_over(z) * p.B[i];
    }
    return d;
}

std::vector<double> scan_recurrent(const DiscreteSsm& d, const std::vector<double>& C,
                                   const std::vector<double>& x) {
    size_t n = d.A_bar.size();
    if (d.B_bar.size() != n || C.size() != n)
        throw ShapeError("scan_recurrent: A_bar/B_bar/C size mismatch");
    if (x.empty()) throw ContractError("scan_recurrent: empty sequence");
    std::vector<double> h(n, 0.0), y(x.size());
    for (size_t t = 0; t < x.size(); ++t) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            h[i] = d.A_bar[i] * h[i] + d.B_bar[i] * x[t];
            acc += C[i] * h[i];
        }
        y[t] = acc;
    }
    return y;
}

std::vector<double> build_conv_kernel(const DiscreteSsm& d, const std::vector<double>& C, int L) {
    size_t n = d.A_bar.size();
    if (d.B_bar.size() != n || C.size() != n)
        throw ShapeError("build_conv_kernel: A_bar/B_bar/C size mismatch");
    if (L < 1) throw ContractError("build_conv_kernel: L must be >= 1");
    std::vector<double> pw(d.B_bar), k(L);
    for (int t = 0; t < L; ++t) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) acc += C[i] * pw[i];
        k[t] = acc;
        for (size_t i = 0; i < n; ++i) pw[i] *= d.A_bar[i];
    }
    return k;
}

std::vector<double> scan_convolutional(const std::vector<double>& kernel,
                                       const std::vector<double>& x) {
    if (kernel.size() != x.size())
        throw ContractError("scan_convolutional: kernel length " + std::to_string(kernel.size()) +
                            " vs sequence length " + std::to_string(x.size()));
    std::vector<double> y(x.size(), 0.0);
    for (size_t t = 0; t < x.size(); ++t)
        for (size_t k = 0; k <= t; ++k) y[t] += kernel[k] * x[t - k];
    return y;
}

Value selective_scan(Value x, Value dt, Value A, Value B, Value C,
                     const std::vector<int>& segments) {
    Tape& tape = *x.tape;
    const Tensor& xv = tape.val(x);
    const Tensor& dtv = tape.val(dt);
    const Tensor& Av = tape.val(A);
    const Tensor& Bv = tape.val(B);
    const Tensor& Cv = tape.val(C);
    if (xv.ndim() != 2 || dtv.ndim() != 2 || Av.ndim() != 2 || Bv.ndim() != 2 || Cv.ndim() != 2)
        throw ShapeError("selective_scan: all operands must be 2-D");
    int L = xv.rows(), D = xv.cols(), N = Av.cols();
    if (dtv.rows() != L || dtv.cols() != D)
        throw ShapeError("selective_scan: dt " + Tensor::shape_str(dtv.shape) + " vs x " +
                         Tensor::shape_str(xv.shape));
    if (Av.rows() != D) throw ShapeError("selective_scan: A rows " + std::to_string(Av.rows()) +
                                         " vs channels " + std::to_string(D));
    if (Bv.rows() != L || Bv.cols() != N || Cv.rows() != L || Cv.cols() != N)
        throw ShapeError("selective_scan: B/C must be [L,N]");
    for (double v : dtv.data)
        if (!(v > 0.0)) throw ContractError("selective_scan: dt must be positive everywhere");

    std::vector<int> seg = segments.empty() ? std::vector<int>{0, L} : segments;
    if (seg.front() != 0 || seg.back() != L)
        throw ContractError("selective_scan: segment offsets must span [0, rows]");

    // h states for every t, needed by the backward sweep
    auto H = std::make_shared<std::vector<double>>(static_cast<size_t>(L) * D * N, 0.0);
    Tensor out({L, D});
    for (size_t s = 0; s + 1 < seg.size(); ++s) {
        int lo = seg[s], hi = seg[s + 1];
        for (int t = lo; t < hi; ++t) {
            const double* hprev = (t > lo) ? H->data() + static_cast<size_t>(t - 1) * D * N : nullptr;
            double* h = H->data() + static_cast<size_t>(t) * D * N;
            for (int d = 0; d < D; ++d) {
                double dtd = dtv.at(t, d);
                double xtd = xv.at(t, d);
                double acc = 0.0;
                for (int n = 0; n < N; ++n) {
                    double z = dtd * Av.at(d, n);
                    double abar = std::exp(z);
                    double bbar = dtd * expm1_over(z) * Bv.at(t, n);
                    double hn = bbar * xtd;
                    if (hprev) hn += abar * hprev[d * N + n];
                    h[d * N + n] = hn;
                    acc += Cv.at(t, n) * hn;
                }
                out.at(t, d) = acc;
            }
        }
    }

    Value in[] = {x, dt, A, B, C};
    return tape.record(
        "selective_scan", std::move(out), in,
        [x, dt, A, B, C, H, seg, L, D, N](Tape& t_, const Tensor& gy) {
            const Tensor& xv = t_.val(x);
            const Tensor& dtv = t_.val(dt);
            const Tensor& Av = t_.val(A);
            const Tensor& Bv = t_.val(B);
            const Tensor& Cv = t_.val(C);
            double* dx = t_.grad_data(x);
            double* ddt = t_.grad_data(dt);
            double* dA = t_.grad_data(A);
            double* dB = t_.grad_data(B);
            double* dC = t_.grad_data(C);
            std::vector<double> lam(static_cast<size_t>(D) * N);
            for (size_t s = seg.size() - 1; s-- > 0;) {
                int lo = seg[s], hi = seg[s + 1];
                std::fill(lam.begin(), lam.end(), 0.0);
                for (int t = hi - 1; t >= lo; --t) {
                    const double* h = H->data() + static_cast<size_t>(t) * D * N;
                    const double* hprev =
                        (t > lo) ? H->data() + static_cast<size_t>(t - 1) * D * N : nullptr;
                    for (int d = 0; d < D; ++d) {
                        double g = gy.data[static_cast<size_t>(t) * D + d];
                        double dtd = dtv.at(t, d);
                        double xtd = xv.at(t, d);
                        double dxtd = 0.0, ddtd = 0.0;
                        for (int n = 0; n < N; ++n) {
                            double l = lam[d * N + n] + g * Cv.at(t, n);
                            if (dC) dC[static_cast<size_t>(t) * N + n] += g * h[d * N + n];
                            double a = Av.at(d, n);
                            double z = dtd * a;
                            double e = std::exp(z);
                            double psi = expm1_over(z);
                            double bn = Bv.at(t, n);
                            double bbar = dtd * psi * bn;
                            double hp = hprev ? hprev[d * N + n] : 0.0;
                            double dabar = l * hp;
                            double dbbar = l * xtd;
                            dxtd += l * bbar;
                            if (dB) dB[static_cast<size_t>(t) * N + n] += dbbar * dtd * psi;
                            // dA_bar/d(dt) = a e^z, dB_bar/d(dt) = bn e^z
                            ddtd += dabar * a * e + dbbar * bn * e;
                            // dA_bar/da = dt e^z, dB_bar/da = bn dt^2 psi'(z)
                            if (dA)
                                dA[static_cast<size_t>(d) * N + n] +=
                                    dabar * dtd * e + dbbar * bn * dtd * dtd * expm1_over_deriv(z);
                            lam[d * N + n] = l * e;
                        }
                        if (dx) dx[static_cast<size_t>(t) * D + d] += dxtd;
                        if (ddt) ddt[static_cast<size_t>(t) * D + d] += ddtd;
                    }
                }
            }
        });
}

}  // namespace hmr
